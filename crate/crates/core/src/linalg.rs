//! Dense linear-algebra helpers shared by the solvers.
//!
//! Large symmetric eigenproblems go through `faer`; everything else is
//! `nalgebra`. Block matrices are stored as plain `nd × nd` matrices and the
//! `d × d` block `(i, j)` starts at row `i·d`, column `j·d`.

use faer::{MatRef, Side};
use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};

use crate::error::{Error, Result};

pub fn block(m: &DMatrix<f64>, d: usize, i: usize, j: usize) -> DMatrixView<'_, f64> {
    m.view((i * d, j * d), (d, d))
}

pub fn block_mut(m: &mut DMatrix<f64>, d: usize, i: usize, j: usize) -> DMatrixViewMut<'_, f64> {
    m.view_mut((i * d, j * d), (d, d))
}

/// Largest absolute deviation from symmetry.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Replaces `m` by `(m + mᵀ)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let n = m.nrows();
    let view = MatRef::from_column_major_slice(m.as_slice(), n, n);
    let evd = view
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = DVector::from_fn(n, |i, _| s[i]);
    let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok((values, vectors))
}

/// Eigenvalues only, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    let view = MatRef::from_column_major_slice(m.as_slice(), n, n);
    view.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// `V · diag(λ) · Vᵀ` restricted to the columns in `cols`.
pub fn low_rank(values: &DVector<f64>, vectors: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let n = vectors.nrows();
    let mut scaled = DMatrix::zeros(n, cols.len());
    let mut basis = DMatrix::zeros(n, cols.len());
    for (k, &c) in cols.iter().enumerate() {
        basis.set_column(k, &vectors.column(c));
        scaled.set_column(k, &(vectors.column(c) * values[c]));
    }
    scaled * basis.transpose()
}

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
pub fn sym_norm2(m: &DMatrix<f64>) -> Result<f64> {
    let vals = sym_eigenvalues(m)?;
    Ok(vals
        .first()
        .map(|v| v.abs())
        .unwrap_or(0.0)
        .max(vals.last().map(|v| v.abs()).unwrap_or(0.0)))
}

/// Semidefinite Cholesky factorization with diagonal pivoting.
///
/// Returns `B` (n × r) with `B Bᵀ = M` up to the truncation tolerance, where
/// `r` is the numerical rank: the factorization stops once every remaining
/// pivot is below `rel_tol · max(diag M)`. A remaining pivot more negative
/// than `-neg_tol · max(diag M)` is reported as a failure.
pub fn pivoted_cholesky(m: &DMatrix<f64>, rel_tol: f64, neg_tol: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::NotSquare {
            rows: n,
            cols: m.ncols(),
        });
    }
    let scale = (0..n).map(|i| m[(i, i)]).fold(0.0f64, f64::max);
    if scale <= 0.0 {
        return Err(Error::Cholesky {
            column: 0,
            pivot: scale,
        });
    }
    let mut diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let mut factor: Vec<DVector<f64>> = Vec::new();
    let mut used = vec![false; n];
    for k in 0..n {
        let (piv, &pval) = diag
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("unused pivot");
        if pval <= rel_tol * scale {
            let min_rest = diag
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .map(|(_, v)| *v)
                .fold(f64::INFINITY, f64::min);
            if min_rest < -neg_tol * scale {
                return Err(Error::Cholesky {
                    column: k,
                    pivot: min_rest,
                });
            }
            break;
        }
        used[piv] = true;
        let root = pval.sqrt();
        let mut col = m.column(piv).clone_owned();
        for prev in &factor {
            let c = prev[piv];
            col.axpy(-c, prev, 1.0);
        }
        col /= root;
        for i in 0..n {
            if used[i] && i != piv {
                col[i] = 0.0;
            }
        }
        col[piv] = root;
        for i in 0..n {
            if !used[i] {
                diag[i] -= col[i] * col[i];
            }
        }
        factor.push(col);
    }
    let r = factor.len();
    Ok(DMatrix::from_fn(n, r, |i, j| factor[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal_is_sorted() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let (vals, vecs) = sym_eigen(&m).unwrap();
        assert_eq!(vals.as_slice(), &[-1.0, 2.0, 3.0]);
        assert!((vecs.column(0).abs()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pivoted_cholesky_reconstructs_low_rank() {
        let a = DMatrix::from_fn(6, 2, |i, j| ((i + 1) as f64).powi(j as i32 + 1).sin());
        let m = &a * a.transpose();
        let b = pivoted_cholesky(&m, 1e-12, 1e-8).unwrap();
        assert_eq!(b.ncols(), 2);
        assert!((&b * b.transpose() - &m).norm() < 1e-12 * m.norm());
    }

    #[test]
    fn pivoted_cholesky_full_rank() {
        let a = DMatrix::from_fn(5, 5, |i, j| if i == j { 3.0 } else { 0.5 / (1 + i + j) as f64 });
        let m = &a * a.transpose();
        let b = pivoted_cholesky(&m, 1e-14, 1e-8).unwrap();
        assert_eq!(b.ncols(), 5);
        assert!((&b * b.transpose() - &m).norm() < 1e-12 * m.norm());
    }

    #[test]
    fn pivoted_cholesky_rejects_indefinite() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5]));
        assert!(pivoted_cholesky(&m, 1e-12, 1e-8).is_err());
    }
}
