//! Restarted Lanczos iteration for a few extreme eigenpairs of a large
//! symmetric matrix.
//!
//! The iteration works on a block Krylov space so that repeated eigenvalues
//! (the connection Laplacian of an SO(2) graph has only even multiplicities)
//! are resolved. The basis is kept fully orthogonal (two passes of classical
//! Gram–Schmidt), the projected matrix is formed explicitly from the stored
//! products `A·V`, and each restart keeps the wanted Ritz vectors plus a few
//! guard vectors (thick restart).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::rng::stream;

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Residual target relative to the spectral-norm estimate.
    pub rel_tol: f64,
    /// Basis size per cycle; `None` picks `max(2k + 20, 4b + 20, 40)`.
    pub basis: Option<usize>,
    /// Block size; `None` uses `k`. Eigenvalues of multiplicity above the
    /// block size may be missed.
    pub block: Option<usize>,
    pub max_restarts: usize,
    pub seed: u64,
    /// Optional warm-start block; its columns seed the first basis.
    pub start: Option<DMatrix<f64>>,
    /// When set, a Ritz pair with value `θ ≥ t` counts as converged once its
    /// residual is below `θ − t`, which only certifies that an eigenvalue
    /// lies above `t`. Pairs below `t` still need the full tolerance.
    pub certify_above: Option<f64>,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            basis: None,
            block: None,
            max_restarts: 500,
            seed: 0x5EED,
            start: None,
            certify_above: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub max_residual: f64,
    pub norm_estimate: f64,
    pub matvecs: usize,
}

fn orthogonalize(w: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for v in basis {
            let c = v.dot(w);
            w.axpy(-c, v, 1.0);
        }
    }
}

/// The `k` algebraically smallest eigenpairs of the symmetric matrix `a`.
pub fn lanczos_smallest(a: &DMatrix<f64>, k: usize, opts: &LanczosOptions) -> Result<LanczosResult> {
    let n = a.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let b = opts.block.unwrap_or(k).clamp(1, n);
    let m = opts
        .basis
        .unwrap_or((2 * k + 20).max(4 * b + 20).max(40))
        .max(k + b)
        .min(n);
    let keep = (k + (m - k) / 2).min(m.saturating_sub(b)).max(k.min(m));
    let mut rng = stream(opts.seed);

    let random_unit = |rng: &mut crate::rng::Stream, basis: &[DVector<f64>]| -> Option<DVector<f64>> {
        for _ in 0..8 {
            let mut w = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            orthogonalize(&mut w, basis);
            let norm = w.norm();
            if norm > 1e-8 {
                return Some(w / norm);
            }
        }
        None
    };

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut images: Vec<DVector<f64>> = Vec::with_capacity(m);
    if let Some(start) = &opts.start {
        if start.nrows() != n {
            return Err(Error::ShapeMismatch(format!(
                "start block has {} rows, matrix has {n}",
                start.nrows()
            )));
        }
        for col in start.column_iter() {
            if basis.len() + 1 >= m {
                break;
            }
            let mut w = col.clone_owned();
            orthogonalize(&mut w, &basis);
            let norm = w.norm();
            if norm > 1e-8 {
                basis.push(w / norm);
            }
        }
    }
    while basis.len() < b {
        match random_unit(&mut rng, &basis) {
            Some(v) => basis.push(v),
            None => break,
        }
    }
    let mut matvecs = 0usize;
    let mut norm_estimate = 0.0f64;
    let mut last_residual = f64::INFINITY;

    for restart in 0..=opts.max_restarts {
        // Extend the basis to m vectors, computing A·v for each.
        while images.len() < basis.len() || basis.len() < m {
            if images.len() < basis.len() {
                let v = &basis[images.len()];
                images.push(a * v);
                matvecs += 1;
                continue;
            }
            let mut w = images[basis.len() - b.min(basis.len())].clone();
            orthogonalize(&mut w, &basis);
            let norm = w.norm();
            let next = if norm > 1e-10 * norm_estimate.max(1e-300) {
                w / norm
            } else {
                match random_unit(&mut rng, &basis) {
                    Some(v) => v,
                    None => break,
                }
            };
            basis.push(next);
        }
        let dim = basis.len();
        let v = DMatrix::from_columns(&basis);
        let av = DMatrix::from_columns(&images);
        let mut projected = v.transpose() * &av;
        crate::linalg::symmetrize(&mut projected);
        let (theta, s) = sym_eigen(&projected)?;
        norm_estimate = norm_estimate.max(theta[0].abs()).max(theta[dim - 1].abs());

        let wanted = k.min(dim);
        let ritz = &v * s.columns(0, keep.min(dim));
        let ritz_images = &av * s.columns(0, keep.min(dim));
        let mut worst = 0.0f64;
        let mut first_bad = None;
        for c in 0..wanted {
            let r = ritz_images.column(c) - ritz.column(c) * theta[c];
            let rn = r.norm();
            let tol = match opts.certify_above {
                Some(t) if theta[c] >= t => (theta[c] - t).max(opts.rel_tol * norm_estimate),
                _ => opts.rel_tol * norm_estimate,
            };
            if rn > tol && first_bad.is_none() {
                first_bad = Some(c);
            }
            if opts.certify_above.is_none_or(|t| theta[c] < t) {
                worst = worst.max(rn);
            }
        }
        last_residual = worst;
        if first_bad.is_none() || dim == n {
            return Ok(LanczosResult {
                values: theta.iter().take(wanted).copied().collect(),
                vectors: ritz.columns(0, wanted).clone_owned(),
                max_residual: worst,
                norm_estimate,
                matvecs,
            });
        }
        if restart == opts.max_restarts {
            break;
        }
        // Thick restart: keep the leading Ritz vectors and continue from the
        // residuals of the first unconverged pairs.
        let bad = first_bad.expect("unconverged pair");
        let kept = keep.min(dim);
        basis = (0..kept).map(|c| ritz.column(c).clone_owned()).collect();
        images = (0..kept).map(|c| ritz_images.column(c).clone_owned()).collect();
        for c in bad..(bad + b).min(kept) {
            if basis.len() >= kept + b {
                break;
            }
            let mut residual = ritz_images.column(c) - ritz.column(c) * theta[c];
            orthogonalize(&mut residual, &basis);
            let rn = residual.norm();
            if rn > 1e-12 * norm_estimate {
                basis.push(residual / rn);
            }
        }
        while basis.len() < (kept + b).min(n) {
            match random_unit(&mut rng, &basis) {
                Some(v) => basis.push(v),
                None if basis.len() > kept => break,
                None => {
                    return Err(Error::EigenNotConverged {
                        residual: worst,
                        iterations: matvecs,
                    })
                }
            }
        }
    }
    Err(Error::EigenNotConverged {
        residual: last_residual,
        iterations: matvecs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix() {
        let a = DMatrix::from_diagonal(&DVector::from_fn(300, |i, _| (i + 1) as f64));
        let res = lanczos_smallest(&a, 3, &LanczosOptions::default()).unwrap();
        for (i, v) in res.values.iter().enumerate() {
            assert!((v - (i + 1) as f64).abs() < 1e-8, "{v}");
        }
        assert!(res.max_residual <= 1e-8 * res.norm_estimate);
    }

    #[test]
    fn matches_dense_on_random_symmetric() {
        let mut rng = stream(21);
        let n = 120;
        let b = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let a = &b + b.transpose();
        let (vals, _) = sym_eigen(&a).unwrap();
        let res = lanczos_smallest(&a, 5, &LanczosOptions::default()).unwrap();
        for i in 0..5 {
            assert!((res.values[i] - vals[i]).abs() < 1e-7 * vals.amax(), "{i}");
        }
        let gram = res.vectors.transpose() * &res.vectors;
        assert!((gram - DMatrix::<f64>::identity(5, 5)).amax() < 1e-10);
    }

    #[test]
    fn repeated_eigenvalues_are_all_found() {
        let a = DMatrix::from_diagonal(&DVector::from_fn(400, |i, _| (i / 2 + 1) as f64));
        let res = lanczos_smallest(&a, 4, &LanczosOptions::default()).unwrap();
        for (got, want) in res.values.iter().zip([1.0, 1.0, 2.0, 2.0]) {
            assert!((got - want).abs() < 1e-8, "{:?}", res.values);
        }
        let triple = DMatrix::from_diagonal(&DVector::from_fn(
            300,
            |i, _| if i < 3 { 0.0 } else { 1.0 + i as f64 },
        ));
        let res = lanczos_smallest(&triple, 3, &LanczosOptions::default()).unwrap();
        assert!(res.values.iter().all(|v| v.abs() < 1e-8), "{:?}", res.values);
    }

    #[test]
    fn rejects_bad_count() {
        let a = DMatrix::<f64>::identity(4, 4);
        assert!(lanczos_smallest(&a, 0, &LanczosOptions::default()).is_err());
        assert!(lanczos_smallest(&a, 5, &LanczosOptions::default()).is_err());
    }
}
