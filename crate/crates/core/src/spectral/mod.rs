//! Graph connection Laplacian, the symmetric eigensolver contract, and the
//! spectral (EIG) synchronization baseline.

mod lanczos;

pub use lanczos::{lanczos_smallest, LanczosOptions, LanczosResult};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::evaluate::{frame_to_rotations, Method, RotationEstimate, Rounding};
use crate::linalg::{asymmetry, sym_eigen};
use crate::measurements::MeasurementGraph;

/// Matrices up to this order are decomposed densely; larger ones go
/// through restarted Lanczos.
pub const DENSE_THRESHOLD: usize = 2000;

/// `L₁ = D₁ − W₁` with unit edge weights: `d_i·I` diagonal blocks and
/// `−R_ij` off-diagonal blocks on edges.
#[derive(Debug, Clone)]
pub struct ConnectionLaplacian {
    pub n: usize,
    pub d: usize,
    pub matrix: DMatrix<f64>,
    pub degrees: Vec<f64>,
}

pub fn build_connection_laplacian(g: &MeasurementGraph) -> Result<ConnectionLaplacian> {
    if g.edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let (n, d) = (g.n, g.d);
    let degrees: Vec<f64> = g.degrees().into_iter().map(|k| k as f64).collect();
    let mut matrix = DMatrix::zeros(n * d, n * d);
    for (i, &deg) in degrees.iter().enumerate() {
        for a in 0..d {
            matrix[(i * d + a, i * d + a)] = deg;
        }
    }
    for e in &g.edges {
        let r = e.ratio.matrix();
        matrix.view_mut((e.i * d, e.j * d), (d, d)).copy_from(&(-r));
        matrix
            .view_mut((e.j * d, e.i * d), (d, d))
            .copy_from(&(-r.transpose()));
    }
    Ok(ConnectionLaplacian {
        n,
        d,
        matrix,
        degrees,
    })
}

impl ConnectionLaplacian {
    /// `I − D₁^{-1/2} W₁ D₁^{-1/2}`; isolated vertices keep a zero block.
    pub fn normalized(&self) -> DMatrix<f64> {
        let d = self.d;
        let scale: Vec<f64> = self
            .degrees
            .iter()
            .flat_map(|&k| std::iter::repeat_n(if k > 0.0 { 1.0 / k.sqrt() } else { 0.0 }, d))
            .collect();
        DMatrix::from_fn(self.matrix.nrows(), self.matrix.ncols(), |r, c| {
            self.matrix[(r, c)] * scale[r] * scale[c]
        })
    }
}

/// Which eigensolver produced an [`Eigenpairs`] value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal columns, one per value.
    pub vectors: DMatrix<f64>,
    pub backend: Backend,
}

impl Eigenpairs {
    /// Largest `‖A v − λ v‖` over the returned pairs.
    pub fn max_residual(&self, a: &DMatrix<f64>) -> f64 {
        (0..self.values.len())
            .map(|c| (a * self.vectors.column(c) - self.vectors.column(c) * self.values[c]).norm())
            .fold(0.0, f64::max)
    }
}

fn check_symmetric(l: &DMatrix<f64>) -> Result<()> {
    if l.nrows() != l.ncols() {
        return Err(Error::NotSquare {
            rows: l.nrows(),
            cols: l.ncols(),
        });
    }
    let scale = l.amax().max(1.0);
    let asym = asymmetry(l);
    if asym > 1e-10 * scale {
        return Err(Error::InvalidParameter(format!(
            "matrix is not symmetric (max deviation {asym:.3e})"
        )));
    }
    Ok(())
}

/// The `k` algebraically smallest eigenpairs of a symmetric matrix, dense
/// for order ≤ [`DENSE_THRESHOLD`] and Lanczos above.
pub fn smallest_eigenvectors(l: &DMatrix<f64>, k: usize) -> Result<Eigenpairs> {
    let backend = if l.nrows() <= DENSE_THRESHOLD {
        Backend::Dense
    } else {
        Backend::Lanczos
    };
    smallest_eigenvectors_with(l, k, backend)
}

pub fn smallest_eigenvectors_with(l: &DMatrix<f64>, k: usize, backend: Backend) -> Result<Eigenpairs> {
    check_symmetric(l)?;
    if k > l.nrows() {
        return Err(Error::InvalidParameter(format!(
            "requested {k} eigenpairs of a {}x{} matrix",
            l.nrows(),
            l.nrows()
        )));
    }
    match backend {
        Backend::Dense => {
            let (values, vectors) = sym_eigen(l)?;
            Ok(Eigenpairs {
                values: values.iter().take(k).copied().collect(),
                vectors: vectors.columns(0, k).clone_owned(),
                backend,
            })
        }
        Backend::Lanczos => {
            let res = lanczos_smallest(l, k, &LanczosOptions::default())?;
            Ok(Eigenpairs {
                values: res.values,
                vectors: res.vectors,
                backend,
            })
        }
    }
}

/// The `k` algebraically largest eigenpairs, in descending order.
pub fn largest_eigenvectors(a: &DMatrix<f64>, k: usize) -> Result<Eigenpairs> {
    let neg = -a;
    let mut pairs = smallest_eigenvectors(&neg, k)?;
    for v in pairs.values.iter_mut() {
        *v = -*v;
    }
    Ok(pairs)
}

/// Spectral synchronization: the `d` smallest eigenvectors of `L₁`, split
/// into `d × d` blocks and rounded to SO(d).
pub fn solve_eig(g: &MeasurementGraph) -> Result<RotationEstimate> {
    let components = g.component_count();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    let lap = build_connection_laplacian(g)?;
    let pairs = smallest_eigenvectors(&lap.matrix, g.d)?;
    let (rotations, degenerate_blocks) = frame_to_rotations(&pairs.vectors, g.d)?;
    Ok(RotationEstimate {
        rotations,
        source: Method::Eig,
        rounding: Rounding::Deterministic,
        degenerate_blocks,
        small_gap: false,
    })
}

/// Eigenvalues of `L₁`, ascending (diagnostics).
pub fn laplacian_spectrum(lap: &ConnectionLaplacian) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(crate::linalg::sym_eigenvalues(&lap.matrix)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::mse;
    use crate::measurements::GraphModel;
    use crate::rng::stream;
    use crate::so_group::{sample_haar, Rotation};
    use rand::Rng;

    #[test]
    fn two_vertex_laplacian() {
        let g = MeasurementGraph::from_edges(
            2,
            3,
            vec![crate::measurements::Edge {
                i: 0,
                j: 1,
                ratio: Rotation::identity(3),
            }],
        )
        .unwrap();
        let lap = build_connection_laplacian(&g).unwrap();
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert_eq!(lap.matrix.view((0, 0), (3, 3)), i3);
        assert_eq!(lap.matrix.view((0, 3), (3, 3)), -&i3);
        let pairs = smallest_eigenvectors(&lap.matrix, 6).unwrap();
        for (k, v) in pairs.values.iter().enumerate() {
            let expected = if k < 3 { 0.0 } else { 2.0 };
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_kernel_contains_truth() {
        let g = GraphModel::complete(15, 3, 1.0).generate(2).unwrap();
        let lap = build_connection_laplacian(&g).unwrap();
        let truth = g.truth.as_ref().unwrap();
        let stacked = DMatrix::from_fn(15 * 3, 3, |r, c| truth[r / 3].matrix()[(c, r % 3)]);
        let norm = crate::linalg::sym_norm2(&lap.matrix).unwrap();
        assert!((&lap.matrix * stacked).norm() <= 1e-10 * norm);
        let vals = laplacian_spectrum(&lap).unwrap();
        assert!(vals[0] >= -1e-8 * norm);
        assert!(vals[2] <= 1e-8 * norm);
    }

    #[test]
    fn laplacian_is_psd_on_noisy_graphs() {
        for seed in 0..3 {
            let g = GraphModel::complete(30, 2, 0.4)
                .with_p1(0.5)
                .generate(seed)
                .unwrap();
            let lap = build_connection_laplacian(&g).unwrap();
            assert_eq!(asymmetry(&lap.matrix), 0.0);
            let vals = laplacian_spectrum(&lap).unwrap();
            let norm = vals[vals.len() - 1].abs().max(vals[0].abs());
            assert!(vals[0] >= -1e-8 * norm);
        }
    }

    #[test]
    fn normalized_laplacian_has_unit_diagonal() {
        let g = GraphModel::complete(10, 2, 0.7).with_p1(0.6).generate(3).unwrap();
        let lap = build_connection_laplacian(&g).unwrap();
        let norm = lap.normalized();
        for (i, &k) in lap.degrees.iter().enumerate() {
            if k > 0.0 {
                assert!((norm[(2 * i, 2 * i)] - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn empty_and_disconnected_graphs() {
        let g = MeasurementGraph::from_edges(3, 2, vec![]).unwrap();
        assert!(matches!(build_connection_laplacian(&g), Err(Error::EmptyGraph)));
        let g = MeasurementGraph::from_edges(
            4,
            2,
            vec![crate::measurements::Edge {
                i: 0,
                j: 1,
                ratio: Rotation::identity(2),
            }],
        )
        .unwrap();
        assert!(matches!(
            solve_eig(&g),
            Err(Error::Disconnected { components: 3 })
        ));
    }

    #[test]
    fn diagonal_smallest_pairs() {
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 5.0, 2.0, 4.0]));
        let pairs = smallest_eigenvectors(&l, 2).unwrap();
        assert_eq!(pairs.values, vec![1.0, 2.0]);
        assert!((pairs.vectors[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((pairs.vectors[(3, 1)].abs() - 1.0).abs() < 1e-15);
        assert!(smallest_eigenvectors(&l, 6).is_err());
        let mut asym = l.clone();
        asym[(0, 1)] = 1e-3;
        assert!(smallest_eigenvectors(&asym, 1).is_err());
    }

    #[test]
    fn dense_and_lanczos_agree_with_full_spectrum() {
        let mut rng = stream(31);
        let n = 40;
        let b = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &b + b.transpose();
        let (all, _) = sym_eigen(&a).unwrap();
        for backend in [Backend::Dense, Backend::Lanczos] {
            let pairs = smallest_eigenvectors_with(&a, 6, backend).unwrap();
            let norm = all[0].abs().max(all[n - 1].abs());
            for k in 0..6 {
                assert!((pairs.values[k] - all[k]).abs() < 1e-8 * norm, "{backend:?} {k}");
            }
            assert!(pairs.max_residual(&a) <= 1e-8 * norm);
            let gram = pairs.vectors.transpose() * &pairs.vectors;
            assert!((gram - DMatrix::<f64>::identity(6, 6)).amax() < 1e-10);
        }
    }

    #[test]
    fn eig_recovers_noiseless_rotations() {
        let g = GraphModel::complete(20, 3, 1.0).generate(4).unwrap();
        let est = solve_eig(&g).unwrap();
        let res = mse(&est.rotations, g.truth.as_ref().unwrap()).unwrap();
        assert!(res.mse <= 1e-10, "{}", res.mse);
    }

    #[test]
    fn eig_mse_is_gauge_invariant() {
        let mut rng = stream(5);
        let g = GraphModel::complete(30, 3, 0.6).generate(6).unwrap();
        let o = sample_haar(3, &mut rng).unwrap();
        let rotated = g.with_gauge(&o).unwrap();
        let a = mse(&solve_eig(&g).unwrap().rotations, g.truth.as_ref().unwrap()).unwrap();
        let b = mse(
            &solve_eig(&rotated).unwrap().rotations,
            rotated.truth.as_ref().unwrap(),
        )
        .unwrap();
        assert!((a.mse - b.mse).abs() < 1e-8);
    }

    #[test]
    fn eig_is_permutation_equivariant() {
        let g = GraphModel::complete(25, 2, 0.6).generate(7).unwrap();
        let perm: Vec<usize> = (0..25).map(|v| (v * 7 + 3) % 25).collect();
        let h = g.permuted(&perm).unwrap();
        let a = mse(&solve_eig(&g).unwrap().rotations, g.truth.as_ref().unwrap()).unwrap();
        let b = mse(&solve_eig(&h).unwrap().rotations, h.truth.as_ref().unwrap()).unwrap();
        assert!((a.mse - b.mse).abs() < 1e-8);
    }
}
