//! Rounding Gram matrices to rotations and scoring estimates against truth.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;

use crate::adm::GramMatrix;
use crate::error::{Error, Result};
use crate::linalg::{pivoted_cholesky, sym_eigen};
use crate::so_group::{project_to_rotation, sample_stiefel, Rotation};
use crate::spectral::largest_eigenvectors;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Eig,
    Sdp,
    Lud,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Eig, Method::Sdp, Method::Lud];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Eig => "eig",
            Method::Sdp => "sdp",
            Method::Lud => "lud",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eig" => Ok(Method::Eig),
            "sdp" => Ok(Method::Sdp),
            "lud" => Ok(Method::Lud),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rounding {
    Deterministic,
    Random,
}

impl Rounding {
    pub fn as_str(self) -> &'static str {
        match self {
            Rounding::Deterministic => "deterministic",
            Rounding::Random => "random",
        }
    }
}

impl fmt::Display for Rounding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Rounding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "deterministic" | "det" => Ok(Rounding::Deterministic),
            "random" | "rand" => Ok(Rounding::Random),
            other => Err(Error::InvalidParameter(format!("unknown rounding `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RotationEstimate {
    pub rotations: Vec<Rotation>,
    pub source: Method,
    pub rounding: Rounding,
    /// Vertices whose frame block was rank deficient or had a tied smallest
    /// singular pair; their rotation is still valid but not unique.
    pub degenerate_blocks: Vec<usize>,
    /// The d-th and (d+1)-th eigenvalues of the rounded matrix nearly tie.
    pub small_gap: bool,
}

#[derive(Debug, Clone)]
pub struct EvalResult {
    pub mse: f64,
    pub re: Option<f64>,
    pub registration: Rotation,
}

/// Splits an `nd × d` frame into blocks `T_i ≈ R_iᵀ` and projects each onto
/// SO(d), returning `R̂_i = proj(T_i)ᵀ`.
///
/// A frame whose column span is orientation reversing (`Σ det T_i < 0`) has
/// its last column negated first; eigenvector bases carry an arbitrary sign.
/// Zero blocks fall back to the identity and are reported as degenerate.
pub fn frame_to_rotations(frame: &DMatrix<f64>, d: usize) -> Result<(Vec<Rotation>, Vec<usize>)> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if frame.ncols() != d || !frame.nrows().is_multiple_of(d) || frame.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "frame of shape {}x{} does not split into {d}x{d} blocks",
            frame.nrows(),
            frame.ncols()
        )));
    }
    let n = frame.nrows() / d;
    let mut frame = frame.clone();
    let det_sum: f64 = (0..n)
        .map(|i| frame.view((i * d, 0), (d, d)).clone_owned().determinant())
        .sum();
    if det_sum < 0.0 {
        frame.column_mut(d - 1).neg_mut();
    }
    let mut rotations = Vec::with_capacity(n);
    let mut degenerate = Vec::new();
    for i in 0..n {
        let t = frame.view((i * d, 0), (d, d)).clone_owned();
        match project_to_rotation(&t) {
            Ok(p) => {
                if p.degenerate {
                    degenerate.push(i);
                }
                rotations.push(p.rotation.transpose());
            }
            Err(Error::ZeroMatrix) => {
                degenerate.push(i);
                rotations.push(Rotation::identity(d));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((rotations, degenerate))
}

/// Relative tolerance on the d-th/(d+1)-th eigenvalue gap.
pub const GAP_TOL: f64 = 1e-8;

/// Top-d eigenvectors of `G`, blockwise projected.
///
/// When the d-th eigenvalue is tied with the (d+1)-th, the top-d subspace is
/// not unique. On the dense path the tie is broken by taking, inside the
/// tied cluster, the directions closest to the stacked-identity frame; the
/// estimate is flagged with `small_gap` either way.
pub fn round_deterministic(g: &GramMatrix) -> Result<RotationEstimate> {
    let (n, d) = (g.n, g.d);
    let size = n * d;
    let (frame, small_gap) = if size <= crate::spectral::DENSE_THRESHOLD {
        let (vals, vecs) = sym_eigen(&g.matrix)?;
        let desc: Vec<usize> = (0..size).rev().collect();
        let scale = vals[size - 1].abs().max(vals[0].abs()).max(f64::MIN_POSITIVE);
        let tol = GAP_TOL * scale;
        let boundary = vals[desc[d - 1]];
        let small_gap = size > d && (boundary - vals[desc[d]]).abs() <= tol;
        if small_gap {
            let above: Vec<usize> = desc
                .iter()
                .copied()
                .filter(|&c| vals[c] > boundary + tol)
                .collect();
            let cluster: Vec<usize> = desc
                .iter()
                .copied()
                .filter(|&c| (vals[c] - boundary).abs() <= tol)
                .collect();
            let c_mat = DMatrix::from_fn(size, cluster.len(), |r, k| vecs[(r, cluster[k])]);
            let stacked = DMatrix::from_fn(size, d, |r, c| if r % d == c { 1.0 } else { 0.0 });
            let svd = (c_mat.transpose() * stacked).svd(true, false);
            let u = svd.u.expect("requested U");
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
            let mut frame = DMatrix::zeros(size, d);
            for (k, &c) in above.iter().enumerate() {
                frame.set_column(k, &vecs.column(c));
            }
            for k in above.len()..d {
                let coeffs = u.column(order[k - above.len()]);
                frame.set_column(k, &(&c_mat * coeffs));
            }
            (frame, true)
        } else {
            let frame = DMatrix::from_fn(size, d, |r, k| vecs[(r, desc[k])]);
            (frame, false)
        }
    } else {
        let want = (d + 1).min(size);
        let pairs = largest_eigenvectors(&g.matrix, want)?;
        let scale = pairs.values[0].abs().max(f64::MIN_POSITIVE);
        let small_gap = want > d && (pairs.values[d - 1] - pairs.values[d]).abs() <= GAP_TOL * scale;
        (pairs.vectors.columns(0, d).clone_owned(), small_gap)
    };
    if small_gap {
        log::debug!("deterministic rounding: top-{d} eigenspace is not separated");
    }
    let (rotations, degenerate_blocks) = frame_to_rotations(&frame, d)?;
    Ok(RotationEstimate {
        rotations,
        source: g.source,
        rounding: Rounding::Deterministic,
        degenerate_blocks,
        small_gap,
    })
}

/// Cholesky-times-random-frame rounding.
///
/// `G = L Lᵀ` is factored by semidefinite pivoted Cholesky (so rank-deficient
/// Gram matrices factor exactly), `Q` is a uniform `nd × d` orthonormal frame,
/// and the blocks of `LQ` are projected. A factorization that fails on a
/// slightly indefinite input is retried once after shifting the diagonal by
/// `1e-10·trace/n`.
pub fn round_random<R: Rng + ?Sized>(g: &GramMatrix, rng: &mut R) -> Result<RotationEstimate> {
    let (n, d) = (g.n, g.d);
    let size = n * d;
    let factor = match pivoted_cholesky(&g.matrix, 1e-12, 1e-9) {
        Ok(b) => b,
        Err(Error::Cholesky { .. }) => {
            let shift = 1e-10 * g.matrix.trace() / n as f64;
            let mut shifted = g.matrix.clone();
            for k in 0..size {
                shifted[(k, k)] += shift;
            }
            pivoted_cholesky(&shifted, 1e-12, 1e-9)?
        }
        Err(e) => return Err(e),
    };
    let q = sample_stiefel(size, d, rng);
    let r = factor.ncols();
    let frame = &factor * q.rows(0, r);
    let (rotations, degenerate_blocks) = frame_to_rotations(&frame, d)?;
    Ok(RotationEstimate {
        rotations,
        source: g.source,
        rounding: Rounding::Random,
        degenerate_blocks,
        small_gap: false,
    })
}

pub fn round<R: Rng + ?Sized>(g: &GramMatrix, rounding: Rounding, rng: &mut R) -> Result<RotationEstimate> {
    match rounding {
        Rounding::Deterministic => round_deterministic(g),
        Rounding::Random => round_random(g, rng),
    }
}

fn check_pair(est: &[Rotation], truth: &[Rotation]) -> Result<usize> {
    if est.is_empty() || est.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} estimates for {} truth rotations",
            est.len(),
            truth.len()
        )));
    }
    let d = truth[0].dim();
    if est.iter().chain(truth).any(|r| r.dim() != d) {
        return Err(Error::ShapeMismatch("mixed rotation dimensions".into()));
    }
    Ok(d)
}

/// Mean squared error after registration:
/// `(1/n) Σ ‖R_i − Ô R̂_i‖²` with `Ô = proj((1/n) Σ R_i R̂_iᵀ)` over SO(d).
pub fn mse(est: &[Rotation], truth: &[Rotation]) -> Result<EvalResult> {
    let d = check_pair(est, truth)?;
    let n = est.len() as f64;
    let mut m = DMatrix::zeros(d, d);
    for (r_hat, r) in est.iter().zip(truth) {
        m += r.matrix() * r_hat.matrix().transpose();
    }
    m /= n;
    let registration = match project_to_rotation(&m) {
        Ok(p) => p.rotation,
        Err(Error::ZeroMatrix) => Rotation::identity(d),
        Err(e) => return Err(e),
    };
    let total: f64 = est
        .iter()
        .zip(truth)
        .map(|(r_hat, r)| (r.matrix() - registration.matrix() * r_hat.matrix()).norm_squared())
        .sum();
    Ok(EvalResult {
        mse: total / n,
        re: None,
        registration,
    })
}

/// `‖Ĝ − G‖_F / ‖G‖_F`.
pub fn relative_error(g_hat: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64> {
    if g_hat.shape() != g.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            g_hat.shape(),
            g.shape()
        )));
    }
    let denom = g.norm();
    if denom == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok((g_hat - g).norm() / denom)
}

/// `G_ij = R_iᵀ R_j`.
pub fn gram_from_rotations(rotations: &[Rotation]) -> DMatrix<f64> {
    let n = rotations.len();
    let d = rotations.first().map(Rotation::dim).unwrap_or(0);
    let mut x = DMatrix::zeros(d, n * d);
    for (i, r) in rotations.iter().enumerate() {
        x.view_mut((0, i * d), (d, d)).copy_from(r.matrix());
    }
    x.transpose() * x
}
