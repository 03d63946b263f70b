//! The rotation group SO(d): values, projection, random sampling, and the
//! constants that govern exact recovery.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Tolerance on `‖RᵀR − I‖_F` and `|det R − 1|` for a valid rotation.
pub const ROTATION_TOL: f64 = 1e-10;

/// A `d × d` special-orthogonal matrix.
#[derive(Clone, PartialEq)]
pub struct Rotation {
    m: DMatrix<f64>,
}

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rotation{}", self.m)
    }
}

impl Rotation {
    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    /// Planar rotation by `theta` radians.
    pub fn planar(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            m: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
        }
    }

    /// Rotation about a unit `axis` in R³ by `angle` (Rodrigues).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let [x, y, z] = axis;
        let k = DMatrix::from_row_slice(3, 3, &[0.0, -z, y, z, 0.0, -x, -y, x, 0.0]);
        let k2 = &k * &k;
        let m = DMatrix::identity(3, 3) + k * angle.sin() + k2 * (1.0 - angle.cos());
        Self { m }
    }

    /// Wraps `m` after checking the rotation invariants.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        if m.nrows() < 2 {
            return Err(Error::InvalidDimension(m.nrows()));
        }
        let r = Self { m };
        if r.orthogonality_error() > ROTATION_TOL || (r.det() - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidParameter(format!(
                "not a rotation: ‖RᵀR − I‖ = {:.3e}, det = {}",
                r.orthogonality_error(),
                r.det()
            )));
        }
        Ok(r)
    }

    /// Wraps `m` without checking. Callers guarantee the invariants.
    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn transpose(&self) -> Self {
        Self {
            m: self.m.transpose(),
        }
    }

    pub fn compose(&self, rhs: &Rotation) -> Self {
        Self { m: &self.m * &rhs.m }
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn det(&self) -> f64 {
        self.m.determinant()
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim();
        (self.m.transpose() * &self.m - DMatrix::<f64>::identity(d, d)).norm()
    }

    /// Frobenius distance to another rotation.
    pub fn distance(&self, other: &Rotation) -> f64 {
        (&self.m - &other.m).norm()
    }
}

impl std::ops::Mul for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        self.compose(rhs)
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Result of projecting a matrix onto SO(d).
#[derive(Debug, Clone)]
pub struct Projection {
    pub rotation: Rotation,
    /// Set when the nearest rotation is not unique: the two smallest singular
    /// values tie and the determinant correction (or a rank drop) makes the
    /// flipped direction arbitrary.
    pub degenerate: bool,
}

/// Relative tolerance for declaring two singular values equal.
const SINGULAR_TIE_TOL: f64 = 1e-10;

/// Frobenius-nearest rotation to `m`: `U J Vᵀ` from the SVD `m = U Σ Vᵀ`,
/// with `J = diag(1, …, 1, det(U Vᵀ))` acting on the smallest singular value.
pub fn project_to_rotation(m: &DMatrix<f64>) -> Result<Projection> {
    check_square(m)?;
    let d = m.nrows();
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let svd = m.clone().svd(true, true);
    let mut u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let sv = &svd.singular_values;

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let largest = sv[order[0]];
    if largest <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let smallest = order[d - 1];
    let next = order[d - 2];

    let sign = (&u * &v_t).determinant();
    let flipped = sign < 0.0;
    if flipped {
        u.column_mut(smallest).neg_mut();
    }
    let tie = sv[next] - sv[smallest] <= SINGULAR_TIE_TOL * largest;
    let rank_drop = sv[smallest] <= SINGULAR_TIE_TOL * largest;
    let rotation = Rotation::from_matrix_unchecked(u * v_t);
    Ok(Projection {
        rotation,
        degenerate: tie && (flipped || rank_drop),
    })
}

/// A Haar-distributed rotation: Gaussian QR with the sign of the triangular
/// factor's diagonal moved into Q, then one column flip when det = −1.
pub fn sample_haar<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Rotation> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(haar_unchecked(d, rng))
}

pub(crate) fn haar_unchecked<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Rotation {
    let z = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    Rotation::from_matrix_unchecked(q)
}

/// Uniformly distributed `rows × cols` matrix with orthonormal columns.
pub fn sample_stiefel<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let z = DMatrix::<f64>::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Von Mises angle on (−π, π] with density ∝ exp(k·cos φ).
///
/// Small `k` uses a uniform proposal; larger `k` a Gaussian envelope built
/// from `1 − cos φ ≥ 2φ²/π²`, which keeps the acceptance rate near 2/π for
/// arbitrarily concentrated draws.
fn von_mises_angle<R: Rng + ?Sized>(k: f64, rng: &mut R) -> f64 {
    if k < 2.0 {
        loop {
            let phi = rng.random_range(-PI..PI);
            let half = (0.5 * phi).sin();
            if rng.random::<f64>() < (-2.0 * k * half * half).exp() {
                return phi;
            }
        }
    }
    let sigma = PI / (2.0 * k.sqrt());
    loop {
        let phi = sigma * rng.sample::<f64, _>(StandardNormal);
        if phi.abs() > PI {
            continue;
        }
        let half = (0.5 * phi).sin();
        let log_ratio = -2.0 * k * half * half + 2.0 * k * phi * phi / (PI * PI);
        if rng.random::<f64>().ln() < log_ratio {
            return phi;
        }
    }
}

/// Rotation angle in [0, π] of a 3-D von Mises–Fisher draw: density
/// ∝ exp(κ(1 + 2cos θ))·(1 − cos θ), the Weyl weight included.
fn vmf3_angle<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    if kappa < 0.5 {
        loop {
            let theta = rng.random_range(0.0..PI);
            let s2 = (0.5 * theta).sin().powi(2);
            if rng.random::<f64>() < (-4.0 * kappa * s2).exp() * s2 {
                return theta;
            }
        }
    }
    // Envelope θ²·exp(−4κθ²/π²): a scaled chi(3) variate.
    let sigma = PI / (8.0 * kappa).sqrt();
    loop {
        let g: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let theta = sigma * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if theta > PI || theta == 0.0 {
            continue;
        }
        let s2 = (0.5 * theta).sin().powi(2);
        let log_ratio = -4.0 * kappa * (s2 - theta * theta / (PI * PI)) + (4.0 * s2 / (theta * theta)).ln();
        if rng.random::<f64>().ln() < log_ratio {
            return theta;
        }
    }
}

/// A von Mises–Fisher draw on SO(d) with density ∝ exp(κ·Tr(meanᵀ R)).
///
/// Supported for d = 2 (angle offset from a von Mises law with
/// concentration 2κ) and d = 3 (angle from the Weyl-weighted marginal and a
/// uniform axis).
pub fn sample_vmf<R: Rng + ?Sized>(mean: &Rotation, kappa: f64, rng: &mut R) -> Result<Rotation> {
    if kappa <= 0.0 || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "concentration must be positive and finite, got {kappa}"
        )));
    }
    let offset = match mean.dim() {
        2 => Rotation::planar(von_mises_angle(2.0 * kappa, rng)),
        3 => {
            let theta = vmf3_angle(kappa, rng);
            let axis = loop {
                let g: [f64; 3] = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                if norm > 1e-12 {
                    break [g[0] / norm, g[1] / norm, g[2] / norm];
                }
            };
            Rotation::from_axis_angle(axis, theta)
        }
        d => {
            return Err(Error::Unsupported(format!(
                "von Mises–Fisher sampling on SO({d})"
            )))
        }
    };
    Ok(mean.compose(&offset))
}

/// How a [`TheoryConstants`] value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantsMethod {
    ClosedForm,
    MonteCarlo,
}

impl fmt::Display for ConstantsMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ClosedForm => "closed_form",
            Self::MonteCarlo => "monte_carlo",
        })
    }
}

/// `c(d) = (1/d)·E Tr((I − R)/‖I − R‖)` under Haar measure, and
/// `c₁(d) = sqrt((1 − c(d)²·d)/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConstants {
    pub d: usize,
    pub c_d: f64,
    pub c1_d: f64,
    pub method: ConstantsMethod,
    pub mc_samples: usize,
    pub mc_stderr: f64,
}

impl TheoryConstants {
    fn new(d: usize, c_d: f64, method: ConstantsMethod, mc_samples: usize, mc_stderr: f64) -> Self {
        let c1_d = ((1.0 - c_d * c_d * d as f64) / 2.0).max(0.0).sqrt();
        Self {
            d,
            c_d,
            c1_d,
            method,
            mc_samples,
            mc_stderr,
        }
    }

    /// Closed form, available for d = 2 and d = 3.
    pub fn closed_form(d: usize) -> Option<Self> {
        let c = match d {
            2 => SQRT_2 / PI,
            3 => 8.0 * SQRT_2 / (9.0 * PI),
            _ => return None,
        };
        Some(Self::new(d, c, ConstantsMethod::ClosedForm, 0, 0.0))
    }
}

/// Lower and upper bounds on c(d): `1/(2√(2⌊d/2⌋)) ≤ c(d) ≤ 1/√(2d)`.
pub fn c_bounds(d: usize) -> (f64, f64) {
    let half = (d / 2) as f64;
    (1.0 / (2.0 * (2.0 * half).sqrt()), 1.0 / (2.0 * d as f64).sqrt())
}

pub const MIN_MC_SAMPLES: usize = 100_000;

/// c(d) in closed form for d ∈ {2, 3}, else a Monte-Carlo estimate of
/// `E sqrt(Tr(I − R)) / (√2·d)` over `mc_samples` Haar draws.
pub fn c_of_d<R: Rng + ?Sized>(d: usize, rng: &mut R, mc_samples: usize) -> Result<TheoryConstants> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if let Some(c) = TheoryConstants::closed_form(d) {
        return Ok(c);
    }
    if mc_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "Monte-Carlo estimate of c({d}) needs at least {MIN_MC_SAMPLES} samples, got {mc_samples}"
        )));
    }
    let scale = 1.0 / (SQRT_2 * d as f64);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..mc_samples {
        let r = haar_unchecked(d, rng);
        let v = scale * (d as f64 - r.trace()).max(0.0).sqrt();
        sum += v;
        sum_sq += v * v;
    }
    let n = mc_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(TheoryConstants::new(
        d,
        mean,
        ConstantsMethod::MonteCarlo,
        mc_samples,
        (var / n).sqrt(),
    ))
}

/// Upper bound `p_c(d, p₁)` on the critical good-edge probability for exact
/// recovery on an Erdős–Rényi measurement graph with edge probability `p1`.
/// At `p1 = 1` this is the complete-graph bound `p_c(d)`.
pub fn critical_probability(d: usize, p1: f64, constants: &TheoryConstants) -> Result<f64> {
    if constants.d != d {
        return Err(Error::InvalidParameter(format!(
            "constants computed for d = {}, requested d = {d}",
            constants.d
        )));
    }
    if !(p1 > 0.0 && p1 <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "edge probability must lie in (0, 1], got {p1}"
        )));
    }
    let sd = (d as f64).sqrt();
    let a = constants.c_d + 2.0 / sd;
    let c1 = constants.c1_d;
    let root = (c1 * c1 + 8.0 * p1 * a / sd).sqrt();
    let ratio = (root - c1) / (2.0 * p1.sqrt() * a);
    Ok(1.0 - ratio * ratio)
}

/// `Tr(R)` for a batch of Haar draws; a convenience for statistical checks.
pub fn haar_traces<R: Rng + ?Sized>(d: usize, count: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(count, |_, _| haar_unchecked(d, rng).trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn assert_rotation(r: &Rotation) {
        assert!(r.orthogonality_error() <= 1e-10, "{r:?}");
        assert!((r.det() - 1.0).abs() <= 1e-10, "{r:?}");
    }

    #[test]
    fn project_identity_and_scaled_rotation() {
        let p = project_to_rotation(&DMatrix::identity(2, 2)).unwrap();
        assert!(p.rotation.distance(&Rotation::identity(2)) < 1e-15);
        assert!(!p.degenerate);

        let r = Rotation::planar(0.7);
        let p = project_to_rotation(&(r.matrix() * 3.0)).unwrap();
        assert!(p.rotation.distance(&r) < 1e-14);
    }

    #[test]
    fn project_matches_grid_search_on_so2() {
        let mut rng = stream(11);
        for _ in 0..20 {
            let m = loop {
                let m = DMatrix::<f64>::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
                if m.determinant() > 0.05 {
                    break m;
                }
            };
            let steps = (2.0 * PI / 1e-5) as usize;
            let (mut best, mut best_theta) = (f64::INFINITY, 0.0);
            for k in 0..steps {
                let theta = -PI + k as f64 * 1e-5;
                let dist = (Rotation::planar(theta).matrix() - &m).norm();
                if dist < best {
                    best = dist;
                    best_theta = theta;
                }
            }
            let p = project_to_rotation(&m).unwrap();
            assert!(
                p.rotation.distance(&Rotation::planar(best_theta)) < 2e-5,
                "grid θ = {best_theta}"
            );
            assert!((p.rotation.matrix() - &m).norm() <= best + 1e-12);
        }
    }

    #[test]
    fn project_rejects_bad_input() {
        assert!(matches!(
            project_to_rotation(&DMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        let mut m = DMatrix::identity(3, 3);
        m[(1, 1)] = f64::NAN;
        assert!(matches!(project_to_rotation(&m), Err(Error::NonFinite)));
        assert!(matches!(
            project_to_rotation(&DMatrix::zeros(3, 3)),
            Err(Error::ZeroMatrix)
        ));
    }

    #[test]
    fn reflection_with_tied_singular_values_is_flagged() {
        // diag(1, -1) is equidistant from every element of SO(2).
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let p = project_to_rotation(&m).unwrap();
        assert!(p.degenerate);
        assert_rotation(&p.rotation);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let p = project_to_rotation(&m).unwrap();
        assert!(!p.degenerate);
    }

    #[test]
    fn haar_draws_are_rotations() {
        let mut rng = stream(1);
        for d in 2..=6 {
            for _ in 0..50 {
                assert_rotation(&sample_haar(d, &mut rng).unwrap());
            }
        }
        assert!(sample_haar(1, &mut rng).is_err());
    }

    #[test]
    fn haar_so2_trace_moments() {
        let mut rng = stream(2);
        let n = 1_000_000;
        let (mut tr, mut root) = (0.0, 0.0);
        for _ in 0..n {
            let r = haar_unchecked(2, &mut rng);
            tr += r.trace();
            root += (2.0 - r.trace()).max(0.0).sqrt() / (SQRT_2 * 2.0);
        }
        assert!((tr / n as f64).abs() < 0.01);
        assert!((root / n as f64 - 0.4502).abs() < 1e-3);
    }

    #[test]
    fn vmf_rejects_nonpositive_kappa() {
        let mut rng = stream(3);
        let mean = Rotation::identity(2);
        assert!(sample_vmf(&mean, 0.0, &mut rng).is_err());
        assert!(sample_vmf(&mean, -1.0, &mut rng).is_err());
        assert!(sample_vmf(&Rotation::identity(4), 1.0, &mut rng).is_err());
    }

    #[test]
    fn vmf_concentrates_at_large_kappa() {
        let mut rng = stream(4);
        for d in [2, 3] {
            let mean = sample_haar(d, &mut rng).unwrap();
            for kappa in [1e2, 1e4, 1e8] {
                let worst = (0..200)
                    .map(|_| sample_vmf(&mean, kappa, &mut rng).unwrap().distance(&mean))
                    .fold(0.0, f64::max);
                assert!(worst < 10.0 / kappa.sqrt(), "d={d} κ={kappa} worst={worst}");
            }
            let r = sample_vmf(&mean, 0.1, &mut rng).unwrap();
            assert_rotation(&r);
        }
    }

    #[test]
    fn vmf_so2_error_moments() {
        let mut rng = stream(5);
        let mean = Rotation::planar(1.1);
        let kappa = 100.0;
        let n = 100_000;
        let errs: Vec<f64> = (0..n)
            .map(|_| sample_vmf(&mean, kappa, &mut rng).unwrap().distance(&mean))
            .collect();
        let m = errs.iter().sum::<f64>() / n as f64;
        let v = errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let m_ref = (2.0 / (PI * kappa)).sqrt();
        let v_ref = (1.0 - 2.0 / PI) / kappa;
        assert!((m / m_ref - 1.0).abs() < 0.10, "mean {m} vs {m_ref}");
        assert!((v / v_ref - 1.0).abs() < 0.15, "var {v} vs {v_ref}");
    }

    #[test]
    fn vmf_so3_angle_matches_weyl_density() {
        // Compare the empirical mean of cos θ against quadrature of the
        // target marginal exp(2κ cos θ)(1 − cos θ) on [0, π].
        let mut rng = stream(6);
        for kappa in [0.2, 3.0, 40.0] {
            let steps = 200_000;
            let h = PI / steps as f64;
            let (mut z, mut m) = (0.0, 0.0);
            for k in 0..steps {
                let t = (k as f64 + 0.5) * h;
                let w = (2.0 * kappa * (t.cos() - 1.0)).exp() * (1.0 - t.cos());
                z += w;
                m += w * t.cos();
            }
            let expected = m / z;
            let n = 100_000;
            let mean = Rotation::identity(3);
            let emp = (0..n)
                .map(|_| {
                    let r = sample_vmf(&mean, kappa, &mut rng).unwrap();
                    (r.trace() - 1.0) / 2.0
                })
                .sum::<f64>()
                / n as f64;
            assert!((emp - expected).abs() < 0.01, "κ={kappa}: {emp} vs {expected}");
        }
    }

    #[test]
    fn closed_form_constants() {
        let mut rng = stream(7);
        let c2 = c_of_d(2, &mut rng, 0).unwrap();
        assert!((c2.c_d - 0.4502).abs() < 1e-4);
        assert_eq!(c2.method, ConstantsMethod::ClosedForm);
        let c3 = c_of_d(3, &mut rng, 0).unwrap();
        assert!((c3.c_d - 0.4001).abs() < 1e-4);
        assert!(c_of_d(4, &mut rng, 1000).is_err());
        assert!(c_of_d(1, &mut rng, MIN_MC_SAMPLES).is_err());
    }

    #[test]
    fn critical_probabilities_closed_form() {
        let c2 = TheoryConstants::closed_form(2).unwrap();
        let c3 = TheoryConstants::closed_form(3).unwrap();
        assert!((critical_probability(2, 1.0, &c2).unwrap() - 0.4570).abs() < 5e-4);
        assert!((critical_probability(3, 1.0, &c3).unwrap() - 0.4912).abs() < 5e-4);
        assert!(critical_probability(2, 0.0, &c2).is_err());
        assert!(critical_probability(2, 1.5, &c2).is_err());
        assert!(critical_probability(3, 1.0, &c2).is_err());
    }

    #[test]
    fn critical_probability_non_increasing_in_p1() {
        for c in [
            TheoryConstants::closed_form(2).unwrap(),
            TheoryConstants::closed_form(3).unwrap(),
        ] {
            let mut prev = f64::INFINITY;
            for k in 1..=100 {
                let p1 = k as f64 / 100.0;
                let pc = critical_probability(c.d, p1, &c).unwrap();
                assert!(pc <= prev + 1e-15);
                prev = pc;
            }
        }
    }
}
