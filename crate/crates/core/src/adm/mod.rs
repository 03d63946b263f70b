//! Alternating-direction augmented-Lagrangian solver for the LUD and
//! least-squares semidefinite relaxations.
//!
//! Both programs share the constraint set `A(G) = b` (identity diagonal
//! blocks) and `G ⪰ 0`. The dual is written as
//! `min −⟨y, b⟩ − Σ⟨θ_ij, R_ij⟩  s.t. ‖θ_ij‖ ≤ 1, Q(θ) + W + A*(y) = 0, W ⪰ 0`,
//! and the solver minimizes its augmented Lagrangian in `y`, then `θ`, then
//! `W`, and finally takes a multiplier step in `G`. For the least-squares
//! program `Q(θ)` is replaced by the constant measurement matrix `C` and the
//! `θ` step disappears.

mod trace;

pub(crate) use trace::csv_err;
pub use trace::{write_trace_csv, TraceRow};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::evaluate::Method;
use crate::linalg::{asymmetry, sym_eigen};
use crate::measurements::MeasurementGraph;
use crate::spectral::{lanczos_smallest, LanczosOptions, DENSE_THRESHOLD};

/// Symmetric `nd × nd` matrix viewed as an `n × n` grid of `d × d` blocks.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub n: usize,
    pub d: usize,
    pub matrix: DMatrix<f64>,
    /// Which relaxation produced the matrix.
    pub source: Method,
}

impl GramMatrix {
    pub fn new(n: usize, d: usize, matrix: DMatrix<f64>, source: Method) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if matrix.nrows() != n * d || matrix.ncols() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "expected {0}x{0} Gram matrix, got {1}x{2}",
                n * d,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let asym = asymmetry(&matrix);
        if asym > 1e-10 * matrix.amax().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "Gram matrix is not symmetric (max deviation {asym:.3e})"
            )));
        }
        Ok(GramMatrix { n, d, matrix, source })
    }

    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.matrix
            .view((i * self.d, j * self.d), (self.d, self.d))
            .clone_owned()
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub mu: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub mu_adapt: bool,
    /// Initial number of eigenpairs requested on the partial (large-matrix)
    /// eigendecomposition path; `None` means `d`.
    pub eig_rank_hint: Option<usize>,
    pub eig: EigBackend,
    /// Record one [`TraceRow`] per iteration.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mu: 1.0,
            gamma: 1.6,
            tol: 1e-5,
            max_iter: 5000,
            mu_adapt: true,
            eig_rank_hint: None,
            eig: EigBackend::Auto,
            trace: false,
        }
    }
}

/// Upper end of the admissible step-length interval, `(1 + √5)/2`.
pub const GOLDEN: f64 = 1.618_033_988_749_895;

pub const MU_MIN: f64 = 1e-4;
pub const MU_MAX: f64 = 1e4;
/// Iterations between penalty adjustments.
pub const MU_PERIOD: usize = 50;
/// Ratio of infeasibilities that triggers a penalty adjustment.
pub const MU_RATIO: f64 = 10.0;
/// Eigenvalues above `-NEG_EIG_EPS·‖H‖_F` count as nonnegative on the
/// partial eigendecomposition path.
pub const NEG_EIG_EPS: f64 = 1e-9;

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < GOLDEN) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in (0, {GOLDEN:.6}), got {}",
                self.gamma
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if self.eig_rank_hint == Some(0) {
            return Err(Error::InvalidParameter("eig_rank_hint must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which relaxation the iteration solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Program {
    /// `min Σ‖G_ij − R_ij‖`.
    Lud,
    /// `max Σ⟨G_ij, R_ij⟩`.
    LeastSquares,
}

/// The measurement data seen by the solver: the edge list and its blocks.
#[derive(Debug, Clone)]
pub struct Problem {
    pub n: usize,
    pub d: usize,
    pub edges: Vec<(usize, usize)>,
    pub blocks: Vec<DMatrix<f64>>,
    pub program: Program,
    /// Multiplier applied to `C` inside the least-squares iteration (one over
    /// the mean degree); the optimum does not depend on it.
    pub c_scale: f64,
}

impl Problem {
    pub fn from_graph(g: &MeasurementGraph, program: Program) -> Result<Self> {
        if g.edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Ok(Problem {
            n: g.n,
            d: g.d,
            edges: g.edges.iter().map(|e| (e.i, e.j)).collect(),
            blocks: g.edges.iter().map(|e| e.ratio.matrix().clone()).collect(),
            program,
            c_scale: match program {
                Program::Lud => 1.0,
                Program::LeastSquares => 1.0 / (2.0 * g.edges.len() as f64 / g.n as f64).max(1.0),
            },
        })
    }

    pub fn size(&self) -> usize {
        self.n * self.d
    }

    /// Frobenius norm of the objective matrix (blocks `R_ij`, `R_ijᵀ`).
    pub fn c_norm(&self) -> f64 {
        (2.0 * self.blocks.iter().map(|b| b.norm_squared()).sum::<f64>()).sqrt()
    }

    /// `Σ‖G_ij − R_ij‖` for LUD, `Σ⟨G_ij, R_ij⟩` for least squares.
    pub fn objective(&self, g: &DMatrix<f64>) -> f64 {
        let d = self.d;
        self.edges
            .iter()
            .zip(&self.blocks)
            .map(|(&(i, j), r)| {
                let gij = g.view((i * d, j * d), (d, d));
                match self.program {
                    Program::Lud => (gij - r).norm(),
                    Program::LeastSquares => gij.dot(r),
                }
            })
            .sum()
    }
}

/// `A(G)`: the diagonal-block entries, ordered `(i, p, q)`.
pub fn operator_a(g: &DMatrix<f64>, n: usize, d: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n * d * d);
    for i in 0..n {
        for p in 0..d {
            for q in 0..d {
                out[(i * d + p) * d + q] = g[(i * d + p, i * d + q)];
            }
        }
    }
    out
}

/// `A*(y)`: the block-diagonal matrix carrying `y`.
pub fn operator_a_adjoint(y: &DVector<f64>, n: usize, d: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for p in 0..d {
            for q in 0..d {
                out[(i * d + p, i * d + q)] = y[(i * d + p) * d + q];
            }
        }
    }
    out
}

/// `b = 1_n ⊗ vec(I_d)`.
pub fn target_b(n: usize, d: usize) -> DVector<f64> {
    DVector::from_fn(n * d * d, |k, _| {
        let (p, q) = ((k / d) % d, k % d);
        if p == q {
            1.0
        } else {
            0.0
        }
    })
}

/// `Q(θ)`: zero diagonal blocks, `θ_ij/2` at `(i, j)` and `θ_ijᵀ/2` at `(j, i)`.
pub fn assemble_q(n: usize, d: usize, edges: &[(usize, usize)], theta: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n * d, n * d);
    for (&(i, j), t) in edges.iter().zip(theta) {
        q.view_mut((i * d, j * d), (d, d)).copy_from(&(t * 0.5));
        q.view_mut((j * d, i * d), (d, d))
            .copy_from(&(t.transpose() * 0.5));
    }
    q
}

/// Iterate bundle of the solver.
#[derive(Debug, Clone)]
pub struct AdmState {
    /// Multiplier of `A(G) = b`, length `n·d²`.
    pub y: DVector<f64>,
    /// One block per edge, in edge order; empty for the least-squares program.
    pub theta: Vec<DMatrix<f64>>,
    pub w: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub mu: f64,
    pub gamma: f64,
    pub iter: usize,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
}

impl AdmState {
    /// `y = 0, θ = 0, W = 0, G = I`.
    pub fn initial(problem: &Problem, opts: &SolverOptions) -> Self {
        let (n, d, size) = (problem.n, problem.d, problem.size());
        let theta = match problem.program {
            Program::Lud => vec![DMatrix::zeros(d, d); problem.edges.len()],
            Program::LeastSquares => Vec::new(),
        };
        AdmState {
            y: DVector::zeros(n * d * d),
            theta,
            w: DMatrix::zeros(size, size),
            g: DMatrix::identity(size, size),
            mu: opts.mu,
            gamma: opts.gamma,
            iter: 0,
            primal_infeas: 0.0,
            dual_infeas: 0.0,
        }
    }
}

/// `y = −A(W) − (A(G) − b)/μ`, using `A(Q) = 0`.
pub fn update_y(state: &AdmState, n: usize, d: usize) -> DVector<f64> {
    let mut y = DVector::zeros(n * d * d);
    let inv_mu = 1.0 / state.mu;
    for i in 0..n {
        for p in 0..d {
            for q in 0..d {
                let (r, c) = (i * d + p, i * d + q);
                let eye = if p == q { 1.0 } else { 0.0 };
                y[(i * d + p) * d + q] = -state.w[(r, c)] - inv_mu * (state.g[(r, c)] - eye);
            }
        }
    }
    y
}

/// Minimizer of `−⟨θ, R⟩ + ⟨θ, G_ij⟩ + μ⟨θ, W_ij⟩ + (μ/4)‖θ‖²` over the unit
/// ball, where `Φ = W_ij + G_ij/μ`: the projection of `2(R/μ − Φ)` onto the
/// ball. The factor 2 comes from `‖Q(θ)‖² = ½Σ‖θ_ij‖²`.
pub fn theta_block(r: &DMatrix<f64>, phi: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    let mut t = (r / mu - phi) * 2.0;
    let norm = t.norm();
    if norm > 1.0 {
        t /= norm;
    }
    t
}

/// Per-edge `θ` update with `Φ = W + A*(y) + G/μ`. Off the diagonal the
/// `A*(y)` term vanishes, so the new `y` is not needed.
pub fn update_theta(state: &AdmState, problem: &Problem) -> Vec<DMatrix<f64>> {
    let d = problem.d;
    let inv_mu = 1.0 / state.mu;
    problem
        .edges
        .iter()
        .zip(&problem.blocks)
        .map(|(&(i, j), r)| {
            let phi = state.w.view((i * d, j * d), (d, d)) + state.g.view((i * d, j * d), (d, d)) * inv_mu;
            theta_block(r, &phi, state.mu)
        })
        .collect()
}

/// `H = −Q − A*(y) − G/μ`, with `Q = Q(θ)` for LUD and `Q = C` for least
/// squares.
pub fn assemble_h(
    problem: &Problem,
    y: &DVector<f64>,
    theta: &[DMatrix<f64>],
    g: &DMatrix<f64>,
    mu: f64,
) -> DMatrix<f64> {
    let d = problem.d;
    let mut h = g * (-1.0 / mu);
    for (k, &(i, j)) in problem.edges.iter().enumerate() {
        let block = match problem.program {
            Program::Lud => &theta[k] * 0.5,
            Program::LeastSquares => &problem.blocks[k] * problem.c_scale,
        };
        let mut v = h.view_mut((i * d, j * d), (d, d));
        v -= &block;
        let mut v = h.view_mut((j * d, i * d), (d, d));
        v -= block.transpose();
    }
    for i in 0..problem.n {
        for p in 0..d {
            for q in 0..d {
                h[(i * d + p, i * d + q)] -= y[(i * d + p) * d + q];
            }
        }
    }
    h
}

/// Negative spectral part `V₋ Λ₋ V₋ᵀ` of a symmetric matrix, kept factored.
#[derive(Debug, Clone)]
pub struct NegativePart {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl NegativePart {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (c, &v) in self.values.iter().enumerate() {
            scaled.column_mut(c).scale_mut(v);
        }
        scaled * self.vectors.transpose()
    }

    /// `‖V₋ Λ₋ V₋ᵀ‖_F`.
    pub fn norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc + v * v).sqrt()
    }
}

/// Eigensolver used for the negative part of `H` in the `W` step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigBackend {
    /// Dense for order ≤ [`DENSE_THRESHOLD`], partial above.
    #[default]
    Auto,
    Dense,
    /// Restarted Lanczos for the few most negative eigenpairs, warm-started
    /// from the previous iteration and grown until the boundary eigenvalue
    /// is above the cut. Falls back to dense when more than
    /// [`PARTIAL_MAX_PAIRS`] pairs (or a quarter of the order) are needed.
    Partial,
}

impl std::str::FromStr for EigBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(EigBackend::Auto),
            "dense" => Ok(EigBackend::Dense),
            "partial" => Ok(EigBackend::Partial),
            other => Err(Error::InvalidParameter(format!("unknown eigensolver `{other}`"))),
        }
    }
}

/// Eigenpairs of `h` with negative eigenvalues, by dense decomposition.
pub fn negative_part_dense(h: &DMatrix<f64>) -> Result<NegativePart> {
    let (vals, vecs) = sym_eigen(h)?;
    let count = vals.iter().take_while(|&&v| v < 0.0).count();
    Ok(NegativePart {
        values: vals.iter().take(count).copied().collect(),
        vectors: vecs.columns(0, count).clone_owned(),
    })
}

/// Largest count of eigenpairs requested from Lanczos before the partial
/// path switches to a dense decomposition.
pub const PARTIAL_MAX_PAIRS: usize = 8;

/// Eigenpairs of `h` below `−NEG_EIG_EPS·‖h‖_F`, by restarted Lanczos.
///
/// Requests `hint + 1` pairs and doubles the count while every computed
/// eigenvalue is still below the cut. Only the pairs below the cut are
/// converged to full accuracy; the guard pair just has to be certified
/// above it.
pub fn negative_part_partial(h: &DMatrix<f64>, hint: usize) -> Result<NegativePart> {
    let size = h.nrows();
    let cut = -NEG_EIG_EPS * h.norm().max(1.0);
    let mut k = (hint + 1).clamp(1, size);
    loop {
        if 4 * k > size || k > PARTIAL_MAX_PAIRS {
            return negative_part_dense(h);
        }
        let opts = LanczosOptions {
            certify_above: Some(cut),
            ..LanczosOptions::default()
        };
        let res = lanczos_smallest(h, k, &opts)?;
        let count = res.values.iter().take_while(|&&v| v < cut).count();
        if count < k {
            return Ok(NegativePart {
                values: res.values[..count].to_vec(),
                vectors: res.vectors.columns(0, count).clone_owned(),
            });
        }
        k *= 2;
    }
}

/// Negative part of `h` with the given backend.
pub fn negative_part(h: &DMatrix<f64>, backend: EigBackend, hint: usize) -> Result<NegativePart> {
    let partial = match backend {
        EigBackend::Auto => h.nrows() > DENSE_THRESHOLD,
        EigBackend::Dense => false,
        EigBackend::Partial => true,
    };
    if partial {
        negative_part_partial(h, hint)
    } else {
        negative_part_dense(h)
    }
}

/// Backend and rank hint carried between `W` steps; the hint tracks the
/// rank of the previous negative part.
#[derive(Debug, Clone)]
pub struct EigState {
    pub backend: EigBackend,
    pub hint: usize,
}

impl EigState {
    pub fn new(backend: EigBackend, hint: usize) -> Self {
        EigState { backend, hint }
    }

    fn negative_part(&mut self, h: &DMatrix<f64>) -> Result<NegativePart> {
        let neg = negative_part(h, self.backend, self.hint)?;
        self.hint = neg.rank().max(1);
        Ok(neg)
    }
}

/// Result of the `W` step.
#[derive(Debug, Clone)]
pub struct WStep {
    /// Projection of `H` onto the PSD cone.
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub negative: NegativePart,
}

/// `W = H₊`, computed as `H − H₋` from the negative eigenpairs.
pub fn update_w(
    problem: &Problem,
    state: &AdmState,
    y: &DVector<f64>,
    theta: &[DMatrix<f64>],
    eig: &mut EigState,
) -> Result<WStep> {
    let h = assemble_h(problem, y, theta, &state.g, state.mu);
    let negative = eig.negative_part(&h)?;
    let w = &h - negative.to_matrix();
    Ok(WStep { w, h, negative })
}

/// `G⁺ = (1 − γ)G + γμ(W − H)`.
pub fn update_g(g: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>, mu: f64, gamma: f64) -> DMatrix<f64> {
    g * (1.0 - gamma) + (w - h) * (gamma * mu)
}

/// `‖A(G) − b‖`.
fn diagonal_residual(g: &DMatrix<f64>, n: usize, d: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        for p in 0..d {
            for q in 0..d {
                let eye = if p == q { 1.0 } else { 0.0 };
                let v = g[(i * d + p, i * d + q)] - eye;
                total += v * v;
            }
        }
    }
    total.sqrt()
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub program: Program,
    /// Objective at the returned Gram matrix.
    pub objective: f64,
    pub iterations: usize,
    /// `‖A(G) − b‖ / (1 + ‖b‖)` at the returned Gram matrix.
    pub primal_infeas: f64,
    /// `‖Q(θ) + W + A*(y)‖ / (1 + ‖C‖)` at the returned iterate.
    pub dual_infeas: f64,
    /// `‖G₋‖_F / (1 + ‖G‖_F)` of the iterate before the final PSD cleanup.
    pub psd_violation: f64,
    pub converged: bool,
    /// Final penalty.
    pub mu: f64,
    pub trace: Vec<TraceRow>,
}

/// Solves `min Σ_{(i,j)∈E} ‖G_ij − R_ij‖  s.t. G_ii = I, G ⪰ 0`.
pub fn solve_lud(g: &MeasurementGraph, opts: &SolverOptions) -> Result<(GramMatrix, ConvergenceReport)> {
    solve(&Problem::from_graph(g, Program::Lud)?, opts)
}

/// Solves `max Σ_{(i,j)∈E} ⟨G_ij, R_ij⟩  s.t. G_ii = I, G ⪰ 0`.
pub fn solve_sdp_ls(g: &MeasurementGraph, opts: &SolverOptions) -> Result<(GramMatrix, ConvergenceReport)> {
    solve(&Problem::from_graph(g, Program::LeastSquares)?, opts)
}

/// One full sweep `y → θ → W → G`. Returns the new state and the unscaled
/// dual residual norm `‖Q + W + A*(y)‖` of the sweep.
pub fn step(problem: &Problem, state: &AdmState, eig: &mut EigState) -> Result<(AdmState, WStep, f64)> {
    let (n, d) = (problem.n, problem.d);
    let y = update_y(state, n, d);
    let theta = match problem.program {
        Program::Lud => update_theta(state, problem),
        Program::LeastSquares => Vec::new(),
    };
    let wstep = update_w(problem, state, &y, &theta, eig)?;
    // Q + W + A*(y) = W − H − G/μ = −H₋ − G/μ.
    let dual_resid = (&wstep.w - &wstep.h - &state.g / state.mu).norm();
    let g = update_g(&state.g, &wstep.w, &wstep.h, state.mu, state.gamma);
    let next = AdmState {
        y,
        theta,
        w: wstep.w.clone(),
        g,
        mu: state.mu,
        gamma: state.gamma,
        iter: state.iter + 1,
        primal_infeas: state.primal_infeas,
        dual_infeas: state.dual_infeas,
    };
    Ok((next, wstep, dual_resid))
}

pub fn solve(problem: &Problem, opts: &SolverOptions) -> Result<(GramMatrix, ConvergenceReport)> {
    opts.validate()?;
    if problem.edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let (n, d) = (problem.n, problem.d);
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let b_norm = ((n * d) as f64).sqrt();
    let c_norm = problem.c_norm();
    let mut eig = EigState::new(opts.eig, opts.eig_rank_hint.unwrap_or(d));
    let mut check = EigState::new(opts.eig, d);
    let mut state = AdmState::initial(problem, opts);
    let mut trace = Vec::new();
    // (score, G, dual infeasibility, μ) of the best iterate seen.
    let mut best: Option<(f64, DMatrix<f64>, f64, f64)> = None;
    let mut converged = false;
    let mut psd_violation = f64::NAN;

    while state.iter < opts.max_iter {
        let (mut next, wstep, dual_resid) = step(problem, &state, &mut eig)?;
        next.primal_infeas = diagonal_residual(&next.g, n, d) / (1.0 + b_norm);
        next.dual_infeas = dual_resid / (1.0 + c_norm);
        if !(next.primal_infeas.is_finite() && next.dual_infeas.is_finite()) {
            log::warn!("ADM iterate became non-finite at iteration {}", next.iter);
            break;
        }
        if opts.trace {
            trace.push(TraceRow {
                iter: next.iter,
                objective: problem.objective(&next.g),
                primal_infeas: next.primal_infeas,
                dual_infeas: next.dual_infeas,
                mu: next.mu,
                rank_estimate: wstep.negative.rank(),
            });
        }
        let score = next.primal_infeas.max(next.dual_infeas);
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, next.g.clone(), next.dual_infeas, next.mu));
        }
        state = next;

        if score <= opts.tol {
            let neg = check.negative_part(&state.g)?;
            psd_violation = neg.norm() / (1.0 + state.g.norm());
            if psd_violation <= opts.tol {
                converged = true;
                break;
            }
        }
        if opts.mu_adapt && state.iter.is_multiple_of(MU_PERIOD) {
            let (p, q) = (state.primal_infeas, state.dual_infeas);
            if p > MU_RATIO * q {
                state.mu = (state.mu / 2.0).max(MU_MIN);
            } else if p < q / MU_RATIO {
                state.mu = (state.mu * 2.0).min(MU_MAX);
            }
        }
    }

    let final_state = if converged {
        state
    } else {
        log::warn!(
            "ADM stopped after {} iterations without reaching tol {:.1e} (primal {:.3e}, dual {:.3e})",
            state.iter,
            opts.tol,
            state.primal_infeas,
            state.dual_infeas
        );
        if let Some((_, g, dual, mu)) = best {
            state.g = g;
            state.dual_infeas = dual;
            state.mu = mu;
        }
        state
    };
    let neg = check.negative_part(&final_state.g)?;
    if !converged {
        psd_violation = neg.norm() / (1.0 + final_state.g.norm());
    }
    let mut g = &final_state.g - neg.to_matrix();
    crate::linalg::symmetrize(&mut g);
    let source = match problem.program {
        Program::Lud => Method::Lud,
        Program::LeastSquares => Method::Sdp,
    };
    let report = ConvergenceReport {
        program: problem.program,
        objective: problem.objective(&g),
        iterations: final_state.iter,
        primal_infeas: diagonal_residual(&g, n, d) / (1.0 + b_norm),
        dual_infeas: final_state.dual_infeas,
        psd_violation,
        converged,
        mu: final_state.mu,
        trace,
    };
    Ok((
        GramMatrix {
            n,
            d,
            matrix: g,
            source,
        },
        report,
    ))
}
