//! Experiment drivers: seeded parameter sweeps over the measurement model,
//! the semicircle diagnostic and the constants table.
//!
//! Every trial draws its graph from
//! `derive_seed(master, [experiment, d, n, bits(p), bits(p1), kappa_key, trial])`
//! where `kappa_key` is `bits(κ)` or `u64::MAX` when κ is absent. All methods of
//! a trial share that graph; randomized rounding uses
//! `child_stream(graph_seed, method_index + 1)`.

mod config;
mod output;

use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::adm::{solve_lud, solve_sdp_ls, write_trace_csv, ConvergenceReport, GramMatrix};
use crate::error::{Error, Result};
use crate::evaluate::{gram_from_rotations, mse, relative_error, round, Method, Rounding};
use crate::linalg::{block_mut, sym_eigenvalues};
use crate::measurements::GraphModel;
use crate::rng::{child_stream, derive_seed, real_key, stream};
use crate::so_group::{c_bounds, c_of_d, critical_probability, TheoryConstants};
use crate::spectral::solve_eig;
use crate::stats::{ks_one_sample, mean, median};

pub use config::{Experiment, ExperimentConfig, DEFAULT_GRID_STEP, DEFAULT_MC_SAMPLES, DEFAULT_TRIALS};
pub use output::{
    read_records_csv, write_constants_csv, write_heatmap_csv, write_records_csv, write_semicircle_csv,
    write_summary_csv, write_theory_csv, RECORD_HEADER,
};

const NO_KAPPA_KEY: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub experiment: Experiment,
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub p1: f64,
    pub kappa: Option<f64>,
    pub method: Method,
    pub rounding: Rounding,
    pub trial: usize,
    pub seed: u64,
    pub re: f64,
    pub mse: f64,
    pub iterations: usize,
    pub runtime_ms: f64,
    /// False when the solver hit its iteration limit; not part of the CSV.
    pub converged: bool,
}

impl ExperimentRecord {
    fn sort_key(&self) -> impl Ord {
        (
            self.d,
            self.n,
            real_key(self.p),
            real_key(self.p1),
            self.kappa.map_or(0, real_key),
            self.method as u8,
            self.trial,
        )
    }
}

/// Records of one sweep plus the number of solver cells that did not
/// converge.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<ExperimentRecord>,
    pub nonconverged: usize,
}

/// One `(d, n, p, p1, κ, trial)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub p1: f64,
    pub kappa: Option<f64>,
    pub trial: usize,
}

impl Cell {
    pub fn of(r: &ExperimentRecord) -> Self {
        Cell {
            d: r.d,
            n: r.n,
            p: r.p,
            p1: r.p1,
            kappa: r.kappa,
            trial: r.trial,
        }
    }
}

/// Seed of the measurement graph for one cell.
pub fn trial_seed(master: u64, experiment: Experiment, cell: &Cell) -> u64 {
    derive_seed(
        master,
        &[
            experiment.key(),
            cell.d as u64,
            cell.n as u64,
            real_key(cell.p),
            real_key(cell.p1),
            cell.kappa.map_or(NO_KAPPA_KEY, real_key),
            cell.trial as u64,
        ],
    )
}

fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let kappas: Vec<Option<f64>> = if config.kappa.is_empty() {
        vec![None]
    } else {
        config.kappa.iter().copied().map(Some).collect()
    };
    let mut out = Vec::new();
    for &d in &config.d {
        for &n in &config.n {
            for &p in &config.p_values() {
                for &p1 in &config.p1_values() {
                    for &kappa in &kappas {
                        for trial in 0..config.trials {
                            out.push(Cell {
                                d,
                                n,
                                p,
                                p1,
                                kappa,
                                trial,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

fn method_index(m: Method) -> u64 {
    Method::ALL.iter().position(|&x| x == m).expect("known method") as u64
}

fn trace_path(dir: &Path, config: &ExperimentConfig, cell: &Cell, method: Method) -> std::path::PathBuf {
    let kappa = cell.kappa.map_or_else(|| "none".to_string(), |k| k.to_string());
    dir.join(format!(
        "trace_{}_d{}_n{}_p{}_p1{}_k{}_{}_t{}.csv",
        config.experiment, cell.d, cell.n, cell.p, cell.p1, kappa, method, cell.trial
    ))
}

fn run_cell(config: &ExperimentConfig, cell: &Cell) -> Result<Vec<ExperimentRecord>> {
    let seed = trial_seed(config.seed, config.experiment, cell);
    let model = GraphModel::complete(cell.n, cell.d, cell.p)
        .with_p1(cell.p1)
        .with_kappa(cell.kappa);
    let graph = model.generate(seed)?;
    let truth = graph.truth.as_ref().ok_or(Error::MissingTruth)?;
    let true_gram = gram_from_rotations(truth);
    let mut solver = config.solver.clone();
    solver.trace = config.trace_dir.is_some();

    let mut records = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let start = Instant::now();
        let mut rng = child_stream(seed, method_index(method) + 1);
        let (estimate, gram, report): (_, Option<GramMatrix>, Option<ConvergenceReport>) = match method {
            Method::Eig => (solve_eig(&graph)?, None, None),
            Method::Lud | Method::Sdp => {
                let (gram, report) = if method == Method::Lud {
                    solve_lud(&graph, &solver)?
                } else {
                    solve_sdp_ls(&graph, &solver)?
                };
                let est = round(&gram, config.rounding, &mut rng)?;
                (est, Some(gram), Some(report))
            }
        };
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        let re = match &gram {
            Some(g) => relative_error(&g.matrix, &true_gram)?,
            None => relative_error(&gram_from_rotations(&estimate.rotations), &true_gram)?,
        };
        let eval = mse(&estimate.rotations, truth)?;
        let converged = report.as_ref().is_none_or(|r| r.converged);
        if let (Some(dir), Some(report)) = (&config.trace_dir, &report) {
            let file = std::fs::File::create(trace_path(Path::new(dir), config, cell, method))?;
            write_trace_csv(&report.trace, std::io::BufWriter::new(file))?;
        }
        if !converged {
            warn!(
                "{method} did not converge (d={}, n={}, p={}, p1={}, trial={})",
                cell.d, cell.n, cell.p, cell.p1, cell.trial
            );
        }
        records.push(ExperimentRecord {
            experiment: config.experiment,
            d: cell.d,
            n: cell.n,
            p: cell.p,
            p1: cell.p1,
            kappa: cell.kappa,
            method,
            rounding: if method == Method::Eig {
                Rounding::Deterministic
            } else {
                config.rounding
            },
            trial: cell.trial,
            seed,
            re,
            mse: eval.mse,
            iterations: report.as_ref().map_or(0, |r| r.iterations),
            runtime_ms,
            converged,
        });
    }
    Ok(records)
}

/// Runs every cell of a solver experiment (E1 to E4) in parallel and returns
/// the records sorted by their keys.
pub fn run_records(config: &ExperimentConfig) -> Result<RunOutput> {
    if !matches!(
        config.experiment,
        Experiment::E1 | Experiment::E2 | Experiment::E3 | Experiment::E4
    ) {
        return Err(Error::InvalidParameter(format!(
            "{} is not a solver experiment",
            config.experiment
        )));
    }
    config.validate()?;
    if matches!(config.experiment, Experiment::E3 | Experiment::E4) {
        for &n in &config.n {
            let threshold = 2.0 * (n as f64).ln() / n as f64;
            for &p1 in &config.p1_values() {
                if p1 < threshold {
                    warn!("p1 = {p1} is below 2 ln(n)/n = {threshold:.4} for n = {n}; graphs may be disconnected");
                }
            }
        }
    }
    if let Some(dir) = &config.trace_dir {
        std::fs::create_dir_all(dir)?;
    }
    let cells = cells(config);
    info!(
        "{}: {} cells x {} methods",
        config.experiment,
        cells.len(),
        config.methods.len()
    );
    let nested: Vec<Vec<ExperimentRecord>> = cells
        .par_iter()
        .map(|cell| run_cell(config, cell))
        .collect::<Result<_>>()?;
    let mut records: Vec<ExperimentRecord> = nested.into_iter().flatten().collect();
    records.sort_by_key(|r| r.sort_key());
    let nonconverged = records.iter().filter(|r| !r.converged).count();
    Ok(RunOutput {
        records,
        nonconverged,
    })
}

fn expect_kind(config: &ExperimentConfig, kinds: &[Experiment]) -> Result<()> {
    if kinds.contains(&config.experiment) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "config is for {}, expected one of {kinds:?}",
            config.experiment
        )))
    }
}

/// Exact recovery sweep on complete graphs with exact good edges.
pub fn run_e1(config: &ExperimentConfig) -> Result<RunOutput> {
    expect_kind(config, &[Experiment::E1])?;
    run_records(config)
}

/// Stability sweep with von Mises–Fisher perturbed good edges.
pub fn run_e2(config: &ExperimentConfig) -> Result<RunOutput> {
    expect_kind(config, &[Experiment::E2])?;
    run_records(config)
}

/// Incomplete-graph sweep over `(p1, p)` (E3) or `(p1, p, κ)` (E4).
pub fn run_e3_e4(config: &ExperimentConfig) -> Result<RunOutput> {
    expect_kind(config, &[Experiment::E3, Experiment::E4])?;
    run_records(config)
}

/// Aggregate over the trials of one `(d, n, p, p1, κ, method)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: Experiment,
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub p1: f64,
    pub kappa: Option<f64>,
    pub method: Method,
    pub trials: usize,
    pub mean_re: f64,
    pub mean_mse: f64,
    pub median_mse: f64,
    /// Mean of `log10(max(mse, 1e-300))`.
    pub mean_log10_mse: f64,
    pub mean_iterations: f64,
    pub nonconverged: usize,
}

/// Groups sorted records by everything except the trial.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let head = &records[start];
        let same = |r: &ExperimentRecord| {
            r.d == head.d
                && r.n == head.n
                && r.p == head.p
                && r.p1 == head.p1
                && r.kappa == head.kappa
                && r.method == head.method
        };
        let end = start + records[start..].iter().take_while(|r| same(r)).count();
        let group = &records[start..end];
        let res: Vec<f64> = group.iter().map(|r| r.re).collect();
        let mses: Vec<f64> = group.iter().map(|r| r.mse).collect();
        let logs: Vec<f64> = mses.iter().map(|m| m.max(1e-300).log10()).collect();
        let iters: Vec<f64> = group.iter().map(|r| r.iterations as f64).collect();
        out.push(SummaryRow {
            experiment: head.experiment,
            d: head.d,
            n: head.n,
            p: head.p,
            p1: head.p1,
            kappa: head.kappa,
            method: head.method,
            trials: group.len(),
            mean_re: mean(&res),
            mean_mse: mean(&mses),
            median_mse: median(&mses),
            mean_log10_mse: mean(&logs),
            mean_iterations: mean(&iters),
            nonconverged: group.iter().filter(|r| !r.converged).count(),
        });
        start = end;
    }
    out
}

/// One point `(d, p1, p_c(d, p1))` of the theoretical recovery curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryPoint {
    pub d: usize,
    pub p1: f64,
    pub p_c: f64,
}

/// `p_c(d, p1)` on the configured `p1` grid, for every configured `d`.
pub fn theory_curve(config: &ExperimentConfig) -> Result<Vec<TheoryPoint>> {
    let mut out = Vec::new();
    for &d in &config.d {
        let constants = constants_for(d, config)?;
        for &p1 in &config.p1_values() {
            out.push(TheoryPoint {
                d,
                p1,
                p_c: critical_probability(d, p1, &constants)?,
            });
        }
    }
    Ok(out)
}

fn constants_for(d: usize, config: &ExperimentConfig) -> Result<TheoryConstants> {
    let mut rng = stream(derive_seed(config.seed, &[Experiment::Constants.key(), d as u64]));
    c_of_d(d, &mut rng, config.mc_samples)
}

/// Spectral statistics of the bad-edge perturbation matrix `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemicircleReport {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub trial: usize,
    pub seed: u64,
    /// `sqrt((1 − p)(1/d − c(d)²))`.
    pub sigma_theory: f64,
    /// Largest `|λ|` of `D/√(n−1)`.
    pub edge_max: f64,
    /// Kolmogorov–Smirnov distance between the spectrum of `D/√(n−1)` and
    /// the semicircle law with variance `sigma_theory²`.
    pub ks_distance: f64,
    /// Sum of squared positive eigenvalues of `D`.
    pub d_plus_sq: f64,
    /// Sum of squared negative eigenvalues of `D`.
    pub d_minus_sq: f64,
    /// `½(1 − p)n(n − 1)(1 − c(d)²d)`.
    pub predicted_sq: f64,
}

/// CDF of the semicircle law with variance `sigma²` (support `±2σ`).
pub fn semicircle_cdf(x: f64, sigma: f64) -> f64 {
    let r = 2.0 * sigma;
    if x <= -r {
        return 0.0;
    }
    if x >= r {
        return 1.0;
    }
    let s2 = sigma * sigma;
    0.5 + x * (r * r - x * x).sqrt() / (4.0 * std::f64::consts::PI * s2)
        + (x / r).asin() / std::f64::consts::PI
}

/// Builds `D` in the frame where the truth is the identity: each bad edge
/// contributes `(I − R_ij)/‖I − R_ij‖_F − c(d)·I` at `(i, j)` and its
/// transpose at `(j, i)`; all other blocks are zero.
pub fn perturbation_matrix(graph: &crate::MeasurementGraph, c_d: f64) -> Result<DMatrix<f64>> {
    let mask = graph
        .good_mask
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("graph has no good/bad labels".into()))?;
    let canon = graph.canonicalize_to_identity()?;
    let (n, d) = (graph.n, graph.d);
    let eye = DMatrix::<f64>::identity(d, d);
    let mut dm = DMatrix::<f64>::zeros(n * d, n * d);
    for (e, &good) in canon.edges.iter().zip(mask) {
        if good {
            continue;
        }
        let diff = &eye - e.ratio.matrix();
        let norm = diff.norm();
        if norm == 0.0 {
            continue;
        }
        let blk = diff / norm - &eye * c_d;
        block_mut(&mut dm, d, e.i, e.j).copy_from(&blk);
        block_mut(&mut dm, d, e.j, e.i).copy_from(&blk.transpose());
    }
    Ok(dm)
}

/// Semicircle diagnostic for every `(d, n, p, trial)` cell.
pub fn run_semicircle(config: &ExperimentConfig) -> Result<Vec<SemicircleReport>> {
    expect_kind(config, &[Experiment::Semicircle])?;
    config.validate()?;
    if config.kappa.iter().len() > 0 || config.p1_values() != [1.0] {
        return Err(Error::InvalidParameter(
            "the semicircle diagnostic uses complete graphs with exact good edges".into(),
        ));
    }
    let mut jobs = Vec::new();
    for &d in &config.d {
        for &n in &config.n {
            if n < 200 {
                warn!("n = {n} is small for the semicircle limit; expect loose statistics");
            }
            for &p in &config.p_values() {
                for trial in 0..config.trials {
                    jobs.push((d, n, p, trial));
                }
            }
        }
    }
    let mut reports: Vec<SemicircleReport> = jobs
        .par_iter()
        .map(|&(d, n, p, trial)| semicircle_cell(config, d, n, p, trial))
        .collect::<Result<_>>()?;
    reports.sort_by_key(|r| (r.d, r.n, real_key(r.p), r.trial));
    Ok(reports)
}

fn semicircle_cell(
    config: &ExperimentConfig,
    d: usize,
    n: usize,
    p: f64,
    trial: usize,
) -> Result<SemicircleReport> {
    let constants = constants_for(d, config)?;
    let c = constants.c_d;
    let cell = Cell {
        d,
        n,
        p,
        p1: 1.0,
        kappa: None,
        trial,
    };
    let seed = trial_seed(config.seed, Experiment::Semicircle, &cell);
    let graph = GraphModel::complete(n, d, p).generate(seed)?;
    let dm = perturbation_matrix(&graph, c)?;
    let values = sym_eigenvalues(&dm)?;
    let scale = 1.0 / ((n - 1) as f64).sqrt();
    let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
    let sigma = ((1.0 - p) * (1.0 / d as f64 - c * c)).max(0.0).sqrt();
    let edge_max = scaled.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ks_distance = if sigma > 0.0 {
        ks_one_sample(&scaled, |x| semicircle_cdf(x, sigma))
    } else {
        0.0
    };
    let d_plus_sq = values.iter().filter(|&&v| v > 0.0).map(|v| v * v).sum();
    let d_minus_sq = values.iter().filter(|&&v| v < 0.0).map(|v| v * v).sum();
    let predicted_sq = 0.5 * (1.0 - p) * (n * (n - 1)) as f64 * (1.0 - c * c * d as f64);
    Ok(SemicircleReport {
        n,
        d,
        p,
        trial,
        seed,
        sigma_theory: sigma,
        edge_max,
        ks_distance,
        d_plus_sq,
        d_minus_sq,
        predicted_sq,
    })
}

/// One row of the constants table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsRow {
    pub constants: TheoryConstants,
    pub lower: f64,
    pub upper: f64,
    /// `p_c(d)`, the complete-graph threshold.
    pub p_c: f64,
    pub p1: f64,
    pub p_c_p1: f64,
}

/// `c(d)`, `c₁(d)`, the bounds on `c(d)` and the critical probabilities for
/// every configured `d` and `p1`.
pub fn run_constants(config: &ExperimentConfig) -> Result<Vec<ConstantsRow>> {
    expect_kind(config, &[Experiment::Constants])?;
    config.validate()?;
    let per_d: Vec<(usize, TheoryConstants)> = config
        .d
        .par_iter()
        .map(|&d| constants_for(d, config).map(|c| (d, c)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (d, constants) in per_d {
        let (lower, upper) = c_bounds(d);
        let p_c = critical_probability(d, 1.0, &constants)?;
        for &p1 in &config.p1_values() {
            rows.push(ConstantsRow {
                constants: constants.clone(),
                lower,
                upper,
                p_c,
                p1,
                p_c_p1: critical_probability(d, p1, &constants)?,
            });
        }
    }
    Ok(rows)
}
