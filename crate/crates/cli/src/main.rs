//! `rotsync`: runs the synchronization experiments and writes CSV.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use rotsync::experiments::{
    run_constants, run_records, run_semicircle, summarize, theory_curve, write_constants_csv,
    write_heatmap_csv, write_records_csv, write_semicircle_csv, write_summary_csv, write_theory_csv,
    Experiment, ExperimentConfig,
};
use rotsync::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "rotsync", version, about = "Rotation synchronization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact recovery on complete graphs.
    E1(Flags),
    /// Stability under von Mises-Fisher noise on good edges.
    E2(Flags),
    /// Phase transition on incomplete graphs.
    E3(Flags),
    /// Incomplete graphs with noisy good edges.
    E4(Flags),
    /// Spectrum of the bad-edge perturbation matrix.
    Semicircle(Flags),
    /// Table of c(d), c1(d) and critical probabilities.
    Constants(Flags),
}

/// Every flag overrides the matching key of `--config`.
#[derive(Args, Debug, Default)]
struct Flags {
    /// Flat `key = value` file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    p1: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    /// Comma separated subset of eig,sdp,lud.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Records CSV; companion files are written next to it. Stdout if absent.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    solver_tol: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    /// det or rand.
    #[arg(long)]
    rounding: Option<String>,
    /// Eigensolver for the W step: auto, dense or partial.
    #[arg(long)]
    eig: Option<String>,
    #[arg(long)]
    mc_samples: Option<String>,
    #[arg(long)]
    grid_step: Option<String>,
    /// Directory for per-solve iteration traces.
    #[arg(long)]
    trace_dir: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let fields: [(&'static str, &Option<String>); 18] = [
            ("d", &self.d),
            ("n", &self.n),
            ("p", &self.p),
            ("p1", &self.p1),
            ("kappa", &self.kappa),
            ("methods", &self.methods),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("out", &self.out),
            ("solver_tol", &self.solver_tol),
            ("max_iter", &self.max_iter),
            ("gamma", &self.gamma),
            ("mu", &self.mu),
            ("rounding", &self.rounding),
            ("eig", &self.eig),
            ("mc_samples", &self.mc_samples),
            ("grid_step", &self.grid_step),
            ("trace_dir", &self.trace_dir),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }
}

fn build_config(experiment: Experiment, flags: &Flags) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::new(experiment);
    if let Some(path) = &flags.config {
        config.apply_text(&std::fs::read_to_string(path)?)?;
    }
    for (key, value) in flags.pairs() {
        config.apply(key, value)?;
    }
    config.validate()?;
    Ok(config)
}

fn open_out(path: Option<&str>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `dir/stem.csv` becomes `dir/stem_<suffix>.csv`.
fn companion(path: &str, suffix: &str) -> PathBuf {
    let p = Path::new(path);
    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    p.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn run(experiment: Experiment, config: &ExperimentConfig) -> Result<usize, Error> {
    let out = config.out.as_deref();
    match experiment {
        Experiment::Semicircle => {
            let reports = run_semicircle(config)?;
            write_semicircle_csv(&reports, open_out(out)?)?;
            Ok(0)
        }
        Experiment::Constants => {
            let rows = run_constants(config)?;
            write_constants_csv(&rows, open_out(out)?)?;
            Ok(0)
        }
        _ => {
            let output = run_records(config)?;
            write_records_csv(&output.records, open_out(out)?)?;
            if let Some(path) = out {
                let summary = summarize(&output.records);
                let file = companion(path, "summary");
                write_summary_csv(&summary, BufWriter::new(File::create(&file)?))?;
                info!("summary written to {}", file.display());
                if matches!(experiment, Experiment::E3 | Experiment::E4) {
                    let file = companion(path, "heatmap");
                    write_heatmap_csv(&summary, BufWriter::new(File::create(&file)?))?;
                    let file = companion(path, "theory");
                    write_theory_csv(&theory_curve(config)?, BufWriter::new(File::create(&file)?))?;
                }
            }
            Ok(output.nonconverged)
        }
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter(_) | Error::InvalidDimension(_) | Error::Parse { .. } | Error::Unsupported(_)
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (experiment, flags) = match &cli.command {
        Command::E1(f) => (Experiment::E1, f),
        Command::E2(f) => (Experiment::E2, f),
        Command::E3(f) => (Experiment::E3, f),
        Command::E4(f) => (Experiment::E4, f),
        Command::Semicircle(f) => (Experiment::Semicircle, f),
        Command::Constants(f) => (Experiment::Constants, f),
    };
    let config = match build_config(experiment, flags) {
        Ok(c) => c,
        Err(e) => {
            error!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(experiment, &config) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(count) => {
            error!("{count} solver cell(s) did not converge; rows were still written");
            ExitCode::from(EXIT_NONCONVERGED)
        }
        Err(e) if is_config_error(&e) => {
            error!("configuration error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
