use std::fmt;
use std::str::FromStr;

use crate::adm::{EigBackend, SolverOptions};
use crate::error::{Error, Result};
use crate::evaluate::{Method, Rounding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    E1,
    E2,
    E3,
    E4,
    Semicircle,
    Constants,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::E1 => "e1",
            Experiment::E2 => "e2",
            Experiment::E3 => "e3",
            Experiment::E4 => "e4",
            Experiment::Semicircle => "semicircle",
            Experiment::Constants => "constants",
        }
    }

    /// Stable key mixed into trial seeds.
    pub(crate) fn key(self) -> u64 {
        match self {
            Experiment::E1 => 1,
            Experiment::E2 => 2,
            Experiment::E3 => 3,
            Experiment::E4 => 4,
            Experiment::Semicircle => 5,
            Experiment::Constants => 6,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "e1" => Ok(Experiment::E1),
            "e2" => Ok(Experiment::E2),
            "e3" => Ok(Experiment::E3),
            "e4" => Ok(Experiment::E4),
            "semicircle" => Ok(Experiment::Semicircle),
            "constants" => Ok(Experiment::Constants),
            other => Err(Error::InvalidParameter(format!("unknown experiment `{other}`"))),
        }
    }
}

pub const DEFAULT_TRIALS: usize = 10;
pub const DEFAULT_GRID_STEP: f64 = 0.05;
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub d: Vec<usize>,
    pub n: Vec<usize>,
    pub p: Vec<f64>,
    pub p1: Vec<f64>,
    pub kappa: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub seed: u64,
    pub solver: SolverOptions,
    pub rounding: Rounding,
    /// Heatmap resolution used when E3/E4 grids are not given explicitly.
    pub grid_step: f64,
    pub mc_samples: usize,
    pub out: Option<String>,
    /// Directory for per-solve iteration traces.
    pub trace_dir: Option<String>,
}

impl ExperimentConfig {
    /// Defaults for `experiment`; parameter lists start empty except where a
    /// single value is implied (`p1 = 1` for E1/E2).
    pub fn new(experiment: Experiment) -> Self {
        let p1 = match experiment {
            Experiment::E1 | Experiment::E2 | Experiment::Semicircle | Experiment::Constants => vec![1.0],
            Experiment::E3 | Experiment::E4 => Vec::new(),
        };
        let d = match experiment {
            Experiment::Constants => vec![2, 3, 4],
            _ => vec![2],
        };
        ExperimentConfig {
            experiment,
            d,
            n: vec![100],
            p: Vec::new(),
            p1,
            kappa: Vec::new(),
            methods: Method::ALL.to_vec(),
            trials: DEFAULT_TRIALS,
            seed: 42,
            solver: SolverOptions::default(),
            rounding: Rounding::Deterministic,
            grid_step: DEFAULT_GRID_STEP,
            mc_samples: DEFAULT_MC_SAMPLES,
            out: None,
            trace_dir: None,
        }
    }

    /// Sets one key. Keys mirror the CLI flags, with `-` and `_`
    /// interchangeable; list values are comma separated.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "experiment" => {
                let e: Experiment = value.parse()?;
                if e != self.experiment {
                    return Err(Error::InvalidParameter(format!(
                        "config is for `{e}` but `{}` was requested",
                        self.experiment
                    )));
                }
            }
            "d" => self.d = parse_list(&key, value)?,
            "n" => self.n = parse_list(&key, value)?,
            "p" => self.p = parse_list(&key, value)?,
            "p1" => self.p1 = parse_list(&key, value)?,
            "kappa" => self.kappa = parse_list(&key, value)?,
            "methods" => self.methods = parse_list(&key, value)?,
            "trials" => self.trials = parse_one(&key, value)?,
            "seed" => self.seed = parse_one(&key, value)?,
            "solver_tol" | "tol" => self.solver.tol = parse_one(&key, value)?,
            "max_iter" => self.solver.max_iter = parse_one(&key, value)?,
            "gamma" => self.solver.gamma = parse_one(&key, value)?,
            "mu" => self.solver.mu = parse_one(&key, value)?,
            "mu_adapt" => self.solver.mu_adapt = parse_one(&key, value)?,
            "eig" => self.solver.eig = parse_one::<EigBackend>(&key, value)?,
            "rounding" => self.rounding = parse_one(&key, value)?,
            "grid_step" => self.grid_step = parse_one(&key, value)?,
            "mc_samples" => self.mc_samples = parse_one(&key, value)?,
            "out" => self.out = Some(value.to_string()),
            "trace_dir" => self.trace_dir = Some(value.to_string()),
            other => return Err(Error::InvalidParameter(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.apply(key, value).map_err(|e| Error::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// The `p` values actually swept: the configured list, or for E3/E4 the
    /// grid `step, 2·step, …, 1`.
    pub fn p_values(&self) -> Vec<f64> {
        if self.p.is_empty() && matches!(self.experiment, Experiment::E3 | Experiment::E4) {
            grid(self.grid_step)
        } else {
            self.p.clone()
        }
    }

    pub fn p1_values(&self) -> Vec<f64> {
        if self.p1.is_empty() && matches!(self.experiment, Experiment::E3 | Experiment::E4) {
            grid(self.grid_step)
        } else {
            self.p1.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.d.is_empty() || self.n.is_empty() {
            return bad("d and n lists must be non-empty".into());
        }
        if let Some(&d) = self.d.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(d));
        }
        if self.n.iter().any(|&n| n < 2) {
            return bad("every n must be at least 2".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) {
            return bad(format!("grid_step must lie in (0, 1], got {}", self.grid_step));
        }
        let p = self.p_values();
        let p1 = self.p1_values();
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("p values must lie in [0, 1]".into());
        }
        if p1.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
            return bad("p1 values must lie in (0, 1]".into());
        }
        if self.kappa.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return bad("kappa values must be positive".into());
        }
        self.solver.validate()?;
        let needs_p = !matches!(self.experiment, Experiment::Constants);
        if needs_p && p.is_empty() {
            return bad(format!("{} needs at least one p value", self.experiment));
        }
        if p1.is_empty() {
            return bad("p1 list must be non-empty".into());
        }
        match self.experiment {
            Experiment::E1 | Experiment::E3 if !self.kappa.is_empty() => {
                return bad(format!("{} uses exact good edges; drop kappa", self.experiment));
            }
            Experiment::E2 | Experiment::E4 if self.kappa.is_empty() => {
                return bad(format!("{} needs at least one kappa value", self.experiment));
            }
            _ => {}
        }
        if matches!(self.experiment, Experiment::E1 | Experiment::E2) && p1 != [1.0] {
            return bad(format!(
                "{} runs on complete graphs; p1 must be 1",
                self.experiment
            ));
        }
        if matches!(
            self.experiment,
            Experiment::E1 | Experiment::E2 | Experiment::E3 | Experiment::E4
        ) && self.methods.is_empty()
        {
            return bad("methods must be non-empty".into());
        }
        if self.experiment == Experiment::Constants
            && self.d.iter().any(|&d| d >= 4)
            && self.mc_samples < crate::so_group::MIN_MC_SAMPLES
        {
            return bad(format!(
                "mc_samples must be at least {} for d >= 4",
                crate::so_group::MIN_MC_SAMPLES
            ));
        }
        Ok(())
    }
}

fn grid(step: f64) -> Vec<f64> {
    let count = (1.0 / step + 1e-9).floor() as usize;
    (1..=count)
        .map(|k| ((k as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("cannot parse `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}
