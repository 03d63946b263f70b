//! CSV writers for experiment output. Reals use Rust's shortest round-trip
//! formatting so reruns with the same seed produce identical bytes, except
//! for the runtime column.

use std::io::{Read, Write};

use super::{ConstantsRow, Experiment, ExperimentRecord, SemicircleReport, SummaryRow, TheoryPoint};
use crate::adm::csv_err;
use crate::error::{Error, Result};

pub const RECORD_HEADER: [&str; 14] = [
    "experiment",
    "d",
    "n",
    "p",
    "p1",
    "kappa",
    "method",
    "rounding",
    "trial",
    "seed",
    "re",
    "mse",
    "iterations",
    "runtime_ms",
];

fn kappa_field(kappa: Option<f64>) -> String {
    kappa.map_or_else(String::new, |k| k.to_string())
}

pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.experiment.to_string(),
            r.d.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.p1.to_string(),
            kappa_field(r.kappa),
            r.method.to_string(),
            r.rounding.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.re.to_string(),
            r.mse.to_string(),
            r.iterations.to_string(),
            format!("{:.3}", r.runtime_ms),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a file written by [`write_records_csv`]. The convergence flag is
/// not stored and reads back as `true`.
pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(RECORD_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut out = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = k + 2;
        let field = |i: usize| row.get(i).unwrap_or("");
        let bad = |i: usize| Error::Parse {
            line,
            message: format!("bad {} `{}`", RECORD_HEADER[i], field(i)),
        };
        macro_rules! parse {
            ($i:expr) => {
                field($i).parse().map_err(|_| bad($i))?
            };
        }
        let experiment: Experiment = field(0).parse().map_err(|_| bad(0))?;
        let kappa = if field(5).is_empty() {
            None
        } else {
            Some(parse!(5))
        };
        out.push(ExperimentRecord {
            experiment,
            d: parse!(1),
            n: parse!(2),
            p: parse!(3),
            p1: parse!(4),
            kappa,
            method: parse!(6),
            rounding: parse!(7),
            trial: parse!(8),
            seed: parse!(9),
            re: parse!(10),
            mse: parse!(11),
            iterations: parse!(12),
            runtime_ms: parse!(13),
            converged: true,
        });
    }
    Ok(out)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment",
        "d",
        "n",
        "p",
        "p1",
        "kappa",
        "method",
        "trials",
        "mean_re",
        "mean_mse",
        "median_mse",
        "mean_log10_mse",
        "mean_iterations",
        "nonconverged",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.experiment.to_string(),
            r.d.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.p1.to_string(),
            kappa_field(r.kappa),
            r.method.to_string(),
            r.trials.to_string(),
            r.mean_re.to_string(),
            r.mean_mse.to_string(),
            r.median_mse.to_string(),
            r.mean_log10_mse.to_string(),
            r.mean_iterations.to_string(),
            r.nonconverged.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format heatmap: one row per `(d, n, κ, method, p1, p)`.
pub fn write_heatmap_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "n", "kappa", "method", "p1", "p", "mean_log10_mse"])
        .map_err(csv_err)?;
    let mut sorted: Vec<&SummaryRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (a.d, a.n, a.kappa.map(f64::to_bits), a.method as u8)
            .cmp(&(b.d, b.n, b.kappa.map(f64::to_bits), b.method as u8))
            .then(a.p1.total_cmp(&b.p1))
            .then(a.p.total_cmp(&b.p))
    });
    for r in sorted {
        w.write_record([
            r.d.to_string(),
            r.n.to_string(),
            kappa_field(r.kappa),
            r.method.to_string(),
            r.p1.to_string(),
            r.p.to_string(),
            r.mean_log10_mse.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_theory_csv<W: Write>(points: &[TheoryPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "p1", "p_c"]).map_err(csv_err)?;
    for t in points {
        w.write_record([t.d.to_string(), t.p1.to_string(), t.p_c.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_semicircle_csv<W: Write>(reports: &[SemicircleReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "d",
        "n",
        "p",
        "trial",
        "seed",
        "sigma_theory",
        "edge_max",
        "ks_distance",
        "d_plus_sq",
        "d_minus_sq",
        "predicted_sq",
    ])
    .map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.d.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.sigma_theory.to_string(),
            r.edge_max.to_string(),
            r.ks_distance.to_string(),
            r.d_plus_sq.to_string(),
            r.d_minus_sq.to_string(),
            r.predicted_sq.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_constants_csv<W: Write>(rows: &[ConstantsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "d",
        "c_d",
        "c1_d",
        "lower_bound",
        "upper_bound",
        "method",
        "mc_samples",
        "mc_stderr",
        "p_c",
        "p1",
        "p_c_p1",
    ])
    .map_err(csv_err)?;
    for r in rows {
        let c = &r.constants;
        w.write_record([
            c.d.to_string(),
            c.c_d.to_string(),
            c.c1_d.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            c.method.to_string(),
            c.mc_samples.to_string(),
            c.mc_stderr.to_string(),
            r.p_c.to_string(),
            r.p1.to_string(),
            r.p_c_p1.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
