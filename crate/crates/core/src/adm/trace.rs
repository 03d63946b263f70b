use std::io::Write;

use crate::error::Result;

/// One row of the optional per-iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub mu: f64,
    /// Rank of the negative part of `H`, which tracks the rank of `G`.
    pub rank_estimate: usize,
}

pub const TRACE_HEADER: [&str; 6] = [
    "iter",
    "objective",
    "primal_infeas",
    "dual_infeas",
    "mu",
    "rank_estimate",
];

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.iter.to_string(),
            format!("{:e}", r.objective),
            format!("{:e}", r.primal_infeas),
            format!("{:e}", r.dual_infeas),
            format!("{:e}", r.mu),
            r.rank_estimate.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> crate::error::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::error::Error::InvalidParameter(format!("csv: {other:?}")),
    }
}
