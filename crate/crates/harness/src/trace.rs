use std::path::Path;

use shiftinvert::power::TraceRow;

use crate::error::Result;

/// One row per iteration: iteration, phase, accepted, rayleigh,
/// rayleigh_error, g_proxy, cumulative_work.
pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["iteration", "phase", "accepted", "rayleigh", "rayleigh_error", "g_proxy", "cumulative_work"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
