//! On-disk artifacts for a run directory: `series.csv` (byte-deterministic
//! time series), `report.json` (certificates + stability data), and
//! `scenario.txt` (the resolved configuration, key=value). All writes go
//! through a same-directory temp file plus rename, so readers never observe
//! a half-written artifact.

use crate::config::{CliError, Result};
use calabiflow_core::analytics::{CertificateReport, DiagnosticsRecord};
use std::path::Path;

/// Exact column contract for series.csv. `utr_min`/`utr_max` are deliberately
/// not exported here; they live in report.json only.
pub const CSV_HEADER: &str = "t,a_t,b_t,volume,usec_max,fiber_len,fiber_diam_bound,\
tr_chi_max,trace_ref_max,H_max,contraction_env,gh_bound,phi_tilde_sup";

pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    std::fs::write(tmp, bytes)?;
    std::fs::rename(tmp, path)
}

fn csv_fields(r: &DiagnosticsRecord) -> [f64; 13] {
    [
        r.t,
        r.a_t,
        r.b_t,
        r.volume,
        r.usec_max,
        r.fiber_len,
        r.fiber_diam_bound,
        r.tr_chi_max,
        r.trace_ref_max,
        r.h_max,
        r.contraction_env,
        r.gh_bound,
        r.phi_tilde_sup,
    ]
}

/// Renders the series with 17 significant digits (`{:.16e}`): every f64
/// round-trips exactly, so re-certification from disk sees the run's own
/// numbers bit for bit.
pub fn csv_text(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 24 * 13);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let fields = csv_fields(r);
        for (i, v) in fields.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

/// Parses a series.csv produced by [`csv_text`]. The header must match the
/// contract exactly. The two report-only fields absent from the CSV come back
/// as 0 and must not be consulted by the caller.
pub fn parse_csv(text: &str, source: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        Some(h) => {
            return Err(CliError::Usage(format!(
                "{source}: unexpected header `{h}`"
            )))
        }
        None => return Err(CliError::Usage(format!("{source}: empty file"))),
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(CliError::Usage(format!(
                "{source}:{}: expected 13 fields, got {}",
                idx + 2,
                fields.len()
            )));
        }
        let mut vals = [0.0f64; 13];
        for (slot, field) in vals.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| {
                CliError::Usage(format!("{source}:{}: bad numeric field `{field}`", idx + 2))
            })?;
        }
        records.push(DiagnosticsRecord {
            t: vals[0],
            a_t: vals[1],
            b_t: vals[2],
            volume: vals[3],
            usec_max: vals[4],
            utr_min: 0.0,
            utr_max: 0.0,
            fiber_len: vals[5],
            fiber_diam_bound: vals[6],
            tr_chi_max: vals[7],
            trace_ref_max: vals[8],
            h_max: vals[9],
            contraction_env: vals[10],
            gh_bound: vals[11],
            phi_tilde_sup: vals[12],
        });
    }
    if records.is_empty() {
        return Err(CliError::Usage(format!("{source}: no data rows")));
    }
    Ok(records)
}

pub fn write_report(path: &Path, report: &CertificateReport) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Run(format!("cannot serialize report: {e}")))?;
    json.push('\n');
    atomic_write(path, json.as_bytes())
        .map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}

pub fn read_report(path: &Path) -> Result<CertificateReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: invalid report: {e}", path.display())))
}
