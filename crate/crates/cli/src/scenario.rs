//! Subcommand drivers. Everything returns `Ok(pass)` so `main` owns the exit
//! codes: pass=false exits 1, usage errors exit 2.

use crate::artifacts;
use crate::config::{self, CliError, Result, ScenarioConfig};
use calabiflow_core::analytics::{
    certify_series, records_certificates, CertificateReport, CertificateResult,
};
use calabiflow_core::flow;
use calabiflow_core::geometry::{self, CaseLabel};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Human-readable trichotomy summary; no flow run involved.
pub fn classify_text(config: &ScenarioConfig) -> String {
    let case = geometry::classify_singularity(config.params, config.cls0);
    let t_sing = config.t_sing();
    let n = config.params.n();
    let k = config.params.k();
    let limit = match case {
        CaseLabel::CollapseToBase => {
            let a_lim = geometry::limit_a(config.params, config.cls0);
            format!("(ℙ^{}, a_T·g_FS) with a_T = {a_lim}", n - 1)
        }
        CaseLabel::ShrinkToPoint => "point (diameter → 0)".to_string(),
        CaseLabel::ContractDivisor => {
            format!("orbifold completion ℙ^{n}/ℤ_{k} (zero section contracted)")
        }
    };
    format!("case: {case}\nT: {t_sing}\nlimit: {limit}\n")
}

fn certificate_lines(certs: &[CertificateResult], out: &mut String) {
    for c in certs {
        let mark = if c.pass { "PASS" } else { "FAIL" };
        let prov = if c.provisional { " [provisional]" } else { "" };
        let _ = writeln!(
            out,
            "  [{mark}] {:<24} statistic {:.6e} vs threshold {:.6e}{prov}",
            c.name, c.statistic, c.threshold
        );
    }
}

pub struct RunOutcome {
    pub report: CertificateReport,
    pub summary: String,
}

/// Integrates the scenario, writes the three artifacts, and assembles the
/// stdout summary. `RunOutcome.report.pass` decides the exit code.
pub fn execute(config: &ScenarioConfig) -> Result<RunOutcome> {
    let series = flow::run(&config.run_config())
        .map_err(|e| CliError::Run(format!("flow run failed: {e}")))?;
    let report =
        certify_series(&series).map_err(|e| CliError::Run(format!("certification failed: {e}")))?;

    let dir = &config.out_dir;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Run(format!("cannot create {}: {e}", dir.display())))?;
    let records: Vec<_> = series.iter().map(|s| s.diag).collect();
    artifacts::atomic_write(
        &dir.join("series.csv"),
        artifacts::csv_text(&records).as_bytes(),
    )
    .map_err(|e| CliError::Run(format!("cannot write series.csv: {e}")))?;
    artifacts::atomic_write(&dir.join("scenario.txt"), config.to_kv_text().as_bytes())
        .map_err(|e| CliError::Run(format!("cannot write scenario.txt: {e}")))?;
    artifacts::write_report(&dir.join("report.json"), &report)?;

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "case: {}\nT: {}\nsnapshots: {} (t_stop = {})",
        report.case,
        report.singular_time,
        series.len(),
        config.run_config().t_stop,
    );
    let _ = writeln!(summary, "wrote {}", dir.join("series.csv").display());
    let _ = writeln!(summary, "wrote {}", dir.join("report.json").display());
    let _ = writeln!(summary, "wrote {}", dir.join("scenario.txt").display());
    certificate_lines(&report.certificates, &mut summary);
    let verdict = if report.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(summary, "overall: {verdict}");
    Ok(RunOutcome { report, summary })
}

/// Re-checks an existing run directory: series-level certificates are
/// recomputed from series.csv; profile-level ones (which need per-node data
/// that the CSV does not carry) are taken over from report.json when present.
pub fn certify_dir(dir: &Path) -> Result<(bool, String)> {
    let scenario_path = dir.join("scenario.txt");
    let text = std::fs::read_to_string(&scenario_path).map_err(|e| {
        CliError::Usage(format!(
            "cannot read {} (not a run directory?): {e}",
            scenario_path.display()
        ))
    })?;
    let raw = config::parse_kv_text(&text, &scenario_path.display().to_string())?;
    let config = config::finalize(crate::config::RawConfig {
        out_dir: Some(dir.to_path_buf()),
        ..raw
    })?;

    let csv_path = dir.join("series.csv");
    let csv = std::fs::read_to_string(&csv_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", csv_path.display())))?;
    let records = artifacts::parse_csv(&csv, &csv_path.display().to_string())?;
    let recomputed = records_certificates(config.params, config.cls0, &records)
        .map_err(|e| CliError::Run(format!("certification failed: {e}")))?;

    let report_path = dir.join("report.json");
    let carried: Vec<CertificateResult> = if report_path.exists() {
        let old = artifacts::read_report(&report_path)?;
        old.certificates
            .into_iter()
            .filter(|c| recomputed.iter().all(|r| r.name != c.name))
            .collect()
    } else {
        Vec::new()
    };

    let mut out = String::new();
    let _ = writeln!(out, "recomputed from series.csv:");
    certificate_lines(&recomputed, &mut out);
    if carried.is_empty() {
        let _ = writeln!(out, "carried from report.json: none");
    } else {
        let _ = writeln!(out, "carried from report.json (profile-level):");
        certificate_lines(&carried, &mut out);
    }
    let pass = recomputed
        .iter()
        .chain(&carried)
        .all(|c| c.pass || c.provisional);
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(out, "overall: {verdict}");
    Ok((pass, out))
}

/// Runs every scenario in the batch; returns per-scenario one-line verdicts
/// in file order. Fails fast (before any run) on unparsable lines or
/// colliding output directories.
pub fn run_batch(configs: &[ScenarioConfig], jobs: usize) -> Result<(bool, String)> {
    for (i, a) in configs.iter().enumerate() {
        for b in &configs[..i] {
            if a.out_dir == b.out_dir {
                return Err(CliError::Usage(format!(
                    "duplicate out_dir `{}` in batch",
                    a.out_dir.display()
                )));
            }
        }
    }
    let jobs = jobs.clamp(1, configs.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<RunOutcome>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let outcome = execute(&configs[i]);
                *results[i].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut all_pass = true;
    let mut out = String::new();
    for (config, slot) in configs.iter().zip(&results) {
        let dir = config.out_dir.display();
        match slot
            .lock()
            .unwrap()
            .take()
            .expect("worker filled every slot")
        {
            Ok(outcome) => {
                let failed: Vec<&str> = outcome
                    .report
                    .certificates
                    .iter()
                    .filter(|c| !c.pass && !c.provisional)
                    .map(|c| c.name.as_str())
                    .collect();
                if failed.is_empty() {
                    let _ = writeln!(
                        out,
                        "{dir}: PASS ({}, T = {})",
                        outcome.report.case, outcome.report.singular_time
                    );
                } else {
                    all_pass = false;
                    let _ = writeln!(out, "{dir}: FAIL ({})", failed.join(", "));
                }
            }
            Err(e) => {
                all_pass = false;
                let _ = writeln!(out, "{dir}: ERROR ({e})");
            }
        }
    }
    Ok((all_pass, out))
}
