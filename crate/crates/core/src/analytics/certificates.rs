//! End-of-run certification: turns a snapshot series into named pass/fail
//! verdicts with the statistic, the threshold it was held against, and any
//! per-node violations.
//!
//! Two grades of certificate exist. Series-level certificates depend only on
//! the scalar diagnostics recorded per snapshot and can be recomputed from a
//! persisted CSV series ([`records_certificates`]); profile-level
//! certificates need the full per-node profiles and are only computable while
//! the snapshots are in memory. Qualitative "bounded for all t" statements
//! are certified as stability: the max-to-median ratio of the monitored
//! quantity over a window must stay below 2, which passes for genuinely
//! bounded evolutions and fails under the power-law blowup of a wrong-case
//! application.

use super::{contraction_growth_exponent, linear_potential_dev, AnalyticsError, DiagnosticsRecord};
use crate::flow::{FlowState, Snapshot};
use crate::geometry::{self, CaseLabel, KahlerClass, ManifoldParams};
use serde::{Deserialize, Serialize};

/// Max-to-median stability threshold for "bounded along the flow" monitors.
const STABILITY_RATIO_MAX: f64 = 2.0;
/// Decay certificates require the final value below this fraction of the
/// initial (or peak) value.
const DECAY_FRACTION: f64 = 0.05;
/// Allowed discretization slack outside the band |u'''/u''| <= k.
const UTR_SLACK: f64 = 0.05;
/// Relative tolerance for endpoint agreement with the closed-form class.
const ENDPOINT_RTOL: f64 = 1e-12;
/// Relative tolerance (times b0^n/n) for the volume identity.
const VOLUME_RTOL: f64 = 1e-6;
/// Sup-distance tolerance between the last two snapshots away from the
/// contracted divisor.
const CAUCHY_TOL: f64 = 1e-2;
/// Multiplicative slack for the late-time monotonicity of max u''.
const MONOTONE_SLACK: f64 = 1e-9;
/// Admissible window for the contraction growth exponent (provisional).
const GROWTH_WINDOW: (f64, f64) = (0.8, 1.2);
/// Cap on stored per-node violations; the count statistic is still exact.
const MAX_VIOLATIONS: usize = 1000;

/// One named verdict. `statistic` is the measured number that was compared
/// against `threshold`; `provisional` marks experimental certificates that do
/// not gate the overall pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateResult {
    pub name: String,
    pub pass: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub provisional: bool,
    pub detail: String,
}

/// A pointwise certificate failure, located in time and on the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub certificate: String,
    pub t: f64,
    pub node: usize,
    pub value: f64,
}

/// Monitored quantities per snapshot, for plotting and post-hoc inspection.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StabilitySeries {
    pub t: Vec<f64>,
    pub usec_over_remaining: Vec<f64>,
    pub r1_composite: Vec<f64>,
    pub trace_ref_max: Vec<f64>,
    pub h_max: Vec<f64>,
    pub contraction_env: Vec<f64>,
    pub gh_bound: Vec<f64>,
    pub phi_tilde_sup: Vec<f64>,
    pub volume_form_ratio: Vec<f64>,
}

/// Full certification verdict for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub case: CaseLabel,
    pub singular_time: f64,
    /// True iff every non-provisional certificate passed.
    pub pass: bool,
    pub certificates: Vec<CertificateResult>,
    pub violations: Vec<Violation>,
    pub stability: StabilitySeries,
}

impl CertificateReport {
    pub fn recompute_pass(&mut self) {
        self.pass = self.certificates.iter().all(|c| c.pass || c.provisional);
    }
}

fn cert(
    name: &str,
    pass: bool,
    statistic: f64,
    threshold: f64,
    detail: String,
) -> CertificateResult {
    CertificateResult {
        name: name.to_string(),
        pass,
        statistic,
        threshold,
        provisional: false,
        detail,
    }
}

fn median(vals: &[f64]) -> f64 {
    debug_assert!(!vals.is_empty());
    let mut sorted = vals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn max_over_median(vals: &[f64]) -> f64 {
    let max = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    max / median(vals)
}

/// Indices of the window t >= t_last/2 (always nonempty).
fn final_half_indices(ts: &[f64]) -> Vec<usize> {
    let t_half = 0.5 * ts.last().copied().unwrap_or(0.0);
    (0..ts.len()).filter(|&i| ts[i] >= t_half).collect()
}

fn stability_cert(name: &str, vals: &[f64], scope: &str) -> CertificateResult {
    let ratio = max_over_median(vals);
    cert(
        name,
        ratio <= STABILITY_RATIO_MAX,
        ratio,
        STABILITY_RATIO_MAX,
        format!("max/median of the monitor over {scope}"),
    )
}

/// Series-level certificates, computable from the scalar diagnostics alone
/// (and therefore from a persisted CSV series). The caller supplies the
/// trajectory identity; `case` picks which certificates apply. `utr_min` and
/// `utr_max` are NOT consulted here — the band check needs fields absent from
/// the CSV and is profile-level.
pub fn records_certificates(
    params: ManifoldParams,
    cls0: KahlerClass,
    records: &[DiagnosticsRecord],
) -> Result<Vec<CertificateResult>, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::EmptySeries);
    }
    let case = geometry::classify_singularity(params, cls0);
    let t_sing = geometry::singular_time(params, cls0);
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let final_half = final_half_indices(&ts);
    let mut certs = Vec::new();

    // Endpoints must track the closed-form class evolution exactly.
    let mut drift: f64 = 0.0;
    for r in records {
        let cls_t = if r.t == 0.0 {
            cls0
        } else {
            geometry::class_at(params, cls0, r.t).expect("recorded times stay below T")
        };
        drift = drift
            .max((r.a_t - cls_t.a()).abs() / cls_t.a().abs().max(f64::MIN_POSITIVE))
            .max((r.b_t - cls_t.b()).abs() / cls_t.b());
    }
    certs.push(cert(
        "endpoint_exactness",
        drift <= ENDPOINT_RTOL,
        drift,
        ENDPOINT_RTOL,
        "max relative endpoint deviation from the closed-form class evolution".into(),
    ));

    // Volume identity: the f-trapezoid volume telescopes to (b^n - a^n)/n.
    let n = params.n() as i32;
    let budget = VOLUME_RTOL * cls0.b().powi(n) / f64::from(n);
    let mut vol_err: f64 = 0.0;
    for r in records {
        let exact = (r.b_t.powi(n) - r.a_t.powi(n)) / f64::from(n);
        vol_err = vol_err.max((r.volume - exact).abs());
    }
    certs.push(cert(
        "volume_identity",
        vol_err <= budget,
        vol_err,
        budget,
        "max absolute deviation of the volume proxy from (b_t^n - a_t^n)/n".into(),
    ));

    match case {
        CaseLabel::CollapseToBase | CaseLabel::ShrinkToPoint => {
            // max u'' must decay like T - t: the normalized ratio is stable
            // and non-increasing over the final half of the run.
            let r5: Vec<f64> = final_half
                .iter()
                .map(|&i| records[i].usec_max / (t_sing - records[i].t).max(f64::MIN_POSITIVE))
                .collect();
            certs.push(stability_cert(
                "usec_decay_ratio",
                &r5,
                "max u''/(T-t) on the final half",
            ));

            let us: Vec<f64> = final_half.iter().map(|&i| records[i].usec_max).collect();
            let mut worst_rise: f64 = 1.0;
            for w in us.windows(2) {
                worst_rise = worst_rise.max(w[1] / w[0]);
            }
            certs.push(cert(
                "usec_late_monotone",
                worst_rise <= 1.0 + MONOTONE_SLACK,
                worst_rise,
                1.0 + MONOTONE_SLACK,
                "max consecutive growth factor of max u'' on the final half".into(),
            ));

            let traces: Vec<f64> = records.iter().map(|r| r.trace_ref_max).collect();
            let trace_max = traces.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let trace_budget = 3.0 * params.nf();
            certs.push(cert(
                "trace_ref_bound",
                trace_max <= trace_budget,
                trace_max,
                trace_budget,
                "max over the run of the trace against the initial reference metric".into(),
            ));
            certs.push(stability_cert(
                "trace_ref_stability",
                &traces,
                "the whole run",
            ));

            let gh0 = records[0].gh_bound;
            let gh_ratio = records.last().unwrap().gh_bound / gh0;
            certs.push(cert(
                "gh_decay",
                gh_ratio < DECAY_FRACTION,
                gh_ratio,
                DECAY_FRACTION,
                "final/initial Gromov-Hausdorff bound to the limit base".into(),
            ));

            let phi_peak = records
                .iter()
                .map(|r| r.phi_tilde_sup)
                .fold(f64::NEG_INFINITY, f64::max);
            let (phi_stat, phi_detail) = if phi_peak > 1e-9 {
                (
                    records.last().unwrap().phi_tilde_sup / phi_peak,
                    "final/peak sup of the normalized potential".to_string(),
                )
            } else {
                (0.0, "potential stayed below 1e-9 throughout".to_string())
            };
            certs.push(cert(
                "phi_tilde_decay",
                phi_stat <= DECAY_FRACTION,
                phi_stat,
                DECAY_FRACTION,
                phi_detail,
            ));
        }
        CaseLabel::ContractDivisor => {
            let hs: Vec<f64> = records.iter().map(|r| r.h_max).collect();
            certs.push(stability_cert("h_stability", &hs, "the whole run"));
            let envs: Vec<f64> = records.iter().map(|r| r.contraction_env).collect();
            certs.push(stability_cert("envelope_stability", &envs, "the whole run"));
        }
    }
    Ok(certs)
}

fn volume_form_ratio(state: &FlowState) -> f64 {
    let grid = state.grid();
    let f = grid.f();
    let cls0 = state.cls0();
    let (a0, gap0) = (cls0.a(), cls0.fiber_area());
    let e = state.params().n() as i32 - 1;
    let mut worst = f64::NEG_INFINITY;
    for j in 1..grid.m() - 1 {
        let x = grid.x(j);
        // u''/u_hat_0'' * (u'/u_hat_0')^{n-1}; the x(1-x) weights cancel.
        let v = grid.diff1(j) / gap0 * (f[j] / (a0 + gap0 * x)).powi(e);
        worst = worst.max(v);
    }
    worst
}

fn r1_composite(state: &FlowState, t_sing: f64) -> f64 {
    let grid = state.grid();
    let remaining = (t_sing - state.t()).max(f64::MIN_POSITIVE);
    let mut worst = f64::NEG_INFINITY;
    for j in 1..grid.m() - 1 {
        let x = grid.x(j);
        let denom = (x * (1.0 - x)).min(remaining);
        worst = worst.max(grid.usec_unchecked(j) / denom);
    }
    worst
}

fn stability_series(series: &[Snapshot], t_sing: f64) -> StabilitySeries {
    let mut s = StabilitySeries::default();
    for snap in series {
        let d = &snap.diag;
        s.t.push(d.t);
        s.usec_over_remaining
            .push(d.usec_max / (t_sing - d.t).max(f64::MIN_POSITIVE));
        s.r1_composite.push(r1_composite(&snap.state, t_sing));
        s.trace_ref_max.push(d.trace_ref_max);
        s.h_max.push(d.h_max);
        s.contraction_env.push(d.contraction_env);
        s.gh_bound.push(d.gh_bound);
        s.phi_tilde_sup.push(d.phi_tilde_sup);
        s.volume_form_ratio.push(volume_form_ratio(&snap.state));
    }
    s
}

/// Volume-form non-degeneration: the max ratio against the initial reference
/// volume form over the final half must not exceed twice its max over the
/// first half.
fn volume_form_cert(ts: &[f64], ratios: &[f64]) -> CertificateResult {
    let t_half = 0.5 * ts.last().copied().unwrap_or(0.0);
    let (mut first, mut last) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (t, &v) in ts.iter().zip(ratios) {
        if *t <= t_half {
            first = first.max(v);
        }
        if *t >= t_half {
            last = last.max(v);
        }
    }
    let stat = last / first;
    cert(
        "volume_form_stability",
        stat <= STABILITY_RATIO_MAX,
        stat,
        STABILITY_RATIO_MAX,
        "max volume-form ratio on the final half over its max on the first half".into(),
    )
}

fn series_identity(
    series: &[Snapshot],
) -> Result<(ManifoldParams, KahlerClass, CaseLabel, f64), AnalyticsError> {
    let first = series.first().ok_or(AnalyticsError::EmptySeries)?;
    let params = first.state.params();
    let cls0 = first.state.cls0();
    let case = geometry::classify_singularity(params, cls0);
    let t_sing = geometry::singular_time(params, cls0);
    Ok((params, cls0, case, t_sing))
}

/// Certifies a collapsing or shrinking trajectory. Errors with
/// [`AnalyticsError::WrongCase`] on contraction series.
pub fn collapse_certificates(series: &[Snapshot]) -> Result<CertificateReport, AnalyticsError> {
    let (params, cls0, case, t_sing) = series_identity(series)?;
    if case == CaseLabel::ContractDivisor {
        return Err(AnalyticsError::WrongCase {
            expected: "CollapseToBase or ShrinkToPoint",
            got: case,
        });
    }
    let records: Vec<DiagnosticsRecord> = series.iter().map(|s| s.diag).collect();
    let mut certs = records_certificates(params, cls0, &records)?;
    let stability = stability_series(series, t_sing);
    let mut violations = Vec::new();

    // Strict interior gap: 0 < f_j - a_t < 2k(T - t) at interior nodes,
    // endpoint nodes on the closed version up to rounding in the class
    // arithmetic.
    let k = params.kf();
    let ep_tol = 1e-11 * cls0.fiber_area();
    let mut gap_count: u64 = 0;
    for snap in series {
        let grid = snap.state.grid();
        let f = grid.f();
        let m = grid.m();
        let a_t = grid.cls().a();
        let upper = 2.0 * k * (t_sing - snap.state.t());
        for (j, &fj) in f.iter().enumerate() {
            let gap = fj - a_t;
            let ok = if j == 0 {
                gap.abs() <= ep_tol
            } else if j == m - 1 {
                gap <= upper + ep_tol
            } else {
                gap > 0.0 && gap < upper
            };
            if !ok {
                gap_count += 1;
                if violations.len() < MAX_VIOLATIONS {
                    violations.push(Violation {
                        certificate: "interior_gap".to_string(),
                        t: snap.state.t(),
                        node: j,
                        value: gap,
                    });
                }
            }
        }
    }
    certs.push(cert(
        "interior_gap",
        gap_count == 0,
        gap_count as f64,
        0.0,
        "count of nodes violating 0 < u' - a_t < 2k(T - t)".into(),
    ));

    // Composite ratio r1 = max u''/min(x(1-x), T-t), stable on the final half
    // (the early transient of generic initial data is not the certified
    // regime).
    let final_half = final_half_indices(&stability.t);
    let r1: Vec<f64> = final_half
        .iter()
        .map(|&i| stability.r1_composite[i])
        .collect();
    certs.push(stability_cert(
        "r1_stability",
        &r1,
        "the composite ratio on the final half",
    ));

    // Third-derivative band |u'''/u''| <= k up to discretization slack,
    // global over the run.
    let utr_abs = records
        .iter()
        .map(|r| r.utr_min.abs().max(r.utr_max.abs()))
        .fold(f64::NEG_INFINITY, f64::max);
    let utr_budget = k + UTR_SLACK;
    certs.push(cert(
        "utr_band",
        utr_abs <= utr_budget,
        utr_abs,
        utr_budget,
        "max over the run of |u'''/u''| at interior nodes".into(),
    ));

    certs.push(volume_form_cert(&stability.t, &stability.volume_form_ratio));

    // C^0 convergence of the potential to the linear potential of the limit
    // class on the rho window.
    let a_lim = geometry::limit_a(params, cls0);
    let dev0 = linear_potential_dev(&series[0].state, a_lim);
    let dev1 = linear_potential_dev(&series.last().unwrap().state, a_lim);
    let lin = if dev0 > 1e-9 {
        cert(
            "linear_potential_decay",
            dev1 / dev0 <= DECAY_FRACTION,
            dev1 / dev0,
            DECAY_FRACTION,
            "final/initial sup distance of u from the limit linear potential".into(),
        )
    } else {
        cert(
            "linear_potential_decay",
            dev1 <= 1e-9,
            dev1,
            1e-9,
            "initial potential already linear; final sup distance".into(),
        )
    };
    certs.push(lin);

    let mut report = CertificateReport {
        case,
        singular_time: t_sing,
        pass: false,
        certificates: certs,
        violations,
        stability,
    };
    report.recompute_pass();
    Ok(report)
}

/// Certifies a divisor-contraction trajectory. Errors with
/// [`AnalyticsError::WrongCase`] on collapsing or shrinking series.
pub fn contraction_certificates(series: &[Snapshot]) -> Result<CertificateReport, AnalyticsError> {
    let (params, cls0, case, t_sing) = series_identity(series)?;
    if case != CaseLabel::ContractDivisor {
        return Err(AnalyticsError::WrongCase {
            expected: "ContractDivisor",
            got: case,
        });
    }
    let records: Vec<DiagnosticsRecord> = series.iter().map(|s| s.diag).collect();
    let mut certs = records_certificates(params, cls0, &records)?;
    let stability = stability_series(series, t_sing);

    certs.push(volume_form_cert(&stability.t, &stability.volume_form_ratio));

    // Cauchy-in-time check away from the contracted divisor: the profiles at
    // the last two recorded times agree on x >= 0.2 within CAUCHY_TOL.
    let cauchy = if series.len() >= 2 {
        let prev = series[series.len() - 2].state.grid();
        let last = series[series.len() - 1].state.grid();
        let m = last.m();
        let j_lo = (0.2 * (m - 1) as f64).ceil() as usize;
        let mut sup: f64 = 0.0;
        for j in j_lo..m {
            sup = sup.max((last.f()[j] - prev.f()[j]).abs());
        }
        cert(
            "cauchy_off_d0",
            sup <= CAUCHY_TOL,
            sup,
            CAUCHY_TOL,
            "sup |f(t_last) - f(t_prev)| over x >= 0.2".into(),
        )
    } else {
        cert(
            "cauchy_off_d0",
            true,
            0.0,
            CAUCHY_TOL,
            "fewer than two snapshots; nothing to compare".into(),
        )
    };
    certs.push(cauchy);

    // Growth exponent of f - a_t near the divisor; provisional (does not
    // gate the exit status) because the sharp pointwise rate is weaker than
    // what the envelope already certifies.
    let growth = match contraction_growth_exponent(&series.last().unwrap().state) {
        Ok(slope) => CertificateResult {
            name: "growth_exponent".to_string(),
            pass: slope >= GROWTH_WINDOW.0 && slope <= GROWTH_WINDOW.1,
            statistic: slope,
            threshold: GROWTH_WINDOW.1,
            provisional: true,
            detail: format!(
                "log-linear slope of u' - a_t against (k/n)rho on x in [0.05, 0.3]; \
                 window [{}, {}]",
                GROWTH_WINDOW.0, GROWTH_WINDOW.1
            ),
        },
        Err(e) => CertificateResult {
            name: "growth_exponent".to_string(),
            pass: false,
            statistic: 0.0,
            threshold: GROWTH_WINDOW.1,
            provisional: true,
            detail: format!("not computable: {e}"),
        },
    };
    certs.push(growth);

    let mut report = CertificateReport {
        case,
        singular_time: t_sing,
        pass: false,
        certificates: certs,
        violations: Vec::new(),
        stability,
    };
    report.recompute_pass();
    Ok(report)
}

/// Dispatches to the certificate set matching the series' own case.
pub fn certify_series(series: &[Snapshot]) -> Result<CertificateReport, AnalyticsError> {
    let (_, _, case, _) = series_identity(series)?;
    match case {
        CaseLabel::ContractDivisor => contraction_certificates(series),
        _ => collapse_certificates(series),
    }
}
