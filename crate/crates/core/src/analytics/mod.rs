//! Geometric diagnostics of flow snapshots and end-of-run certification.
//!
//! Everything here is a pure function of immutable snapshots. The
//! measurements reduce global geometric quantities (volumes, fiber lengths,
//! curvature traces, Gromov-Hausdorff bounds) to one-dimensional sums over
//! the profile grid; the certificates (see [`certificates`]) turn the
//! qualitative convergence statements into testable numbers. "There exists a
//! constant C" statements are certified as stability of monitored ratios —
//! bounded max-to-median over a run — since an absolute constant is not a
//! falsifiable target.
//!
//! Gromov-Hausdorff column semantics depend on the case: for collapsing and
//! shrinking classes `gh_bound` is a distance bound to the limit base
//! (ℙ^{n-1}, a_T g_FS) (a point when a_T = 0); for divisor contractions it
//! is a diameter bound for the degenerating neighborhood of the contracted
//! divisor (the part of the manifold the singularity eats), since the global
//! limit there is not a point and admits no one-number distance bound of the
//! same form.

mod certificates;

pub use certificates::{
    certify_series, collapse_certificates, contraction_certificates, records_certificates,
    CertificateReport, CertificateResult, StabilitySeries, Violation,
};

use crate::flow::FlowState;
use crate::geometry::{self, CaseLabel};
use crate::profile;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sup-norms over rho are taken on this symmetric window.
pub const RHO_WINDOW: f64 = 5.0;
/// Number of uniform samples on the rho window.
pub const RHO_SAMPLES: usize = 201;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("series case is {got}, operation applies to {expected}")]
    WrongCase {
        expected: &'static str,
        got: CaseLabel,
    },
    #[error("node j = {j} outside the interior range [{lo}, {hi}]")]
    BoundaryNode { j: usize, lo: usize, hi: usize },
    #[error("only {found} nodes in the fitting window, need at least {need}")]
    InsufficientRange { found: usize, need: usize },
    #[error("empty snapshot series")]
    EmptySeries,
}

/// Per-snapshot scalar diagnostics. All fields are finite on valid states.
/// `utr_min`/`utr_max` live only in the JSON report, not the CSV series.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub a_t: f64,
    pub b_t: f64,
    pub volume: f64,
    pub usec_max: f64,
    pub utr_min: f64,
    pub utr_max: f64,
    pub fiber_len: f64,
    pub fiber_diam_bound: f64,
    pub tr_chi_max: f64,
    pub trace_ref_max: f64,
    pub h_max: f64,
    pub contraction_env: f64,
    pub gh_bound: f64,
    pub phi_tilde_sup: f64,
}

impl DiagnosticsRecord {
    /// Measures every diagnostic on one state. `case` is the classification
    /// of the trajectory the state belongs to; it selects the `gh_bound`
    /// flavor.
    pub fn measure(state: &FlowState, case: CaseLabel) -> Self {
        let (utr_min, utr_max) = utr_range(state);
        let gh_bound = match case {
            CaseLabel::ContractDivisor => {
                contraction_neighborhood_bound(state).expect("case label matches the guard")
            }
            _ => gh_bound_collapse(state).expect("case label matches the guard"),
        };
        DiagnosticsRecord {
            t: state.t(),
            a_t: state.grid().cls().a(),
            b_t: state.grid().cls().b(),
            volume: volume(state),
            usec_max: usec_max(state),
            utr_min,
            utr_max,
            fiber_len: fiber_length(state),
            fiber_diam_bound: fiber_diameter_bound(state),
            tr_chi_max: tr_chi_max(state),
            trace_ref_max: trace_ref_max(state),
            h_max: h_max(state),
            contraction_env: contraction_env(state),
            gh_bound,
            phi_tilde_sup: phi_tilde_sup(state),
        }
    }
}

/// Total-volume proxy ∫ f^{n-1} df over the profile, by the trapezoid rule in
/// the f variable. The discrete antiderivative telescopes, so the value
/// equals (b^n - a^n)/n up to quadrature error independently of the profile
/// shape, and exactly (to rounding) for n = 2.
pub fn volume(state: &FlowState) -> f64 {
    let f = state.grid().f();
    let e = state.params().n() as i32 - 1;
    let mut acc = 0.0;
    for j in 0..f.len() - 1 {
        acc += 0.5 * (f[j].powi(e) + f[j + 1].powi(e)) * (f[j + 1] - f[j]);
    }
    acc
}

/// Length of the radial fiber segment from D_0 to D_inf:
/// (1/sqrt2) ∫ sqrt(f_x/(k x(1-x))) dx. Each grid panel is integrated in
/// closed form (the antiderivative of 1/sqrt(x(1-x)) is 2 asin sqrt(x)),
/// which executes the sin^2 substitution exactly and keeps the
/// endpoint-integrable singularity harmless.
pub fn fiber_length(state: &FlowState) -> f64 {
    let grid = state.grid();
    let f = grid.f();
    let m = grid.m();
    let k = state.params().kf();
    let dx = grid.dx();
    let mut acc = 0.0;
    let mut asin_prev = 0.0; // asin(sqrt(x_0)) = 0
    for j in 0..m - 1 {
        let asin_next = grid.x(j + 1).sqrt().asin();
        let slope = (f[j + 1] - f[j]) / dx;
        acc += (slope / k).sqrt() * 2.0 * (asin_next - asin_prev);
        asin_prev = asin_next;
    }
    acc / std::f64::consts::SQRT_2
}

/// Max of u'' over interior nodes.
pub fn usec_max(state: &FlowState) -> f64 {
    let grid = state.grid();
    let mut worst: f64 = 0.0;
    for j in 1..grid.m() - 1 {
        worst = worst.max(grid.usec_unchecked(j));
    }
    worst
}

/// Range of u'''/u'' over interior nodes.
pub fn utr_range(state: &FlowState) -> (f64, f64) {
    let grid = state.grid();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 1..grid.m() - 1 {
        let v = grid.utr_unchecked(j);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Fiber diameter bound: radial length plus half the widest angular circle.
/// The fiber is a 2-sphere whose circle of latitude at radial position rho
/// has circumference (2π/k) sqrt(2 u''), with the k-fold identification.
pub fn fiber_diameter_bound(state: &FlowState) -> f64 {
    let k = state.params().kf();
    fiber_length(state) + std::f64::consts::PI / k * (2.0 * usec_max(state)).sqrt()
}

/// Max over M of the trace of the reference base form against the metric:
/// tr_ω χ = (n-1)/u', maximal where u' = a_t. Bounded along collapsing
/// flows, divergent exactly when a_t -> 0 (contraction).
pub fn tr_chi_max(state: &FlowState) -> f64 {
    (state.params().nf() - 1.0) / state.grid().cls().a()
}

/// Max over interior nodes of tr_{g_hat_0} g = u''/u_hat_0'' + (n-1) u'/u_hat_0',
/// the quantity whose uniform bound expresses non-degeneration against the
/// initial reference metric. The x(1-x) weights of the second-derivative
/// ratio cancel identically, leaving f_x/(b_0 - a_0).
pub fn trace_ref_max(state: &FlowState) -> f64 {
    let grid = state.grid();
    let f = grid.f();
    let cls0 = state.cls0();
    let (a0, gap0) = (cls0.a(), cls0.fiber_area());
    let n = state.params().nf();
    let mut worst = f64::NEG_INFINITY;
    for j in 1..grid.m() - 1 {
        let x = grid.x(j);
        let v = grid.diff1(j) / gap0 + (n - 1.0) * f[j] / (a0 + gap0 * x);
        worst = worst.max(v);
    }
    worst
}

/// Max over interior nodes of u''/((u'-a_t)(b_t-u')), the exponentiated
/// maximum-principle quantity controlling u'' by the endpoint gaps. Equals
/// k/(b-a) identically on the reference profile.
pub fn h_max(state: &FlowState) -> f64 {
    let grid = state.grid();
    let f = grid.f();
    let cls = grid.cls();
    let mut worst = f64::NEG_INFINITY;
    for j in 1..grid.m() - 1 {
        let v = grid.usec_unchecked(j) / ((f[j] - cls.a()) * (cls.b() - f[j]));
        worst = worst.max(v);
    }
    worst
}

/// Growth envelope of the contraction estimate: max over interior nodes with
/// x <= 1/2 of (u' - a_t) e^{-k rho/n} = (f - a_t) ((1-x)/x)^{1/n}. Bounded
/// along contracting flows; recorded on every case for uniform series shape.
pub fn contraction_env(state: &FlowState) -> f64 {
    let grid = state.grid();
    let f = grid.f();
    let a_t = grid.cls().a();
    let inv_n = 1.0 / state.params().nf();
    let mut worst = f64::NEG_INFINITY;
    for j in 1..grid.m() - 1 {
        let x = grid.x(j);
        if x > 0.5 {
            break;
        }
        worst = worst.max((f[j] - a_t) * ((1.0 - x) / x).powf(inv_n));
    }
    worst
}

/// Gromov-Hausdorff distance bound from (M, g(t)) to the collapsed limit
/// (ℙ^{n-1}, a_T g_FS):
///
/// ```text
/// eps(t) = 2 fdb(t) + (sqrt(b_t) - sqrt(a_t)) d_FS + |sqrt(a_t) - sqrt(a_T)| d_FS
/// ```
///
/// where fdb is the fiber diameter bound and d_FS = π/√2. Valid because the
/// metric dominates a_t times the pulled-back base metric (distances below)
/// while horizontal paths cost at most b_t times base length (distances
/// above). For shrinking classes a_T = 0 and the formula degrades gracefully
/// to 2 fdb + sqrt(b_t) d_FS -> 0.
pub fn gh_bound_collapse(state: &FlowState) -> Result<f64, AnalyticsError> {
    let params = state.params();
    let case = geometry::classify_singularity(params, state.cls0());
    if case == CaseLabel::ContractDivisor {
        return Err(AnalyticsError::WrongCase {
            expected: "CollapseToBase or ShrinkToPoint",
            got: case,
        });
    }
    let cls = state.grid().cls();
    let a_lim = geometry::limit_a(params, state.cls0());
    let d_fs = geometry::fs_base_diameter(params.n());
    Ok(2.0 * fiber_diameter_bound(state)
        + (cls.b().sqrt() - cls.a().sqrt()) * d_fs
        + (cls.a().sqrt() - a_lim.sqrt()).abs() * d_fs)
}

/// Diameter bound for the degenerating neighborhood {x <= 0.2} of the
/// contracted divisor, reported as the `gh_bound` column on contraction
/// runs: sqrt(a_t) d_FS for the shrinking divisor itself, plus twice the
/// radial length and widest angular circle of the neighborhood. The global
/// flow limit in this case is a (non-point) orbifold, so this measures how
/// much of the manifold the singularity is eating rather than a distance to
/// a fixed limit space.
pub fn contraction_neighborhood_bound(state: &FlowState) -> Result<f64, AnalyticsError> {
    let params = state.params();
    let case = geometry::classify_singularity(params, state.cls0());
    if case != CaseLabel::ContractDivisor {
        return Err(AnalyticsError::WrongCase {
            expected: "ContractDivisor",
            got: case,
        });
    }
    let grid = state.grid();
    let f = grid.f();
    let m = grid.m();
    let k = params.kf();
    let dx = grid.dx();
    // Node-aligned cut at x = 0.2.
    let j_cut = ((0.2 * (m - 1) as f64).round() as usize).clamp(2, m - 2);
    let mut radial = 0.0;
    let mut asin_prev = 0.0;
    for j in 0..j_cut {
        let asin_next = grid.x(j + 1).sqrt().asin();
        let slope = (f[j + 1] - f[j]) / dx;
        radial += (slope / k).sqrt() * 2.0 * (asin_next - asin_prev);
        asin_prev = asin_next;
    }
    radial /= std::f64::consts::SQRT_2;
    let mut usec_cut: f64 = 0.0;
    for j in 1..=j_cut {
        usec_cut = usec_cut.max(grid.usec_unchecked(j));
    }
    let angular = std::f64::consts::PI / k * (2.0 * usec_cut).sqrt();
    let d_fs = geometry::fs_base_diameter(params.n());
    Ok(grid.cls().a().sqrt() * d_fs + 2.0 * (radial + angular))
}

/// Sup of |phi_tilde| over the rho window, sampled uniformly.
pub fn phi_tilde_sup(state: &FlowState) -> f64 {
    let mut sup: f64 = 0.0;
    for i in 0..RHO_SAMPLES {
        let rho = -RHO_WINDOW + 2.0 * RHO_WINDOW * i as f64 / (RHO_SAMPLES - 1) as f64;
        let v = profile::phi_tilde(state.grid(), state.t(), state.cls0(), rho)
            .expect("states live strictly before the singular time");
        sup = sup.max(v.abs());
    }
    sup
}

/// Sup of |u(rho) - c rho| over the rho window (distance of the potential
/// from the linear potential of the limit class).
pub fn linear_potential_dev(state: &FlowState, c: f64) -> f64 {
    let mut sup: f64 = 0.0;
    for i in 0..RHO_SAMPLES {
        let rho = -RHO_WINDOW + 2.0 * RHO_WINDOW * i as f64 / (RHO_SAMPLES - 1) as f64;
        sup = sup.max((state.grid().reconstruct_u(rho) - c * rho).abs());
    }
    sup
}

/// Ricci eigenvalues relative to g at an interior node, as the pair
/// (horizontal, fiber) = (v'/u', v''/u'') with v = -log det g, computed by
/// discrete differentiation of v' = n - (n-1) u''/u' - u'''/u''. Needs two
/// interior rings on each side.
pub fn ricci_eigenvalues(state: &FlowState, j: usize) -> Result<(f64, f64), AnalyticsError> {
    let grid = state.grid();
    let m = grid.m();
    if j < 2 || j > m - 3 {
        return Err(AnalyticsError::BoundaryNode {
            j,
            lo: 2,
            hi: m - 3,
        });
    }
    let n = state.params().nf();
    let k = state.params().kf();
    let f = grid.f();
    let v_prime =
        |i: usize| -> f64 { n - (n - 1.0) * grid.usec_unchecked(i) / f[i] - grid.utr_unchecked(i) };
    let x = grid.x(j);
    let v2 = k * x * (1.0 - x) * (v_prime(j + 1) - v_prime(j - 1)) / (2.0 * grid.dx());
    Ok((v_prime(j) / f[j], v2 / grid.usec_unchecked(j)))
}

/// Least-squares slope of log(f - a_t) against (k/n) rho over the window
/// x in [0.05, 0.3], normalized so that the contraction envelope e^{k rho/n}
/// corresponds to slope 1. The affine reference profile fits noticeably
/// steeper (about n (1 - x) on the window), so the slope separates flowed
/// from unflowed profiles.
pub fn contraction_growth_exponent(state: &FlowState) -> Result<f64, AnalyticsError> {
    let params = state.params();
    let case = geometry::classify_singularity(params, state.cls0());
    if case != CaseLabel::ContractDivisor {
        return Err(AnalyticsError::WrongCase {
            expected: "ContractDivisor",
            got: case,
        });
    }
    let grid = state.grid();
    let f = grid.f();
    let a_t = grid.cls().a();
    let n = params.nf();
    let mut zs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for j in 1..grid.m() - 1 {
        let x = grid.x(j);
        if !(0.05..=0.3).contains(&x) {
            continue;
        }
        zs.push((x / (1.0 - x)).ln() / n); // (k/n) rho
        ys.push((f[j] - a_t).ln());
    }
    if zs.len() < 8 {
        return Err(AnalyticsError::InsufficientRange {
            found: zs.len(),
            need: 8,
        });
    }
    let len = zs.len() as f64;
    let z_mean = zs.iter().sum::<f64>() / len;
    let y_mean = ys.iter().sum::<f64>() / len;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (z, y) in zs.iter().zip(&ys) {
        cov += (z - z_mean) * (y - y_mean);
        var += (z - z_mean) * (z - z_mean);
    }
    Ok(cov / var)
}
