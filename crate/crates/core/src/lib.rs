//! Kähler-Ricci flow under Calabi symmetry on the projective bundle
//! M = ℙ(O(-k) ⊕ O) over ℙ^{n-1}.
//!
//! The symmetry reduces the flow to a parabolic equation for a single convex
//! potential u(ρ) on the real line, ρ being the log of the fiberwise norm
//! squared. Everything here works on the compactified coordinate
//! x = e^{kρ}/(1 + e^{kρ}) ∈ [0, 1], where the zero section D₀ sits at x = 0
//! and the infinity section D_∞ at x = 1. The derivative f = u'(ρ) maps onto
//! the moving interval [a_t, b_t] determined by the cohomology class, so the
//! boundary values of f are pinned exactly by class evolution and only the
//! interior profile carries dynamics.
//!
//! Layout:
//! - [`geometry`]: bundle parameters, Kähler classes, class evolution,
//!   singularity classification, closed-form reference metrics.
//! - [`profile`]: the discretized radial profile f(x) and its derived
//!   quantities (u'', u'''/u'', exact reconstruction of u).
//! - [`flow`]: explicit stepping of the reduced flow with CFL control and
//!   snapshot scheduling.
//! - [`analytics`]: per-snapshot diagnostics (volumes, diameters, curvature
//!   traces, Gromov-Hausdorff bounds) and end-of-run certificates.

// Negated comparisons (`!(x > 0.0)`) are deliberate: they reject NaN along
// with the out-of-range sign. Indexed loops are kept where the index feeds
// several lattice quantities at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytics;
pub mod flow;
pub mod geometry;
pub mod profile;

pub use analytics::{
    AnalyticsError, CertificateReport, CertificateResult, DiagnosticsRecord, Violation,
};
pub use flow::{FlowError, FlowState, RunConfig, Snapshot};
pub use geometry::{CaseLabel, GeometryError, KahlerClass, ManifoldParams};
pub use profile::{ProfileError, ProfileGrid};
