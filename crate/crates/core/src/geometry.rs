//! Bundle parameters, Kähler classes, and their evolution under the flow.
//!
//! On M = ℙ(O(-k) ⊕ O) → ℙ^{n-1} a Calabi-symmetric Kähler class is pinned
//! down by two numbers (a, b) with 0 < a < b: the restriction of the class to
//! the zero section is a·[ω_FS] and to the infinity section b·[ω_FS]. The
//! Ricci flow moves the class linearly,
//!
//! ```text
//! a_t = a0 + (k - n) t,        b_t = b0 - (k + n) t,
//! ```
//!
//! and the first time the class degenerates is the singular time T. Which
//! side degenerates first decides the singularity model: the fiber class
//! b_t - a_t can vanish (collapse onto the base), a_t can vanish (the zero
//! section contracts), or both can vanish together (global shrinking).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used to detect the borderline class `a0 (n+k) = b0 (n-k)`
/// separating divisor contraction from global shrinking.
pub const CLASS_BOUNDARY_RTOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid bundle parameters n={n}, k={k}: need n >= 2 and k >= 1")]
    InvalidParams { n: u32, k: u32 },
    #[error("(a, b) = ({a}, {b}) is not a Kähler class: need finite 0 < a < b")]
    NonKahlerClass { a: f64, b: f64 },
    #[error("time t = {t} outside the smooth range [0, {t_max})")]
    TimeOutOfRange { t: f64, t_max: f64 },
}

/// Dimension n >= 2 of the base ℙ^{n-1} side (complex dimension of the total
/// space) and twisting degree k >= 1 of the bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifoldParams {
    n: u32,
    k: u32,
}

impl ManifoldParams {
    pub fn new(n: u32, k: u32) -> Result<Self, GeometryError> {
        if n < 2 || k < 1 {
            return Err(GeometryError::InvalidParams { n, k });
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// n as f64, for formulas.
    pub fn nf(&self) -> f64 {
        f64::from(self.n)
    }

    /// k as f64, for formulas.
    pub fn kf(&self) -> f64 {
        f64::from(self.k)
    }

    /// k - n, exact (both operands are integers well below 2^53).
    pub fn k_minus_n(&self) -> f64 {
        f64::from(self.k) - f64::from(self.n)
    }

    /// k + n.
    pub fn k_plus_n(&self) -> f64 {
        f64::from(self.k) + f64::from(self.n)
    }
}

/// A Calabi-symmetric Kähler class, parametrized by its restrictions
/// 0 < a < b to the zero and infinity sections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KahlerClass {
    a: f64,
    b: f64,
}

impl KahlerClass {
    /// Validates the Kähler cone condition 0 < a < b (finite).
    pub fn new(a: f64, b: f64) -> Result<Self, GeometryError> {
        if !(a.is_finite() && b.is_finite() && 0.0 < a && a < b) {
            return Err(GeometryError::NonKahlerClass { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Fiber area b - a (the class pairs with the ℙ¹ fiber through b - a).
    pub fn fiber_area(&self) -> f64 {
        self.b - self.a
    }
}

/// The three singularity models at the singular time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    /// Fiber class vanishes first: the flow collapses onto the base ℙ^{n-1}.
    CollapseToBase,
    /// Both a_t and b_t vanish together: global shrinking to a point.
    ShrinkToPoint,
    /// a_t vanishes first: the zero section contracts to an orbifold point.
    ContractDivisor,
}

impl std::fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CaseLabel::CollapseToBase => "CollapseToBase",
            CaseLabel::ShrinkToPoint => "ShrinkToPoint",
            CaseLabel::ContractDivisor => "ContractDivisor",
        };
        f.write_str(s)
    }
}

/// First time at which the evolving class leaves the Kähler cone.
///
/// The fiber class b_t - a_t hits zero at (b0 - a0)/(2k); for k < n the zero
/// section class a_t decreases and hits zero at a0/(n - k). T is whichever
/// comes first; for k >= n only the fiber can degenerate.
pub fn singular_time(params: ManifoldParams, cls0: KahlerClass) -> f64 {
    match classify_singularity(params, cls0) {
        CaseLabel::CollapseToBase => cls0.fiber_area() / (2.0 * params.kf()),
        // Shrink only occurs for k < n, where both formulas agree; use the
        // a_t root so a_T is exactly zero after clamping.
        CaseLabel::ShrinkToPoint | CaseLabel::ContractDivisor => {
            cls0.a() / (params.nf() - params.kf())
        }
    }
}

/// Decides the singularity model from the initial class.
///
/// Compare p = a0 (n + k) with q = b0 (n - k): p > q means the fiber class
/// degenerates first (collapse), p < q means the zero-section class does
/// (contraction), p = q is the borderline shrinking case. For k >= n we have
/// q <= 0 < p, so collapse always wins there. Equality is detected with
/// relative tolerance [`CLASS_BOUNDARY_RTOL`].
pub fn classify_singularity(params: ManifoldParams, cls0: KahlerClass) -> CaseLabel {
    let p = cls0.a() * params.k_plus_n();
    let q = cls0.b() * -params.k_minus_n(); // b0 (n - k)
    let tol = CLASS_BOUNDARY_RTOL * p.abs().max(q.abs());
    if (p - q).abs() <= tol {
        CaseLabel::ShrinkToPoint
    } else if p > q {
        CaseLabel::CollapseToBase
    } else {
        CaseLabel::ContractDivisor
    }
}

/// The evolved class at time t in [0, T).
pub fn class_at(
    params: ManifoldParams,
    cls0: KahlerClass,
    t: f64,
) -> Result<KahlerClass, GeometryError> {
    let t_max = singular_time(params, cls0);
    if !t.is_finite() || t < 0.0 || t >= t_max {
        return Err(GeometryError::TimeOutOfRange { t, t_max });
    }
    KahlerClass::new(
        cls0.a() + params.k_minus_n() * t,
        cls0.b() - params.k_plus_n() * t,
    )
}

/// Limit a_T = a0 + (k - n) T of the zero-section class, clamped at zero.
///
/// Positive for collapse (the surviving base class), exactly zero for
/// shrinking and contraction.
pub fn limit_a(params: ManifoldParams, cls0: KahlerClass) -> f64 {
    let t = singular_time(params, cls0);
    (cls0.a() + params.k_minus_n() * t).max(0.0)
}

/// Numerically stable logistic sigmoid 1/(1 + e^{-z}).
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softplus log(1 + e^z).
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Closed-form rotationally symmetric reference potential for the class:
///
/// ```text
/// u_hat(rho) = a rho + ((b - a)/k) log(e^{k rho} + 1)
/// ```
///
/// Returns (u_hat, u_hat', u_hat''). In the compactified coordinate
/// x = e^{k rho}/(1 + e^{k rho}) the derivative is affine, u_hat' = a + (b-a) x,
/// and u_hat'' = k (b-a) x (1-x), maximal at rho = 0 with value k (b-a)/4.
pub fn reference_potential(params: ManifoldParams, cls: KahlerClass, rho: f64) -> (f64, f64, f64) {
    let k = params.kf();
    let (a, b) = (cls.a(), cls.b());
    let x = sigmoid(k * rho);
    let u = a * rho + (b - a) / k * softplus(k * rho);
    let du = a + (b - a) * x;
    let ddu = k * (b - a) * x * (1.0 - x);
    (u, du, ddu)
}

/// Determinant factor e^{-n rho} (u_hat')^{n-1} u_hat'' of the reference
/// metric's volume form in the fiberwise-log coordinate. The e^{-n rho}
/// prefactor is the coordinate volume of the torus orbits; the product is
/// the quantity whose boundedness along the flow is monitored.
pub fn reference_det(params: ManifoldParams, cls: KahlerClass, rho: f64) -> f64 {
    let n = params.nf();
    let (_, du, ddu) = reference_potential(params, cls, rho);
    (-n * rho).exp() * du.powi(n as i32 - 1) * ddu
}

/// Diameter of (ℙ^{n-1}, ω_FS) with the normalization used for the base
/// class: π/√2, independent of n (a diameter-realizing geodesic lies inside
/// a projective line). Scale by √a for the class a·[ω_FS].
pub fn fs_base_diameter(n: u32) -> f64 {
    debug_assert!(n >= 2);
    std::f64::consts::PI / std::f64::consts::SQRT_2
}
