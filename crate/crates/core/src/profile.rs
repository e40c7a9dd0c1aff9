//! Discrete radial profile f(x) = u'(rho(x)) on the compactified fiber
//! coordinate x = e^{k rho}/(1 + e^{k rho}) in [0, 1].
//!
//! All rho-derivatives are taken through the chain rule d/d_rho = k x (1-x) d/dx,
//! so the degeneracy of the coordinate change at the endpoints is explicit in
//! the formulas and nothing is ever divided by x(1-x). The grid is uniform in
//! x with second-order central differences; the x(1-x) weight already
//! concentrates rho-resolution where |rho| is large.

use crate::geometry::{self, GeometryError, KahlerClass, ManifoldParams};
use thiserror::Error;

/// Smallest supported grid: below this the derived diagnostics (which need a
/// few interior rings) lose meaning.
pub const MIN_GRID: usize = 33;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("grid size m = {m} too small: need m >= {MIN_GRID}")]
    GridTooSmall { m: usize },
    #[error("node j = {j} is outside the valid interior range [{lo}, {hi}]")]
    BoundaryNode { j: usize, lo: usize, hi: usize },
    #[error("profile not strictly increasing at node {j}: f[{j}+1] <= f[{j}]")]
    NotMonotone { j: usize },
    #[error("endpoint mismatch at {end}: expected {expected}, got {got}")]
    EndpointMismatch {
        end: &'static str,
        expected: f64,
        got: f64,
    },
    #[error("degenerate one-sided slope at {end} endpoint")]
    DegenerateSlope { end: &'static str },
}

/// Profile of u' sampled on the uniform x-grid, endpoint-pinned to the class.
///
/// Invariants (enforced by the constructors and [`ProfileGrid::validate`]):
/// f[0] = a and f[m-1] = b exactly, f strictly increasing, one-sided endpoint
/// slopes strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileGrid {
    params: ManifoldParams,
    cls: KahlerClass,
    f: Vec<f64>,
}

impl ProfileGrid {
    /// The affine reference profile f_j = a + (b-a) x_j (the derivative of the
    /// closed-form reference potential is affine in x).
    pub fn from_reference(
        params: ManifoldParams,
        cls: KahlerClass,
        m: usize,
    ) -> Result<Self, ProfileError> {
        if m < MIN_GRID {
            return Err(ProfileError::GridTooSmall { m });
        }
        let gap = cls.fiber_area();
        let mm1 = (m - 1) as f64;
        let mut f: Vec<f64> = (0..m).map(|j| cls.a() + gap * (j as f64 / mm1)).collect();
        // Pin the endpoints bit-exactly regardless of rounding in the map.
        f[0] = cls.a();
        f[m - 1] = cls.b();
        Ok(Self { params, cls, f })
    }

    /// Wraps caller-supplied profile values, enforcing every grid invariant.
    pub fn from_values(
        params: ManifoldParams,
        cls: KahlerClass,
        f: Vec<f64>,
    ) -> Result<Self, ProfileError> {
        if f.len() < MIN_GRID {
            return Err(ProfileError::GridTooSmall { m: f.len() });
        }
        let grid = Self { params, cls, f };
        grid.validate()?;
        Ok(grid)
    }

    pub fn params(&self) -> ManifoldParams {
        self.params
    }

    pub fn cls(&self) -> KahlerClass {
        self.cls
    }

    pub fn m(&self) -> usize {
        self.f.len()
    }

    /// Uniform node spacing 1/(m-1).
    pub fn dx(&self) -> f64 {
        1.0 / (self.f.len() - 1) as f64
    }

    /// Node coordinate x_j = j/(m-1); exactly 0 and 1 at the ends.
    pub fn x(&self, j: usize) -> f64 {
        j as f64 / (self.f.len() - 1) as f64
    }

    /// rho at node j: log(x/(1-x))/k. -inf/+inf at the endpoints, which is
    /// the honest value (D_0 and D_inf sit at infinite rho-distance in the
    /// coordinate, not in the metric).
    pub fn rho(&self, j: usize) -> f64 {
        let x = self.x(j);
        (x / (1.0 - x)).ln() / self.params.kf()
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    /// Checks all grid invariants: endpoint pinning, strict monotonicity,
    /// strictly positive one-sided endpoint slopes. Monotonicity loss is a
    /// hard error by design: it means the metric degenerated, and silent
    /// repair would mask stepper failure.
    pub fn validate(&self) -> Result<(), ProfileError> {
        let m = self.f.len();
        let (a, b) = (self.cls.a(), self.cls.b());
        if self.f[0] != a {
            return Err(ProfileError::EndpointMismatch {
                end: "x=0",
                expected: a,
                got: self.f[0],
            });
        }
        if self.f[m - 1] != b {
            return Err(ProfileError::EndpointMismatch {
                end: "x=1",
                expected: b,
                got: self.f[m - 1],
            });
        }
        if self.f[1] - self.f[0] <= 0.0 {
            return Err(ProfileError::DegenerateSlope { end: "x=0" });
        }
        if self.f[m - 1] - self.f[m - 2] <= 0.0 {
            return Err(ProfileError::DegenerateSlope { end: "x=1" });
        }
        for j in 0..m - 1 {
            if !(self.f[j + 1] > self.f[j]) {
                return Err(ProfileError::NotMonotone { j });
            }
        }
        Ok(())
    }

    /// Central first difference of f at node j in x (valid for 1 <= j <= m-2).
    pub(crate) fn diff1(&self, j: usize) -> f64 {
        (self.f[j + 1] - self.f[j - 1]) / (2.0 * self.dx())
    }

    /// Central second difference of f at node j in x.
    pub(crate) fn diff2(&self, j: usize) -> f64 {
        let dx = self.dx();
        (self.f[j + 1] - 2.0 * self.f[j] + self.f[j - 1]) / (dx * dx)
    }

    /// u'' at node j without the boundary check (valid for 1 <= j <= m-2).
    pub(crate) fn usec_unchecked(&self, j: usize) -> f64 {
        let x = self.x(j);
        self.params.kf() * x * (1.0 - x) * self.diff1(j)
    }

    /// u'''/u'' at node j without the boundary check (valid for 1 <= j <= m-2).
    pub(crate) fn utr_unchecked(&self, j: usize) -> f64 {
        let k = self.params.kf();
        let x = self.x(j);
        k * (1.0 - 2.0 * x) + k * x * (1.0 - x) * self.diff2(j) / self.diff1(j)
    }

    /// u'' = d_rho u' at an interior node, via u'' = k x (1-x) f_x.
    /// Strictly positive on valid grids; tends to zero at the endpoints,
    /// which is why boundary nodes are rejected rather than approximated.
    pub fn u_second(&self, j: usize) -> Result<f64, ProfileError> {
        let m = self.f.len();
        if j == 0 || j == m - 1 {
            return Err(ProfileError::BoundaryNode {
                j,
                lo: 1,
                hi: m - 2,
            });
        }
        Ok(self.usec_unchecked(j))
    }

    /// u'''/u'' = d_rho log u'' at an interior node, by the chain rule:
    /// k(1 - 2x) + k x (1-x) f_xx / f_x. Bounded through the endpoints
    /// (limits +-k), but the discrete stencil needs an interior ring, so the
    /// outermost two nodes on each side are rejected.
    pub fn u_third_ratio(&self, j: usize) -> Result<f64, ProfileError> {
        let m = self.f.len();
        if j < 2 || j > m - 3 {
            return Err(ProfileError::BoundaryNode {
                j,
                lo: 2,
                hi: m - 3,
            });
        }
        Ok(self.utr_unchecked(j))
    }

    /// u(rho) with the normalization u(0) = 0, as the integral of
    /// f(x)/(k x (1-x)) dx from x = 1/2 to x(rho).
    ///
    /// The piecewise-linear interpolant of f is integrated exactly against
    /// the measure: on a panel with slope s and intercept c = f_j - s x_j the
    /// antiderivative is (c log(x/(1-x)) - s log(1-x))/k. This is the
    /// composite second-order quadrature consistent with the grid, but unlike
    /// a plain trapezoid sum it stays accurate inside the outermost panels,
    /// where the measure dx/(x(1-x)) is logarithmically divergent and a
    /// finite rho can land at x far below x_1.
    pub fn reconstruct_u(&self, rho: f64) -> f64 {
        debug_assert!(rho.is_finite());
        let k = self.params.kf();
        let z = k * rho;
        let xq = geometry::sigmoid(z);
        // Stable logs at the query point: log(x/(1-x)) = z, log(1-x) = -softplus(z).
        let (lq, mq) = (z, -geometry::softplus(z));
        let x0 = 0.5;
        let (l0, m0) = (0.0, 0.5f64.ln());
        if xq == x0 {
            return 0.0;
        }
        let (xa, la, ma, xb, lb, mb, sign) = if xq > x0 {
            (x0, l0, m0, xq, lq, mq, 1.0)
        } else {
            (xq, lq, mq, x0, l0, m0, -1.0)
        };
        let m = self.f.len();
        let dx = self.dx();
        let panel = |x: f64| -> usize { ((x / dx) as usize).min(m - 2) };
        let (ja, jb) = (panel(xa), panel(xb));
        // Antiderivative F on panel j, evaluated from the point's logs
        // (lx = log(x/(1-x)), mx = log(1-x)).
        let anti = |j: usize, lx: f64, mx: f64| -> f64 {
            let s = (self.f[j + 1] - self.f[j]) / dx;
            let c = self.f[j] - s * self.x(j);
            (c * lx - s * mx) / k
        };
        let node_logs = |j: usize| -> (f64, f64) {
            let x = self.x(j);
            ((x / (1.0 - x)).ln(), (1.0 - x).ln())
        };
        let total = if ja == jb {
            anti(ja, lb, mb) - anti(ja, la, ma)
        } else {
            // Partial head panel [xa, x_{ja+1}], full panels, partial tail.
            let (lh, mh) = node_logs(ja + 1);
            let mut acc = anti(ja, lh, mh) - anti(ja, la, ma);
            for j in ja + 1..jb {
                let (ll, ml) = node_logs(j);
                let (lr, mr) = node_logs(j + 1);
                acc += anti(j, lr, mr) - anti(j, ll, ml);
            }
            let (lt, mt) = node_logs(jb);
            acc += anti(jb, lb, mb) - anti(jb, lt, mt);
            acc
        };
        sign * total
    }
}

/// Kähler potential of the evolving metric relative to the moving reference:
/// phi_tilde(rho, t) = u(rho, t) - u_hat_t(rho) + u_hat_t(0), normalized to
/// vanish at rho = 0. u_hat_t is the reference potential of class_at(t).
pub fn phi_tilde(
    grid: &ProfileGrid,
    t: f64,
    cls0: KahlerClass,
    rho: f64,
) -> Result<f64, GeometryError> {
    let params = grid.params();
    let cls_t = if t == 0.0 {
        cls0
    } else {
        geometry::class_at(params, cls0, t)?
    };
    let (u_hat, _, _) = geometry::reference_potential(params, cls_t, rho);
    let (u_hat0, _, _) = geometry::reference_potential(params, cls_t, 0.0);
    Ok(grid.reconstruct_u(rho) - (u_hat - u_hat0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mp(n: u32, k: u32) -> ManifoldParams {
        ManifoldParams::new(n, k).unwrap()
    }

    fn kc(a: f64, b: f64) -> KahlerClass {
        KahlerClass::new(a, b).unwrap()
    }

    fn reference(n: u32, k: u32, a: f64, b: f64, m: usize) -> ProfileGrid {
        ProfileGrid::from_reference(mp(n, k), kc(a, b), m).unwrap()
    }

    /// Smooth non-affine but valid profile used for order-of-accuracy checks:
    /// f = a + (b-a)(x + eps sin(pi x)), increasing for eps pi < 1.
    fn perturbed(n: u32, k: u32, a: f64, b: f64, m: usize, eps: f64) -> ProfileGrid {
        let (p, c) = (mp(n, k), kc(a, b));
        let mm1 = (m - 1) as f64;
        let mut f: Vec<f64> = (0..m)
            .map(|j| {
                let x = j as f64 / mm1;
                a + (b - a) * (x + eps * (std::f64::consts::PI * x).sin())
            })
            .collect();
        f[0] = a;
        f[m - 1] = b;
        ProfileGrid::from_values(p, c, f).unwrap()
    }

    #[test]
    fn reference_profile_is_affine() {
        let g = reference(2, 1, 1.0, 3.0, 33);
        // x = 0, 1/4, 1/2, 3/4, 1 sit at j = 0, 8, 16, 24, 32.
        for (j, want) in [(0, 1.0), (8, 1.5), (16, 2.0), (24, 2.5), (32, 3.0)] {
            assert_relative_eq!(g.f()[j], want, max_relative = 1e-15);
        }
        assert_eq!(g.f()[0], 1.0);
        assert_eq!(g.f()[32], 3.0);
        // Midpoint equals the reference u_hat'(0) = (a+b)/2 at any odd m.
        for m in [33, 101, 401] {
            let g = reference(2, 1, 1.0, 3.0, m);
            assert_relative_eq!(g.f()[(m - 1) / 2], 2.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn near_degenerate_class_still_strictly_increasing() {
        let g = reference(2, 1, 2.0, 2.0001, 101);
        g.validate().unwrap();
        for j in 0..100 {
            let inc = g.f()[j + 1] - g.f()[j];
            assert!(inc > 0.0);
            assert_relative_eq!(inc, 1e-6, max_relative = 1e-9);
        }
    }

    #[test]
    fn grid_too_small() {
        assert_eq!(
            ProfileGrid::from_reference(mp(2, 1), kc(1.0, 3.0), 32).unwrap_err(),
            ProfileError::GridTooSmall { m: 32 }
        );
        assert!(ProfileGrid::from_values(mp(2, 1), kc(1.0, 3.0), vec![1.0; 5]).is_err());
    }

    #[test]
    fn validate_rejects_bad_grids() {
        let g = reference(2, 1, 1.0, 3.0, 41);
        let mut f = g.f().to_vec();
        f.swap(10, 11);
        assert_eq!(
            ProfileGrid::from_values(mp(2, 1), kc(1.0, 3.0), f).unwrap_err(),
            ProfileError::NotMonotone { j: 10 }
        );

        let mut f = g.f().to_vec();
        f[0] += 0.1;
        assert!(matches!(
            ProfileGrid::from_values(mp(2, 1), kc(1.0, 3.0), f).unwrap_err(),
            ProfileError::EndpointMismatch { end: "x=0", .. }
        ));

        let mut f = g.f().to_vec();
        f[1] = f[0];
        assert_eq!(
            ProfileGrid::from_values(mp(2, 1), kc(1.0, 3.0), f).unwrap_err(),
            ProfileError::DegenerateSlope { end: "x=0" }
        );
        let mut f = g.f().to_vec();
        let m = f.len();
        f[m - 2] = f[m - 1];
        assert_eq!(
            ProfileGrid::from_values(mp(2, 1), kc(1.0, 3.0), f).unwrap_err(),
            ProfileError::DegenerateSlope { end: "x=1" }
        );
    }

    #[test]
    fn u_second_matches_reference_closed_form() {
        // Central differences are exact on the affine reference profile, so
        // u'' agrees with u_hat'' = k (b-a) x (1-x) to rounding at every node.
        let g = reference(2, 1, 1.0, 3.0, 101);
        assert_relative_eq!(g.u_second(50).unwrap(), 0.5, max_relative = 1e-12);
        for j in [1, 2, 3, 10, 77] {
            let x = g.x(j);
            assert_relative_eq!(
                g.u_second(j).unwrap(),
                2.0 * x * (1.0 - x),
                max_relative = 1e-10
            );
        }
        // Vanishes linearly in x near the zero section.
        assert_relative_eq!(
            g.u_second(1).unwrap() / g.x(1),
            2.0 * (1.0 - g.x(1)),
            max_relative = 1e-10
        );
    }

    #[test]
    fn u_second_boundary_nodes_rejected() {
        let g = reference(2, 1, 1.0, 3.0, 41);
        assert!(matches!(
            g.u_second(0),
            Err(ProfileError::BoundaryNode { j: 0, .. })
        ));
        assert!(matches!(
            g.u_second(40),
            Err(ProfileError::BoundaryNode { j: 40, .. })
        ));
        assert!(g.u_second(1).is_ok() && g.u_second(39).is_ok());
    }

    #[test]
    fn u_second_is_second_order() {
        // On a smooth non-affine profile the error against the analytic
        // k x (1-x) f_x quarters when the spacing halves.
        let err = |m: usize| -> f64 {
            let g = perturbed(2, 2, 1.0, 5.0, m, 0.1);
            let mut worst: f64 = 0.0;
            for j in 1..m - 1 {
                let x = g.x(j);
                let fx =
                    4.0 * (1.0 + 0.1 * std::f64::consts::PI * (std::f64::consts::PI * x).cos());
                let exact = 2.0 * x * (1.0 - x) * fx;
                worst = worst.max((g.u_second(j).unwrap() - exact).abs());
            }
            worst
        };
        let (e1, e2) = (err(101), err(201));
        let ratio = e1 / e2;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "refinement ratio {ratio} (errors {e1:.3e}, {e2:.3e})"
        );
    }

    #[test]
    fn u_third_ratio_reference_values() {
        // Affine profile: second difference vanishes, so the ratio is the
        // pure chain-rule term k(1-2x): 0 at the midpoint, +-0.98 k at
        // x = 0.01 / 0.99 (approaching the analytic limits +-k).
        let g = reference(2, 1, 1.0, 3.0, 401);
        assert!(g.u_third_ratio(200).unwrap().abs() < 1e-10);
        assert_relative_eq!(g.u_third_ratio(4).unwrap(), 0.98, max_relative = 1e-9);
        assert_relative_eq!(g.u_third_ratio(396).unwrap(), -0.98, max_relative = 1e-9);
        let g = reference(2, 3, 1.0, 3.0, 401);
        assert_relative_eq!(g.u_third_ratio(4).unwrap(), 3.0 * 0.98, max_relative = 1e-9);
    }

    #[test]
    fn u_third_ratio_needs_two_interior_rings() {
        let g = reference(2, 1, 1.0, 3.0, 41);
        for j in [0, 1, 39, 40] {
            assert!(matches!(
                g.u_third_ratio(j),
                Err(ProfileError::BoundaryNode { .. })
            ));
        }
        assert!(g.u_third_ratio(2).is_ok() && g.u_third_ratio(38).is_ok());
    }

    #[test]
    fn reconstruct_u_normalization_and_closed_form() {
        let g = reference(2, 1, 1.0, 3.0, 101);
        assert_eq!(g.reconstruct_u(0.0), 0.0);
        // The integrand of the affine profile is integrated exactly, so the
        // closed form u_hat(1) - u_hat(0) = 1 + 2 log((e+1)/2) holds to
        // rounding at any grid size.
        let want = 1.0 + 2.0 * ((std::f64::consts::E + 1.0) / 2.0).ln();
        assert_relative_eq!(g.reconstruct_u(1.0), want, max_relative = 1e-12);
        for m in [33, 401] {
            let g = reference(2, 1, 1.0, 3.0, m);
            assert_relative_eq!(g.reconstruct_u(1.0), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn reconstruct_u_matches_reference_potential_everywhere() {
        // Including rho beyond the outermost grid nodes, where the partial
        // boundary panels carry the logarithmic measure.
        let p = mp(2, 2);
        let c = kc(1.0, 5.0);
        let g = ProfileGrid::from_reference(p, c, 401).unwrap();
        for &rho in &[-5.0, -3.2, -1.0, -0.1, 0.3, 2.0, 5.0] {
            let (u, _, _) = geometry::reference_potential(p, c, rho);
            let (u0, _, _) = geometry::reference_potential(p, c, 0.0);
            assert_relative_eq!(g.reconstruct_u(rho), u - u0, max_relative = 1e-11);
        }
    }

    #[test]
    fn reconstruct_u_antisymmetry_identity() {
        // u(rho) + u(-rho) = u_hat(rho) + u_hat(-rho) - 2 u_hat(0) for the
        // reference profile (the a*rho parts cancel pairwise).
        let p = mp(2, 1);
        let c = kc(1.0, 3.0);
        let g = ProfileGrid::from_reference(p, c, 101).unwrap();
        for &rho in &[0.5, 1.0, 2.7] {
            let lhs = g.reconstruct_u(rho) + g.reconstruct_u(-rho);
            let (up, _, _) = geometry::reference_potential(p, c, rho);
            let (um, _, _) = geometry::reference_potential(p, c, -rho);
            let (u0, _, _) = geometry::reference_potential(p, c, 0.0);
            assert_relative_eq!(lhs, up + um - 2.0 * u0, max_relative = 1e-12);
        }
    }

    #[test]
    fn reconstruct_u_is_convex_in_rho() {
        let g = perturbed(2, 2, 1.0, 5.0, 201, 0.1);
        let h = 0.25;
        for i in -12..=12 {
            let rho = i as f64 * h;
            let second =
                g.reconstruct_u(rho + h) - 2.0 * g.reconstruct_u(rho) + g.reconstruct_u(rho - h);
            assert!(second > 0.0, "second difference at rho={rho} not positive");
        }
    }

    #[test]
    fn phi_tilde_vanishes_on_reference_of_evolved_class() {
        let p = mp(2, 2);
        let c0 = kc(1.0, 5.0);
        // t = 0: the initial profile is the reference of cls0.
        let g = ProfileGrid::from_reference(p, c0, 101).unwrap();
        for &rho in &[-4.0, -1.0, 0.0, 0.5, 3.0] {
            assert!(phi_tilde(&g, 0.0, c0, rho).unwrap().abs() < 1e-11);
        }
        // t > 0: reference of class_at(t) has phi_tilde identically zero.
        let t = 0.3;
        let ct = geometry::class_at(p, c0, t).unwrap();
        let g = ProfileGrid::from_reference(p, ct, 101).unwrap();
        for &rho in &[-4.0, -0.7, 0.0, 1.3, 4.0] {
            assert!(phi_tilde(&g, t, c0, rho).unwrap().abs() < 1e-11);
        }
    }

    proptest! {
        #[test]
        fn interior_values_stay_strictly_inside_class(
            m in 33usize..120,
            a in 0.2f64..3.0,
            gap in 0.1f64..4.0,
            eps in 0.0f64..0.25,
        ) {
            let g = perturbed(2, 1, a, a + gap, m, eps);
            for j in 1..m - 1 {
                prop_assert!(g.f()[j] > a && g.f()[j] < a + gap);
            }
        }

        #[test]
        fn reconstruct_u_midpoint_anchor_is_exact(
            a in 0.2f64..3.0,
            gap in 0.1f64..4.0,
            eps in 0.0f64..0.25,
        ) {
            let g = perturbed(2, 2, a, a + gap, 65, eps);
            prop_assert_eq!(g.reconstruct_u(0.0), 0.0);
        }
    }
}
