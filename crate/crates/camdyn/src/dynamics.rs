//! Free-flight follower dynamics, the restitution law and the contact force.
//!
//! Away from the cam the follower obeys
//! `m q'' + b q' + k q = -m g`,
//! whose flow is closed-form for the shifted state `x = (q + g/w0^2, q')`.
//! Impacts reset the velocity through a Newton restitution law, and during
//! persistent contact the cam must push with a non-negative normal force.

use crate::cam::{Cam, CamGeometry, CamState, Side};
use crate::error::ParamError;
use nalgebra::{Matrix2, Vector2};

/// Follower mass, damping, stiffness, gravity and restitution, with the
/// derived frequencies cached.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhysicalParams {
    pub mass: f64,
    pub damping: f64,
    pub stiffness: f64,
    pub gravity: f64,
    pub restitution: f64,
    #[serde(skip)]
    zeta: f64,
    #[serde(skip)]
    omega0: f64,
    #[serde(skip)]
    omega_s: f64,
}

/// Follower position and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowerState {
    pub q: f64,
    pub qdot: f64,
}

/// The 2x2 flow operator acting on the shifted state.
pub type FlowMatrix = Matrix2<f64>;

impl PhysicalParams {
    pub fn new(
        mass: f64,
        damping: f64,
        stiffness: f64,
        gravity: f64,
        restitution: f64,
    ) -> Result<Self, ParamError> {
        let bad = |m: String| ParamError::Invalid(m);
        for (name, v) in [("mass", mass), ("stiffness", stiffness), ("gravity", gravity)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(damping >= 0.0 && damping.is_finite()) {
            return Err(bad(format!("damping must be non-negative, got {damping}")));
        }
        if !(0.0..=1.0).contains(&restitution) {
            return Err(bad(format!("restitution must lie in [0, 1], got {restitution}")));
        }
        let zeta = damping / (2.0 * mass);
        let omega0 = (stiffness / mass).sqrt();
        if zeta >= omega0 {
            return Err(ParamError::Overdamped { zeta, omega0 });
        }
        let omega_s = (omega0 * omega0 - zeta * zeta).sqrt();
        Ok(PhysicalParams { mass, damping, stiffness, gravity, restitution, zeta, omega0, omega_s })
    }

    /// Re-derives the cached frequencies (used after deserialization).
    pub fn revalidate(&self) -> Result<Self, ParamError> {
        PhysicalParams::new(self.mass, self.damping, self.stiffness, self.gravity, self.restitution)
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn omega_s(&self) -> f64 {
        self.omega_s
    }

    /// Static offset `g / w0^2` between physical and shifted coordinates.
    pub fn shift(&self) -> f64 {
        self.gravity / (self.omega0 * self.omega0)
    }

    /// Shifted coordinates `(q + g/w0^2, q')`.
    pub fn to_shifted(&self, s: FollowerState) -> Vector2<f64> {
        Vector2::new(s.q + self.shift(), s.qdot)
    }

    pub fn from_shifted(&self, x: Vector2<f64>) -> FollowerState {
        FollowerState { q: x[0] - self.shift(), qdot: x[1] }
    }

    /// The system matrix of the shifted free flight, `dx/dt = S x`.
    pub fn system_matrix(&self) -> FlowMatrix {
        Matrix2::new(0.0, 1.0, -self.omega0 * self.omega0, -2.0 * self.zeta)
    }
}

/// The flow operator `phi_t` of the shifted free flight,
/// `phi_t = e^{-zeta t}/w_s [[w_s cos + zeta sin, sin], [-w0^2 sin, w_s cos - zeta sin]]`
/// with all trig arguments `w_s t`. Negative `t` flows backward.
pub fn flow_operator(p: &PhysicalParams, t: f64) -> FlowMatrix {
    let (s, c) = (p.omega_s * t).sin_cos();
    let e = (-p.zeta * t).exp() / p.omega_s;
    Matrix2::new(
        e * (p.omega_s * c + p.zeta * s),
        e * s,
        e * (-p.omega0 * p.omega0 * s),
        e * (p.omega_s * c - p.zeta * s),
    )
}

/// Analytic `d(phi_t)/dt` by the product rule on the closed form.
pub fn flow_operator_time_derivative(p: &PhysicalParams, t: f64) -> FlowMatrix {
    let (s, c) = (p.omega_s * t).sin_cos();
    let e = (-p.zeta * t).exp() / p.omega_s;
    let z = p.zeta;
    let ws = p.omega_s;
    let w02 = p.omega0 * p.omega0;
    // d/dt of e^{-zt} f(t) = e^{-zt} (f' - z f) entrywise
    let f11 = ws * c + z * s;
    let f12 = s;
    let f21 = -w02 * s;
    let f22 = ws * c - z * s;
    let d11 = -ws * ws * s + z * ws * c;
    let d12 = ws * c;
    let d21 = -w02 * ws * c;
    let d22 = -ws * ws * s - z * ws * c;
    Matrix2::new(
        e * (d11 - z * f11),
        e * (d12 - z * f12),
        e * (d21 - z * f21),
        e * (d22 - z * f22),
    )
}

/// Exact free flight of the follower over time `t`.
pub fn free_flight(p: &PhysicalParams, state: FollowerState, t: f64) -> FollowerState {
    p.from_shifted(flow_operator(p, t) * p.to_shifted(state))
}

/// Newton restitution at contact: the relative velocity reflects with
/// coefficient `r`, `q'(+) = (1+r) c' - r q'(-)`.
///
/// The caller guarantees contact; a grossly violated precondition is a
/// programming error and asserts.
pub fn apply_impact(p: &PhysicalParams, state: FollowerState, cam: &CamState) -> FollowerState {
    let scale = state.q.abs().max(cam.position.abs()).max(1e-9);
    assert!(
        (state.q - cam.position).abs() <= 1e-6 * scale.max(1.0),
        "apply_impact called without contact: q = {}, c = {}",
        state.q,
        cam.position
    );
    let post = cam.velocity + p.restitution * (cam.velocity - state.qdot);
    FollowerState { q: state.q, qdot: post }
}

/// Normal force the cam must exert to keep the follower in persistent
/// contact (`q == c`): `N = m c'' + b c' + k c + m g`. Contact survives
/// while `N >= 0`; `side` selects the one-sided `c''` at corners.
pub fn contact_force(p: &PhysicalParams, geom: &CamGeometry, t: f64, omega: f64, side: Side) -> f64 {
    contact_force_cam(p, &Cam::fixed(geom.clone()), t, omega, side)
}

/// As [`contact_force`] but honouring a cam phase offset.
pub fn contact_force_cam(p: &PhysicalParams, cam: &Cam, t: f64, omega: f64, side: Side) -> f64 {
    let (c, cd, cdd) = cam.full_state(t, omega, side);
    p.mass * cdd + p.damping * cd + p.stiffness * c + p.mass * p.gravity
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_params() -> PhysicalParams {
        PhysicalParams::new(1.0, 0.5, 1600.0, 9.81, 0.8).unwrap()
    }

    /// Fixed-step RK4 on `m q'' + b q' + k q = -m g`; test oracle only.
    fn rk4_flight(p: &PhysicalParams, s0: FollowerState, t: f64, steps: usize) -> FollowerState {
        let h = t / steps as f64;
        let f = |q: f64, qd: f64| {
            (qd, -(p.damping * qd + p.stiffness * q) / p.mass - p.gravity)
        };
        let (mut q, mut qd) = (s0.q, s0.qdot);
        for _ in 0..steps {
            let (k1q, k1v) = f(q, qd);
            let (k2q, k2v) = f(q + 0.5 * h * k1q, qd + 0.5 * h * k1v);
            let (k3q, k3v) = f(q + 0.5 * h * k2q, qd + 0.5 * h * k2v);
            let (k4q, k4v) = f(q + h * k3q, qd + h * k3v);
            q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
            qd += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        FollowerState { q, qdot: qd }
    }

    #[test]
    fn flow_at_zero_is_identity() {
        let p = reference_params();
        assert_eq!(flow_operator(&p, 0.0), Matrix2::identity());
    }

    #[test]
    fn flow_group_property() {
        let p = reference_params();
        let (t, s) = (0.037, -0.011);
        let lhs = flow_operator(&p, t) * flow_operator(&p, s);
        let rhs = flow_operator(&p, t + s);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        let round = flow_operator(&p, t) * flow_operator(&p, -t);
        assert_relative_eq!(round, Matrix2::identity(), epsilon = 1e-10);
    }

    #[test]
    fn undamped_half_period_reverses_sign() {
        let p = PhysicalParams::new(2.0, 0.0, 800.0, 9.81, 0.9).unwrap();
        let phi = flow_operator(&p, std::f64::consts::PI / p.omega0());
        assert_relative_eq!(phi, Matrix2::new(-1.0, 0.0, 0.0, -1.0), epsilon = 1e-12);
    }

    #[test]
    fn flow_determinant_is_damping_factor() {
        let p = reference_params();
        for i in 0..40 {
            let t = -0.1 + 0.005 * i as f64;
            assert_relative_eq!(
                flow_operator(&p, t).determinant(),
                (-2.0 * p.zeta() * t).exp(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn flow_matches_matrix_exponential_oracle() {
        // scaling and squaring of the system matrix
        let p = reference_params();
        let t = 0.02;
        let n = 1 << 20;
        let small = p.system_matrix() * (t / n as f64);
        let mut step = Matrix2::identity() + small + small * small * 0.5
            + small * small * small / 6.0 + small * small * small * small / 24.0;
        for _ in 0..20 {
            step = step * step;
        }
        assert_relative_eq!(flow_operator(&p, t), step, max_relative = 1e-9);
    }

    #[test]
    fn flow_derivative_at_zero_is_system_matrix() {
        let p = reference_params();
        assert_relative_eq!(flow_operator_time_derivative(&p, 0.0), p.system_matrix(), epsilon = 1e-12);
    }

    #[test]
    fn flow_derivative_identity_and_finite_difference() {
        let p = reference_params();
        for i in 0..20 {
            let t = -0.04 + 0.007 * i as f64;
            let d = flow_operator_time_derivative(&p, t);
            assert_relative_eq!(d, p.system_matrix() * flow_operator(&p, t), max_relative = 1e-10);
        }
        let t = 0.01;
        let h = 1e-6;
        let fd = (flow_operator(&p, t + h) - flow_operator(&p, t - h)) / (2.0 * h);
        assert_relative_eq!(flow_operator_time_derivative(&p, t), fd, max_relative = 1e-6);
    }

    #[test]
    fn free_flight_identity_and_equilibrium() {
        let p = reference_params();
        let s = FollowerState { q: 0.03, qdot: -1.2 };
        let out = free_flight(&p, s, 0.0);
        assert_relative_eq!(out.q, s.q, max_relative = 1e-14);
        assert_relative_eq!(out.qdot, s.qdot, max_relative = 1e-14);
        let eq = FollowerState { q: -p.shift(), qdot: 0.0 };
        for t in [0.01, 0.3, 2.0] {
            let out = free_flight(&p, eq, t);
            assert_relative_eq!(out.q, eq.q, epsilon = 1e-12);
            assert!(out.qdot.abs() < 1e-12);
        }
    }

    #[test]
    fn free_flight_matches_rk4_oracle() {
        let p = reference_params();
        let s0 = FollowerState { q: 0.024, qdot: -0.9 };
        let t = 0.05;
        let oracle = rk4_flight(&p, s0, t, 50_000);
        let exact = free_flight(&p, s0, t);
        assert_relative_eq!(exact.q, oracle.q, max_relative = 1e-8);
        assert_relative_eq!(exact.qdot, oracle.qdot, max_relative = 1e-8);
    }

    #[test]
    fn impact_examples() {
        let elastic = PhysicalParams::new(1.0, 0.5, 1600.0, 9.81, 1.0).unwrap();
        let s = FollowerState { q: 0.0, qdot: -1.0 };
        let cam = CamState { position: 0.0, velocity: 0.0 };
        assert_relative_eq!(apply_impact(&elastic, s, &cam).qdot, 1.0, epsilon = 1e-15);

        let plastic = PhysicalParams::new(1.0, 0.5, 1600.0, 9.81, 0.0).unwrap();
        let cam = CamState { position: 0.0, velocity: 0.35 };
        for qd in [-2.0, -0.1, 0.2] {
            let s = FollowerState { q: 0.0, qdot: qd };
            assert_relative_eq!(apply_impact(&plastic, s, &cam).qdot, 0.35, epsilon = 1e-15);
        }

        let p = reference_params(); // r = 0.8
        let s = FollowerState { q: 0.0, qdot: -1.0 };
        let cam = CamState { position: 0.0, velocity: 0.2 };
        assert_relative_eq!(apply_impact(&p, s, &cam).qdot, 1.16, epsilon = 1e-12);
    }

    #[test]
    #[should_panic(expected = "without contact")]
    fn impact_without_contact_is_programming_error() {
        let p = reference_params();
        let s = FollowerState { q: 1.0, qdot: -1.0 };
        let cam = CamState { position: 0.0, velocity: 0.0 };
        let _ = apply_impact(&p, s, &cam);
    }

    #[test]
    fn dwell_contact_force_is_static_preload() {
        let p = reference_params();
        let g = crate::cam::tests::reference_geometry();
        // early in the base dwell
        let omega = 30.0;
        let t = 0.5 * (std::f64::consts::PI / 2.0 - g.theta1) / omega;
        let n = contact_force(&p, &g, t, omega, Side::Left);
        assert_relative_eq!(n, p.stiffness * g.rho0 + p.mass * p.gravity, max_relative = 1e-12);
    }

    #[test]
    fn contact_force_scaling_in_omega() {
        let p = reference_params();
        let g = crate::cam::tests::reference_geometry();
        let omega = 40.0;
        let phase = 1.0; // on the flank
        let n1 = contact_force(&p, &g, phase / omega, omega, Side::Left);
        let n2 = contact_force(&p, &g, phase / (2.0 * omega), 2.0 * omega, Side::Left);
        let c = g.lift(phase);
        let cd = g.lift_slope(phase);
        let cdd = g.lift_curvature(phase, Side::Left);
        let stat = p.stiffness * c + p.mass * p.gravity;
        let expect2 = stat + p.damping * 2.0 * omega * cd + p.mass * 4.0 * omega * omega * cdd;
        assert_relative_eq!(n2, expect2, max_relative = 1e-12);
        assert_relative_eq!(
            n2 - stat,
            2.0 * p.damping * omega * cd + 4.0 * (n1 - stat - p.damping * omega * cd),
            max_relative = 1e-9
        );
    }

    #[test]
    fn overdamped_rejected() {
        assert!(matches!(
            PhysicalParams::new(1.0, 100.0, 100.0, 9.81, 0.5),
            Err(ParamError::Overdamped { .. })
        ));
    }

    proptest! {
        #[test]
        fn energy_decays_in_free_flight(
            q in -0.2f64..0.2,
            qd in -8.0f64..8.0,
            t in 0.0f64..0.5,
        ) {
            let p = reference_params();
            let x0 = p.to_shifted(FollowerState { q, qdot: qd });
            let e0 = 0.5 * (x0[1] * x0[1] + p.omega0().powi(2) * x0[0] * x0[0]);
            let x1 = p.to_shifted(free_flight(&p, FollowerState { q, qdot: qd }, t));
            let e1 = 0.5 * (x1[1] * x1[1] + p.omega0().powi(2) * x1[0] * x1[0]);
            prop_assert!(e1 <= e0 * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn semigroup_property(
            q in -0.2f64..0.2,
            qd in -8.0f64..8.0,
            s in -0.2f64..0.2,
            t in -0.2f64..0.2,
        ) {
            let p = reference_params();
            let a = free_flight(&p, free_flight(&p, FollowerState { q, qdot: qd }, s), t);
            let b = free_flight(&p, FollowerState { q, qdot: qd }, s + t);
            let scale = b.q.abs().max(b.qdot.abs()).max(1e-9);
            prop_assert!((a.q - b.q).abs() <= 1e-10 * scale.max(1.0));
            prop_assert!((a.qdot - b.qdot).abs() <= 1e-10 * scale.max(1.0));
        }

        #[test]
        fn restitution_contracts_relative_velocity(
            qd in -10.0f64..10.0,
            cv in -3.0f64..3.0,
            r in 0.0f64..1.0,
        ) {
            let p = PhysicalParams::new(1.0, 0.5, 1600.0, 9.81, r).unwrap();
            let s = FollowerState { q: 0.01, qdot: qd };
            let cam = CamState { position: 0.01, velocity: cv };
            let post = apply_impact(&p, s, &cam);
            let lhs = (post.qdot - cv).abs();
            let rhs = r * (qd - cv).abs();
            prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.max(1.0));
        }
    }
}
