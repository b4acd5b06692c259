//! Piecewise-smooth cam lift profile built from four circular arcs.
//!
//! The lift `c(theta)` is defined on the half period `(0, pi]` by four
//! segments: a base-circle dwell, a flank arc, a nose arc and a nose dwell.
//! It extends to `(pi, 2pi)` by even symmetry, `c(2pi - theta) = c(theta)`.
//! The construction makes `c` and `c'` continuous everywhere while `c''`
//! jumps at the segment boundaries; those corners are what drive the
//! border-collision analysis downstream.

use crate::error::GeometryError;
use std::f64::consts::{PI, TAU};

/// Relative tolerance (times `rho0`) for lift continuity at segment joins.
pub const LIFT_CONTINUITY_TOL: f64 = 1e-12;
/// Relative tolerance (times `rho0`) for lift-slope continuity at joins.
pub const SLOPE_CONTINUITY_TOL: f64 = 1e-9;

/// Which one-sided limit to take at a point where `c''` jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Four-arc cam geometry.
///
/// `kappa1`, `kappa2` are the distances from the cam centre to the flank
/// and nose arc centres; `rho0..rho3` are the base radius, flank radius,
/// nose radius and total nose lift; `theta1 > theta2 > theta3` place the
/// segment boundaries at `pi/2 - theta_i`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CamGeometry {
    pub kappa1: f64,
    pub kappa2: f64,
    pub rho0: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

/// Cam position and velocity seen by the follower at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CamState {
    pub position: f64,
    pub velocity: f64,
}

/// A phase where the cam acceleration jumps.
///
/// `jump` is the difference of one-sided second derivatives with respect
/// to phase, right minus left; multiply by `omega^2` for the jump of the
/// second time derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discontinuity {
    pub phase: f64,
    pub jump: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Segment {
    BaseDwell,
    Flank,
    NoseArc,
    NoseDwell,
}

/// A segment together with the mirror flag for phases in `(pi, 2pi)`.
#[derive(Debug, Clone, Copy)]
struct SegmentRef {
    segment: Segment,
    mirrored: bool,
}

impl CamGeometry {
    /// Validates and constructs a geometry from the nine raw constants.
    pub fn new(
        kappa1: f64,
        kappa2: f64,
        rho0: f64,
        rho1: f64,
        rho2: f64,
        rho3: f64,
        theta1: f64,
        theta2: f64,
        theta3: f64,
    ) -> Result<Self, GeometryError> {
        let g = CamGeometry { kappa1, kappa2, rho0, rho1, rho2, rho3, theta1, theta2, theta3 };
        g.validate()?;
        Ok(g)
    }

    /// Builds a consistent geometry from five free parameters.
    ///
    /// The flank arc is internally tangent to the base circle and the nose
    /// arc is internally tangent to the flank arc and to the nose-dwell
    /// circle, so the lift is C1 by construction. `flank_span` is the phase
    /// width `theta1 - theta2` of the flank segment.
    pub fn from_arcs(
        base_radius: f64,
        flank_radius: f64,
        theta1: f64,
        flank_span: f64,
        nose_radius: f64,
    ) -> Result<Self, GeometryError> {
        let bad = |m: &str| GeometryError::Invalid(m.to_string());
        if !(base_radius > 0.0 && flank_radius > base_radius) {
            return Err(bad("need 0 < base_radius < flank_radius"));
        }
        if !(nose_radius > 0.0 && nose_radius < flank_radius) {
            return Err(bad("need 0 < nose_radius < flank_radius"));
        }
        if !(flank_span > 0.0 && theta1 > flank_span && theta1 < PI / 2.0) {
            return Err(bad("need 0 < flank_span < theta1 < pi/2"));
        }
        let kappa1 = flank_radius - base_radius;
        let w1 = (flank_radius.powi(2) - (kappa1 * flank_span.sin()).powi(2)).sqrt();
        // nose-arc centre in the frame of the flank/nose boundary ray
        let shrink = 1.0 - nose_radius / flank_radius;
        let o2_along = -kappa1 * flank_span.cos() + shrink * w1;
        let o2_perp = kappa1 * flank_span.sin() * nose_radius / flank_radius;
        let kappa2 = o2_along.hypot(o2_perp);
        let beta = o2_perp.atan2(o2_along);
        let theta2 = theta1 - flank_span;
        let theta3 = theta2 - beta;
        if !(theta3 > 0.0) {
            return Err(bad("derived theta3 <= 0; reduce flank_span or nose_radius"));
        }
        CamGeometry::new(
            kappa1,
            kappa2,
            base_radius,
            flank_radius,
            nose_radius,
            kappa2 + nose_radius,
            theta1,
            theta2,
            theta3,
        )
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| GeometryError::Invalid(m);
        for (name, v) in [
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("rho0", self.rho0),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("rho3", self.rho3),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(0.0 < self.theta3 && self.theta3 < self.theta2 && self.theta2 < self.theta1
            && self.theta1 < PI / 2.0)
        {
            return Err(bad(format!(
                "need 0 < theta3 < theta2 < theta1 < pi/2, got {} {} {}",
                self.theta3, self.theta2, self.theta1
            )));
        }
        if !(self.rho0 < self.rho3) {
            return Err(bad(format!("need rho0 < rho3, got {} >= {}", self.rho0, self.rho3)));
        }
        // square-root arguments must stay positive on the arc segments
        if self.rho1 <= self.kappa1 {
            return Err(bad("flank arc radius must exceed its centre offset".into()));
        }
        let beta = self.theta2 - self.theta3;
        if self.rho2 <= self.kappa2 * beta.sin() {
            return Err(bad("nose arc does not reach the flank/nose boundary ray".into()));
        }
        // C0 / C1 continuity at the three interior joins
        for b in self.half_boundaries() {
            let (cl, dl) = self.boundary_one_sided(b, Side::Left);
            let (cr, dr) = self.boundary_one_sided(b, Side::Right);
            let cjump = (cr - cl).abs();
            if cjump > LIFT_CONTINUITY_TOL * self.rho0 {
                return Err(GeometryError::LiftDiscontinuous {
                    phase: b,
                    jump: cjump,
                    allowed: LIFT_CONTINUITY_TOL * self.rho0,
                });
            }
            let djump = (dr - dl).abs();
            if djump > SLOPE_CONTINUITY_TOL * self.rho0 {
                return Err(GeometryError::VelocityDiscontinuous {
                    phase: b,
                    jump: djump,
                    allowed: SLOPE_CONTINUITY_TOL * self.rho0,
                });
            }
        }
        let has_corner = self
            .half_boundaries()
            .iter()
            .any(|&b| (self.accel_one_sided(b, Side::Right) - self.accel_one_sided(b, Side::Left)).abs() > 0.0);
        if !has_corner {
            return Err(GeometryError::NoCorner);
        }
        Ok(())
    }

    /// Segment boundaries inside the half period, ascending.
    fn half_boundaries(&self) -> [f64; 3] {
        [PI / 2.0 - self.theta1, PI / 2.0 - self.theta2, PI / 2.0 - self.theta3]
    }

    fn segment_of_half(&self, th: f64) -> Segment {
        let [b1, b2, b3] = self.half_boundaries();
        if th <= b1 {
            Segment::BaseDwell
        } else if th <= b2 {
            Segment::Flank
        } else if th <= b3 {
            Segment::NoseArc
        } else {
            Segment::NoseDwell
        }
    }

    /// Lift and its first two phase derivatives for one segment formula,
    /// evaluated without any domain restriction.
    fn segment_eval(&self, segment: Segment, th: f64) -> (f64, f64, f64) {
        match segment {
            Segment::BaseDwell => (self.rho0, 0.0, 0.0),
            Segment::NoseDwell => (self.rho3, 0.0, 0.0),
            Segment::Flank => {
                let u = th + self.theta1;
                let (su, cu) = u.sin_cos();
                let k = self.kappa1;
                let w = (self.rho1.powi(2) - (k * cu).powi(2)).sqrt();
                let c = -k * su + w;
                let cp = -k * cu + k * k * su * cu / w;
                let cpp = k * su + k * k * (2.0 * u).cos() / w - k.powi(4) * (su * cu).powi(2) / w.powi(3);
                (c, cp, cpp)
            }
            Segment::NoseArc => {
                let v = th + self.theta3;
                let (sv, cv) = v.sin_cos();
                let k = self.kappa2;
                let w = (self.rho2.powi(2) - (k * cv).powi(2)).sqrt();
                let c = k * sv + w;
                let cp = k * cv + k * k * sv * cv / w;
                let cpp = -k * sv + k * k * (2.0 * v).cos() / w - k.powi(4) * (sv * cv).powi(2) / w.powi(3);
                (c, cp, cpp)
            }
        }
    }

    /// Evaluates a possibly mirrored segment formula at an arbitrary phase;
    /// used both for regular evaluation and for one-sided extensions across
    /// a corner.
    fn segment_ref_eval(&self, sref: SegmentRef, theta: f64) -> (f64, f64, f64) {
        if sref.mirrored {
            let (c, cp, cpp) = self.segment_eval(sref.segment, TAU - theta);
            (c, -cp, cpp)
        } else {
            self.segment_eval(sref.segment, theta)
        }
    }

    fn segment_ref_at(&self, theta: f64, side: Side) -> SegmentRef {
        let th = reduce_phase(theta);
        // nudge the query to the requested side so exact boundaries resolve
        let eps = 1e-13;
        let probe = match side {
            Side::Left => th - eps,
            Side::Right => th + eps,
        };
        let probe = reduce_phase(probe);
        if probe <= PI {
            SegmentRef { segment: self.segment_of_half(probe), mirrored: false }
        } else {
            SegmentRef { segment: self.segment_of_half(TAU - probe), mirrored: true }
        }
    }

    fn eval(&self, theta: f64, side: Side) -> (f64, f64, f64) {
        let th = reduce_phase(theta);
        self.segment_ref_eval(self.segment_ref_at(th, side), th)
    }

    /// One-sided `(c, c')` limits at a half-domain boundary, from the exact
    /// segment formulas (used by validation).
    fn boundary_one_sided(&self, b: f64, side: Side) -> (f64, f64) {
        let seg = match side {
            Side::Left => self.segment_of_half(b),
            Side::Right => self.segment_of_half((b + 1e-12).min(PI)),
        };
        let (c, cp, _) = self.segment_eval(seg, b);
        (c, cp)
    }

    fn accel_one_sided(&self, b: f64, side: Side) -> f64 {
        let seg = match side {
            Side::Left => self.segment_of_half(b),
            Side::Right => self.segment_of_half((b + 1e-12).min(PI)),
        };
        self.segment_eval(seg, b).2
    }

    /// Lift at a phase (any real angle; reduced to the fundamental period).
    pub fn lift(&self, theta: f64) -> f64 {
        self.eval(theta, Side::Left).0
    }

    /// Phase derivative of the lift.
    pub fn lift_slope(&self, theta: f64) -> f64 {
        self.eval(theta, Side::Left).1
    }

    /// One-sided second phase derivative of the lift.
    pub fn lift_curvature(&self, theta: f64, side: Side) -> f64 {
        self.eval(theta, side).2
    }

    /// All phases in `[0, 2pi)` where `c''` jumps, ascending, with the jump
    /// (right minus left, in phase units).
    pub fn discontinuity_phases(&self) -> Vec<Discontinuity> {
        let mut out = Vec::with_capacity(6);
        for b in self.half_boundaries() {
            let jump = self.accel_one_sided(b, Side::Right) - self.accel_one_sided(b, Side::Left);
            if jump != 0.0 {
                out.push(Discontinuity { phase: b, jump });
            }
        }
        // mirrored corners: jumps change sign under the even extension
        for d in out.clone().iter().rev() {
            out.push(Discontinuity { phase: TAU - d.phase, jump: -d.jump });
        }
        out
    }

    /// The discontinuity nearest to `phase` (by wrapped distance).
    pub fn nearest_discontinuity(&self, phase: f64) -> Discontinuity {
        let mut best = Discontinuity { phase: f64::NAN, jump: 0.0 };
        let mut dist = f64::INFINITY;
        for d in self.discontinuity_phases() {
            let w = wrap_to_pi(phase - d.phase).abs();
            if w < dist {
                dist = w;
                best = d;
            }
        }
        best
    }
}

/// Reduces an angle to `[0, 2pi)`.
pub fn reduce_phase(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r == TAU {
        0.0
    } else {
        r
    }
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_to_pi(d: f64) -> f64 {
    let r = reduce_phase(d);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Lift at a phase.
pub fn eval_lift(geom: &CamGeometry, theta: f64) -> f64 {
    geom.lift(theta)
}

/// Cam position and velocity at time `t` for rotation speed `omega`,
/// with the zero-offset phase convention `theta = omega t`.
pub fn eval_state(geom: &CamGeometry, t: f64, omega: f64) -> CamState {
    Cam::fixed(geom.clone()).state(t, omega)
}

/// One-sided second time derivative of the cam position.
pub fn eval_acceleration(geom: &CamGeometry, t: f64, omega: f64, side: Side) -> f64 {
    Cam::fixed(geom.clone()).acceleration(t, omega, side)
}

/// Replaces the cam curvature near one corner by its one-sided value, by
/// extending that side's segment formula across the corner inside a phase
/// window. `c` and `c'` stay continuous at the corner itself.
#[derive(Debug, Clone)]
pub struct SideOverride {
    pub corner_phase: f64,
    pub side: Side,
    pub half_width: f64,
}

/// A cam geometry with a phase offset (`theta(t) = offset + omega t`) and an
/// optional one-sided curvature override used by the map estimator.
#[derive(Debug, Clone)]
pub struct Cam {
    geom: CamGeometry,
    phase_offset: f64,
    overriding: Option<(SideOverride, SegmentRef)>,
}

impl Cam {
    pub fn new(geom: CamGeometry, phase_offset: f64) -> Self {
        Cam { geom, phase_offset, overriding: None }
    }

    /// A cam with the zero phase offset.
    pub fn fixed(geom: CamGeometry) -> Self {
        Cam::new(geom, 0.0)
    }

    pub fn geometry(&self) -> &CamGeometry {
        &self.geom
    }

    pub fn phase_offset(&self) -> f64 {
        self.phase_offset
    }

    /// Applies a one-sided curvature override around a corner.
    pub fn with_side_override(mut self, ov: SideOverride) -> Self {
        let sref = self.geom.segment_ref_at(ov.corner_phase, ov.side);
        self.overriding = Some((ov, sref));
        self
    }

    pub fn phase(&self, t: f64, omega: f64) -> f64 {
        reduce_phase(self.phase_offset + omega * t)
    }

    fn eval_phase(&self, theta: f64, side: Side) -> (f64, f64, f64) {
        if let Some((ov, sref)) = &self.overriding {
            let d = wrap_to_pi(theta - ov.corner_phase);
            if d.abs() <= ov.half_width {
                // evaluate the frozen side's formula, unwrapped around the corner
                let local = ov.corner_phase + d;
                return self.geom.segment_ref_eval(*sref, reduce_phase(local));
            }
        }
        self.geom.eval(theta, side)
    }

    pub fn lift_at(&self, t: f64, omega: f64) -> f64 {
        self.eval_phase(self.phase(t, omega), Side::Left).0
    }

    /// Cam position and velocity (time derivatives) at `t`.
    pub fn state(&self, t: f64, omega: f64) -> CamState {
        let (c, cp, _) = self.eval_phase(self.phase(t, omega), Side::Left);
        CamState { position: c, velocity: omega * cp }
    }

    /// One-sided second time derivative at `t`.
    pub fn acceleration(&self, t: f64, omega: f64, side: Side) -> f64 {
        let (_, _, cpp) = self.eval_phase(self.phase(t, omega), side);
        omega * omega * cpp
    }

    /// `(position, velocity, one-sided acceleration)` in time units.
    pub fn full_state(&self, t: f64, omega: f64, side: Side) -> (f64, f64, f64) {
        let (c, cp, cpp) = self.eval_phase(self.phase(t, omega), side);
        (c, omega * cp, omega * omega * cpp)
    }

    /// Times in `(t0, t0 + horizon]` at which the cam phase crosses any
    /// segment boundary, ascending. These subdivide a search interval so the
    /// gap function is smooth on each piece.
    pub fn boundary_times(&self, t0: f64, horizon: f64, omega: f64) -> Vec<f64> {
        let mut bounds: Vec<f64> = self
            .geom
            .half_boundaries()
            .iter()
            .flat_map(|&b| [b, TAU - b])
            .collect();
        bounds.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        let theta0 = self.phase_offset + omega * t0;
        // first k with boundary phase above theta0, then walk forward
        let span = omega * horizon;
        let mut k = (theta0 / TAU).floor();
        'outer: loop {
            for &b in &bounds {
                let th = b + k * TAU;
                if th <= theta0 {
                    continue;
                }
                if th - theta0 > span {
                    break 'outer;
                }
                out.push(t0 + (th - theta0) / omega);
            }
            k += 1.0;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn reference_geometry() -> CamGeometry {
        CamGeometry::from_arcs(0.02, 0.035, 70f64.to_radians(), 33f64.to_radians(), 0.008)
            .expect("reference geometry is valid")
    }

    #[test]
    fn base_dwell_value_on_first_segment() {
        let g = reference_geometry();
        let theta = (PI / 2.0 - g.theta1) / 2.0;
        assert_eq!(g.lift(theta), g.rho0);
        assert_eq!(g.lift_slope(theta), 0.0);
        assert_eq!(g.lift_curvature(theta, Side::Left), 0.0);
    }

    #[test]
    fn nose_dwell_value_through_pi() {
        let g = reference_geometry();
        let b3 = PI / 2.0 - g.theta3;
        for theta in [b3 + 1e-9, (b3 + PI) / 2.0, PI] {
            assert_eq!(g.lift(theta), g.rho3);
        }
    }

    #[test]
    fn lift_continuous_at_shared_boundaries() {
        let g = reference_geometry();
        for b in g.half_boundaries() {
            let (cl, _) = g.boundary_one_sided(b, Side::Left);
            let (cr, _) = g.boundary_one_sided(b, Side::Right);
            assert!((cl - cr).abs() <= 1e-12 * g.rho0, "lift jump {} at {}", cl - cr, b);
        }
    }

    #[test]
    fn slope_continuous_but_curvature_jumps() {
        let g = reference_geometry();
        let mut max_slope_jump: f64 = 0.0;
        let mut max_curv_jump: f64 = 0.0;
        for b in g.half_boundaries() {
            let (_, dl) = g.boundary_one_sided(b, Side::Left);
            let (_, dr) = g.boundary_one_sided(b, Side::Right);
            max_slope_jump = max_slope_jump.max((dr - dl).abs());
            let jump = g.accel_one_sided(b, Side::Right) - g.accel_one_sided(b, Side::Left);
            max_curv_jump = max_curv_jump.max(jump.abs());
        }
        assert!(max_slope_jump <= 1e-9 * g.rho0);
        assert!(max_curv_jump > 0.0);
    }

    #[test]
    fn periodicity_and_symmetry() {
        let g = reference_geometry();
        for i in 0..200 {
            let theta = -7.0 + 0.07 * i as f64;
            assert_relative_eq!(g.lift(theta), g.lift(theta + TAU), max_relative = 1e-12);
            assert_relative_eq!(g.lift(theta), g.lift(TAU - theta), max_relative = 1e-12);
            // reduction path is exact
            assert_eq!(g.lift(theta), g.lift(reduce_phase(theta)));
        }
    }

    #[test]
    fn six_discontinuities_reported_sorted() {
        let g = reference_geometry();
        let ds = g.discontinuity_phases();
        assert_eq!(ds.len(), 6);
        for w in ds.windows(2) {
            assert!(w[0].phase < w[1].phase);
        }
        for d in &ds {
            let right = eval_acceleration(&g, d.phase, 1.0, Side::Right);
            let left = eval_acceleration(&g, d.phase, 1.0, Side::Left);
            assert_relative_eq!(d.jump, right - left, max_relative = 1e-12);
        }
    }

    #[test]
    fn mirrored_jumps_negate() {
        let g = reference_geometry();
        let ds = g.discontinuity_phases();
        for i in 0..3 {
            let d = ds[i];
            let m = ds[5 - i];
            assert_relative_eq!(m.phase, TAU - d.phase, max_relative = 1e-14);
            assert_relative_eq!(m.jump, -d.jump, max_relative = 1e-12);
        }
    }

    #[test]
    fn velocity_matches_finite_difference_of_lift() {
        let g = reference_geometry();
        let omega = 80.0;
        let h = 1e-7;
        for i in 1..60 {
            let t = 1e-3 * i as f64;
            // skip samples too close to a segment boundary
            let ph = reduce_phase(omega * t);
            if g.discontinuity_phases().iter().any(|d| wrap_to_pi(ph - d.phase).abs() < 2.0 * omega * h) {
                continue;
            }
            let fd = (g.lift(omega * (t + h)) - g.lift(omega * (t - h))) / (2.0 * h);
            let v = eval_state(&g, t, omega).velocity;
            assert_relative_eq!(v, fd, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn acceleration_matches_second_difference() {
        let g = reference_geometry();
        let omega = 80.0;
        let h = 1e-5;
        for i in 1..60 {
            let t = 1e-3 * i as f64;
            let ph = reduce_phase(omega * t);
            if g.discontinuity_phases().iter().any(|d| wrap_to_pi(ph - d.phase).abs() < 2.0 * omega * h) {
                continue;
            }
            let fd = (g.lift(omega * (t + h)) - 2.0 * g.lift(omega * t) + g.lift(omega * (t - h))) / (h * h);
            let a = eval_acceleration(&g, t, omega, Side::Left);
            if fd.abs() < 1e-6 {
                continue; // dwell segments are exactly flat
            }
            assert_relative_eq!(a, fd, max_relative = 1e-4);
        }
    }

    #[test]
    fn velocity_scales_with_omega() {
        let g = reference_geometry();
        let omega = 50.0;
        let t = 0.013;
        let s1 = eval_state(&g, t, omega);
        let s2 = eval_state(&g, t / 2.0, 2.0 * omega);
        assert_relative_eq!(s1.position, s2.position, max_relative = 1e-14);
        assert_relative_eq!(2.0 * s1.velocity, s2.velocity, max_relative = 1e-14);
    }

    #[test]
    fn degenerate_circle_rejected() {
        // rho0 == rho3 cannot happen through from_arcs; force it raw
        let g = reference_geometry();
        let err = CamGeometry::new(
            g.kappa1, g.kappa2, g.rho3, g.rho1, g.rho2, g.rho3, g.theta1, g.theta2, g.theta3,
        );
        assert!(err.is_err());
    }

    #[test]
    fn invalid_angle_order_rejected() {
        let g = reference_geometry();
        let err = CamGeometry::new(
            g.kappa1, g.kappa2, g.rho0, g.rho1, g.rho2, g.rho3, g.theta3, g.theta2, g.theta1,
        );
        assert!(err.is_err());
    }

    #[test]
    fn side_override_freezes_curvature_across_corner() {
        let g = reference_geometry();
        let corner = g.discontinuity_phases()[1]; // flank/nose join
        let cam = Cam::new(g.clone(), 0.0).with_side_override(SideOverride {
            corner_phase: corner.phase,
            side: Side::Left,
            half_width: 0.05,
        });
        let omega = 1.0;
        let eps = 1e-4;
        // right of the corner now reports left-side curvature
        let frozen = cam.acceleration(corner.phase + eps, omega, Side::Left);
        let left = g.lift_curvature(corner.phase - eps, Side::Left);
        assert_relative_eq!(frozen, left, max_relative = 1e-3);
        // position and velocity stay continuous at the corner
        let s_in = cam.state(corner.phase - 1e-9, omega);
        let s_out = cam.state(corner.phase + 1e-9, omega);
        assert_relative_eq!(s_in.position, s_out.position, max_relative = 1e-9);
        assert!((s_in.velocity - s_out.velocity).abs() < 1e-7);
        // outside the window the true profile applies
        let outside = cam.acceleration(corner.phase + 0.1, omega, Side::Left);
        assert_relative_eq!(outside, g.lift_curvature(corner.phase + 0.1, Side::Left), max_relative = 1e-12);
    }

    #[test]
    fn boundary_times_enumerates_crossings() {
        let g = reference_geometry();
        let cam = Cam::new(g.clone(), 1.0);
        let omega = 90.0;
        let t0 = -0.01;
        let horizon = 0.25;
        let ts = cam.boundary_times(t0, horizon, omega);
        assert!(!ts.is_empty());
        for w in ts.windows(2) {
            assert!(w[0] < w[1]);
        }
        for &t in &ts {
            assert!(t > t0 && t <= t0 + horizon + 1e-12);
            let ph = cam.phase(t, omega);
            let near = g
                .discontinuity_phases()
                .iter()
                .map(|d| wrap_to_pi(ph - d.phase).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(near < 1e-9, "crossing at t={t} lands at phase {ph}, {near} from a boundary");
        }
        // count matches omega * horizon / (2pi) * 6 within one lap
        let laps = omega * horizon / TAU;
        assert!((ts.len() as f64 - 6.0 * laps).abs() <= 6.0);
    }
}
