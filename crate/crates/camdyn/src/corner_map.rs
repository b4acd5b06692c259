//! Analytic stroboscopic Poincare map near a corner-impact orbit.
//!
//! The map over one forcing period factors as a half-period flight, a
//! zero-time discontinuity correction at the corner section, and a second
//! half-period flight. Everything here works in the shifted coordinates
//! `x = (q + g/w0^2, q')`, in which the free flight is the linear flow
//! `phi_t`. The corner sits at `t = 0` by the scenario phase convention and
//! strobes sit at `-T/2 + nT`.

use crate::cam::{Cam, Side, SideOverride};
use crate::dynamics::{flow_operator, flow_operator_time_derivative, PhysicalParams};
use crate::error::MapError;
use crate::scenario::{rad_to_rpm, rpm_to_rad, Scenario};
use crate::simulator::{strobe_map_simulated, SimConfig, SimContext};
use nalgebra::{DMatrix, Matrix2, RowVector2, Vector2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;

/// Row selector picking the gap component of a state.
pub fn selector_h() -> RowVector2<f64> {
    RowVector2::new(1.0, 0.0)
}

/// Restitution correction matrix `R = [[0, 0], [0, -(1+r)]]`.
pub fn restitution_matrix(r: f64) -> Matrix2<f64> {
    Matrix2::new(0.0, 0.0, 0.0, -(1.0 + r))
}

/// Flows, cam data and period bundled for map-level computations.
pub struct MapSystem<'a> {
    pub params: &'a PhysicalParams,
    pub cam: &'a Cam,
    pub omega: f64,
}

impl<'a> MapSystem<'a> {
    pub fn new(params: &'a PhysicalParams, cam: &'a Cam, omega: f64) -> Self {
        MapSystem { params, cam, omega }
    }

    pub fn for_period(params: &'a PhysicalParams, cam: &'a Cam, period: f64) -> Self {
        MapSystem { params, cam, omega: TAU / period }
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    fn flow(&self, t: f64) -> Matrix2<f64> {
        flow_operator(self.params, t)
    }

    fn flow_dt(&self, t: f64) -> Matrix2<f64> {
        flow_operator_time_derivative(self.params, t)
    }

    /// Shifted cam state vector `y(t) = (c + g/w0^2, c')`.
    pub fn cam_vec(&self, t: f64) -> Vector2<f64> {
        let s = self.cam.state(t, self.omega);
        Vector2::new(s.position + self.params.shift(), s.velocity)
    }

    /// Time derivative `y'(t) = (c', c'')` with a one-sided acceleration.
    pub fn cam_vec_dt(&self, t: f64, side: Side) -> Vector2<f64> {
        let (_, cd, cdd) = self.cam.full_state(t, self.omega, side);
        Vector2::new(cd, cdd)
    }

    /// Sensitivity of the cam state to the forcing period at fixed time,
    /// `dy/dT = (-(t/T) c', -(1/T) c' - (t/T) c'')`.
    pub fn cam_vec_dperiod(&self, t: f64, side: Side) -> Vector2<f64> {
        let (_, cd, cdd) = self.cam.full_state(t, self.omega, side);
        let period = self.period();
        Vector2::new(-(t / period) * cd, -cd / period - (t / period) * cdd)
    }

    /// Gap between a shifted state and the cam at time `t`.
    fn gap_at(&self, x: &Vector2<f64>, t: f64) -> f64 {
        x[0] - self.cam_vec(t)[0]
    }
}

/// Output of the zero-time discontinuity mapping.
#[derive(Debug, Clone, Copy)]
pub struct ZdmResult {
    /// Corrected state on the section.
    pub state: Vector2<f64>,
    /// Root of the gap equation; the impact happens at physical time `-t_i`.
    pub t_i: f64,
}

/// Zero-time discontinuity mapping on the corner section.
///
/// Finds the root `t_i` of `H(t_i) = [phi_{-t_i} x - y(-t_i)]_1` nearest to
/// zero inside `[-window, window]` by safeguarded Newton seeded at `0`, then
/// applies `x+ = (I + phi_{t_i} R phi_{-t_i}) x - phi_{t_i} R y(-t_i)`.
pub fn zdm(sys: &MapSystem, x_d_minus: Vector2<f64>, window: f64) -> Result<ZdmResult, MapError> {
    let t_i = solve_gap_root(sys, &x_d_minus, window)?;
    let r = restitution_matrix(sys.params.restitution);
    let fwd = sys.flow(t_i);
    let back = sys.flow(-t_i);
    let y = sys.cam_vec(-t_i);
    let state = (Matrix2::identity() + fwd * r * back) * x_d_minus - fwd * r * y;
    Ok(ZdmResult { state, t_i })
}

fn solve_gap_root(sys: &MapSystem, x: &Vector2<f64>, window: f64) -> Result<f64, MapError> {
    let h_of = |ti: f64| sys.gap_at(&(sys.flow(-ti) * x), -ti);
    // dH/dt_i = [-phi'(-t_i) x + y'(-t_i)]_1; the first component of y' is
    // c', continuous across the corner, so H is C1 in t_i.
    let hp_of = |ti: f64| {
        let dx = sys.flow_dt(-ti) * x;
        -dx[0] + sys.cam_vec_dt(-ti, Side::Left)[0]
    };
    let scale = sys.cam.geometry().rho0;
    let tol_h = 1e-13 * scale;

    // plain Newton from 0 with step clamping
    let mut t = 0.0;
    for _ in 0..60 {
        let h = h_of(t);
        let hp = hp_of(t);
        if hp == 0.0 {
            break;
        }
        let mut step = -h / hp;
        let clamp = window / 2.0;
        if step.abs() > clamp {
            step = step.signum() * clamp;
        }
        let t_next = t + step;
        if t_next.abs() > window {
            break;
        }
        if (t_next - t).abs() <= 1e-16 * sys.period() && h.abs() <= tol_h {
            return Ok(t_next);
        }
        t = t_next;
        if h_of(t).abs() <= tol_h {
            return Ok(t);
        }
    }
    if h_of(t).abs() <= tol_h && t.abs() <= window {
        return Ok(t);
    }

    // fall back to a bracketed search near zero
    let n = 256;
    let mut best: Option<(f64, f64)> = None;
    let mut prev_t = -window;
    let mut prev_h = h_of(prev_t);
    for i in 1..=n {
        let ti = -window + 2.0 * window * i as f64 / n as f64;
        let hi = h_of(ti);
        if prev_h == 0.0 {
            return Ok(prev_t);
        }
        if prev_h * hi < 0.0 {
            let mid = 0.5 * (prev_t + ti);
            match best {
                Some((lo, hi_b)) if (0.5 * (lo + hi_b)).abs() <= mid.abs() => {}
                _ => best = Some((prev_t, ti)),
            }
        }
        prev_t = ti;
        prev_h = hi;
    }
    let (mut lo, mut hi) = best.ok_or(MapError::NoRootInWindow { lo: -window, hi: window })?;
    let (mut flo, mut fhi) = (h_of(lo), h_of(hi));
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-16 * sys.period().max(hi.abs()) {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        let fm = h_of(mid);
        if fm.abs() <= tol_h {
            return Ok(mid);
        }
        if flo * fm <= 0.0 {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    Err(MapError::NewtonDiverged { lo, hi, flo, fhi })
}

/// One application of the stroboscopic map `P(x_n, T)`, from the strobe at
/// `-T/2` to the strobe at `+T/2`.
///
/// Returns the image and the impact root `t_i` when the flight meets the
/// cam near the section; a flight whose gap never closes inside the window
/// maps by the pure flow.
pub fn full_map(
    sys: &MapSystem,
    x_n: Vector2<f64>,
    window: f64,
) -> Result<(Vector2<f64>, Option<f64>), MapError> {
    let half = sys.flow(sys.period() / 2.0);
    let x_d = half * x_n;
    match zdm(sys, x_d, window) {
        Ok(z) => Ok((half * z.state, Some(z.t_i))),
        Err(MapError::NoRootInWindow { .. }) => Ok((half * x_d, None)),
        Err(e) => Err(e),
    }
}

/// Everything the linearization needs about the corner orbit.
#[derive(Debug, Clone)]
pub struct CornerContext {
    /// Forcing period of the bifurcating orbit.
    pub t_star: f64,
    /// Cam speed, rad/s.
    pub omega_star: f64,
    /// Fixed point of the stroboscopic map (shifted coordinates).
    pub x_star: Vector2<f64>,
    /// Pre-impact state on the corner section, `phi_{T/2} x*`.
    pub x_section: Vector2<f64>,
    /// Cam phase of the corner.
    pub corner_phase: f64,
    /// Cam lift at the corner.
    pub cam_lift: f64,
    /// Cam velocity at the corner (time units).
    pub cam_velocity: f64,
    /// One-sided cam accelerations at the corner (time units).
    pub accel_left: f64,
    pub accel_right: f64,
    /// Residual of the fixed-point equation at `(x*, T*)`.
    pub fixed_point_residual: f64,
    /// Gap residual of the impact-at-corner condition.
    pub corner_gap_residual: f64,
}

impl CornerContext {
    fn accel(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.accel_left,
            Side::Right => self.accel_right,
        }
    }

    /// Pre-impact relative velocity at the corner.
    pub fn relative_velocity(&self) -> f64 {
        self.x_section[1] - self.cam_velocity
    }
}

/// Solves the corner fixed point: the period-1 state satisfying both the
/// stroboscopic fixed-point equation and the impact-at-corner condition,
/// by one-dimensional root finding on the cam speed inside an rpm bracket.
pub fn solve_fixed_point(
    params: &PhysicalParams,
    cam: &Cam,
    rpm_bracket: (f64, f64),
) -> Result<CornerContext, MapError> {
    let corner_phase = cam.phase_offset();
    let nearest = cam.geometry().nearest_discontinuity(corner_phase);
    if crate::cam::wrap_to_pi(corner_phase - nearest.phase).abs() > 1e-9 {
        return Err(MapError::OffsetNotACorner { offset: corner_phase, nearest: nearest.phase });
    }

    let gap = |omega: f64| -> Result<(f64, Vector2<f64>, Vector2<f64>), MapError> {
        let sys = MapSystem::new(params, cam, omega);
        let x_star = eq13_fixed_point(&sys)?;
        let x_d = sys.flow(sys.period() / 2.0) * x_star;
        let y0 = sys.cam_vec(0.0);
        Ok((x_d[0] - y0[0], x_star, x_d))
    };

    let (lo_rpm, hi_rpm) = rpm_bracket;
    let n = 256;
    let mut bracket = None;
    let mut prev = gap(rpm_to_rad(lo_rpm)).ok().map(|g| (lo_rpm, g.0));
    for i in 1..=n {
        let rpm = lo_rpm + (hi_rpm - lo_rpm) * i as f64 / n as f64;
        let cur = gap(rpm_to_rad(rpm)).ok().map(|g| (rpm, g.0));
        if let (Some((r0, g0)), Some((r1, g1))) = (prev, cur) {
            if g0 == 0.0 || g0 * g1 < 0.0 {
                bracket = Some((r0, r1));
                break;
            }
        }
        prev = cur;
    }
    let (mut lo, mut hi) = bracket.ok_or(MapError::NoCornerRoot { lo_rpm, hi_rpm })?;
    let mut glo = gap(rpm_to_rad(lo))?.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= f64::EPSILON * mid.abs() * 4.0 {
            break;
        }
        let gm = gap(rpm_to_rad(mid))?.0;
        if glo * gm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            glo = gm;
        }
    }
    let omega_star = rpm_to_rad(0.5 * (lo + hi));
    let t_star = TAU / omega_star;
    let sys = MapSystem::new(params, cam, omega_star);
    let (corner_gap, x_star, x_d) = gap(omega_star)?;

    // verify the defining equation
    let half = sys.flow(t_star / 2.0);
    let full = sys.flow(t_star);
    let r = restitution_matrix(params.restitution);
    let y0 = sys.cam_vec(0.0);
    let lhs = (Matrix2::identity() - full + half * r * half) * x_star;
    let rhs = -half * r * y0;
    let scale = x_star.norm().max(y0.norm()).max(1e-12);
    let residual = (lhs - rhs).norm() / scale;
    if residual > 1e-9 {
        return Err(MapError::ResidualTooLarge { residual, tol: 1e-9 });
    }

    let (c0, cd0, acc_l) = cam.full_state(0.0, omega_star, Side::Left);
    let (_, _, acc_r) = cam.full_state(0.0, omega_star, Side::Right);
    Ok(CornerContext {
        t_star,
        omega_star,
        x_star,
        x_section: x_d,
        corner_phase,
        cam_lift: c0,
        cam_velocity: cd0,
        accel_left: acc_l,
        accel_right: acc_r,
        fixed_point_residual: residual,
        corner_gap_residual: corner_gap.abs(),
    })
}

/// The stroboscopic fixed point for a given speed with the impact pinned at
/// `t_i = 0`: `x* = -[I - phi_T + phi_{T/2} R phi_{T/2}]^{-1} phi_{T/2} R y_0`.
fn eq13_fixed_point(sys: &MapSystem) -> Result<Vector2<f64>, MapError> {
    let period = sys.period();
    let half = sys.flow(period / 2.0);
    let full = sys.flow(period);
    let r = restitution_matrix(sys.params.restitution);
    let m = Matrix2::identity() - full + half * r * half;
    let rhs = -half * r * sys.cam_vec(0.0);
    m.lu()
        .solve(&rhs)
        .ok_or(MapError::SingularFixedPoint { omega_rpm: rad_to_rpm(sys.omega) })
}

fn grazing_check(ctx: &CornerContext) -> Result<f64, MapError> {
    let denom = ctx.relative_velocity();
    let scale = ctx.x_section[1].abs().max(ctx.cam_velocity.abs()).max(1.0);
    if denom.abs() < 1e-8 * scale {
        return Err(MapError::GrazingCorner { relative_velocity: denom });
    }
    Ok(denom)
}

/// Closed-form state Jacobian of the stroboscopic map at the corner orbit:
/// `A = phi_{T/2} [[-r, 0], [-(1+r)(2 zeta c0' + c0'' + w0^2 q_d)/(q_d' - c0'), -r]] phi_{T/2}`
/// with the one-sided `c0''` chosen by `side`.
pub fn jacobian_x(
    ctx: &CornerContext,
    params: &PhysicalParams,
    side: Side,
) -> Result<Matrix2<f64>, MapError> {
    let denom = grazing_check(ctx)?;
    let r = params.restitution;
    let half = flow_operator(params, ctx.t_star / 2.0);
    let k = (2.0 * params.zeta() * ctx.cam_velocity
        + ctx.accel(side)
        + params.omega0().powi(2) * ctx.x_section[0])
        / denom;
    let mid = Matrix2::new(-r, 0.0, -(1.0 + r) * k, -r);
    Ok(half * mid * half)
}

/// Closed-form period Jacobian `B = dP/dT` at the corner orbit.
///
/// `B = 1/2 phi'_{T/2} (x_d + x_d+) + 1/2 phi_{T/2} ([q_d', -r q_d'' - 2(1+r) c0'/T]
///      - (1+r) q_d'/(q_d' - c0') [q_d' - c0', 2 zeta c0' + c0'' + w0^2 q_d])`
/// where `x_d+` is the post-impact section state and `q_d''` the free-flight
/// acceleration at the section.
pub fn jacobian_period(
    ctx: &CornerContext,
    params: &PhysicalParams,
    side: Side,
) -> Result<Vector2<f64>, MapError> {
    let denom = grazing_check(ctx)?;
    let r = params.restitution;
    let half = flow_operator(params, ctx.t_star / 2.0);
    let half_dt = flow_operator_time_derivative(params, ctx.t_star / 2.0);
    let xd = ctx.x_section;
    let (qd, qdv) = (xd[0], xd[1]);
    let cd = ctx.cam_velocity;
    let qdd = -params.omega0().powi(2) * qd - 2.0 * params.zeta() * qdv;
    let xd_post = Vector2::new(qd, -r * qdv + (1.0 + r) * cd);
    let w = Vector2::new(
        qdv - cd,
        2.0 * params.zeta() * cd + ctx.accel(side) + params.omega0().powi(2) * qd,
    );
    let gw = (1.0 + r) * qdv / denom;
    let v = Vector2::new(qdv, -r * qdd - 2.0 * (1.0 + r) * cd / ctx.t_star) - w * gw;
    Ok(half_dt * (xd + xd_post) * 0.5 + half * v * 0.5)
}

/// State Jacobian assembled through the implicit-differentiation chain,
/// kept as an independent code path from [`jacobian_x`].
pub fn jacobian_x_compositional(
    ctx: &CornerContext,
    sys: &MapSystem,
    side: Side,
) -> Result<Matrix2<f64>, MapError> {
    grazing_check(ctx)?;
    let t_i = 0.0;
    let period = ctx.t_star;
    let x_n = ctx.x_star;
    let r = restitution_matrix(sys.params.restitution);
    let half = sys.flow(period / 2.0);

    let explicit = half * (Matrix2::identity() + sys.flow(t_i) * r * sys.flow(-t_i)) * half;
    let dp_dti = dp_dti_vec(ctx, sys, side, t_i);
    let dh_dti = dh_dti_scalar(ctx, sys, side, t_i);
    let dh_dx = selector_h() * sys.flow(period / 2.0 - t_i);
    let dti_dx = -dh_dx / dh_dti;
    let _ = x_n;
    Ok(explicit + dp_dti * dti_dx)
}

/// Period Jacobian assembled through the implicit-differentiation chain.
pub fn jacobian_period_compositional(
    ctx: &CornerContext,
    sys: &MapSystem,
    side: Side,
) -> Result<Vector2<f64>, MapError> {
    grazing_check(ctx)?;
    let t_i = 0.0;
    let period = ctx.t_star;
    let x_n = ctx.x_star;
    let r = restitution_matrix(sys.params.restitution);

    let explicit = (sys.flow_dt(period)
        + sys.flow_dt(period / 2.0 + t_i) * r * sys.flow(period / 2.0 - t_i) * 0.5
        + sys.flow(period / 2.0 + t_i) * r * sys.flow_dt(period / 2.0 - t_i) * 0.5)
        * x_n
        - sys.flow_dt(period / 2.0 + t_i) * r * sys.cam_vec(-t_i) * 0.5
        - sys.flow(period / 2.0 + t_i) * r * sys.cam_vec_dperiod(-t_i, side);
    let dp_dti = dp_dti_vec(ctx, sys, side, t_i);
    let dh_dti = dh_dti_scalar(ctx, sys, side, t_i);
    let dh_dt = (selector_h() * (sys.flow_dt(period / 2.0 - t_i) * x_n * 0.5
        - sys.cam_vec_dperiod(-t_i, side)))[0];
    let dti_dt = -dh_dt / dh_dti;
    Ok(explicit + dp_dti * dti_dt)
}

/// `dP/dt_i` holding everything else fixed.
fn dp_dti_vec(ctx: &CornerContext, sys: &MapSystem, side: Side, t_i: f64) -> Vector2<f64> {
    let period = ctx.t_star;
    let x_n = ctx.x_star;
    let r = restitution_matrix(sys.params.restitution);
    let half = sys.flow(period / 2.0);
    let bracket = (sys.flow_dt(t_i) * r * sys.flow(-t_i) - sys.flow(t_i) * r * sys.flow_dt(-t_i))
        * (half * x_n)
        - sys.flow_dt(t_i) * r * sys.cam_vec(-t_i)
        + sys.flow(t_i) * r * sys.cam_vec_dt(-t_i, side);
    half * bracket
}

/// `dH/dt_i = -h (phi'_{T/2 - t_i} x_n - y'(-t_i))`.
fn dh_dti_scalar(ctx: &CornerContext, sys: &MapSystem, side: Side, t_i: f64) -> f64 {
    let period = ctx.t_star;
    let x_n = ctx.x_star;
    (selector_h() * (sys.flow_dt(period / 2.0 - t_i) * x_n - sys.cam_vec_dt(-t_i, side)))[0]
        * -1.0
}

/// The local piecewise-linear continuous map
/// `dx_{n+1} = A_side dx_n + B_side dT`, with the branch selected by the
/// sign of `C dx + D dT` and the continuity identities `C = h (A+ - A-)`,
/// `D = h (B+ - B-)` holding by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPwlMap {
    pub a_minus: Matrix2<f64>,
    pub a_plus: Matrix2<f64>,
    pub b_minus: Vector2<f64>,
    pub b_plus: Vector2<f64>,
    pub c: RowVector2<f64>,
    pub d: f64,
    pub x_star: Vector2<f64>,
    pub t_star: f64,
    pub omega_star: f64,
    /// Whether the `+` branch (right-side acceleration) is active where
    /// `C dx + D dT > 0`. The orientation is a property of the underlying
    /// flow; both occur in practice.
    pub plus_when_positive: bool,
}

impl LocalPwlMap {
    pub fn switching(&self, dx: &Vector2<f64>, dt: f64) -> f64 {
        (self.c * dx)[0] + self.d * dt
    }

    /// Branch active at a perturbation; the boundary itself resolves to the
    /// left branch by convention.
    pub fn active_side(&self, dx: &Vector2<f64>, dt: f64) -> Side {
        let s = self.switching(dx, dt);
        let plus = if self.plus_when_positive { s > 0.0 } else { s < 0.0 };
        if plus {
            Side::Right
        } else {
            Side::Left
        }
    }

    pub fn branch(&self, side: Side) -> (&Matrix2<f64>, &Vector2<f64>) {
        match side {
            Side::Left => (&self.a_minus, &self.b_minus),
            Side::Right => (&self.a_plus, &self.b_plus),
        }
    }

    /// One application of the piecewise map.
    pub fn apply(&self, dx: &Vector2<f64>, dt: f64) -> Vector2<f64> {
        let (a, b) = self.branch(self.active_side(dx, dt));
        a * dx + b * dt
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let file = MapFile::from(self);
        let text = toml::to_string_pretty(&file).expect("map serializes");
        std::fs::write(path, text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read map file {}: {e}", path.display()))?;
        let file: MapFile = toml::from_str(&text)
            .map_err(|e| format!("cannot parse map file {}: {e}", path.display()))?;
        file.into_map()
    }
}

/// Row-major on-disk form of a [`LocalPwlMap`].
#[derive(Debug, Serialize, Deserialize)]
pub struct MapFile {
    pub t_star: f64,
    pub omega_star_rpm: f64,
    pub x_star: [f64; 2],
    pub a_minus: [[f64; 2]; 2],
    pub a_plus: [[f64; 2]; 2],
    pub b_minus: [f64; 2],
    pub b_plus: [f64; 2],
    pub c: [f64; 2],
    pub d: f64,
    pub plus_when_positive: bool,
}

impl From<&LocalPwlMap> for MapFile {
    fn from(m: &LocalPwlMap) -> Self {
        let rows = |a: &Matrix2<f64>| [[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]];
        MapFile {
            t_star: m.t_star,
            omega_star_rpm: rad_to_rpm(m.omega_star),
            x_star: [m.x_star[0], m.x_star[1]],
            a_minus: rows(&m.a_minus),
            a_plus: rows(&m.a_plus),
            b_minus: [m.b_minus[0], m.b_minus[1]],
            b_plus: [m.b_plus[0], m.b_plus[1]],
            c: [m.c[0], m.c[1]],
            d: m.d,
            plus_when_positive: m.plus_when_positive,
        }
    }
}

impl MapFile {
    pub fn into_map(self) -> Result<LocalPwlMap, String> {
        let mat = |a: [[f64; 2]; 2]| Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1]);
        let m = LocalPwlMap {
            a_minus: mat(self.a_minus),
            a_plus: mat(self.a_plus),
            b_minus: Vector2::new(self.b_minus[0], self.b_minus[1]),
            b_plus: Vector2::new(self.b_plus[0], self.b_plus[1]),
            c: RowVector2::new(self.c[0], self.c[1]),
            d: self.d,
            x_star: Vector2::new(self.x_star[0], self.x_star[1]),
            t_star: self.t_star,
            omega_star: rpm_to_rad(self.omega_star_rpm),
            plus_when_positive: self.plus_when_positive,
        };
        // the continuity identities must hold for the file to describe a
        // continuous piecewise-linear map
        let c_check = selector_h() * (m.a_plus - m.a_minus);
        let d_check = (selector_h() * (m.b_plus - m.b_minus))[0];
        let c_scale = m.c.norm().max(1e-12);
        if (c_check - m.c).norm() > 1e-6 * c_scale {
            return Err(format!(
                "map file violates C = h(A+ - A-): stored {:?}, derived {:?}",
                m.c, c_check
            ));
        }
        if (d_check - m.d).abs() > 1e-6 * m.d.abs().max(1e-12) {
            return Err(format!(
                "map file violates D = h(B+ - B-): stored {}, derived {}",
                m.d, d_check
            ));
        }
        Ok(m)
    }
}

/// Assembles the local piecewise-linear map at a corner context.
///
/// Orientation of the switching rule follows the flow: the impact moves to
/// the right of the corner (`+` side) exactly when
/// `(1+r) (c0''+ - c0''-) [phi_{T/2}]_{12}` and the switching value share
/// their sign.
pub fn build_local_map(ctx: &CornerContext, params: &PhysicalParams) -> Result<LocalPwlMap, MapError> {
    let denom = grazing_check(ctx)?;
    let scale = ctx.x_section[1].abs().max(ctx.cam_velocity.abs()).max(1.0);
    if scale / denom.abs() > 1e8 {
        eprintln!(
            "warning: near-grazing corner, Jacobian condition ~{:e}; entries may be inaccurate",
            scale / denom.abs()
        );
    }
    let a_minus = jacobian_x(ctx, params, Side::Left)?;
    let a_plus = jacobian_x(ctx, params, Side::Right)?;
    let b_minus = jacobian_period(ctx, params, Side::Left)?;
    let b_plus = jacobian_period(ctx, params, Side::Right)?;
    let c = selector_h() * (a_plus - a_minus);
    let d = (selector_h() * (b_plus - b_minus))[0];
    let half = flow_operator(params, ctx.t_star / 2.0);
    let orient = (1.0 + params.restitution) * (ctx.accel_right - ctx.accel_left) * half[(0, 1)];
    Ok(LocalPwlMap {
        a_minus,
        a_plus,
        b_minus,
        b_plus,
        c,
        d,
        x_star: ctx.x_star,
        t_star: ctx.t_star,
        omega_star: ctx.omega_star,
        plus_when_positive: orient > 0.0,
    })
}

/// Least-squares estimate of the branch Jacobians from event-driven
/// simulations of the true map.
#[derive(Debug, Clone)]
pub struct EstimatedMap {
    pub a_minus: Matrix2<f64>,
    pub a_plus: Matrix2<f64>,
    pub b_minus: Vector2<f64>,
    pub b_plus: Vector2<f64>,
    pub samples: usize,
    pub perturbation_scale: f64,
    pub seed: u64,
}

/// Estimates `A_side, B_side` by simulating the event-driven map from `m`
/// perturbed `(x, T)` pairs, once with the cam curvature frozen to its left
/// value near the corner and once to its right value, then solving the
/// least-squares system for each side.
///
/// Perturbations come in antithetic pairs so the quadratic model error
/// cancels from the fit.
pub fn estimate_map_numerically(
    scenario: &Scenario,
    ctx: &CornerContext,
    m: usize,
    perturbation_scale: f64,
    seed: u64,
) -> Result<EstimatedMap, MapError> {
    if m < 3 {
        return Err(MapError::RankDeficient { rank: m });
    }
    let params = &scenario.params;
    let geometry = &scenario.geometry;
    let corner = ctx.corner_phase;
    // freeze window: half way to the nearest other discontinuity
    let half_width = geometry
        .discontinuity_phases()
        .iter()
        .map(|d| crate::cam::wrap_to_pi(d.phase - corner).abs())
        .filter(|w| *w > 1e-9)
        .fold(f64::INFINITY, f64::min)
        .min(0.4)
        / 2.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sx = Vector2::new(
        perturbation_scale * ctx.x_star[0].abs().max(geometry.rho0),
        perturbation_scale * ctx.x_star[1].abs().max(1.0),
    );
    let st = perturbation_scale * ctx.t_star;
    let mut perturbations = Vec::with_capacity(m);
    while perturbations.len() < m {
        let dx = Vector2::new(
            sx[0] * (rng.gen::<f64>() * 2.0 - 1.0),
            sx[1] * (rng.gen::<f64>() * 2.0 - 1.0),
        );
        let dt = st * (rng.gen::<f64>() * 2.0 - 1.0);
        perturbations.push((dx, dt));
        if perturbations.len() < m {
            perturbations.push((-dx, -dt));
        }
    }

    // tighter event tolerance than interactive runs: the fit signal is tiny
    let mut est_config = scenario.sim.clone();
    est_config.tol_event = est_config.tol_event.min(1e-14);

    let mut sides = Vec::new();
    for side in [Side::Left, Side::Right] {
        let cam = scenario.cam().with_side_override(SideOverride {
            corner_phase: corner,
            side,
            half_width,
        });
        let images: Result<Vec<Vector2<f64>>, MapError> = perturbations
            .par_iter()
            .map(|(dx, dt)| {
                let period = ctx.t_star + dt;
                let omega = TAU / period;
                let sim_ctx = SimContext::new(params, &cam, omega, &est_config);
                let x_n = params.from_shifted(ctx.x_star + dx);
                let t0 = est_config.strobe_phase / omega;
                let out = strobe_map_simulated(&sim_ctx, x_n, t0)?;
                Ok(params.to_shifted(out) - ctx.x_star)
            })
            .collect();
        let images = images?;

        // least squares [A | B] from dx_{n+1} ~ A dx + B dT
        let mut design = DMatrix::zeros(m, 3);
        let mut target = DMatrix::zeros(m, 2);
        for (i, ((dx, dt), out)) in perturbations.iter().zip(&images).enumerate() {
            design[(i, 0)] = dx[0];
            design[(i, 1)] = dx[1];
            design[(i, 2)] = *dt;
            target[(i, 0)] = out[0];
            target[(i, 1)] = out[1];
        }
        let svd = design.svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|s| **s > smax * 1e-10).count();
        if rank < 3 {
            return Err(MapError::RankDeficient { rank });
        }
        let theta = svd.solve(&target, smax * 1e-14).map_err(|_| MapError::RankDeficient { rank })?;
        let a = Matrix2::new(theta[(0, 0)], theta[(1, 0)], theta[(0, 1)], theta[(1, 1)]);
        let b = Vector2::new(theta[(2, 0)], theta[(2, 1)]);
        sides.push((a, b));
    }

    Ok(EstimatedMap {
        a_minus: sides[0].0,
        b_minus: sides[0].1,
        a_plus: sides[1].0,
        b_plus: sides[1].1,
        samples: m,
        perturbation_scale,
        seed,
    })
}

/// Default gap-root window used by map evaluations: a sixth of the period.
pub fn default_window(period: f64) -> f64 {
    period / 6.0
}

/// Convenience: context plus derived map for a scenario, root-finding the
/// corner speed inside the given rpm bracket.
pub fn derive_map(scenario: &Scenario, rpm_bracket: (f64, f64)) -> Result<(CornerContext, LocalPwlMap), MapError> {
    let cam = scenario.cam();
    let ctx = solve_fixed_point(&scenario.params, &cam, rpm_bracket)?;
    let map = build_local_map(&ctx, &scenario.params)?;
    Ok((ctx, map))
}
