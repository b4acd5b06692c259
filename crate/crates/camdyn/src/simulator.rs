//! Event-driven time integration: analytic free flight between impacts,
//! restitution at root-resolved contact times, chattering cutoff into
//! sticking, and contact-force-driven detachment.

use crate::cam::{wrap_to_pi, Cam, Side};
use crate::dynamics::{
    apply_impact, contact_force_cam, flow_operator, free_flight, FollowerState, PhysicalParams,
};
use crate::error::SimError;
use std::f64::consts::TAU;
use std::io::Write;

/// Tolerances and thresholds of the event-driven integration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    /// Impact-time root tolerance (time units).
    pub tol_event: f64,
    /// Penetration tolerance (length units).
    pub tol_pen: f64,
    /// Relative-velocity threshold below which chattering completes into sticking.
    pub eps_stick_v: f64,
    /// Safety cutoff on impacts within one forcing period.
    pub max_impacts_per_period: usize,
    /// Stroboscopic sampling phase; the default -pi samples half a period
    /// before the corner.
    pub strobe_phase: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            tol_event: 1e-11,
            tol_pen: 1e-10,
            eps_stick_v: 5e-4,
            max_impacts_per_period: 400,
            strobe_phase: -std::f64::consts::PI,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("tol_event", self.tol_event),
            ("tol_pen", self.tol_pen),
            ("eps_stick_v", self.eps_stick_v),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::BadConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_impacts_per_period < 1 {
            return Err(SimError::BadConfig("max_impacts_per_period must be >= 1".into()));
        }
        if !self.strobe_phase.is_finite() {
            return Err(SimError::BadConfig("strobe_phase must be finite".into()));
        }
        Ok(())
    }
}

/// One resolved impact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactEvent {
    pub t: f64,
    /// Cam phase of the impact in `[0, 2pi)`.
    pub phase: f64,
    pub pre_velocity: f64,
    pub post_velocity: f64,
    pub cam_velocity: f64,
    /// Index into `discontinuity_phases()` when the impact lands within
    /// `omega * tol_event` of a corner.
    pub at_corner: Option<usize>,
}

/// A maximal interval of persistent contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StickingInterval {
    pub t_start: f64,
    pub t_end: f64,
}

/// One stroboscopic sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrobeSample {
    pub n: usize,
    pub t: f64,
    pub state: FollowerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FreeFlight,
    Sticking,
}

/// Sampled evolution of one simulation run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub strobes: Vec<StrobeSample>,
    pub impacts: Vec<ImpactEvent>,
    pub sticking: Vec<StickingInterval>,
    /// Mode switches as `(time, mode entered)`, starting with the initial mode.
    pub modes: Vec<(f64, Mode)>,
    /// Set when `max_impacts_per_period` truncated the run.
    pub chatter_overflow: bool,
    pub t0: f64,
    pub duration: f64,
    pub omega: f64,
    /// Follower state at the end of the run.
    pub end_state: FollowerState,
}

/// Everything a simulation step needs to know.
#[derive(Clone, Copy)]
pub struct SimContext<'a> {
    pub params: &'a PhysicalParams,
    pub cam: &'a Cam,
    pub omega: f64,
    pub config: &'a SimConfig,
}

impl<'a> SimContext<'a> {
    pub fn new(params: &'a PhysicalParams, cam: &'a Cam, omega: f64, config: &'a SimConfig) -> Self {
        SimContext { params, cam, omega, config }
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    fn gap(&self, x0: &nalgebra::Vector2<f64>, t0: f64, t: f64) -> (f64, f64) {
        let x = flow_operator(self.params, t - t0) * x0;
        let c = self.cam.state(t, self.omega);
        (x[0] - self.params.shift() - c.position, x[1] - c.velocity)
    }

    fn normal_force(&self, t: f64, side: Side) -> f64 {
        contact_force_cam(self.params, self.cam, t, self.omega, side)
    }
}

/// Result of an impact search.
#[derive(Debug, Clone, Copy)]
pub struct ImpactHit {
    pub t: f64,
    pub state: FollowerState,
}

/// Finds the earliest `t > t0` within `horizon` where the follower meets the
/// cam, `q(t) = c(t)`.
///
/// The search interval is subdivided at every cam-segment boundary crossing
/// so the gap function is smooth on each piece, sampled for sign changes,
/// and the bracketed root is polished by safeguarded Newton to `tol_event`.
/// Tangential minima that do not penetrate are skipped.
pub fn find_next_impact(
    ctx: &SimContext,
    state: FollowerState,
    t0: f64,
    horizon: f64,
) -> Result<Option<ImpactHit>, SimError> {
    if horizon <= 0.0 {
        return Ok(None);
    }
    let x0 = ctx.params.to_shifted(state);
    let t_end = t0 + horizon;

    // breakpoints where the gap loses smoothness
    let mut cuts = ctx.cam.boundary_times(t0, horizon, ctx.omega);
    cuts.push(t_end);

    // dense enough for the follower oscillation and the cam features
    let h_osc = std::f64::consts::PI / ctx.params.omega_s() / 16.0;
    let h_cam = ctx.period() / 64.0;
    let h_max = h_osc.min(h_cam);

    let (g0, gd0) = ctx.gap(&x0, t0, t0);

    // leaving a fresh impact: resolve the short re-contact window first
    let mut first_fine_until = t0;
    if g0.abs() <= 4.0 * ctx.config.tol_pen && gd0 >= 0.0 {
        let cam_acc = ctx.cam.acceleration(t0, ctx.omega, Side::Right);
        let x = flow_operator(ctx.params, 0.0) * x0;
        let q_acc = -2.0 * ctx.params.zeta() * x[1] - ctx.params.omega0().powi(2) * x[0];
        let rel_acc = q_acc - cam_acc;
        if rel_acc < 0.0 {
            let t_bounce = 2.0 * gd0.max(ctx.config.eps_stick_v * 1e-3) / rel_acc.abs();
            first_fine_until = t0 + (4.0 * t_bounce).min(horizon);
        }
    }

    let mut seg_start = t0;
    let mut prev_t = t0;
    let mut prev = (g0, gd0);
    for cut in cuts {
        if cut <= seg_start + ctx.config.tol_event * 0.5 {
            seg_start = seg_start.max(cut);
            continue;
        }
        let mut t = seg_start;
        while t < cut {
            let step = if t < first_fine_until {
                ((first_fine_until - t0) / 32.0).max(ctx.config.tol_event)
            } else {
                h_max
            };
            let t_next = (t + step).min(cut);
            let cur = ctx.gap(&x0, t0, t_next);
            if let Some(hit) =
                scan_pair(ctx, &x0, t0, prev_t, prev, t_next, cur)?
            {
                return Ok(Some(hit));
            }
            prev_t = t_next;
            prev = cur;
            t = t_next;
        }
        seg_start = cut;
    }
    Ok(None)
}

/// Examines one sampling step for a crossing or a penetrating minimum.
fn scan_pair(
    ctx: &SimContext,
    x0: &nalgebra::Vector2<f64>,
    t0: f64,
    ta: f64,
    (ga, gda): (f64, f64),
    tb: f64,
    (gb, gdb): (f64, f64),
) -> Result<Option<ImpactHit>, SimError> {
    if ta >= tb {
        return Ok(None);
    }
    // ignore the departure tail of the previous impact
    let leaving = ga.abs() <= 4.0 * ctx.config.tol_pen && gda > 0.0;
    if ga > 0.0 && gb <= 0.0 {
        let hit = polish_root(ctx, x0, t0, ta, ga, tb, gb)?;
        return Ok(Some(hit));
    }
    if leaving && gb <= 0.0 {
        // fell straight through within one step: the crossing is inside
        let hit = polish_root(ctx, x0, t0, ta, ga.max(f64::MIN_POSITIVE), tb, gb)?;
        return Ok(Some(hit));
    }
    // both positive but descending-then-ascending: check the interior minimum
    if ga > 0.0 && gb > 0.0 && gda < 0.0 && gdb > 0.0 {
        let tm = locate_velocity_zero(ctx, x0, t0, ta, gda, tb, gdb);
        let (gm, _) = ctx.gap(x0, t0, tm);
        if gm <= 0.0 {
            let hit = polish_root(ctx, x0, t0, ta, ga, tm, gm.min(-f64::MIN_POSITIVE))?;
            return Ok(Some(hit));
        }
        // a tangential touch that does not penetrate generates no impact
    }
    Ok(None)
}

/// Bisection on the relative velocity to find the gap minimum.
fn locate_velocity_zero(
    ctx: &SimContext,
    x0: &nalgebra::Vector2<f64>,
    t0: f64,
    mut lo: f64,
    mut flo: f64,
    mut hi: f64,
    mut _fhi: f64,
) -> f64 {
    for _ in 0..80 {
        if hi - lo <= ctx.config.tol_event {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (_, gd) = ctx.gap(x0, t0, mid);
        if gd < 0.0 {
            lo = mid;
            flo = gd;
        } else {
            hi = mid;
            _fhi = gd;
        }
    }
    let _ = flo;
    0.5 * (lo + hi)
}

/// Safeguarded Newton polish of a bracketed gap root.
fn polish_root(
    ctx: &SimContext,
    x0: &nalgebra::Vector2<f64>,
    t0: f64,
    mut lo: f64,
    mut glo: f64,
    mut hi: f64,
    mut ghi: f64,
) -> Result<ImpactHit, SimError> {
    debug_assert!(glo > 0.0 && ghi <= 0.0);
    let mut t = hi;
    let mut g = ghi;
    for _ in 0..100 {
        if hi - lo <= ctx.config.tol_event {
            let t_hit = hi; // keep the non-positive side so contact holds
            let x = flow_operator(ctx.params, t_hit - t0) * x0;
            return Ok(ImpactHit { t: t_hit, state: ctx.params.from_shifted(x) });
        }
        let (_, gd) = ctx.gap(x0, t0, t);
        let newton = if gd.abs() > 0.0 { t - g / gd } else { f64::NAN };
        let mut t_next = newton;
        if !(t_next > lo && t_next < hi) {
            t_next = 0.5 * (lo + hi);
        }
        let (gn, _) = ctx.gap(x0, t0, t_next);
        if gn > 0.0 {
            lo = t_next;
            glo = gn;
        } else {
            hi = t_next;
            ghi = gn;
        }
        t = t_next;
        g = gn;
    }
    Err(SimError::RootPolishFailed { iterations: 100, lo, hi, glo: glo, ghi: ghi })
}

/// Finds the first time in `(t0, t0 + horizon]` where the contact force
/// crosses zero from above; a jump below zero at a corner detaches exactly
/// at the corner.
fn find_detachment(ctx: &SimContext, t0: f64, horizon: f64) -> Option<f64> {
    let t_end = t0 + horizon;
    let mut cuts = ctx.cam.boundary_times(t0, horizon, ctx.omega);
    cuts.push(t_end);
    let mut seg_start = t0;
    for cut in cuts {
        if cut <= seg_start {
            continue;
        }
        // jump check at the segment entry
        if seg_start > t0 && ctx.normal_force(seg_start, Side::Right) < 0.0 {
            return Some(seg_start);
        }
        let n_samples = 32;
        let mut prev_t = seg_start;
        let mut prev_n = ctx.normal_force(seg_start, Side::Right);
        for i in 1..=n_samples {
            let t = seg_start + (cut - seg_start) * i as f64 / n_samples as f64;
            let n = ctx.normal_force(t, Side::Left);
            if prev_n >= 0.0 && n < 0.0 {
                // bisect the crossing
                let (mut lo, mut hi) = (prev_t, t);
                for _ in 0..100 {
                    if hi - lo <= ctx.config.tol_event {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if ctx.normal_force(mid, Side::Left) < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            prev_t = t;
            prev_n = n;
        }
        seg_start = cut;
    }
    None
}

/// Event-driven simulation over `duration` starting from `x0` at `t0`.
///
/// Alternates analytic free flight, restitution impacts, chattering
/// completion into sticking, and contact until the normal force crosses
/// zero. Stroboscopic samples are recorded at the configured phase once per
/// period.
pub fn simulate(
    ctx: &SimContext,
    x0: FollowerState,
    t0: f64,
    duration: f64,
) -> Result<Trajectory, SimError> {
    ctx.config.validate()?;
    let omega = ctx.omega;
    let period = ctx.period();
    let t_end = t0 + duration;
    let c0 = ctx.cam.state(t0, omega);
    if x0.q < c0.position - ctx.config.tol_pen.max(1e-12 * c0.position.abs()) - ctx.config.tol_pen {
        return Err(SimError::BadConfig(format!(
            "initial state penetrates the cam: q0 = {} < c = {}",
            x0.q, c0.position
        )));
    }

    // strobe times: omega t = strobe_phase (mod 2pi)
    let mut strobe_n = ((t0 * omega - ctx.config.strobe_phase) / TAU).floor() as i64 + 1;
    let strobe_time = |n: i64| (ctx.config.strobe_phase + TAU * n as f64) / omega;
    while strobe_time(strobe_n) <= t0 + ctx.config.tol_event {
        strobe_n += 1;
    }

    let mut traj = Trajectory {
        strobes: Vec::new(),
        impacts: Vec::new(),
        sticking: Vec::new(),
        modes: Vec::new(),
        chatter_overflow: false,
        t0,
        duration,
        omega,
        end_state: x0,
    };
    let corners = ctx.cam.geometry().discontinuity_phases();

    let mut t = t0;
    let mut state = x0;
    let on_contact = (x0.q - c0.position).abs() <= ctx.config.tol_pen.max(1e-9 * c0.position.abs());
    let mut mode = if on_contact
        && (x0.qdot - c0.velocity).abs() <= ctx.config.eps_stick_v
        && ctx.normal_force(t0, Side::Right) >= 0.0
    {
        Mode::Sticking
    } else {
        Mode::FreeFlight
    };
    traj.modes.push((t, mode));
    let mut stick_start = t;
    let mut period_index: i64 = 0;
    let mut impacts_this_period: usize = 0;

    // emits strobes in (t, until]; during flight from (flight_from, flight_state)
    let emit_strobes = |traj: &mut Trajectory,
                        strobe_n: &mut i64,
                        until: f64,
                        flight: Option<(f64, FollowerState)>| {
        while strobe_time(*strobe_n) <= until + 1e-15 * until.abs().max(1.0) {
            let ts = strobe_time(*strobe_n);
            let s = match flight {
                Some((tf, xf)) => free_flight(ctx.params, xf, ts - tf),
                None => {
                    let c = ctx.cam.state(ts, omega);
                    FollowerState { q: c.position, qdot: c.velocity }
                }
            };
            traj.strobes.push(StrobeSample { n: *strobe_n as usize, t: ts, state: s });
            *strobe_n += 1;
        }
    };

    while t < t_end {
        match mode {
            Mode::Sticking => {
                match find_detachment(ctx, t, t_end - t) {
                    Some(td) => {
                        emit_strobes(&mut traj, &mut strobe_n, td, None);
                        traj.sticking.push(StickingInterval { t_start: stick_start, t_end: td });
                        let c = ctx.cam.state(td, omega);
                        state = FollowerState { q: c.position, qdot: c.velocity };
                        t = td;
                        mode = Mode::FreeFlight;
                        traj.modes.push((t, mode));
                    }
                    None => {
                        emit_strobes(&mut traj, &mut strobe_n, t_end, None);
                        traj.sticking.push(StickingInterval { t_start: stick_start, t_end });
                        let c = ctx.cam.state(t_end, omega);
                        state = FollowerState { q: c.position, qdot: c.velocity };
                        t = t_end;
                    }
                }
            }
            Mode::FreeFlight => {
                match find_next_impact(ctx, state, t, t_end - t)? {
                    None => {
                        emit_strobes(&mut traj, &mut strobe_n, t_end, Some((t, state)));
                        state = free_flight(ctx.params, state, t_end - t);
                        t = t_end;
                    }
                    Some(hit) => {
                        emit_strobes(&mut traj, &mut strobe_n, hit.t, Some((t, state)));
                        let cam_state = ctx.cam.state(hit.t, omega);
                        let contact = FollowerState { q: cam_state.position, qdot: hit.state.qdot };
                        let post = apply_impact(ctx.params, contact, &cam_state);
                        let phase = ctx.cam.phase(hit.t, omega);
                        let at_corner = corners
                            .iter()
                            .position(|d| wrap_to_pi(phase - d.phase).abs() < omega * ctx.config.tol_event);
                        traj.impacts.push(ImpactEvent {
                            t: hit.t,
                            phase,
                            pre_velocity: hit.state.qdot,
                            post_velocity: post.qdot,
                            cam_velocity: cam_state.velocity,
                            at_corner,
                        });

                        let k = ((hit.t - t0) / period).floor() as i64;
                        if k != period_index {
                            period_index = k;
                            impacts_this_period = 0;
                        }
                        impacts_this_period += 1;

                        t = hit.t;
                        if (post.qdot - cam_state.velocity).abs() < ctx.config.eps_stick_v
                            && ctx.normal_force(t, Side::Right) >= 0.0
                        {
                            mode = Mode::Sticking;
                            traj.modes.push((t, mode));
                            stick_start = t;
                            state = FollowerState { q: cam_state.position, qdot: cam_state.velocity };
                        } else {
                            state = post;
                        }
                        if impacts_this_period > ctx.config.max_impacts_per_period {
                            traj.chatter_overflow = true;
                            traj.duration = hit.t - t0;
                            traj.end_state = state;
                            return Ok(traj);
                        }
                    }
                }
            }
        }
    }
    traj.end_state = state;
    Ok(traj)
}

/// The stroboscopic state sequence of a trajectory.
pub fn stroboscopic_sequence(traj: &Trajectory) -> Vec<FollowerState> {
    traj.strobes.iter().map(|s| s.state).collect()
}

/// The event-driven stroboscopic map over exactly one period: flight and
/// impacts only, starting from a strobe state at `t0 = strobe_phase/omega`.
/// Used as the simulation side of map validation.
pub fn strobe_map_simulated(
    ctx: &SimContext,
    x0: FollowerState,
    t0: f64,
) -> Result<FollowerState, SimError> {
    let t_end = t0 + ctx.period();
    let mut t = t0;
    let mut state = x0;
    for _ in 0..64 {
        match find_next_impact(ctx, state, t, t_end - t)? {
            None => return Ok(free_flight(ctx.params, state, t_end - t)),
            Some(hit) => {
                let cam_state = ctx.cam.state(hit.t, ctx.omega);
                let contact = FollowerState { q: cam_state.position, qdot: hit.state.qdot };
                state = apply_impact(ctx.params, contact, &cam_state);
                t = hit.t;
            }
        }
    }
    Err(SimError::RootPolishFailed {
        iterations: 64,
        lo: t,
        hi: t_end,
        glo: f64::NAN,
        ghi: f64::NAN,
    })
}

impl Trajectory {
    /// Strobe samples as CSV: `n,t,q,qdot`.
    pub fn write_strobes_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,t,q,qdot")?;
        for s in &self.strobes {
            writeln!(w, "{},{},{},{}", s.n, s.t, s.state.q, s.state.qdot)?;
        }
        Ok(())
    }

    /// Impacts as CSV: `t,phase,pre,post,cam_velocity,at_corner`.
    pub fn write_impacts_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,phase,pre,post,cam_velocity,at_corner")?;
        for e in &self.impacts {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.t,
                e.phase,
                e.pre_velocity,
                e.post_velocity,
                e.cam_velocity,
                e.at_corner.map(|i| i as i64).unwrap_or(-1)
            )?;
        }
        Ok(())
    }

    /// Sticking intervals as CSV: `t_start,t_end`.
    pub fn write_sticking_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_start,t_end")?;
        for s in &self.sticking {
            writeln!(w, "{},{}", s.t_start, s.t_end)?;
        }
        Ok(())
    }
}
