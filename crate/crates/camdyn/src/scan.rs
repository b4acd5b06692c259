//! Cam-speed sweeps: impact-phase and stroboscopic bifurcation diagrams,
//! attractor period estimates, and bisection for the speed at which a
//! period-1 impact crosses a cam acceleration corner.

use crate::cam::wrap_to_pi;
use crate::dynamics::FollowerState;
use crate::error::SimError;
use crate::scenario::{rpm_to_rad, Scenario};
use crate::simulator::{simulate, SimContext, Trajectory};
use rayon::prelude::*;
use std::io::Write;

/// Sweep configuration. Speeds are rpm.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ScanConfig {
    pub omega_min_rpm: f64,
    pub omega_max_rpm: f64,
    pub n_points: usize,
    pub transient_periods: usize,
    pub record_periods: usize,
    /// Reuse the previous attractor state as the next initial condition.
    pub continuation: bool,
    /// Sweep from high speed to low (attractor following direction).
    #[serde(default)]
    pub descending: bool,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.omega_min_rpm < self.omega_max_rpm) {
            return Err(format!(
                "need omega_min < omega_max, got {} >= {}",
                self.omega_min_rpm, self.omega_max_rpm
            ));
        }
        if self.n_points < 2 {
            return Err("need at least 2 scan points".into());
        }
        if self.record_periods < 1 {
            return Err("need record_periods >= 1".into());
        }
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        let mut v: Vec<f64> = (0..self.n_points)
            .map(|i| {
                self.omega_min_rpm
                    + (self.omega_max_rpm - self.omega_min_rpm) * i as f64
                        / (self.n_points - 1) as f64
            })
            .collect();
        if self.descending {
            v.reverse();
        }
        v
    }
}

/// Attractor record at one speed.
#[derive(Debug, Clone)]
pub struct ScanEntry {
    pub omega_rpm: f64,
    /// Impact phases recorded after the transient, in event order.
    pub impact_phases: Vec<f64>,
    /// Strobe samples after the transient.
    pub strobes: Vec<FollowerState>,
    /// Smallest period `p <= 16` under which the strobe sequence repeats;
    /// `None` flags an aperiodic attractor.
    pub period: Option<usize>,
    /// Final state, used for continuation.
    pub end_state: FollowerState,
    /// Set when the simulation failed; the row is a gap in the diagram.
    pub error: Option<String>,
}

/// Sweep result: one entry per visited speed, in visit order.
#[derive(Debug, Clone)]
pub struct BifurcationDiagram {
    pub entries: Vec<ScanEntry>,
}

/// Largest period the strobe-sequence test distinguishes.
pub const MAX_DETECTED_PERIOD: usize = 16;
/// Relative tolerance of the periodicity test.
pub const PERIOD_TOL: f64 = 1e-6;

/// Smallest `p <= 16` with the sequence `p`-periodic within `1e-6` relative.
pub fn detect_period(strobes: &[FollowerState]) -> Option<usize> {
    if strobes.is_empty() {
        return None;
    }
    let mut scale_q: f64 = 0.0;
    let mut scale_v: f64 = 0.0;
    for s in strobes {
        scale_q = scale_q.max(s.q.abs());
        scale_v = scale_v.max(s.qdot.abs());
    }
    scale_q = scale_q.max(1e-12);
    scale_v = scale_v.max(1e-12);
    for p in 1..=MAX_DETECTED_PERIOD {
        if strobes.len() <= p {
            return None;
        }
        let ok = (p..strobes.len()).all(|i| {
            (strobes[i].q - strobes[i - p].q).abs() <= PERIOD_TOL * scale_q
                && (strobes[i].qdot - strobes[i - p].qdot).abs() <= PERIOD_TOL * scale_v
        });
        if ok {
            return Some(p);
        }
    }
    None
}

fn run_one(
    scenario: &Scenario,
    config: &ScanConfig,
    omega_rpm: f64,
    x0: Option<FollowerState>,
) -> Result<(ScanEntry, Trajectory), SimError> {
    let omega = rpm_to_rad(omega_rpm);
    let cam = scenario.cam();
    let ctx = SimContext::new(&scenario.params, &cam, omega, &scenario.sim);
    let t0 = scenario.sim.strobe_phase / omega;
    let period = ctx.period();
    let duration = (config.transient_periods + config.record_periods) as f64 * period;
    let start = x0.or(scenario.initial).unwrap_or_else(|| {
        let c = cam.state(t0, omega);
        FollowerState { q: c.position, qdot: c.velocity }
    });
    let traj = simulate(&ctx, start, t0, duration)?;
    let t_cut = t0 + config.transient_periods as f64 * period;
    let impact_phases: Vec<f64> =
        traj.impacts.iter().filter(|e| e.t >= t_cut).map(|e| e.phase).collect();
    let strobes: Vec<FollowerState> =
        traj.strobes.iter().filter(|s| s.t >= t_cut).map(|s| s.state).collect();
    let period_est = detect_period(&strobes);
    let entry = ScanEntry {
        omega_rpm,
        impact_phases,
        strobes,
        period: period_est,
        end_state: traj.end_state,
        error: None,
    };
    Ok((entry, traj))
}

/// Sweeps the speed grid and records the attractor at each point.
///
/// With continuation the sweep is sequential and each run starts from the
/// previous end state; otherwise the points run independently in parallel.
/// Per-speed failures become gap rows and the sweep continues.
pub fn scan(scenario: &Scenario, config: &ScanConfig) -> BifurcationDiagram {
    let grid = config.grid();
    let entries = if config.continuation {
        let mut out = Vec::with_capacity(grid.len());
        let mut carry: Option<FollowerState> = None;
        for omega_rpm in grid {
            match run_one(scenario, config, omega_rpm, carry) {
                Ok((entry, _)) => {
                    carry = Some(entry.end_state);
                    out.push(entry);
                }
                Err(e) => out.push(ScanEntry {
                    omega_rpm,
                    impact_phases: Vec::new(),
                    strobes: Vec::new(),
                    period: None,
                    end_state: carry.unwrap_or(FollowerState { q: 0.0, qdot: 0.0 }),
                    error: Some(e.to_string()),
                }),
            }
        }
        out
    } else {
        grid.par_iter()
            .map(|&omega_rpm| match run_one(scenario, config, omega_rpm, None) {
                Ok((entry, _)) => entry,
                Err(e) => ScanEntry {
                    omega_rpm,
                    impact_phases: Vec::new(),
                    strobes: Vec::new(),
                    period: None,
                    end_state: FollowerState { q: 0.0, qdot: 0.0 },
                    error: Some(e.to_string()),
                },
            })
            .collect()
    };
    BifurcationDiagram { entries }
}

/// A speed at which the period-1 branch's impact phase meets a corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerCrossing {
    pub omega_rpm: f64,
    pub corner_phase: f64,
}

fn single_impact_phase(entry: &ScanEntry, record_periods: usize) -> Option<f64> {
    if entry.error.is_some() || entry.period != Some(1) {
        return None;
    }
    if entry.impact_phases.len() != record_periods {
        return None;
    }
    let last = *entry.impact_phases.last()?;
    let spread = entry
        .impact_phases
        .iter()
        .map(|p| wrap_to_pi(p - last).abs())
        .fold(0.0, f64::max);
    if spread < 1e-4 {
        Some(last)
    } else {
        None
    }
}

/// Locates corner crossings of the period-1 single-impact branch by
/// bisection on the speed, to relative accuracy `1e-8`.
///
/// Two situations produce a crossing: the branch phase passes a corner
/// between adjacent scan points, or the branch itself disappears at the
/// corner (border collision) so the period-1 attractor exists on one side
/// only. Both bisections re-simulate, seeding each midpoint from the
/// nearest state known to lie on the branch.
pub fn locate_corner_crossing(
    scenario: &Scenario,
    config: &ScanConfig,
    diagram: &BifurcationDiagram,
) -> Vec<CornerCrossing> {
    let corners = scenario.geometry.discontinuity_phases();
    let rec = config.record_periods;
    let mut out: Vec<CornerCrossing> = Vec::new();

    let branch_at = |omega_rpm: f64, seed: FollowerState| -> Option<(f64, FollowerState)> {
        run_one(scenario, config, omega_rpm, Some(seed))
            .ok()
            .and_then(|(e, _)| single_impact_phase(&e, rec).map(|p| (p, e.end_state)))
    };

    for pair in diagram.entries.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let pa = single_impact_phase(a, rec);
        let pb = single_impact_phase(b, rec);
        match (pa, pb) {
            (Some(phase_a), Some(phase_b)) => {
                // phase crossing within a surviving branch
                for d in &corners {
                    let da = wrap_to_pi(phase_a - d.phase);
                    let db = wrap_to_pi(phase_b - d.phase);
                    if da == 0.0 {
                        out.push(CornerCrossing { omega_rpm: a.omega_rpm, corner_phase: d.phase });
                        continue;
                    }
                    if da * db < 0.0 && da.abs() < 0.5 && db.abs() < 0.5 {
                        let (mut lo, mut hi) = (a.omega_rpm, b.omega_rpm);
                        let mut sign_lo = da.signum();
                        let mut seed = a.end_state;
                        for _ in 0..64 {
                            if (hi - lo).abs() <= 1e-8 * lo.abs().max(hi.abs()) {
                                break;
                            }
                            let mid = 0.5 * (lo + hi);
                            match branch_at(mid, seed) {
                                Some((pm, end)) => {
                                    seed = end;
                                    let dm = wrap_to_pi(pm - d.phase);
                                    if dm.signum() == sign_lo {
                                        lo = mid;
                                    } else {
                                        hi = mid;
                                    }
                                    let _ = &mut sign_lo;
                                }
                                None => break,
                            }
                        }
                        out.push(CornerCrossing {
                            omega_rpm: 0.5 * (lo + hi),
                            corner_phase: d.phase,
                        });
                    }
                }
            }
            (Some(phase_a), None) | (None, Some(phase_a)) => {
                // branch dies between the two points: bisect its boundary,
                // provided the surviving phase approaches a corner
                let nearest = scenario.geometry.nearest_discontinuity(phase_a);
                if wrap_to_pi(phase_a - nearest.phase).abs() > 0.3 {
                    continue;
                }
                let (survivor, other) =
                    if pa.is_some() { (a, b.omega_rpm) } else { (b, a.omega_rpm) };
                let mut good = survivor.omega_rpm;
                let mut bad = other;
                let mut seed = survivor.end_state;
                for _ in 0..64 {
                    if (good - bad).abs() <= 1e-8 * good.abs().max(bad.abs()) {
                        break;
                    }
                    let mid = 0.5 * (good + bad);
                    match branch_at(mid, seed) {
                        Some((_, end)) => {
                            seed = end;
                            good = mid;
                        }
                        None => bad = mid,
                    }
                }
                out.push(CornerCrossing {
                    omega_rpm: 0.5 * (good + bad),
                    corner_phase: nearest.phase,
                });
            }
            (None, None) => {}
        }
    }
    out.sort_by(|x, y| x.omega_rpm.total_cmp(&y.omega_rpm));
    out.dedup_by(|x, y| {
        (x.omega_rpm - y.omega_rpm).abs() < 1e-6 * y.omega_rpm.abs()
            && x.corner_phase == y.corner_phase
    });
    out
}

impl BifurcationDiagram {
    /// Impact diagram CSV: `omega_rpm,phase_rad`.
    pub fn write_impact_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "omega_rpm,phase_rad")?;
        for e in &self.entries {
            for p in &e.impact_phases {
                writeln!(w, "{},{}", e.omega_rpm, p)?;
            }
        }
        Ok(())
    }

    /// Stroboscopic diagram CSV: `omega_rpm,q,qdot`.
    pub fn write_strobe_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "omega_rpm,q,qdot")?;
        for e in &self.entries {
            for s in &e.strobes {
                writeln!(w, "{},{},{}", e.omega_rpm, s.q, s.qdot)?;
            }
        }
        Ok(())
    }

    /// Summary CSV: `omega_rpm,period_or_minus1`; aperiodic rows carry -1
    /// and failed rows -2.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "omega_rpm,period_or_minus1")?;
        for e in &self.entries {
            let p = if e.error.is_some() {
                -2
            } else {
                e.period.map(|p| p as i64).unwrap_or(-1)
            };
            writeln!(w, "{},{}", e.omega_rpm, p)?;
        }
        Ok(())
    }
}
