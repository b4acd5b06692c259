//! Event-driven simulation and border-collision analysis of cam-follower
//! impact oscillators.
//!
//! A spring-loaded follower rides a rotating cam whose lift profile is
//! continuous with continuous slope but discontinuous curvature. At high
//! speed the follower detaches and impacts the cam; when the impact of a
//! periodic orbit crosses a curvature corner, the orbit undergoes a
//! border-collision bifurcation. This crate covers the full pipeline:
//!
//! * [`cam`] — the four-arc lift profile and its one-sided derivatives;
//! * [`dynamics`] — closed-form free flight, restitution, contact force;
//! * [`simulator`] — event-driven integration with chattering and sticking;
//! * [`scan`] — speed sweeps and corner-crossing location;
//! * [`corner_map`] — the analytic stroboscopic map near a corner orbit,
//!   its fixed point, branch Jacobians and least-squares validation;
//! * [`classifier`] — canonical form and Feigin classification;
//! * [`scenario`] — TOML problem setups;
//! * [`svg`] — minimal scatter rendering for the diagram commands.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod cam;
pub mod classifier;
pub mod corner_map;
pub mod dynamics;
pub mod error;
pub mod scan;
pub mod scenario;
pub mod simulator;
pub mod svg;

pub use cam::{eval_acceleration, eval_lift, eval_state, Cam, CamGeometry, CamState, Side};
pub use classifier::{canonicalize, classify, iterate_local_map, ClassificationResult, Verdict};
pub use corner_map::{
    build_local_map, estimate_map_numerically, full_map, jacobian_period, jacobian_x,
    solve_fixed_point, zdm, CornerContext, LocalPwlMap, MapSystem,
};
pub use dynamics::{
    apply_impact, contact_force, flow_operator, flow_operator_time_derivative, free_flight,
    FollowerState, PhysicalParams,
};
pub use scan::{locate_corner_crossing, scan, BifurcationDiagram, ScanConfig};
pub use scenario::{rad_to_rpm, rpm_to_rad, Scenario};
pub use simulator::{
    find_next_impact, simulate, stroboscopic_sequence, SimConfig, SimContext, Trajectory,
};
