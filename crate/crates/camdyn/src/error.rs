//! Error types shared across the toolkit.

use thiserror::Error;

/// Geometry construction and validation failures.
#[derive(Debug, Clone, Error)]
pub enum GeometryError {
    #[error("invalid cam geometry: {0}")]
    Invalid(String),
    #[error("cam lift is discontinuous at phase {phase} (|jump| = {jump:e}, allowed {allowed:e})")]
    LiftDiscontinuous { phase: f64, jump: f64, allowed: f64 },
    #[error("cam velocity is discontinuous at phase {phase} (|jump| = {jump:e}, allowed {allowed:e})")]
    VelocityDiscontinuous { phase: f64, jump: f64, allowed: f64 },
    #[error("cam acceleration has no corner: c'' is continuous at every interior boundary")]
    NoCorner,
}

/// Physical parameter validation failures.
#[derive(Debug, Clone, Error)]
pub enum ParamError {
    #[error("invalid physical parameters: {0}")]
    Invalid(String),
    #[error("parameters are not underdamped: zeta = {zeta} >= omega0 = {omega0}")]
    Overdamped { zeta: f64, omega0: f64 },
}

/// Event-driven simulation failures.
#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("impact root polish failed to converge in {iterations} iterations (bracket [{lo}, {hi}], gap [{glo:e}, {ghi:e}])")]
    RootPolishFailed { iterations: usize, lo: f64, hi: f64, glo: f64, ghi: f64 },
    #[error("impact applied without contact: |q - c| = {gap:e} exceeds tol_pen = {tol:e}")]
    NoContact { gap: f64, tol: f64 },
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
}

/// Poincare-map construction failures.
#[derive(Debug, Clone, Error)]
pub enum MapError {
    #[error("no impact root of the gap function in the window [{lo}, {hi}] around t = 0")]
    NoRootInWindow { lo: f64, hi: f64 },
    #[error("Newton iteration for the impact time diverged (bracket [{lo}, {hi}], residuals [{flo:e}, {fhi:e}])")]
    NewtonDiverged { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("no corner fixed point in the omega bracket [{lo_rpm}, {hi_rpm}] rpm")]
    NoCornerRoot { lo_rpm: f64, hi_rpm: f64 },
    #[error("fixed-point matrix I - phi_T + phi_T/2 R phi_T/2 is singular at omega = {omega_rpm} rpm")]
    SingularFixedPoint { omega_rpm: f64 },
    #[error("grazing corner: relative impact velocity {relative_velocity:e} too small for the Jacobian denominator")]
    GrazingCorner { relative_velocity: f64 },
    #[error("fixed-point residual {residual:e} exceeds tolerance {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("scenario phase offset {offset} is not a cam discontinuity phase (nearest corner at {nearest})")]
    OffsetNotACorner { offset: f64, nearest: f64 },
    #[error("least-squares design matrix is rank deficient (rank {rank} < 3); spread the perturbations")]
    RankDeficient { rank: usize },
    #[error("simulation failed inside map estimation: {0}")]
    Sim(#[from] SimError),
}

/// Canonicalization / classification failures.
#[derive(Debug, Clone, Error)]
pub enum ClassifyError {
    #[error("boundary is unobservable: first component of C is {c1:e}")]
    UnobservableBoundary { c1: f64 },
    #[error("observability matrix [C; C A-] is singular (det = {det:e})")]
    SingularObservability { det: f64 },
}

/// Scenario file loading and validation failures.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario file {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("scenario field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Params(#[from] ParamError),
}
