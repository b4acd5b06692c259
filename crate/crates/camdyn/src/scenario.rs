//! Scenario files: the physical parameters, cam geometry, simulation
//! tolerances and phase convention of one study, stored as TOML so runs are
//! auditable and diffable.

use crate::cam::{Cam, CamGeometry};
use crate::dynamics::{FollowerState, PhysicalParams};
use crate::error::ScenarioError;
use crate::simulator::SimConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A full problem setup. Speeds in configs are rpm; everything else is SI.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: PhysicalParams,
    pub geometry: CamGeometry,
    pub sim: SimConfig,
    /// Cam phase at `t = 0`; the corner under study sits there so the
    /// stroboscopic window at `+-T/2` brackets it.
    pub corner_phase_offset: f64,
    /// Optional follower state at the first strobe time; when absent,
    /// simulations start resting on the cam.
    pub initial: Option<FollowerState>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawScenario {
    physical: RawPhysical,
    cam: RawCam,
    #[serde(default)]
    sim: Option<SimConfig>,
    #[serde(default)]
    initial: Option<RawInitial>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPhysical {
    mass: f64,
    damping: f64,
    stiffness: f64,
    gravity: f64,
    restitution: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCam {
    kappa1: f64,
    kappa2: f64,
    rho0: f64,
    rho1: f64,
    rho2: f64,
    rho3: f64,
    theta1: f64,
    theta2: f64,
    theta3: f64,
    corner_phase_offset: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawInitial {
    q: f64,
    qdot: f64,
}

/// Converts an rpm figure to rad/s.
pub fn rpm_to_rad(rpm: f64) -> f64 {
    rpm * std::f64::consts::TAU / 60.0
}

/// Converts rad/s to rpm.
pub fn rad_to_rpm(omega: f64) -> f64 {
    omega * 60.0 / std::f64::consts::TAU
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::from_toml_str(&text, &path.display().to_string())
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let raw: RawScenario = toml::from_str(text).map_err(|source| ScenarioError::Parse {
            path: origin.to_string(),
            source,
        })?;
        let params = PhysicalParams::new(
            raw.physical.mass,
            raw.physical.damping,
            raw.physical.stiffness,
            raw.physical.gravity,
            raw.physical.restitution,
        )?;
        let geometry = CamGeometry::new(
            raw.cam.kappa1,
            raw.cam.kappa2,
            raw.cam.rho0,
            raw.cam.rho1,
            raw.cam.rho2,
            raw.cam.rho3,
            raw.cam.theta1,
            raw.cam.theta2,
            raw.cam.theta3,
        )?;
        if !raw.cam.corner_phase_offset.is_finite() {
            return Err(ScenarioError::Field {
                field: "cam.corner_phase_offset".into(),
                message: "must be finite".into(),
            });
        }
        let sim = raw.sim.unwrap_or_default();
        sim.validate().map_err(|e| ScenarioError::Field {
            field: "sim".into(),
            message: e.to_string(),
        })?;
        let initial = raw.initial.map(|i| FollowerState { q: i.q, qdot: i.qdot });
        if let Some(s) = &initial {
            if !(s.q.is_finite() && s.qdot.is_finite()) {
                return Err(ScenarioError::Field {
                    field: "initial".into(),
                    message: "initial state must be finite".into(),
                });
            }
        }
        Ok(Scenario {
            params,
            geometry,
            sim,
            corner_phase_offset: raw.cam.corner_phase_offset,
            initial,
        })
    }

    /// The cam evaluator with this scenario's phase convention.
    pub fn cam(&self) -> Cam {
        Cam::new(self.geometry.clone(), self.corner_phase_offset)
    }

    /// Echo of the scenario as TOML, for run manifests.
    pub fn to_toml_string(&self) -> String {
        let raw = RawScenario {
            physical: RawPhysical {
                mass: self.params.mass,
                damping: self.params.damping,
                stiffness: self.params.stiffness,
                gravity: self.params.gravity,
                restitution: self.params.restitution,
            },
            cam: RawCam {
                kappa1: self.geometry.kappa1,
                kappa2: self.geometry.kappa2,
                rho0: self.geometry.rho0,
                rho1: self.geometry.rho1,
                rho2: self.geometry.rho2,
                rho3: self.geometry.rho3,
                theta1: self.geometry.theta1,
                theta2: self.geometry.theta2,
                theta3: self.geometry.theta3,
                corner_phase_offset: self.corner_phase_offset,
            },
            sim: Some(self.sim.clone()),
            initial: self.initial.map(|s| RawInitial { q: s.q, qdot: s.qdot }),
        };
        toml::to_string_pretty(&raw).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rpm_round_trip() {
        let rpm = 673.234445;
        assert!((rad_to_rpm(rpm_to_rad(rpm)) - rpm).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_field_with_named_error() {
        let text = r#"
[physical]
mass = 1.0
damping = 0.5
stiffness = 1600.0
gravity = 9.81
restitution = 1.5

[cam]
kappa1 = 0.015
kappa2 = 0.0138
rho0 = 0.02
rho1 = 0.035
rho2 = 0.008
rho3 = 0.0218
theta1 = 1.2217
theta2 = 0.6458
theta3 = 0.5101
corner_phase_offset = 0.925
"#;
        let err = Scenario::from_toml_str(text, "inline").unwrap_err();
        assert!(err.to_string().contains("restitution"), "{err}");
    }

    #[test]
    fn parse_error_carries_location() {
        let err = Scenario::from_toml_str("not [valid toml", "inline").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("inline"));
    }
}
