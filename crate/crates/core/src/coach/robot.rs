//! Numeric robot configuration and how adjustments move it.

use serde::{Deserialize, Serialize};

use super::types::{DistanceAdjustment, PointingAdjustment, RobotAdjustment};
use crate::error::{Error, Result};

pub const STOP_DISTANCE_RANGE: (f64, f64) = (0.4, 2.5);
pub const POINTING_ANGLE_RANGE: (f64, f64) = (-45.0, 45.0);
/// Two steps are needed to cross a meaningful part of either range, so
/// scaffolding stays gradual.
pub const DISTANCE_STEP_M: f64 = 0.15;
pub const ANGLE_STEP_DEG: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfigState {
    /// Meters between the robot's stopping point and the door.
    pub stop_distance_to_door: f64,
    /// Degrees; negative points left of the user, positive right.
    pub pointing_angle: f64,
}

impl Default for RobotConfigState {
    fn default() -> Self {
        Self { stop_distance_to_door: 1.0, pointing_angle: 0.0 }
    }
}

impl RobotConfigState {
    pub fn validate(&self) -> Result<()> {
        let (dlo, dhi) = STOP_DISTANCE_RANGE;
        let (alo, ahi) = POINTING_ANGLE_RANGE;
        if !(dlo..=dhi).contains(&self.stop_distance_to_door) {
            return Err(Error::Input(format!(
                "stop_distance_to_door must lie in [{dlo}, {dhi}] m, got {}",
                self.stop_distance_to_door
            )));
        }
        if !(alo..=ahi).contains(&self.pointing_angle) {
            return Err(Error::Input(format!(
                "pointing_angle must lie in [{alo}, {ahi}] degrees, got {}",
                self.pointing_angle
            )));
        }
        Ok(())
    }
}

/// Applies one adjustment, clamping the result to the workspace bounds.
pub fn apply_adjustment(cfg: RobotConfigState, adj: &RobotAdjustment) -> RobotConfigState {
    let dd = match adj.distance_to_door_adjustment {
        DistanceAdjustment::Closer => -DISTANCE_STEP_M,
        DistanceAdjustment::Farther => DISTANCE_STEP_M,
        DistanceAdjustment::Maintain => 0.0,
    };
    let da = match adj.pointing_direction_adjustment {
        PointingAdjustment::MoreLeft => -ANGLE_STEP_DEG,
        PointingAdjustment::MoreRight => ANGLE_STEP_DEG,
        PointingAdjustment::Maintain => 0.0,
    };
    RobotConfigState {
        stop_distance_to_door: (cfg.stop_distance_to_door + dd).clamp(STOP_DISTANCE_RANGE.0, STOP_DISTANCE_RANGE.1),
        pointing_angle: (cfg.pointing_angle + da).clamp(POINTING_ANGLE_RANGE.0, POINTING_ANGLE_RANGE.1),
    }
}
