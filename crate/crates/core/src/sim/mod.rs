//! Simplified 6-DOF swimming-robot simulator.
//!
//! Frames: world is z-up. The body frame is x forward, y left, z up, and the
//! camera looks along body +x. Command conventions:
//!
//! - `yaw_rate` is the body z angular rate (positive turns left),
//! - `pitch_rate` is nose-up positive, i.e. the negated body y angular rate.

mod delay;
mod dynamics;
mod mixer;
mod scenario;
mod target;

pub use delay::DelayLine;
pub use dynamics::{
    drag_force_body, net_vertical_force, step_dynamics, CommandLimits, HydroParams, InnerLoops,
    RobotState, Vehicle,
};
pub use mixer::{GeneralizedForce, LegMixer, LEG_NAMES, RIGHT_REAR};
pub use scenario::Scenario;
pub use target::{step_target, TargetMotion, TargetState};

/// Rate-level command sent to the gait layer.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateCommand {
    /// Forward speed set-point (m/s).
    pub forward_velocity: f64,
    /// Yaw rate (rad/s), positive left.
    pub yaw_rate: f64,
    /// Pitch rate (rad/s), positive nose-up.
    pub pitch_rate: f64,
}

impl RateCommand {
    pub const NEUTRAL: RateCommand = RateCommand {
        forward_velocity: 0.0,
        yaw_rate: 0.0,
        pitch_rate: 0.0,
    };

    pub fn new(forward_velocity: f64, yaw_rate: f64, pitch_rate: f64) -> Self {
        Self {
            forward_velocity,
            yaw_rate,
            pitch_rate,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.forward_velocity.is_finite() && self.yaw_rate.is_finite() && self.pitch_rate.is_finite()
    }
}
