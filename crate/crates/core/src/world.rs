//! Closed loop shared by every controller: camera, tracker, actuation delay,
//! vehicle and target, each advanced once per frame.

use nalgebra::{UnitQuaternion, Vector3};

use crate::error::{usage, Result};
use crate::rng::{stream, SimRng, Stream};
use crate::sim::{step_dynamics, step_target, DelayLine, RateCommand, RobotState, TargetMotion, TargetState, Vehicle};
use crate::tracker::{TrackState, TrackStatus, Tracker, TrackerConfig};
use crate::vision::{observe, BBoxObservation, VisionConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub vehicle: Vehicle,
    pub target_motion: TargetMotion,
    pub vision: VisionConfig,
    pub tracker: TrackerConfig,
    pub delay_steps: u64,
    pub dt: f64,
    /// Starting distance of the target straight ahead of the camera (m).
    pub initial_range: f64,
    /// Whether the target starts moving or waits still.
    pub target_moves: bool,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            vehicle: Vehicle::default(),
            target_motion: TargetMotion::default(),
            vision: VisionConfig::default(),
            tracker: TrackerConfig::default(),
            delay_steps: 10,
            dt: 0.04,
            initial_range: 1.9,
            target_moves: true,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        self.vehicle.hydro.validate()?;
        if !(self.dt > 0.0) || !(self.initial_range > 0.0) {
            return usage("dt and initial range must be positive");
        }
        Ok(())
    }
}

/// What the controller sees at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Perception {
    pub observation: BBoxObservation,
    pub status: TrackStatus,
    /// Filtered track (absent only before the first detection).
    pub track: Option<TrackState>,
}

impl Perception {
    /// Filtered `(x_c, y_c, area)`, or zeros when no track exists.
    pub fn box_state(&self) -> (f64, f64, f64) {
        self.track.as_ref().map_or((0.0, 0.0, 0.0), |t| (t.x[0], t.x[1], t.x[2]))
    }

    pub fn confidence(&self) -> f64 {
        self.observation.detection().map_or(0.0, |d| d.confidence)
    }
}

#[derive(Debug, Clone)]
pub struct World {
    cfg: WorldConfig,
    pub robot: RobotState,
    pub target: TargetState,
    tracker: Tracker,
    delay: DelayLine,
    step: u64,
    target_rng: SimRng,
    vision_rng: SimRng,
    /// Command released from the delay line at the last step.
    pub applied: RateCommand,
}

impl World {
    pub fn new(cfg: WorldConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut target_rng = stream(seed, Stream::Target);
        let position = Vector3::new(cfg.initial_range, 0.0, 0.0);
        let target = if cfg.target_moves {
            TargetState {
                position,
                velocity: cfg.target_motion.sample_velocity(&mut target_rng),
                regime_timer: cfg.target_motion.sample_timer(&mut target_rng),
            }
        } else {
            TargetState::stationary(position)
        };
        Ok(Self {
            robot: RobotState::at_rest(Vector3::zeros(), UnitQuaternion::identity()),
            target,
            tracker: Tracker::new(cfg.tracker.clone()),
            delay: DelayLine::new(cfg.delay_steps, RateCommand::NEUTRAL),
            step: 0,
            target_rng,
            vision_rng: stream(seed, Stream::Vision),
            applied: RateCommand::NEUTRAL,
            cfg,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn delay_line(&self) -> &DelayLine {
        &self.delay
    }

    /// Take this frame's detection and feed it to the tracker.
    pub fn perceive(&mut self) -> Result<Perception> {
        let observation = observe(&self.robot, &self.target, &self.cfg.vision, &mut self.vision_rng);
        let status = self.tracker.step(&observation)?;
        Ok(Perception {
            observation,
            status,
            track: self.tracker.track().cloned(),
        })
    }

    /// Queue `command`, release the delayed one and advance vehicle and target.
    pub fn actuate(&mut self, command: RateCommand) -> Result<()> {
        self.delay.push(command, self.step)?;
        self.applied = self.delay.pop(self.step)?;
        self.robot = step_dynamics(&self.robot, &self.applied, &self.cfg.vehicle, self.cfg.dt)?;
        self.target = step_target(&self.target, &self.cfg.target_motion, &mut self.target_rng);
        self.step += 1;
        Ok(())
    }

    /// Straight-line distance from robot to target (m).
    pub fn range(&self) -> f64 {
        (self.target.position - self.robot.position).norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_frame_sees_the_target_ahead() {
        let cfg = WorldConfig {
            target_moves: false,
            vision: VisionConfig {
                noise: crate::vision::VisionNoise::noiseless(),
                ..VisionConfig::default()
            },
            ..WorldConfig::default()
        };
        let mut w = World::new(cfg, 1).unwrap();
        let p = w.perceive().unwrap();
        assert_eq!(p.status, TrackStatus::Tracking);
        let (x, y, a) = p.box_state();
        assert!(x.abs() < 1e-12 && y.abs() < 1e-12 && a > 0.0);
    }

    #[test]
    fn delayed_command_reaches_the_vehicle_late() {
        let cfg = WorldConfig {
            delay_steps: 3,
            ..WorldConfig::default()
        };
        let mut w = World::new(cfg, 2).unwrap();
        let cmd = RateCommand::new(0.5, 0.2, 0.0);
        for k in 0..5 {
            w.perceive().unwrap();
            w.actuate(cmd).unwrap();
            assert_eq!(w.applied, if k < 3 { RateCommand::NEUTRAL } else { cmd });
        }
    }

    #[test]
    fn same_seed_same_world() {
        let run = |seed| {
            let mut w = World::new(WorldConfig::default(), seed).unwrap();
            for _ in 0..200 {
                w.perceive().unwrap();
                w.actuate(RateCommand::new(0.2, 0.1, -0.05)).unwrap();
            }
            (w.robot.position, w.target.position)
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5).1, run(6).1);
    }
}
