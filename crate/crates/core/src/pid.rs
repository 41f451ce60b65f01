//! Decentralized PID baseline: one loop each for yaw rate, pitch rate and
//! forward speed, plus the discrete gain search used to tune them.

use crate::error::{usage, Result};
use crate::sim::RateCommand;
use crate::tracker::{TrackState, TrackStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral_limit: f64,
    pub output_limit: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64, integral_limit: f64, output_limit: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            integral_limit,
            output_limit,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.kp, self.ki, self.kd].iter().all(|g| g.is_finite()) && self.integral_limit > 0.0 && self.output_limit > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

/// One PID update. The integral is clamped to `±integral_limit`, the
/// derivative is a backward difference (zero on the first call) and the output
/// is clamped to `±output_limit`.
pub fn pid_step(gains: &PidGains, state: &PidState, error: f64, dt: f64) -> (f64, PidState) {
    let integral = (state.integral + error * dt).clamp(-gains.integral_limit, gains.integral_limit);
    let derivative = if state.initialized { (error - state.prev_error) / dt } else { 0.0 };
    let raw = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    let next = PidState {
        integral,
        prev_error: error,
        initialized: true,
    };
    (raw.clamp(-gains.output_limit, gains.output_limit), next)
}

/// Gains for the three tracking loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingGains {
    pub yaw: PidGains,
    pub pitch: PidGains,
    pub forward: PidGains,
    /// Box area the forward loop holds (fraction of the image).
    pub area_ref: f64,
}

impl Default for TrackingGains {
    fn default() -> Self {
        Self {
            yaw: PidGains::new(1.0, 0.2, 0.05, 1.0, 0.5),
            pitch: PidGains::new(1.0, 0.2, 0.05, 1.0, 0.5),
            forward: PidGains::new(12.0, 2.0, 0.0, 0.2, 1.0),
            area_ref: 0.05,
        }
    }
}

/// The three independent loops with their memories.
#[derive(Debug, Clone, PartialEq)]
pub struct PidTracker {
    pub gains: TrackingGains,
    yaw: PidState,
    pitch: PidState,
    forward: PidState,
}

impl PidTracker {
    pub fn new(gains: TrackingGains) -> Self {
        Self {
            gains,
            yaw: PidState::default(),
            pitch: PidState::default(),
            forward: PidState::default(),
        }
    }

    pub fn reset(&mut self) {
        self.yaw = PidState::default();
        self.pitch = PidState::default();
        self.forward = PidState::default();
    }

    /// Forward-speed loop alone, regulating box area to `area_ref`.
    pub fn forward_command(&mut self, area: f64, dt: f64) -> f64 {
        let (v, s) = pid_step(&self.gains.forward, &self.forward, self.gains.area_ref - area, dt);
        self.forward = s;
        v
    }

    /// Yaw and pitch loops driving the box centre toward `setpoint` in image
    /// coordinates.
    ///
    /// A target right of the set-point gives a negative (rightward) yaw rate;
    /// a target above it gives a positive (nose-up) pitch rate.
    pub fn steer(&mut self, x_c: f64, y_c: f64, setpoint: (f64, f64), dt: f64) -> (f64, f64) {
        let (yaw, ys) = pid_step(&self.gains.yaw, &self.yaw, setpoint.0 - x_c, dt);
        let (pitch, ps) = pid_step(&self.gains.pitch, &self.pitch, y_c - setpoint.1, dt);
        self.yaw = ys;
        self.pitch = ps;
        (yaw, pitch)
    }

    /// All three loops toward an image set-point.
    pub fn command_toward(&mut self, x_c: f64, y_c: f64, area: f64, setpoint: (f64, f64), dt: f64) -> RateCommand {
        let (yaw, pitch) = self.steer(x_c, y_c, setpoint, dt);
        let forward = self.forward_command(area, dt);
        RateCommand::new(forward, yaw, pitch)
    }

    pub fn command(&mut self, x_c: f64, y_c: f64, area: f64, dt: f64) -> RateCommand {
        self.command_toward(x_c, y_c, area, (0.0, 0.0), dt)
    }
}

/// PID command from the filtered track; a lost track belongs to recovery.
pub fn pid_tracking_controller(track: &TrackState, status: TrackStatus, pid: &mut PidTracker, dt: f64) -> Result<RateCommand> {
    if status == TrackStatus::Lost {
        return usage("PID tracking controller called on a lost track");
    }
    Ok(pid.command(track.x[0], track.x[1], track.x[2], dt))
}

/// Outcome of a discrete gain search.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult<C> {
    pub best_index: usize,
    pub best: C,
    /// Score of every candidate, in list order.
    pub scores: Vec<f64>,
}

/// Evaluate every candidate once and keep the highest score; ties go to the
/// earlier candidate and non-finite scores never win.
pub fn tune_gains<C, F>(candidates: &[C], mut evaluate: F) -> Result<TuneResult<C>>
where
    C: Clone,
    F: FnMut(&C) -> Result<f64>,
{
    if candidates.is_empty() {
        return usage("gain search needs at least one candidate");
    }
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best_index = 0;
    for (i, c) in candidates.iter().enumerate() {
        let s = evaluate(c)?;
        let s = if s.is_finite() { s } else { f64::NEG_INFINITY };
        if i > 0 && s > scores[best_index] {
            best_index = i;
        }
        scores.push(s);
    }
    Ok(TuneResult {
        best_index,
        best: candidates[best_index].clone(),
        scores,
    })
}

/// 3×3×3 grid around a base gain set (kp, ki, kd each scaled by the factors).
pub fn gain_grid(base: &PidGains, kp: [f64; 3], ki: [f64; 3], kd: [f64; 3]) -> Vec<PidGains> {
    let mut out = Vec::with_capacity(27);
    for p in kp {
        for i in ki {
            for d in kd {
                out.push(PidGains { kp: p, ki: i, kd: d, ..*base });
            }
        }
    }
    out
}
