//! Three-stage shielded training schedule and spiral-search recovery.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::agent::{ActionChoice, ActionGrid};
use crate::dqn::{Architecture, DoubleDqn, Experience, QNetwork, ReplayMemory, TrainerParams};
use crate::error::{Error, Result};
use crate::rng::{stream, SimRng, Stream};
use crate::session::{Mode, Session, SessionConfig, StepRecord};
use crate::sim::RateCommand;
use crate::vision::CameraModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    PidExplore,
    SharedControl,
    RlOnly,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::PidExplore => "pid_explore",
            Stage::SharedControl => "shared_control",
            Stage::RlOnly => "rl_only",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pid_explore" => Ok(Stage::PidExplore),
            "shared_control" => Ok(Stage::SharedControl),
            "rl_only" => Ok(Stage::RlOnly),
            _ => Err(Error::Config(format!("unknown stage '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumStage {
    pub stage: Stage,
    /// Width of the image border band where the PID shield takes over.
    pub outer_region_fraction: f64,
    /// Probability of a random grid action while the shield is engaged.
    pub random_action_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumSchedule {
    /// Experiences collected under PID control before sharing starts.
    pub min_prefill: u64,
    pub initial_outer_fraction: f64,
    /// Shared-control steps over which the outer band shrinks to zero.
    pub decay_steps: u64,
    pub random_action_prob: f64,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        Self {
            min_prefill: 2000,
            initial_outer_fraction: 0.2,
            decay_steps: 100_000,
            random_action_prob: 0.3,
        }
    }
}

/// Training progress counters that drive the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Progress {
    /// Experiences recorded so far.
    pub experiences: u64,
    /// Steps spent in shared control so far.
    pub shared_steps: u64,
}

/// Stage implied by the progress counters.
pub fn advance_stage(schedule: &CurriculumSchedule, progress: &Progress) -> CurriculumStage {
    let shared = |fraction| CurriculumStage {
        stage: Stage::SharedControl,
        outer_region_fraction: fraction,
        random_action_prob: schedule.random_action_prob,
    };
    if progress.experiences < schedule.min_prefill {
        return CurriculumStage {
            stage: Stage::PidExplore,
            outer_region_fraction: 1.0,
            random_action_prob: 0.0,
        };
    }
    if progress.shared_steps < schedule.decay_steps {
        let left = 1.0 - progress.shared_steps as f64 / schedule.decay_steps as f64;
        return shared(schedule.initial_outer_fraction * left);
    }
    CurriculumStage {
        stage: Stage::RlOnly,
        outer_region_fraction: 0.0,
        random_action_prob: 0.0,
    }
}

pub fn in_outer_region(x_c: f64, y_c: f64, outer_region_fraction: f64) -> bool {
    x_c.abs().max(y_c.abs()) > 1.0 - outer_region_fraction
}

/// Who produced the command sent to the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlSource {
    Pid,
    Rl,
    /// Random grid action substituted for the shield's PID command.
    Random,
    Spiral,
}

impl ControlSource {
    pub fn name(&self) -> &'static str {
        match self {
            ControlSource::Pid => "pid",
            ControlSource::Rl => "rl",
            ControlSource::Random => "random",
            ControlSource::Spiral => "spiral",
        }
    }
}

impl FromStr for ControlSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pid" => Ok(ControlSource::Pid),
            "rl" => Ok(ControlSource::Rl),
            "random" => Ok(ControlSource::Random),
            "spiral" => Ok(ControlSource::Spiral),
            _ => Err(Error::Config(format!("unknown controller '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArbiterDecision {
    pub yaw_idx: usize,
    pub pitch_idx: usize,
    pub command: RateCommand,
    pub source: ControlSource,
}

/// Shared control: inside the interior the learned command passes; in the
/// border band the grid-quantized PID command is used, or with
/// `random_action_prob` a uniformly random grid action.
///
/// Consumes exactly three draws from `rng` on every call.
pub fn shared_control_arbiter<R: Rng + ?Sized>(
    x_c: f64,
    y_c: f64,
    stage: &CurriculumStage,
    rl: &ActionChoice,
    pid_cmd: &RateCommand,
    grid: &ActionGrid,
    rng: &mut R,
) -> ArbiterDecision {
    let substitute = rng.random::<f64>() < stage.random_action_prob;
    let random_yaw = rng.random_range(0..grid.k_yaw());
    let random_pitch = rng.random_range(0..grid.k_pitch());
    let forward = pid_cmd.forward_velocity;
    if !in_outer_region(x_c, y_c, stage.outer_region_fraction) {
        return ArbiterDecision {
            yaw_idx: rl.yaw_idx,
            pitch_idx: rl.pitch_idx,
            command: rl.command,
            source: ControlSource::Rl,
        };
    }
    let (yaw_idx, pitch_idx, source) = if substitute {
        (random_yaw, random_pitch, ControlSource::Random)
    } else {
        let (a, b) = grid.quantize(pid_cmd);
        (a, b, ControlSource::Pid)
    };
    ArbiterDecision {
        yaw_idx,
        pitch_idx,
        command: grid.command(yaw_idx, pitch_idx, forward),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiralParams {
    /// Starting radius around the last bearing (rad).
    pub r0: f64,
    /// Radius growth per radian of spiral angle.
    pub growth: f64,
    /// Spiral angle advanced per step (rad).
    pub delta: f64,
    /// Proportional map from pointing error (rad) to rate command (1/s).
    pub gain: f64,
    pub max_rate: f64,
    /// Forward speed while searching (m/s).
    pub v_search: f64,
    /// Steps of searching after which the target counts as gone.
    pub budget: u64,
}

impl Default for SpiralParams {
    fn default() -> Self {
        Self {
            r0: 0.05,
            growth: 0.0108,
            delta: 0.15,
            gain: 2.0,
            max_rate: 0.5,
            v_search: 0.1,
            budget: 1000,
        }
    }
}

impl SpiralParams {
    pub fn radius_after(&self, steps: u64) -> f64 {
        self.r0 + self.growth * steps as f64 * self.delta
    }
}

/// Angular offsets `(yaw, pitch)` of an image point from the optical axis;
/// positive yaw is left, positive pitch is up.
pub fn bearing_from_image(x_c: f64, y_c: f64, camera: &CameraModel) -> (f64, f64) {
    (
        (-x_c * (camera.horizontal_fov / 2.0).tan()).atan(),
        (y_c * (camera.vertical_fov / 2.0).tan()).atan(),
    )
}

/// Search memory while the track is lost. Offsets are measured from the
/// heading at the moment of loss and integrated from the issued commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryState {
    pub last_bearing: (f64, f64),
    pub start_angle: f64,
    pub spiral_angle: f64,
    pub spiral_radius: f64,
    pub pointing: (f64, f64),
    pub steps: u64,
}

impl RecoveryState {
    pub fn new(last_bearing: (f64, f64), params: &SpiralParams) -> Self {
        let start_angle = if last_bearing == (0.0, 0.0) {
            0.0
        } else {
            last_bearing.1.atan2(last_bearing.0)
        };
        Self {
            last_bearing,
            start_angle,
            spiral_angle: start_angle,
            spiral_radius: params.r0,
            pointing: (0.0, 0.0),
            steps: 0,
        }
    }

    /// Current spiral way-point in offset space.
    pub fn waypoint(&self) -> (f64, f64) {
        (
            self.last_bearing.0 + self.spiral_radius * self.spiral_angle.cos(),
            self.last_bearing.1 + self.spiral_radius * self.spiral_angle.sin(),
        )
    }
}

/// Steer toward the current way-point, then advance the spiral.
pub fn spiral_search_step(rec: &mut RecoveryState, params: &SpiralParams, dt: f64) -> RateCommand {
    let (wy, wp) = rec.waypoint();
    let yaw = (params.gain * (wy - rec.pointing.0)).clamp(-params.max_rate, params.max_rate);
    let pitch = (params.gain * (wp - rec.pointing.1)).clamp(-params.max_rate, params.max_rate);
    rec.pointing.0 += yaw * dt;
    rec.pointing.1 += pitch * dt;
    rec.steps += 1;
    rec.spiral_angle += params.delta;
    rec.spiral_radius = params.radius_after(rec.steps);
    RateCommand::new(params.v_search, yaw, pitch)
}


/// Schedule, optimiser and exploration settings for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub schedule: CurriculumSchedule,
    pub trainer: TrainerParams,
    pub hidden: Vec<usize>,
    /// Steps of learned-only control after the shield is gone.
    pub rl_only_steps: u64,
    /// Exploration of the learned policy while sharing control.
    pub epsilon_shared: f64,
    pub epsilon_rl: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            schedule: CurriculumSchedule::default(),
            trainer: TrainerParams::default(),
            hidden: vec![128, 128],
            rl_only_steps: 50_000,
            epsilon_shared: 0.1,
            epsilon_rl: 0.05,
        }
    }
}

impl TrainingConfig {
    /// Environment steps in a complete curriculum.
    pub fn total_steps(&self) -> u64 {
        self.schedule.min_prefill + self.schedule.decay_steps + self.rl_only_steps
    }
}

/// Networks, memory and the learner's own RNG stream.
#[derive(Debug, Clone)]
pub struct Learner {
    pub dqn: DoubleDqn,
    replay_rng: SimRng,
}

impl Learner {
    pub fn new(arch: Architecture, params: TrainerParams, seed: u64) -> Result<Self> {
        let mut init_rng = stream(seed, Stream::NetInit);
        Ok(Self {
            dqn: DoubleDqn::new(arch, params, &mut init_rng)?,
            replay_rng: stream(seed, Stream::Replay),
        })
    }

    pub fn for_session(cfg: &SessionConfig, training: &TrainingConfig, seed: u64) -> Result<Self> {
        let arch = Architecture::new(cfg.state_dim(), training.hidden.clone(), cfg.grid.k_yaw(), cfg.grid.k_pitch())?;
        Self::new(arch, training.trainer, seed)
    }

    pub fn network(&self) -> &QNetwork {
        &self.dqn.current
    }

    pub fn remember(&mut self, e: Experience) {
        self.dqn.memory.push(e);
    }

    pub fn learn(&mut self) -> Result<Option<f64>> {
        self.dqn.learn(&mut self.replay_rng)
    }
}

/// Drive the PID toward random set-points until `n_steps` experiences have
/// been added to `memory`, restarting the encounter after a terminal loss.
pub fn stage1_collect(session: &mut Session, memory: &mut ReplayMemory, n_steps: u64) -> Result<Vec<StepRecord>> {
    let mut records = Vec::new();
    let mut added = 0;
    while added < n_steps {
        let rec = session.step(&Mode::PidExplore, None)?;
        if let Some(e) = rec.experience.clone() {
            memory.push(e);
            added += 1;
        }
        let terminal = rec.terminal;
        records.push(rec);
        if terminal {
            session.reset_episode()?;
        }
    }
    Ok(records)
}

/// The full three-stage procedure as a resumable state machine.
#[derive(Debug, Clone)]
pub struct CurriculumTrainer {
    pub session: Session,
    pub learner: Learner,
    pub config: TrainingConfig,
    pub progress: Progress,
    rl_steps: u64,
}

impl CurriculumTrainer {
    pub fn new(session_cfg: SessionConfig, config: TrainingConfig, seed: u64) -> Result<Self> {
        let learner = Learner::for_session(&session_cfg, &config, seed)?;
        Ok(Self {
            session: Session::new(session_cfg, seed)?,
            learner,
            config,
            progress: Progress::default(),
            rl_steps: 0,
        })
    }

    pub fn stage(&self) -> CurriculumStage {
        advance_stage(&self.config.schedule, &self.progress)
    }

    pub fn finished(&self) -> bool {
        self.stage().stage == Stage::RlOnly && self.rl_steps >= self.config.rl_only_steps
    }

    /// One environment step (and one learning step once sharing has begun).
    pub fn step(&mut self) -> Result<StepRecord> {
        let stage = self.stage();
        let mode = match stage.stage {
            Stage::PidExplore => Mode::PidExplore,
            Stage::SharedControl => Mode::Shared {
                stage,
                epsilon: self.config.epsilon_shared,
            },
            Stage::RlOnly => Mode::Agent {
                epsilon: self.config.epsilon_rl,
            },
        };
        let rec = self.session.step(&mode, Some(self.learner.network()))?;
        if let Some(e) = rec.experience.clone() {
            self.learner.remember(e);
            self.progress.experiences += 1;
        }
        match stage.stage {
            Stage::PidExplore => {}
            Stage::SharedControl => {
                self.progress.shared_steps += 1;
                self.learner.learn()?;
            }
            Stage::RlOnly => {
                self.rl_steps += 1;
                self.learner.learn()?;
            }
        }
        if rec.terminal {
            self.session.reset_episode()?;
        }
        Ok(rec)
    }

    /// Step while `keep_going` holds, feeding every record to `sink`.
    pub fn run_while<F, S>(&mut self, mut keep_going: F, mut sink: S) -> Result<()>
    where
        F: FnMut(&Self) -> bool,
        S: FnMut(&StepRecord) -> Result<()>,
    {
        while keep_going(self) {
            let rec = self.step()?;
            sink(&rec)?;
        }
        Ok(())
    }

    /// Run the complete curriculum.
    pub fn run_to_end<S: FnMut(&StepRecord) -> Result<()>>(&mut self, sink: S) -> Result<()> {
        self.run_while(|t| !t.finished(), sink)
    }
}
