//! One closed-loop step for any controller: perceive, pick a command, record
//! the transition, actuate. Training and evaluation both run through here.

use rand::Rng;

use crate::agent::{reward_terms, select_action, ActionGrid, AugmentedState, FeatureScales, RewardParams, StepFeatures};
use crate::curriculum::{
    bearing_from_image, shared_control_arbiter, spiral_search_step, ControlSource, CurriculumStage, RecoveryState, SpiralParams, Stage,
};
use crate::dqn::{Experience, QNetwork};
use crate::error::{usage, Result};
use crate::pid::{PidTracker, TrackingGains};
use crate::rng::{stream, SimRng, Stream};
use crate::sim::RateCommand;
use crate::tracker::TrackStatus;
use crate::world::{World, WorldConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub world: WorldConfig,
    pub gains: TrackingGains,
    pub grid: ActionGrid,
    pub scales: FeatureScales,
    pub reward: RewardParams,
    pub spiral: SpiralParams,
    pub history: usize,
    /// Exploration set-points are drawn from `[-r, r]²` in image coordinates.
    pub setpoint_range: f64,
    /// Steps between exploration set-point changes, inclusive range.
    pub setpoint_period: (u32, u32),
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            gains: TrackingGains::default(),
            grid: ActionGrid::default(),
            scales: FeatureScales::default(),
            reward: RewardParams::default(),
            spiral: SpiralParams::default(),
            history: 20,
            setpoint_range: 0.6,
            setpoint_period: (100, 300),
        }
    }
}

impl SessionConfig {
    pub fn state_dim(&self) -> usize {
        self.history * crate::agent::FEATURES_PER_STEP
    }
}

/// How yaw and pitch are chosen while the track is held.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Continuous PID outputs, the baseline.
    Pid,
    /// Grid-quantized PID toward random image set-points.
    PidExplore,
    /// The learned policy alone.
    Agent { epsilon: f64 },
    /// The learned policy inside the interior, the PID shield at the border.
    Shared { stage: CurriculumStage, epsilon: f64 },
}

impl Mode {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Mode::Pid => None,
            Mode::PidExplore => Some(Stage::PidExplore),
            Mode::Agent { .. } => Some(Stage::RlOnly),
            Mode::Shared { stage, .. } => Some(stage.stage),
        }
    }

    fn outer_fraction(&self) -> f64 {
        match self {
            Mode::Shared { stage, .. } => stage.outer_region_fraction,
            _ => 0.0,
        }
    }
}

/// Everything that happened in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub stage: Option<Stage>,
    pub source: ControlSource,
    /// Filtered box state the controller acted on.
    pub x_c: f64,
    pub y_c: f64,
    pub area: f64,
    pub confidence: f64,
    pub detected: bool,
    pub command: RateCommand,
    /// Learning reward, zero while lost.
    pub reward: f64,
    pub reward_yaw: f64,
    pub reward_pitch: f64,
    pub lost: bool,
    /// Search budget exhausted at this frame.
    pub terminal: bool,
    pub outer_fraction: f64,
    /// Transition ending at this frame (absent on the first frame).
    pub experience: Option<Experience>,
}

#[derive(Debug, Clone)]
pub struct Session {
    cfg: SessionConfig,
    seed: u64,
    episode: u64,
    world: World,
    pid: PidTracker,
    window: AugmentedState,
    recovery: Option<RecoveryState>,
    prev: Option<(Vec<f64>, usize, usize)>,
    last_command: RateCommand,
    setpoint: (f64, f64),
    setpoint_timer: u32,
    explore_rng: SimRng,
    curriculum_rng: SimRng,
}

impl Session {
    pub fn new(cfg: SessionConfig, seed: u64) -> Result<Self> {
        if cfg.history == 0 {
            return usage("history size must be positive");
        }
        Ok(Self {
            world: World::new(cfg.world.clone(), seed)?,
            pid: PidTracker::new(cfg.gains),
            window: AugmentedState::new(cfg.history)?,
            recovery: None,
            prev: None,
            last_command: RateCommand::NEUTRAL,
            setpoint: (0.0, 0.0),
            setpoint_timer: 0,
            explore_rng: stream(seed, Stream::Exploration),
            curriculum_rng: stream(seed, Stream::Curriculum),
            episode: 0,
            seed,
            cfg,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn window(&self) -> &AugmentedState {
        &self.window
    }

    /// Start a fresh encounter after a terminal loss; RNG streams continue.
    pub fn reset_episode(&mut self) -> Result<()> {
        self.episode += 1;
        let world_seed = self.seed ^ self.episode.rotate_right(20);
        self.world = World::new(self.cfg.world.clone(), world_seed)?;
        self.pid.reset();
        self.window = AugmentedState::new(self.cfg.history)?;
        self.recovery = None;
        self.prev = None;
        self.last_command = RateCommand::NEUTRAL;
        Ok(())
    }

    fn next_setpoint(&mut self) -> (f64, f64) {
        if self.setpoint_timer == 0 {
            let r = self.cfg.setpoint_range;
            self.setpoint = (self.curriculum_rng.random_range(-r..=r), self.curriculum_rng.random_range(-r..=r));
            let (lo, hi) = self.cfg.setpoint_period;
            self.setpoint_timer = self.curriculum_rng.random_range(lo..=hi.max(lo));
        }
        self.setpoint_timer -= 1;
        self.setpoint
    }

    /// Run one frame under `mode`. `net` is required by the learned modes.
    pub fn step(&mut self, mode: &Mode, net: Option<&QNetwork>) -> Result<StepRecord> {
        let dt = self.cfg.world.dt;
        let perception = self.world.perceive()?;
        let lost = perception.status == TrackStatus::Lost;
        let (x_c, y_c, area) = perception.box_state();
        let confidence = perception.confidence();
        let rp = &self.cfg.reward;
        let (reward_yaw, reward_pitch) = if lost { (0.0, 0.0) } else { reward_terms(x_c, y_c, rp.mu, rp.lambda) };
        let reward = if lost { 0.0 } else { reward_yaw + reward_pitch + rp.beta * confidence };

        self.window.push(StepFeatures {
            x: x_c,
            y: y_c,
            area,
            v_l: self.last_command.forward_velocity,
            yaw_prev: self.last_command.yaw_rate,
            pitch_prev: self.last_command.pitch_rate,
        });
        let state = self.window.flatten(&self.cfg.scales);

        let mut terminal = false;
        let (command, source, yaw_idx, pitch_idx) = if lost {
            if self.recovery.is_none() {
                let bearing = bearing_from_image(x_c, y_c, &self.cfg.world.vision.camera);
                self.recovery = Some(RecoveryState::new(bearing, &self.cfg.spiral));
                self.pid.reset();
            }
            let rec = self.recovery.as_mut().expect("recovery just set");
            let cmd = spiral_search_step(rec, &self.cfg.spiral, dt);
            terminal = rec.steps >= self.cfg.spiral.budget;
            let (a, b) = self.cfg.grid.quantize(&cmd);
            (cmd, ControlSource::Spiral, a, b)
        } else {
            self.recovery = None;
            self.decide(mode, net, &state, x_c, y_c, area, dt)?
        };

        let experience = self.prev.take().map(|(s, a_yaw, a_pitch)| Experience {
            s,
            a_yaw,
            a_pitch,
            r: reward,
            s_next: state.clone(),
            terminal,
        });
        self.prev = Some((state, yaw_idx, pitch_idx));
        self.last_command = command;
        let step = self.world.step_index();
        self.world.actuate(command)?;

        Ok(StepRecord {
            step,
            stage: mode.stage(),
            source,
            x_c,
            y_c,
            area,
            confidence,
            detected: perception.observation.is_detected(),
            command,
            reward,
            reward_yaw,
            reward_pitch,
            lost,
            terminal,
            outer_fraction: mode.outer_fraction(),
            experience,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn decide(
        &mut self,
        mode: &Mode,
        net: Option<&QNetwork>,
        state: &[f64],
        x_c: f64,
        y_c: f64,
        area: f64,
        dt: f64,
    ) -> Result<(RateCommand, ControlSource, usize, usize)> {
        let setpoint = if *mode == Mode::PidExplore { self.next_setpoint() } else { (0.0, 0.0) };
        let (yaw, pitch) = self.pid.steer(x_c, y_c, setpoint, dt);
        let forward = self.pid.forward_command(area, dt);
        let pid_cmd = RateCommand::new(forward, yaw, pitch);
        let grid = &self.cfg.grid;
        let need_net = || net.ok_or_else(|| crate::Error::Usage("learned mode needs a network".into()));
        Ok(match *mode {
            Mode::Pid => {
                let (a, b) = grid.quantize(&pid_cmd);
                (pid_cmd, ControlSource::Pid, a, b)
            }
            Mode::PidExplore => {
                let (a, b) = grid.quantize(&pid_cmd);
                (grid.command(a, b, forward), ControlSource::Pid, a, b)
            }
            Mode::Agent { epsilon } => {
                let c = select_action(need_net()?, state, epsilon, grid, forward, &mut self.explore_rng)?;
                (c.command, ControlSource::Rl, c.yaw_idx, c.pitch_idx)
            }
            Mode::Shared { stage, epsilon } => {
                let rl = select_action(need_net()?, state, epsilon, grid, forward, &mut self.explore_rng)?;
                let d = shared_control_arbiter(x_c, y_c, &stage, &rl, &pid_cmd, grid, &mut self.curriculum_rng);
                (d.command, d.source, d.yaw_idx, d.pitch_idx)
            }
        })
    }
}
