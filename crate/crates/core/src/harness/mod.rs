//! Experiment orchestration: trial configuration, the trial loop with its
//! per-step log, summary metrics, PID tuning, the three studies and plots.

mod config;
mod log;
mod plots;
mod studies;
mod tuning;

pub use log::{
    read_step_log, read_summary, write_step_log, write_summary, write_summary_to, write_trajectory, LogRow, TrajectoryRow, STEP_HEADER, SUMMARY_HEADER,
};
pub use plots::{emit_plots, plot_error_vs_time, plot_reward_vs_trial, plot_trajectory};
pub use studies::{
    run_study1, run_study2, run_study3, sign_test_p, train_agent, AgentCache, Study1Report, Study2Curve, Study2Report, Study3Arm,
    Study3Report, STUDY1_ROWS,
};
pub use tuning::{tune_pid, TuningConfig};

use std::fmt;
use std::path::Path;

use crate::curriculum::{CurriculumTrainer, Learner, TrainingConfig};
use crate::dqn::QNetwork;
use crate::error::{Error, Result};
use crate::session::{Mode, Session, SessionConfig};
use crate::sim::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    Pid,
    Rl,
    Curriculum,
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::Pid => "pid",
            ControllerKind::Rl => "rl",
            ControllerKind::Curriculum => "curriculum",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings of the three studies.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub histories: Vec<usize>,
    /// Frame cap of evaluation trials.
    pub eval_frames: u64,
    /// Held-out evaluation trials per trained agent.
    pub eval_trials: usize,
    /// Sequential trials per seed in the adaptation study.
    pub trials: usize,
    pub trial_frames: u64,
    /// Exploration while adapting online.
    pub online_epsilon: f64,
    /// Confidence bonus weight of the shaped arm.
    pub beta: f64,
    /// Left-side confidence penalty of the weakened detector.
    pub left_bias: f64,
    /// Online steps spent adapting to the weakened detector.
    pub finetune_steps: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            histories: vec![5, 10, 20, 30],
            eval_frames: 45_000,
            eval_trials: 3,
            trials: 12,
            trial_frames: 2_000,
            online_epsilon: 0.02,
            beta: 0.5,
            left_bias: 1.0,
            finetune_steps: 30_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub controller: ControllerKind,
    pub max_frames: u64,
    /// Module settings; history, delay and the confidence weight live here.
    pub session: SessionConfig,
    pub training: TrainingConfig,
    pub tuning: TuningConfig,
    pub study: StudyConfig,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Nominal,
            seed: 0,
            controller: ControllerKind::Pid,
            max_frames: 45_000,
            session: SessionConfig::default(),
            training: TrainingConfig::default(),
            tuning: TuningConfig::default(),
            study: StudyConfig::default(),
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.max_frames == 0 {
            return fail("max_frames must be positive".into());
        }
        if self.session.history == 0 {
            return fail("history size must be positive".into());
        }
        if !(self.session.reward.mu > 0.0 && self.session.reward.lambda > 0.0) || self.session.reward.beta < 0.0 {
            return fail("reward weights must be positive and beta non-negative".into());
        }
        if self.training.hidden.contains(&0) {
            return fail("hidden layer widths must be positive".into());
        }
        if self.session.spiral.budget == 0 {
            return fail("spiral budget must be positive".into());
        }
        let (lo, hi) = self.session.setpoint_period;
        if lo == 0 || hi < lo {
            return fail("set-point period must be a non-empty positive range".into());
        }
        if self.study.eval_trials == 0 || self.study.trials == 0 {
            return fail("study trial counts must be positive".into());
        }
        self.session.world.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.training.trainer.validate()?;
        Ok(())
    }

    /// Session settings with the scenario applied to the vehicle.
    pub fn effective_session(&self) -> SessionConfig {
        let mut s = self.session.clone();
        self.scenario.apply(&mut s.world.vehicle);
        s
    }

    pub fn history(&self) -> usize {
        self.session.history
    }

    pub fn delay_steps(&self) -> u64 {
        self.session.world.delay_steps
    }
}

/// How commands are chosen during a trial.
pub enum Policy<'a> {
    Pid,
    /// Greedy learned policy without updates.
    Frozen(&'a QNetwork),
    /// Learned policy that keeps learning from its own experience.
    Online { learner: &'a mut Learner, epsilon: f64 },
    /// A full training curriculum started from scratch.
    Curriculum,
}

/// Summary of one trial, computed from its per-step log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub seed: u64,
    pub controller: String,
    pub history: usize,
    pub delay_steps: u64,
    pub scenario: String,
    pub tracking_length: u64,
    pub expected_cumulative_reward_yaw: f64,
    pub expected_cumulative_reward_pitch: f64,
    pub immediate_reward_avg_yaw: f64,
    pub immediate_reward_avg_pitch: f64,
    pub lost_events: u64,
    pub lost_frames: u64,
    /// Share of held-track frames without a detection.
    pub missed_detection_rate: f64,
    /// Mean filtered `x_c` over held-track frames.
    pub mean_x_c: f64,
    /// Variance of filtered `y_c` over held-track frames.
    pub pitch_error_var: f64,
    pub terminated: bool,
}

/// Mean over the trial of the discounted return-to-go of `rewards`.
pub fn mean_discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    if rewards.is_empty() {
        return 0.0;
    }
    let mut g = 0.0;
    let mut sum = 0.0;
    for r in rewards.iter().rev() {
        g = r + gamma * g;
        sum += g;
    }
    sum / rewards.len() as f64
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Recompute every summary statistic from a per-step log.
pub fn metrics_from_log(rows: &[LogRow], cfg: &TrialConfig, controller: &str) -> TrialMetrics {
    let rp = &cfg.session.reward;
    let axis = |lost: bool, e: f64, w: f64| if lost { 0.0 } else { w / (e.abs() + w) };
    let r_yaw: Vec<f64> = rows.iter().map(|r| axis(r.lost, r.x_c, rp.mu)).collect();
    let r_pitch: Vec<f64> = rows.iter().map(|r| axis(r.lost, r.y_c, rp.lambda)).collect();
    let held: Vec<&LogRow> = rows.iter().filter(|r| !r.lost).collect();
    let xs: Vec<f64> = held.iter().map(|r| r.x_c).collect();
    let ys: Vec<f64> = held.iter().map(|r| r.y_c).collect();
    let y_mean = mean(&ys);
    let y_var = mean(&ys.iter().map(|y| (y - y_mean).powi(2)).collect::<Vec<_>>());
    let missed = held.iter().filter(|r| !r.detected).count();
    let lost_events = rows.windows(2).filter(|w| w[1].lost && !w[0].lost).count() as u64 + rows.first().is_some_and(|r| r.lost) as u64;
    let gamma = cfg.training.trainer.gamma;
    TrialMetrics {
        seed: cfg.seed,
        controller: controller.to_string(),
        history: cfg.history(),
        delay_steps: cfg.delay_steps(),
        scenario: cfg.scenario.name().to_string(),
        tracking_length: rows.len() as u64,
        expected_cumulative_reward_yaw: mean_discounted_return(&r_yaw, gamma),
        expected_cumulative_reward_pitch: mean_discounted_return(&r_pitch, gamma),
        immediate_reward_avg_yaw: mean(&r_yaw),
        immediate_reward_avg_pitch: mean(&r_pitch),
        lost_events,
        lost_frames: rows.iter().filter(|r| r.lost).count() as u64,
        missed_detection_rate: if held.is_empty() { 0.0 } else { missed as f64 / held.len() as f64 },
        mean_x_c: mean(&xs),
        pitch_error_var: y_var,
        terminated: rows.last().is_some_and(|r| r.terminal),
    }
}

/// Per-step log, trajectory and summary of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    pub metrics: TrialMetrics,
    pub rows: Vec<LogRow>,
    pub trajectory: Vec<TrajectoryRow>,
}

impl TrialOutput {
    /// Write `<stem>_steps.csv`, `<stem>_trajectory.csv` and `<stem>_summary.csv`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_step_log(&dir.join(format!("{stem}_steps.csv")), &self.rows)?;
        write_trajectory(&dir.join(format!("{stem}_trajectory.csv")), &self.trajectory)?;
        write_summary(&dir.join(format!("{stem}_summary.csv")), std::slice::from_ref(&self.metrics))?;
        Ok(())
    }
}

/// Run one trial: frames until the search budget runs out or the frame cap.
/// Curriculum trials restart the encounter after a terminal loss instead of
/// stopping.
pub fn run_trial(cfg: &TrialConfig, policy: Policy<'_>) -> Result<TrialOutput> {
    cfg.validate()?;
    let session_cfg = cfg.effective_session();
    let mut rows = Vec::new();
    let mut trajectory = Vec::new();
    let controller;
    match policy {
        Policy::Curriculum => {
            controller = ControllerKind::Curriculum.name();
            let mut trainer = CurriculumTrainer::new(session_cfg, cfg.training.clone(), cfg.seed)?;
            while (rows.len() as u64) < cfg.max_frames {
                let trajectory_row = TrajectoryRow::capture(trainer.session.world().step_index(), trainer.session.world());
                let rec = trainer.step()?;
                trajectory.push(trajectory_row);
                rows.push(LogRow::from(&rec));
            }
        }
        policy => {
            let mut session = Session::new(session_cfg, cfg.seed)?;
            let (mode, mut online) = match policy {
                Policy::Pid => (Mode::Pid, None),
                Policy::Frozen(net) => (Mode::Agent { epsilon: 0.0 }, Some((None, Some(net)))),
                Policy::Online { learner, epsilon } => (Mode::Agent { epsilon }, Some((Some(learner), None))),
                Policy::Curriculum => unreachable!("handled above"),
            };
            controller = if matches!(mode, Mode::Pid) { ControllerKind::Pid.name() } else { ControllerKind::Rl.name() };
            while (rows.len() as u64) < cfg.max_frames {
                let trajectory_row = TrajectoryRow::capture(session.world().step_index(), session.world());
                let rec = match &mut online {
                    None => session.step(&mode, None)?,
                    Some((None, Some(net))) => session.step(&mode, Some(net))?,
                    Some((Some(learner), _)) => {
                        let rec = session.step(&mode, Some(learner.network()))?;
                        if let Some(e) = rec.experience.clone() {
                            learner.remember(e);
                        }
                        learner.learn()?;
                        rec
                    }
                    Some((None, None)) => unreachable!("learned policies carry a network"),
                };
                trajectory.push(trajectory_row);
                let terminal = rec.terminal;
                rows.push(LogRow::from(&rec));
                if terminal {
                    break;
                }
            }
        }
    }
    let metrics = metrics_from_log(&rows, cfg, controller);
    Ok(TrialOutput { metrics, rows, trajectory })
}
