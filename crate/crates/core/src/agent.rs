//! The centralized learned controller: delay-augmented state windows, the
//! centring reward, the discrete action grid and epsilon-greedy selection.

use std::collections::VecDeque;

use rand::Rng;

use crate::dqn::{argmax, QNetwork};
use crate::error::{usage, Result};
use crate::sim::RateCommand;

/// Values per step in the flattened window.
pub const FEATURES_PER_STEP: usize = 6;

/// One step of the agent's view: filtered box state, the forward speed the
/// PID asked for and the rates the agent itself commanded last.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFeatures {
    pub x: f64,
    pub y: f64,
    pub area: f64,
    pub v_l: f64,
    pub yaw_prev: f64,
    pub pitch_prev: f64,
}

impl StepFeatures {
    pub const NEUTRAL: StepFeatures = StepFeatures {
        x: 0.0,
        y: 0.0,
        area: 0.0,
        v_l: 0.0,
        yaw_prev: 0.0,
        pitch_prev: 0.0,
    };

    pub fn is_finite(&self) -> bool {
        self.raw().iter().all(|v| v.is_finite())
    }

    pub fn raw(&self) -> [f64; FEATURES_PER_STEP] {
        [self.x, self.y, self.area, self.v_l, self.yaw_prev, self.pitch_prev]
    }

    /// Network input values: image coordinates as-is, the rest divided by
    /// their configured full-scale values.
    pub fn scaled(&self, scales: &FeatureScales) -> [f64; FEATURES_PER_STEP] {
        [
            self.x,
            self.y,
            self.area / scales.area_max,
            self.v_l / scales.v_max,
            self.yaw_prev / scales.rate_max,
            self.pitch_prev / scales.rate_max,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScales {
    pub area_max: f64,
    pub v_max: f64,
    pub rate_max: f64,
}

impl Default for FeatureScales {
    fn default() -> Self {
        Self {
            area_max: 0.2,
            v_max: 1.0,
            rate_max: 0.5,
        }
    }
}

/// Sliding window of the last `H` step features, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    window: VecDeque<StepFeatures>,
    history: usize,
}

impl AugmentedState {
    /// Window of length `history` pre-filled with neutral features.
    pub fn new(history: usize) -> Result<Self> {
        if history == 0 {
            return usage("history size must be positive");
        }
        Ok(Self {
            window: std::iter::repeat_n(StepFeatures::NEUTRAL, history).collect(),
            history,
        })
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn dim(&self) -> usize {
        self.history * FEATURES_PER_STEP
    }

    pub fn push(&mut self, f: StepFeatures) {
        self.window.pop_front();
        self.window.push_back(f);
    }

    pub fn entries(&self) -> impl Iterator<Item = &StepFeatures> {
        self.window.iter()
    }

    pub fn newest(&self) -> &StepFeatures {
        self.window.back().expect("window is never empty")
    }

    pub fn flatten(&self, scales: &FeatureScales) -> Vec<f64> {
        self.window.iter().flat_map(|f| f.scaled(scales)).collect()
    }
}

/// Returns `push_features(state, f)` as a new value.
pub fn push_features(state: &AugmentedState, f: StepFeatures) -> AugmentedState {
    let mut next = state.clone();
    next.push(f);
    next
}

/// Ascending rate levels for each head.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrid {
    pub yaw_levels: Vec<f64>,
    pub pitch_levels: Vec<f64>,
}

impl Default for ActionGrid {
    fn default() -> Self {
        Self::symmetric(7, 0.5).expect("valid default grid")
    }
}

impl ActionGrid {
    /// `k` evenly spaced levels on `[-max, max]` for both heads; `k` odd so
    /// zero is a level.
    pub fn symmetric(k: usize, max: f64) -> Result<Self> {
        if k < 3 || k % 2 == 0 || !(max > 0.0) {
            return usage("action grid needs an odd level count ≥ 3 and a positive limit");
        }
        let half = (k / 2) as f64;
        let levels: Vec<f64> = (0..k).map(|i| max * (i as f64 - half) / half).collect();
        Ok(Self {
            yaw_levels: levels.clone(),
            pitch_levels: levels,
        })
    }

    pub fn k_yaw(&self) -> usize {
        self.yaw_levels.len()
    }

    pub fn k_pitch(&self) -> usize {
        self.pitch_levels.len()
    }

    /// Index of the level closest to `rate` (lower index on exact ties).
    pub fn nearest(levels: &[f64], rate: f64) -> usize {
        let mut best = 0;
        for (i, l) in levels.iter().enumerate() {
            if (l - rate).abs() < (levels[best] - rate).abs() {
                best = i;
            }
        }
        best
    }

    pub fn quantize(&self, cmd: &RateCommand) -> (usize, usize) {
        (Self::nearest(&self.yaw_levels, cmd.yaw_rate), Self::nearest(&self.pitch_levels, cmd.pitch_rate))
    }

    pub fn command(&self, yaw_idx: usize, pitch_idx: usize, forward_velocity: f64) -> RateCommand {
        RateCommand::new(forward_velocity, self.yaw_levels[yaw_idx], self.pitch_levels[pitch_idx])
    }
}

/// Centring reward weights and the optional confidence bonus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    pub mu: f64,
    pub lambda: f64,
    pub beta: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            mu: 0.1,
            lambda: 0.1,
            beta: 0.0,
        }
    }
}

/// Per-axis terms `(μ/(|x|+μ), λ/(|y|+λ))`.
pub fn reward_terms(x_c: f64, y_c: f64, mu: f64, lambda: f64) -> (f64, f64) {
    (mu / (x_c.abs() + mu), lambda / (y_c.abs() + lambda))
}

pub fn reward(x_c: f64, y_c: f64, mu: f64, lambda: f64) -> f64 {
    let (a, b) = reward_terms(x_c, y_c, mu, lambda);
    a + b
}

/// Centring reward plus `beta·c_d`.
pub fn reward_with_confidence(x_c: f64, y_c: f64, c_d: f64, mu: f64, lambda: f64, beta: f64) -> f64 {
    reward(x_c, y_c, mu, lambda) + beta * c_d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionChoice {
    pub yaw_idx: usize,
    pub pitch_idx: usize,
    pub command: RateCommand,
}

/// Per head: a uniform random level with probability `epsilon`, otherwise the
/// greedy level. The forward speed is passed through from the PID.
pub fn select_action<R: Rng + ?Sized>(
    net: &QNetwork,
    s: &[f64],
    epsilon: f64,
    grid: &ActionGrid,
    forward_velocity: f64,
    rng: &mut R,
) -> Result<ActionChoice> {
    if !(0.0..=1.0).contains(&epsilon) {
        return usage(format!("epsilon must lie in [0, 1], got {epsilon}"));
    }
    let (q_yaw, q_pitch) = net.forward(s)?;
    let (yaw_idx, pitch_idx) = epsilon_greedy(&q_yaw, &q_pitch, epsilon, rng);
    Ok(ActionChoice {
        yaw_idx,
        pitch_idx,
        command: grid.command(yaw_idx, pitch_idx, forward_velocity),
    })
}

/// The head-wise choice rule on given Q-vectors. Always consumes four draws.
pub fn epsilon_greedy<R: Rng + ?Sized>(q_yaw: &[f64], q_pitch: &[f64], epsilon: f64, rng: &mut R) -> (usize, usize) {
    let explore_yaw = rng.random::<f64>() < epsilon;
    let random_yaw = rng.random_range(0..q_yaw.len());
    let explore_pitch = rng.random::<f64>() < epsilon;
    let random_pitch = rng.random_range(0..q_pitch.len());
    (
        if explore_yaw { random_yaw } else { argmax(q_yaw) },
        if explore_pitch { random_pitch } else { argmax(q_pitch) },
    )
}
