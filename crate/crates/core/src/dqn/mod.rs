//! Two-head double-DQN: network, replay memory, targets, descent step, soft
//! target update and checkpoints.

mod checkpoint;
mod network;
mod replay;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, MAGIC, VERSION};
pub use network::{argmax, Architecture, QNetwork};

pub use replay::{Experience, ReplayMemory};

use rand::Rng;

use crate::error::{usage, Error, Result};

/// Parameter update rule applied to the TD-loss gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// θ ← θ − η·g.
    Sgd,
    /// Bias-corrected first and second moment scaling.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
    };
}

/// Moment estimates for [`Optimizer::Adam`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Apply one Adam update of `grad` to `params`.
    pub fn apply(&mut self, params: &mut [f64], grad: &[f64], eta: f64, beta1: f64, beta2: f64, epsilon: f64) {
        self.t = self.t.saturating_add(1);
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= eta * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainerParams {
    pub optimizer: Optimizer,
    pub eta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub memory_size: usize,
}

impl Default for TrainerParams {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::ADAM,
            eta: 1e-4,
            gamma: 0.99,
            tau: 0.001,
            batch_size: 50,
            memory_size: 2000,
        }
    }
}

impl TrainerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.batch_size == 0 || self.batch_size > self.memory_size {
            return Err(Error::Config("batch size must be in 1..=memory size".into()));
        }
        Ok(())
    }
}

/// Per-sample (yaw, pitch) regression targets: each head picks its next
/// action with the current network and scores it with the target network.
pub fn double_dqn_targets(batch: &[&Experience], current: &QNetwork, target: &QNetwork, gamma: f64) -> Result<Vec<(f64, f64)>> {
    if batch.is_empty() {
        return usage("double-DQN targets need a non-empty batch");
    }
    let next: Vec<&[f64]> = batch.iter().map(|e| e.s_next.as_slice()).collect();
    let (cy, cp) = current.forward_batch(&next)?;
    let (ty, tp) = target.forward_batch(&next)?;
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if e.terminal {
                return (e.r, e.r);
            }
            let ay = argmax(cy.column(i).as_slice());
            let ap = argmax(cp.column(i).as_slice());
            (e.r + gamma * ty[(ay, i)], e.r + gamma * tp[(ap, i)])
        })
        .collect())
}

/// One plain gradient-descent step on the squared TD error of both heads.
/// Returns the pre-step loss.
pub fn gradient_step(net: &mut QNetwork, batch: &[&Experience], targets: &[(f64, f64)], eta: f64) -> Result<f64> {
    let inputs: Vec<&[f64]> = batch.iter().map(|e| e.s.as_slice()).collect();
    let actions: Vec<(usize, usize)> = batch.iter().map(|e| (e.a_yaw, e.a_pitch)).collect();
    let (loss, grad) = net.loss_gradient(&inputs, &actions, targets)?;
    for (p, g) in net.params_mut().iter_mut().zip(grad) {
        *p -= eta * g;
    }
    Ok(loss)
}

/// θ_T ← τ·θ_C + (1 − τ)·θ_T.
pub fn soft_update(target: &mut QNetwork, current: &QNetwork, tau: f64) -> Result<()> {
    if target.architecture() != current.architecture() {
        return usage("soft update between different architectures");
    }
    for (t, c) in target.params_mut().iter_mut().zip(current.params()) {
        *t = tau * c + (1.0 - tau) * *t;
    }
    Ok(())
}

/// Current and target networks with their replay memory.
#[derive(Debug, Clone)]
pub struct DoubleDqn {
    pub current: QNetwork,
    pub target: QNetwork,
    pub memory: ReplayMemory,
    pub params: TrainerParams,
    pub updates: u64,
    adam: AdamState,
}

impl DoubleDqn {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, params: TrainerParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let current = QNetwork::init(arch, rng);
        Ok(Self {
            adam: AdamState::new(current.params().len()),
            target: current.clone(),
            current,
            memory: ReplayMemory::new(params.memory_size)?,
            params,
            updates: 0,
        })
    }

    /// Sample a batch, take one descent step and blend the target network.
    /// Does nothing until the memory holds a full batch.
    pub fn learn<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        if self.memory.len() < self.params.batch_size {
            return Ok(None);
        }
        let batch = self.memory.sample(self.params.batch_size, rng)?;
        let targets = double_dqn_targets(&batch, &self.current, &self.target, self.params.gamma)?;
        let loss = match self.params.optimizer {
            Optimizer::Sgd => gradient_step(&mut self.current, &batch, &targets, self.params.eta)?,
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let inputs: Vec<&[f64]> = batch.iter().map(|e| e.s.as_slice()).collect();
                let actions: Vec<(usize, usize)> = batch.iter().map(|e| (e.a_yaw, e.a_pitch)).collect();
                let (loss, grad) = self.current.loss_gradient(&inputs, &actions, &targets)?;
                self.adam.apply(self.current.params_mut(), &grad, self.params.eta, beta1, beta2, epsilon);
                loss
            }
        };
        soft_update(&mut self.target, &self.current, self.params.tau)?;
        self.updates += 1;
        Ok(Some(loss))
    }
}
