//! Closed-loop simulation and training workbench for vision-based target
//! tracking with a six-legged swimming robot.
//!
//! The crate is organised bottom-up:
//!
//! - [`sim`]: rigid-body vehicle with per-axis quadratic drag, buoyancy, a
//!   six-leg thrust mixer with fault injection, an actuation delay line and a
//!   randomly moving target.
//! - [`vision`]: synthetic detector output (normalized boxes, confidence field,
//!   dropout).
//! - [`tracker`]: constant-velocity Kalman filter over the 10-dim box state with
//!   single-target IoU gating.
//! - [`pid`]: decentralized PID baseline and the discrete gain search.
//! - [`dqn`]: two-head Q-network, replay memory, double-DQN targets, gradient
//!   step, soft target update, checkpoints.
//! - [`agent`]: delay-augmented state windows, reward, action grid, epsilon-greedy
//!   selection.
//! - [`curriculum`]: PID-shielded training stages and spiral search recovery.
//! - [`world`]: the closed loop sim → vision → tracker → controller → delay.
//! - [`harness`]: configs, trials, metrics, studies, logs and plots.

pub mod agent;
pub mod curriculum;
pub mod dqn;
pub mod error;
pub mod harness;
pub mod pid;
pub mod rng;
pub mod session;
pub mod sim;
pub mod tracker;
pub mod vision;
pub mod world;

pub use error::{Error, Result};
