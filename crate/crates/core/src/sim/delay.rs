use std::collections::VecDeque;

use super::RateCommand;
use crate::error::{usage, Result};

/// Fixed actuation delay between the controller and the gait layer.
///
/// A command pushed at step `t` is released by `pop` at step `t + delay_steps`.
/// Until the first command matures, `pop` returns the neutral command; after
/// that the most recently released command is held.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    delay_steps: u64,
    neutral: RateCommand,
    queue: VecDeque<(u64, RateCommand)>,
    active: Option<RateCommand>,
    last_push: Option<u64>,
    last_pop: Option<u64>,
}

impl DelayLine {
    pub fn new(delay_steps: u64, neutral: RateCommand) -> Self {
        Self {
            delay_steps,
            neutral,
            queue: VecDeque::with_capacity(delay_steps as usize + 1),
            active: None,
            last_push: None,
            last_pop: None,
        }
    }

    pub fn delay_steps(&self) -> u64 {
        self.delay_steps
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Commands still waiting to be applied, oldest first, with their push step.
    pub fn pending(&self) -> impl Iterator<Item = (u64, &RateCommand)> {
        self.queue.iter().map(move |(release, c)| (release - self.delay_steps, c))
    }

    pub fn push(&mut self, command: RateCommand, t: u64) -> Result<()> {
        if matches!(self.last_push, Some(prev) if t <= prev) {
            return usage(format!("delay line push at step {t} after step {:?}", self.last_push));
        }
        self.last_push = Some(t);
        self.queue.push_back((t + self.delay_steps, command));
        Ok(())
    }

    pub fn pop(&mut self, t: u64) -> Result<RateCommand> {
        if matches!(self.last_pop, Some(prev) if t <= prev) {
            return usage(format!("delay line pop at step {t} after step {:?}", self.last_pop));
        }
        self.last_pop = Some(t);
        while let Some((release, _)) = self.queue.front() {
            if *release > t {
                break;
            }
            self.active = self.queue.pop_front().map(|(_, c)| c);
        }
        Ok(self.active.unwrap_or(self.neutral))
    }
}
