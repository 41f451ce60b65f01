//! Discrete gain search for the yaw and pitch loops.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::Result;
use crate::pid::{gain_grid, tune_gains, PidGains, TrackingGains};

use super::{run_trial, Policy, TrialConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TuningConfig {
    /// Frames of the fixed-seed scoring trial.
    pub frames: u64,
    pub seed: u64,
    pub kp: Vec<f64>,
    pub ki: Vec<f64>,
    pub kd: Vec<f64>,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            frames: 3_000,
            seed: 1_000_003,
            kp: vec![1.0, 2.0, 3.0],
            ki: vec![0.0, 0.5, 1.0],
            kd: vec![0.0, 0.05, 0.1],
        }
    }
}

impl TuningConfig {
    fn grid(&self, base: &PidGains) -> Vec<PidGains> {
        if self.kp.len() == 3 && self.ki.len() == 3 && self.kd.len() == 3 {
            let a = |v: &[f64]| [v[0], v[1], v[2]];
            return gain_grid(base, a(&self.kp), a(&self.ki), a(&self.kd));
        }
        let mut out = Vec::new();
        for &kp in &self.kp {
            for &ki in &self.ki {
                for &kd in &self.kd {
                    out.push(PidGains { kp, ki, kd, ..*base });
                }
            }
        }
        out
    }
}

/// Tune yaw, then pitch with the tuned yaw loop, each by the mean immediate
/// reward of one fixed-seed trial. Writes `axis,kp,ki,kd,score` rows when
/// `csv_out` is given.
pub fn tune_pid(cfg: &TrialConfig, csv_out: Option<&Path>) -> Result<TrackingGains> {
    let mut trial = cfg.clone();
    trial.seed = cfg.tuning.seed;
    trial.max_frames = cfg.tuning.frames;
    let mut gains = trial.session.gains;
    let mut rows = Vec::new();
    for axis in ["yaw", "pitch"] {
        let base = if axis == "yaw" { gains.yaw } else { gains.pitch };
        let candidates = cfg.tuning.grid(&base);
        let result = tune_gains(&candidates, |g| {
            let mut t = trial.clone();
            if axis == "yaw" {
                t.session.gains.yaw = *g;
            } else {
                t.session.gains.pitch = *g;
            }
            let m = run_trial(&t, Policy::Pid)?.metrics;
            Ok(m.immediate_reward_avg_yaw + m.immediate_reward_avg_pitch)
        })?;
        for (g, s) in candidates.iter().zip(&result.scores) {
            rows.push((axis, *g, *s));
        }
        if axis == "yaw" {
            gains.yaw = result.best;
        } else {
            gains.pitch = result.best;
        }
        trial.session.gains = gains;
    }
    if let Some(path) = csv_out {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(["axis", "kp", "ki", "kd", "score"])?;
        for (axis, g, s) in rows {
            w.write_record([axis.to_string(), g.kp.to_string(), g.ki.to_string(), g.kd.to_string(), s.to_string()])?;
        }
        w.flush()?;
    }
    Ok(gains)
}
