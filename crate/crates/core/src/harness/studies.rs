//! The three comparison studies.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use crate::curriculum::{CurriculumTrainer, Learner};
use crate::error::Result;
use crate::sim::Scenario;

use super::{run_trial, write_summary, Policy, TrialConfig, TrialMetrics};

pub const STUDY1_ROWS: [&str; 5] = [
    "Yaw Expected Cumulative Reward",
    "Pitch Expected Cumulative Reward",
    "Tracking Length",
    "Yaw Immediate Reward Average",
    "Pitch Immediate Reward Average",
];

fn study1_value(m: &TrialMetrics, row: usize) -> f64 {
    match row {
        0 => m.expected_cumulative_reward_yaw,
        1 => m.expected_cumulative_reward_pitch,
        2 => m.tracking_length as f64,
        3 => m.immediate_reward_avg_yaw,
        _ => m.immediate_reward_avg_pitch,
    }
}

/// Sample mean and standard deviation (n − 1 denominator; 0 for one sample).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// One-sided sign-test p-value: P(at least `wins` successes in `n` fair coin
/// flips).
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    let mut p = 0.0;
    let mut c = 1.0f64; // C(n, k), built incrementally
    for k in 0..=n {
        if k > 0 {
            c = c * (n - k + 1) as f64 / k as f64;
        }
        if k >= wins {
            p += c;
        }
    }
    p / 2f64.powi(n as i32)
}

/// Seed of evaluation trial `k` for training seed `seed`, disjoint from the
/// training streams.
fn eval_seed(seed: u64, k: u64) -> u64 {
    0x5EED_0000_0000 + seed * 1000 + k
}

/// Run a full curriculum and return the trained learner.
pub fn train_agent(cfg: &TrialConfig, history: usize, seed: u64) -> Result<Learner> {
    let mut session = cfg.effective_session();
    session.history = history;
    let mut trainer = CurriculumTrainer::new(session, cfg.training.clone(), seed)?;
    trainer.run_to_end(|_| Ok(()))?;
    Ok(trainer.learner)
}

/// Trained agents keyed by `(history, seed)`, shared across studies.
#[derive(Debug, Default)]
pub struct AgentCache {
    agents: BTreeMap<(usize, u64), Learner>,
}

impl AgentCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Train (in parallel) every missing agent.
    pub fn ensure(&mut self, cfg: &TrialConfig, keys: &[(usize, u64)]) -> Result<()> {
        let missing: Vec<(usize, u64)> = keys.iter().copied().filter(|k| !self.agents.contains_key(k)).collect();
        let trained: Vec<Result<((usize, u64), Learner)>> =
            missing.into_par_iter().map(|(h, s)| train_agent(cfg, h, s).map(|l| ((h, s), l))).collect();
        for t in trained {
            let (k, l) = t?;
            self.agents.insert(k, l);
        }
        Ok(())
    }

    pub fn get(&self, history: usize, seed: u64) -> Option<&Learner> {
        self.agents.get(&(history, seed))
    }

    pub fn insert(&mut self, history: usize, seed: u64, learner: Learner) {
        self.agents.insert((history, seed), learner);
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

/// History ablation and PID baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Study1Report {
    /// Column labels: one per history size, then `PID`.
    pub columns: Vec<String>,
    pub seeds: Vec<u64>,
    /// Evaluation trials indexed by column, then seed.
    pub trials: Vec<Vec<Vec<TrialMetrics>>>,
}

impl Study1Report {
    pub fn column(&self, label: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == label)
    }

    /// Per-seed mean of a table row over that seed's evaluation trials.
    pub fn seed_means(&self, row: usize, column: usize) -> Vec<f64> {
        self.trials[column]
            .iter()
            .map(|ts| mean_std(&ts.iter().map(|m| study1_value(m, row)).collect::<Vec<_>>()).0)
            .collect()
    }

    /// `(mean, std)` across seeds of a table row for a column.
    pub fn cell(&self, row: usize, column: usize) -> (f64, f64) {
        mean_std(&self.seed_means(row, column))
    }

    pub fn write_table(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let mut header = vec!["metric".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (r, name) in STUDY1_ROWS.iter().enumerate() {
            let mut rec = vec![name.to_string()];
            for c in 0..self.columns.len() {
                let (m, s) = self.cell(r, c);
                rec.push(format!("{m:.2}±{s:.2}"));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Train every history size per seed, then evaluate each greedy agent and the
/// PID on the same held-out trials.
pub fn run_study1(cfg: &TrialConfig, seeds: &[u64], cache: &mut AgentCache, out: Option<&Path>) -> Result<Study1Report> {
    let histories = cfg.study.histories.clone();
    let keys: Vec<(usize, u64)> = histories.iter().flat_map(|&h| seeds.iter().map(move |&s| (h, s))).collect();
    cache.ensure(cfg, &keys)?;

    let mut columns: Vec<String> = histories.iter().map(|h| format!("H={h}")).collect();
    columns.push("PID".into());
    let mut jobs: Vec<(usize, usize, u64)> = Vec::new();
    for c in 0..columns.len() {
        for (si, &s) in seeds.iter().enumerate() {
            for k in 0..cfg.study.eval_trials as u64 {
                jobs.push((c, si, eval_seed(s, k)));
            }
        }
    }
    let results: Result<Vec<TrialMetrics>> = jobs
        .par_iter()
        .map(|&(c, si, trial_seed)| {
            let mut t = cfg.clone();
            t.seed = trial_seed;
            t.max_frames = cfg.study.eval_frames;
            let (outcome, stem) = match histories.get(c) {
                Some(&h) => {
                    t.session.history = h;
                    let agent = cache.get(h, seeds[si]).expect("trained above");
                    (run_trial(&t, Policy::Frozen(agent.network()))?, format!("study1_h{h}_seed{}_{trial_seed}", seeds[si]))
                }
                None => (run_trial(&t, Policy::Pid)?, format!("study1_pid_seed{}_{trial_seed}", seeds[si])),
            };
            if let Some(dir) = out {
                outcome.write(dir, &stem)?;
            }
            Ok(outcome.metrics)
        })
        .collect();
    let mut trials = vec![vec![Vec::new(); seeds.len()]; columns.len()];
    for (&(c, si, _), m) in jobs.iter().zip(results?) {
        trials[c][si].push(m);
    }
    let report = Study1Report {
        columns,
        seeds: seeds.to_vec(),
        trials,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        report.write_table(&dir.join("study1_table.csv"))?;
        let all: Vec<TrialMetrics> = report.trials.iter().flatten().flatten().cloned().collect();
        write_summary(&dir.join("study1_trials.csv"), &all)?;
    }
    Ok(report)
}

/// Per-trial metrics of one seed in the adaptation study.
#[derive(Debug, Clone, PartialEq)]
pub struct Study2Curve {
    pub seed: u64,
    pub rl: Vec<TrialMetrics>,
    pub pid: Vec<TrialMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study2Report {
    pub scenario: Scenario,
    pub curves: Vec<Study2Curve>,
}

impl Study2Report {
    /// Per-trial `(mean, std)` across seeds of `f` for the RL or PID arm.
    pub fn curve(&self, rl: bool, f: impl Fn(&TrialMetrics) -> f64) -> Vec<(f64, f64)> {
        let n = self.curves.first().map_or(0, |c| c.rl.len());
        (0..n)
            .map(|k| {
                let v: Vec<f64> = self.curves.iter().map(|c| f(if rl { &c.rl[k] } else { &c.pid[k] })).collect();
                mean_std(&v)
            })
            .collect()
    }

    pub fn write_curve(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(["trial", "controller", "axis", "mean", "std"])?;
        for (label, rl) in [("rl", true), ("pid", false)] {
            let yaw = self.curve(rl, |m| m.immediate_reward_avg_yaw);
            let pitch = self.curve(rl, |m| m.immediate_reward_avg_pitch);
            for (k, (y, p)) in yaw.iter().zip(&pitch).enumerate() {
                w.write_record([k.to_string(), label.into(), "yaw".into(), y.0.to_string(), y.1.to_string()])?;
                w.write_record([k.to_string(), label.into(), "pitch".into(), p.0.to_string(), p.1.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Sequential trials under a changed vehicle: the RL agent keeps learning
/// online from its nominal training, the PID keeps its tuned gains.
pub fn run_study2(cfg: &TrialConfig, scenario: Scenario, seeds: &[u64], cache: &mut AgentCache, out: Option<&Path>) -> Result<Study2Report> {
    let history = cfg.history();
    let keys: Vec<(usize, u64)> = seeds.iter().map(|&s| (history, s)).collect();
    cache.ensure(cfg, &keys)?;
    let jobs: Vec<(u64, Learner)> = seeds.iter().map(|&s| (s, cache.get(history, s).expect("trained above").clone())).collect();
    let curves: Result<Vec<Study2Curve>> = jobs
        .into_par_iter()
        .map(|(seed, mut learner)| {
            let mut curve = Study2Curve { seed, rl: Vec::new(), pid: Vec::new() };
            for k in 0..cfg.study.trials {
                let mut trial = cfg.clone();
                trial.scenario = scenario;
                trial.seed = eval_seed(seed, 100 + k as u64);
                trial.max_frames = cfg.study.trial_frames;
                let rl = run_trial(
                    &trial,
                    Policy::Online {
                        learner: &mut learner,
                        epsilon: cfg.study.online_epsilon,
                    },
                )?;
                let pid = run_trial(&trial, Policy::Pid)?;
                curve.rl.push(rl.metrics);
                curve.pid.push(pid.metrics);
            }
            Ok(curve)
        })
        .collect();
    let report = Study2Report { scenario, curves: curves? };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        report.write_curve(&dir.join(format!("study2_{}_curve.csv", scenario.name())))?;
        let all: Vec<TrialMetrics> = report.curves.iter().flat_map(|c| c.rl.iter().chain(&c.pid)).cloned().collect();
        write_summary(&dir.join(format!("study2_{}_trials.csv", scenario.name())), &all)?;
    }
    Ok(report)
}

/// One arm of the weakened-detector study.
#[derive(Debug, Clone, PartialEq)]
pub struct Study3Arm {
    pub beta: f64,
    /// Greedy evaluation after adaptation, one per seed.
    pub trials: Vec<TrialMetrics>,
}

impl Study3Arm {
    pub fn mean_x_c(&self) -> f64 {
        mean_std(&self.trials.iter().map(|m| m.mean_x_c).collect::<Vec<_>>()).0
    }

    pub fn missed_detection_rate(&self) -> f64 {
        mean_std(&self.trials.iter().map(|m| m.missed_detection_rate).collect::<Vec<_>>()).0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study3Report {
    pub control: Study3Arm,
    pub shaped: Study3Arm,
}

impl Study3Report {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(["beta", "seed", "mean_x_c", "missed_detection_rate", "tracking_length"])?;
        for arm in [&self.control, &self.shaped] {
            for m in &arm.trials {
                w.write_record([
                    arm.beta.to_string(),
                    m.seed.to_string(),
                    m.mean_x_c.to_string(),
                    m.missed_detection_rate.to_string(),
                    m.tracking_length.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Adapt the nominal agent to a detector that is weaker on the left, once
/// with the plain centring reward and once with the confidence bonus, then
/// evaluate both greedily.
pub fn run_study3(cfg: &TrialConfig, seeds: &[u64], beta: f64, cache: &mut AgentCache, out: Option<&Path>) -> Result<Study3Report> {
    let history = cfg.history();
    let keys: Vec<(usize, u64)> = seeds.iter().map(|&s| (history, s)).collect();
    cache.ensure(cfg, &keys)?;
    let mut biased = cfg.clone();
    biased.session.world.vision.field.left_bias_strength = cfg.study.left_bias;
    let arm = |arm_beta: f64| -> Result<Study3Arm> {
        let jobs: Vec<(u64, Learner)> = seeds.iter().map(|&s| (s, cache.get(history, s).expect("trained above").clone())).collect();
        let trials: Result<Vec<TrialMetrics>> = jobs
            .into_par_iter()
            .map(|(seed, mut learner)| {
                let mut t = biased.clone();
                t.session.reward.beta = arm_beta;
                let mut done = 0;
                let mut k = 0;
                while done < cfg.study.finetune_steps {
                    t.seed = eval_seed(seed, 500 + k);
                    t.max_frames = cfg.study.finetune_steps - done;
                    let o = run_trial(
                        &t,
                        Policy::Online {
                            learner: &mut learner,
                            epsilon: cfg.study.online_epsilon,
                        },
                    )?;
                    done += o.metrics.tracking_length;
                    k += 1;
                }
                t.seed = eval_seed(seed, 999);
                t.max_frames = cfg.study.eval_frames;
                Ok(run_trial(&t, Policy::Frozen(learner.network()))?.metrics)
            })
            .collect();
        Ok(Study3Arm { beta: arm_beta, trials: trials? })
    };
    let report = Study3Report {
        control: arm(0.0)?,
        shaped: arm(beta)?,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        report.write(&dir.join("study3_arms.csv"))?;
    }
    Ok(report)
}
