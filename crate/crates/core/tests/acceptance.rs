//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_CRITERIA=1,2,9` restricts the run. Criteria 5 to 8 are
//! statistical outcomes of training; their verdicts are always printed, and
//! they only fail the process when `ACCEPTANCE_STRICT=1`.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::time::Instant;

use swimtrack_core::curriculum::{in_outer_region, ControlSource};
use swimtrack_core::dqn::{load_checkpoint, save_checkpoint, Checkpoint};
use swimtrack_core::harness::{
    read_step_log, run_study1, run_study2, run_study3, run_trial, sign_test_p, tune_pid, AgentCache, Policy, Study2Report, TrialConfig,
    TrialMetrics,
};
use swimtrack_core::sim::Scenario;

const RELATIVE_GRADIENT_TOL: f64 = 1e-5;
const KERNEL_TOL: f64 = 1e-12;
const DOUBLE_Q_TOL: f64 = 1e-9;
const KALMAN_TOL: f64 = 1e-9;
const SIGN_TEST_ALPHA: f64 = 0.1;
/// Largest drop between consecutive trial-block means still read as non-decreasing.
const BLOCK_DROP_TOL: f64 = 0.01;
const STUDY2_BLOCKS: usize = 3;

const ABLATION_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const ADAPTATION_SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
const SHAPING_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Verdict {
    id: u32,
    statistical: bool,
    pass: bool,
    detail: String,
}

struct Suite {
    selected: Option<BTreeSet<u32>>,
    verdicts: Vec<Verdict>,
    cfg: Option<TrialConfig>,
    cache: AgentCache,
}

impl Suite {
    fn wants(&self, id: u32) -> bool {
        self.selected.as_ref().is_none_or(|s| s.contains(&id))
    }

    fn record(&mut self, id: u32, name: &str, statistical: bool, pass: bool, detail: String, started: Instant) {
        println!(
            "criterion {id:>2} {} {name}: {detail} [{:.0?}]",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed()
        );
        self.verdicts.push(Verdict {
            id,
            statistical,
            pass,
            detail,
        });
    }

    /// Study configuration with tuned PID gains, computed once.
    fn config(&mut self) -> TrialConfig {
        if self.cfg.is_none() {
            let mut cfg = TrialConfig::default();
            cfg.session.gains = tune_pid(&cfg, None).expect("PID tuning");
            let g = &cfg.session.gains;
            println!(
                "tuned PID gains: yaw kp {} ki {} kd {}, pitch kp {} ki {} kd {}",
                g.yaw.kp, g.yaw.ki, g.yaw.kd, g.pitch.kp, g.pitch.ki, g.pitch.kd
            );
            self.cfg = Some(cfg);
        }
        self.cfg.clone().unwrap()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// One-sided sign test that `a` beats `b` pairwise; ties are dropped.
fn sign_test(a: &[f64], b: &[f64]) -> (usize, usize, f64) {
    let wins = a.iter().zip(b).filter(|(x, y)| x > y).count();
    let n = a.iter().zip(b).filter(|(x, y)| x != y).count();
    (wins, n, if n == 0 { 1.0 } else { sign_test_p(wins, n) })
}

fn immediate(m: &TrialMetrics) -> f64 {
    0.5 * (m.immediate_reward_avg_yaw + m.immediate_reward_avg_pitch)
}

/// Means over consecutive blocks of sequential trials, averaged across seeds.
fn block_means(report: &Study2Report, rl: bool, f: impl Fn(&TrialMetrics) -> f64) -> Vec<f64> {
    let curve: Vec<f64> = report.curve(rl, f).into_iter().map(|c| c.0).collect();
    let size = curve.len() / STUDY2_BLOCKS;
    curve.chunks(size).take(STUDY2_BLOCKS).map(mean).collect()
}

/// Least-squares slope of the PID curve and its 95% half-width.
fn slope_ci(report: &Study2Report) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = report
        .curves
        .iter()
        .flat_map(|c| c.pid.iter().enumerate().map(|(k, m)| (k as f64, immediate(m))))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let resid: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let se = (resid / (n - 2.0) / sxx).sqrt();
    (slope, 1.96 * se)
}

fn main() {
    let selected = std::env::var("ACCEPTANCE_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect::<BTreeSet<u32>>());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut suite = Suite {
        selected,
        verdicts: Vec::new(),
        cfg: None,
        cache: AgentCache::new(),
    };

    if suite.wants(1) {
        let t = Instant::now();
        let (r, s, d) = (common::reward_formula_error(100_000), common::soft_update_error(), common::double_q_error());
        let pass = r <= KERNEL_TOL && s <= KERNEL_TOL && d <= DOUBLE_Q_TOL;
        suite.record(1, "numerical kernels", false, pass, format!("reward gap {r:.1e}, soft update gap {s:.1e}, double-Q gap {d:.1e}"), t);
    }

    if suite.wants(2) {
        let t = Instant::now();
        let worst = common::gradient_check(200);
        suite.record(2, "gradient check", false, worst <= RELATIVE_GRADIENT_TOL, format!("200 networks, worst relative gap {worst:.2e}"), t);
    }

    if suite.wants(3) {
        let t = Instant::now();
        let (gap, psd) = common::kalman_oracle(1000, 30);
        suite.record(3, "Kalman oracle", false, gap <= KALMAN_TOL && psd, format!("1000 sequences, worst gap {gap:.2e}, symmetric PSD {psd}"), t);
    }

    if suite.wants(4) {
        let t = Instant::now();
        let gaps: Vec<f64> = [1, 5, 10, 20].iter().map(|&d| common::delay_shift_gap(d, 600)).collect();
        let worst = gaps.iter().copied().fold(0.0, f64::max);
        suite.record(4, "delay line", false, worst == 0.0, format!("delays 1/5/10/20 over 600 steps, largest gap {worst:e}"), t);
    }

    if suite.wants(5) || suite.wants(6) {
        let t = Instant::now();
        let mut cfg = suite.config();
        cfg.study.histories = vec![5, 10, 20];
        let report = run_study1(&cfg, &ABLATION_SEEDS, &mut suite.cache, None).expect("study 1");
        let tracking = |label: &str| report.seed_means(2, report.column(label).unwrap());
        let (h5, h10, h20, pid) = (tracking("H=5"), tracking("H=10"), tracking("H=20"), tracking("PID"));
        for (label, v) in [("H=5", &h5), ("H=10", &h10), ("H=20", &h20), ("PID", &pid)] {
            let c = report.column(label).unwrap();
            println!(
                "  {label:>4}: tracking length per seed {:?}, immediate reward yaw {:.3} pitch {:.3}",
                v.iter().map(|x| x.round()).collect::<Vec<_>>(),
                report.cell(3, c).0,
                report.cell(4, c).0
            );
        }
        if suite.wants(5) {
            let (w5, n5, p5) = sign_test(&h20, &h5);
            let (w10, n10, p10) = sign_test(&h20, &h10);
            let pass = mean(&h20) > mean(&h5) && mean(&h20) > mean(&h10) && p5 < SIGN_TEST_ALPHA && p10 < SIGN_TEST_ALPHA;
            let detail = format!(
                "mean tracking length H=20 {:.0}, H=10 {:.0}, H=5 {:.0}; H=20 beats H=5 in {w5}/{n5} (p {p5:.3}), H=10 in {w10}/{n10} (p {p10:.3})",
                mean(&h20),
                mean(&h10),
                mean(&h5)
            );
            suite.record(5, "history ablation", true, pass, detail, t);
        }
        if suite.wants(6) {
            let (w, n, p) = sign_test(&h20, &pid);
            let c20 = report.column("H=20").unwrap();
            let cp = report.column("PID").unwrap();
            let detail = format!(
                "mean tracking length RL {:.0} vs PID {:.0} (RL ahead in {w}/{n} seeds, p {p:.3}); immediate reward RL {:.3} vs PID {:.3}",
                mean(&h20),
                mean(&pid),
                0.5 * (report.cell(3, c20).0 + report.cell(4, c20).0),
                0.5 * (report.cell(3, cp).0 + report.cell(4, cp).0)
            );
            suite.record(6, "RL vs PID tracking length", true, mean(&h20) > mean(&pid), detail, t);
        }
    }

    if suite.wants(7) {
        let t = Instant::now();
        let cfg = suite.config();
        let fault = run_study2(&cfg, Scenario::RightRearLegFault, &ADAPTATION_SEEDS, &mut suite.cache, None).expect("study 2 fault");
        let damping = run_study2(&cfg, Scenario::HighDampingNegativeBuoyancy, &ADAPTATION_SEEDS, &mut suite.cache, None).expect("study 2 damping");
        let rl_blocks = block_means(&fault, true, immediate);
        let pid_mean = mean(&fault.curve(false, immediate).into_iter().map(|c| c.0).collect::<Vec<_>>());
        let non_decreasing = rl_blocks.windows(2).all(|w| w[1] >= w[0] - BLOCK_DROP_TOL);
        let ends_above = *rl_blocks.last().unwrap() > pid_mean;
        let rl_var = *block_means(&damping, true, |m| m.pitch_error_var).last().unwrap();
        let pid_var = *block_means(&damping, false, |m| m.pitch_error_var).last().unwrap();
        let (slope, half) = slope_ci(&fault);
        println!(
            "  leg fault yaw reward per trial: RL {:?}",
            fault.curve(true, |m| m.immediate_reward_avg_yaw).iter().map(|c| (c.0 * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
        println!(
            "  leg fault yaw reward per trial: PID {:?}",
            fault.curve(false, |m| m.immediate_reward_avg_yaw).iter().map(|c| (c.0 * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
        println!("  PID reward slope per trial {slope:.5} ± {half:.5} (95%)");
        let detail = format!(
            "leg fault: RL block means {:?} vs PID {pid_mean:.3} (non-decreasing {non_decreasing}, ends above {ends_above}); damping: final pitch error variance PID {pid_var:.4} vs RL {rl_var:.4}",
            rl_blocks.iter().map(|b| (b * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
        suite.record(7, "fault adaptation", true, non_decreasing && ends_above && pid_var > rl_var, detail, t);
    }

    if suite.wants(8) {
        let t = Instant::now();
        let cfg = suite.config();
        let beta = cfg.study.beta;
        let report = run_study3(&cfg, &SHAPING_SEEDS, beta, &mut suite.cache, None).expect("study 3");
        let (c, s) = (&report.control, &report.shaped);
        let pass = s.mean_x_c() >= 0.0 && s.missed_detection_rate() < c.missed_detection_rate();
        let detail = format!(
            "beta {beta}: mean x_c {:.4}, missed {:.4}; beta 0: mean x_c {:.4}, missed {:.4}",
            s.mean_x_c(),
            s.missed_detection_rate(),
            c.mean_x_c(),
            c.missed_detection_rate()
        );
        suite.record(8, "confidence shaping", true, pass, detail, t);
    }

    if suite.wants(9) {
        let t = Instant::now();
        let cfg = suite.config();
        let dir = tempfile::tempdir().unwrap();
        let (mut shielded, mut violations, mut rows_total) = (0usize, 0usize, 0usize);
        for seed in [101, 102] {
            let mut trial = cfg.clone();
            trial.seed = seed;
            trial.max_frames = cfg.training.total_steps();
            run_trial(&trial, Policy::Curriculum).unwrap().write(dir.path(), &format!("curriculum{seed}")).unwrap();
            let rows = read_step_log(&dir.path().join(format!("curriculum{seed}_steps.csv"))).unwrap();
            rows_total += rows.len();
            for r in rows.iter().filter(|r| r.stage == "shared_control" && !r.lost) {
                if in_outer_region(r.x_c, r.y_c, r.outer_fraction) {
                    shielded += 1;
                    if r.controller == ControlSource::Rl {
                        violations += 1;
                    }
                }
            }
        }
        let detail = format!("{rows_total} logged curriculum steps, {shielded} in the outer region, {violations} raw RL commands there");
        suite.record(9, "safety shield", false, violations == 0 && shielded > 0, detail, t);
    }

    if suite.wants(10) {
        let t = Instant::now();
        let cfg = suite.config();
        let dir = tempfile::tempdir().unwrap();
        let mut trial = cfg.clone();
        trial.seed = 77;
        trial.max_frames = 5000;
        let mut identical = true;
        let learner = match suite.cache.get(20, 1) {
            Some(l) => l.clone(),
            None => {
                let mut small = common::tiny_config();
                small.session.gains = cfg.session.gains;
                swimtrack_core::harness::train_agent(&small, 20, 1).unwrap()
            }
        };
        let net = learner.network();
        for (name, policy) in [("pid", 0), ("rl", 1)] {
            for copy in ["a", "b"] {
                let p = if policy == 0 { Policy::Pid } else { Policy::Frozen(net) };
                run_trial(&trial, p).unwrap().write(dir.path(), &format!("{name}_{copy}")).unwrap();
            }
            let read = |c: &str| fs::read(dir.path().join(format!("{name}_{c}_summary.csv"))).unwrap();
            identical &= read("a") == read("b");
        }
        let path = dir.path().join("agent.ckpt");
        save_checkpoint(
            &path,
            &Checkpoint {
                network: net.clone(),
                history: 20,
            },
        )
        .unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let mut rng = common::rng(10);
        let mut bit_exact = loaded.history == 20 && loaded.network.params() == net.params();
        for _ in 0..100 {
            let s: Vec<f64> = (0..net.architecture().input).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
            let (a, b) = (net.forward(&s).unwrap(), loaded.network.forward(&s).unwrap());
            bit_exact &= a.0.iter().chain(&a.1).zip(b.0.iter().chain(&b.1)).all(|(x, y)| x.to_bits() == y.to_bits());
        }
        suite.record(
            10,
            "determinism and persistence",
            false,
            identical && bit_exact,
            format!("summary CSVs identical {identical}, checkpoint forward bit-exact {bit_exact}"),
            t,
        );
    }

    let failed: Vec<&Verdict> = suite.verdicts.iter().filter(|v| !v.pass).collect();
    let passed = suite.verdicts.len() - failed.len();
    println!("acceptance: {passed}/{} criteria passed", suite.verdicts.len());
    if let Ok(dir) = std::env::var("CARGO_TARGET_TMPDIR") {
        let text: String = suite
            .verdicts
            .iter()
            .map(|v| format!("{} {} {}\n", v.id, if v.pass { "PASS" } else { "FAIL" }, v.detail))
            .collect();
        let _ = fs::write(std::path::Path::new(&dir).join("acceptance.txt"), text);
    }
    let blocking = failed.iter().any(|v| !v.statistical || strict);
    if blocking {
        std::process::exit(1);
    }
}
