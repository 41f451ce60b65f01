use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use swimtrack_core::curriculum::{CurriculumTrainer, Stage};
use swimtrack_core::dqn::{load_checkpoint, save_checkpoint, Checkpoint};
use swimtrack_core::harness::{
    emit_plots, metrics_from_log, read_step_log, run_study1, run_study2, run_study3, run_trial, tune_pid,
    write_step_log, write_summary_to, AgentCache, ControllerKind, LogRow, Policy, TrialConfig,
};
use swimtrack_core::sim::Scenario;

#[derive(Parser)]
#[command(name = "swimtrack", about = "Visual target tracking experiments for a simulated swimming robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<TrialConfig> {
        let mut cfg = match &self.config {
            Some(p) => TrialConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => TrialConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("override `{kv}` is not key=value"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Auto,
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial, or a study when `--study` is given.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        study: Option<u8>,
        /// Number of seeds for a study (seeds 1..=N).
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Checkpoint driving an `rl` trial.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Skip PID gain tuning before a study.
        #[arg(long)]
        no_tune: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-search the PID gains and print them as config lines.
    TunePid {
        #[command(flatten)]
        config: ConfigArgs,
        /// Where to write the score of every candidate.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train an agent through the curriculum, stopping after the given stage.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value = "auto")]
        stage: StageArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute the summary metrics of a per-step log.
    Replay {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        log: PathBuf,
    },
    /// Render plots for every CSV in a results directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn tuned(mut cfg: TrialConfig, out: &Path) -> Result<TrialConfig> {
    cfg.session.gains = tune_pid(&cfg, Some(&out.join("pid_tuning.csv")))?;
    Ok(cfg)
}

fn run(cfg: TrialConfig, study: Option<u8>, seeds: u64, checkpoint: Option<PathBuf>, no_tune: bool, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let seed_list: Vec<u64> = (1..=seeds).collect();
    let mut cache = AgentCache::new();
    let cfg = match (study, no_tune) {
        (Some(_), false) => tuned(cfg, out)?,
        _ => cfg,
    };
    match study {
        None => {
            let loaded;
            let policy = match cfg.controller {
                ControllerKind::Pid => Policy::Pid,
                ControllerKind::Curriculum => Policy::Curriculum,
                ControllerKind::Rl => {
                    let path = checkpoint.context("an rl trial needs --checkpoint")?;
                    loaded = load_checkpoint(&path)?;
                    if loaded.history != cfg.history() {
                        bail!("checkpoint history {} differs from trial.history {}", loaded.history, cfg.history());
                    }
                    Policy::Frozen(&loaded.network)
                }
            };
            let o = run_trial(&cfg, policy)?;
            let stem = format!("trial_{}_seed{}", cfg.controller, cfg.seed);
            o.write(out, &stem)?;
            println!("{stem}: tracking length {} lost events {}", o.metrics.tracking_length, o.metrics.lost_events);
        }
        Some(1) => {
            let r = run_study1(&cfg, &seed_list, &mut cache, Some(out))?;
            for (c, label) in r.columns.iter().enumerate() {
                let (m, s) = r.cell(2, c);
                println!("{label}: tracking length {m:.1} ± {s:.1}");
            }
        }
        Some(2) => {
            for sc in [Scenario::HighDampingNegativeBuoyancy, Scenario::RightRearLegFault] {
                let r = run_study2(&cfg, sc, &seed_list, &mut cache, Some(out))?;
                let last = |rl| r.curve(rl, |m| m.immediate_reward_avg_yaw).last().map_or(0.0, |c| c.0);
                println!("{}: final yaw reward rl {:.3} pid {:.3}", sc.name(), last(true), last(false));
            }
        }
        Some(_) => {
            let r = run_study3(&cfg, &seed_list, cfg.study.beta, &mut cache, Some(out))?;
            for arm in [&r.control, &r.shaped] {
                println!("beta {}: mean x_c {:.4} missed detections {:.4}", arm.beta, arm.mean_x_c(), arm.missed_detection_rate());
            }
        }
    }
    Ok(())
}

fn train(cfg: TrialConfig, stage: StageArg, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut trainer = CurriculumTrainer::new(cfg.effective_session(), cfg.training.clone(), cfg.seed)?;
    let last = match stage {
        StageArg::One => Some(Stage::PidExplore),
        StageArg::Two => Some(Stage::SharedControl),
        StageArg::Three | StageArg::Auto => None,
    };
    let mut rows = Vec::new();
    trainer.run_while(
        |t| match last {
            Some(s) => t.stage().stage <= s,
            None => !t.finished(),
        },
        |r| {
            rows.push(LogRow::from(r));
            Ok(())
        },
    )?;
    write_step_log(&out.join("train_steps.csv"), &rows)?;
    save_checkpoint(
        &out.join("agent.ckpt"),
        &Checkpoint {
            network: trainer.learner.network().clone(),
            history: cfg.history(),
        },
    )?;
    println!("trained {} steps, ended in stage {}", rows.len(), trainer.stage().stage);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            study,
            seeds,
            checkpoint,
            no_tune,
            out,
        } => run(config.load()?, study, seeds, checkpoint, no_tune, &out),
        Command::TunePid { config, out } => {
            let cfg = config.load()?;
            let g = tune_pid(&cfg, out.as_deref())?;
            for (axis, p) in [("yaw", g.yaw), ("pitch", g.pitch)] {
                println!("pid.{axis}_kp={}\npid.{axis}_ki={}\npid.{axis}_kd={}", p.kp, p.ki, p.kd);
            }
            Ok(())
        }
        Command::Train { config, stage, out } => train(config.load()?, stage, &out),
        Command::Replay { config, log } => {
            let cfg = config.load()?;
            let rows = read_step_log(&log)?;
            let controller = rows.first().map_or("pid".to_string(), |r| r.controller.name().to_string());
            let m = metrics_from_log(&rows, &cfg, &controller);
            write_summary_to(std::io::stdout().lock(), &[m])?;
            Ok(())
        }
        Command::Plot { input } => {
            let (written, failures) = emit_plots(&input)?;
            for p in &written {
                println!("wrote {}", p.display());
            }
            for f in &failures {
                eprintln!("plot failed: {f}");
            }
            Ok(())
        }
    }
}
