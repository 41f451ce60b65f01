//! CSV persistence: per-step logs, trajectories and trial summaries.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::curriculum::ControlSource;
use crate::error::{Error, Result};
use crate::session::StepRecord;
use crate::world::World;

use super::TrialMetrics;

pub const STEP_HEADER: [&str; 15] = [
    "step",
    "stage",
    "controller",
    "x_c",
    "y_c",
    "area",
    "conf",
    "detected",
    "yaw_cmd",
    "pitch_cmd",
    "v_cmd",
    "reward",
    "lost_flag",
    "terminal",
    "outer_fraction",
];

/// One row of the per-step log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: u64,
    /// Curriculum stage name, or `none` outside training.
    pub stage: String,
    pub controller: ControlSource,
    pub x_c: f64,
    pub y_c: f64,
    pub area: f64,
    pub conf: f64,
    pub detected: bool,
    pub yaw_cmd: f64,
    pub pitch_cmd: f64,
    pub v_cmd: f64,
    pub reward: f64,
    pub lost: bool,
    pub terminal: bool,
    pub outer_fraction: f64,
}

impl From<&StepRecord> for LogRow {
    fn from(r: &StepRecord) -> Self {
        Self {
            step: r.step,
            stage: r.stage.map_or("none", |s| s.name()).to_string(),
            controller: r.source,
            x_c: r.x_c,
            y_c: r.y_c,
            area: r.area,
            conf: r.confidence,
            detected: r.detected,
            yaw_cmd: r.command.yaw_rate,
            pitch_cmd: r.command.pitch_rate,
            v_cmd: r.command.forward_velocity,
            reward: r.reward,
            lost: r.lost,
            terminal: r.terminal,
            outer_fraction: r.outer_fraction,
        }
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize) -> Result<&'a str> {
    rec.get(i).ok_or_else(|| Error::Config(format!("log row has no column {i}")))
}

fn num<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let s = field(rec, i)?;
    s.parse().map_err(|_| Error::Config(format!("column {}: cannot parse '{s}'", STEP_HEADER.get(i).unwrap_or(&"?"))))
}

fn bool_field(rec: &csv::StringRecord, i: usize) -> Result<bool> {
    match field(rec, i)? {
        "0" => Ok(false),
        "1" => Ok(true),
        s => Err(Error::Config(format!("column {}: expected 0 or 1, got '{s}'", STEP_HEADER[i]))),
    }
}

impl LogRow {
    /// Fields in header order; floats use the shortest exact representation.
    pub fn fields(&self) -> [String; 15] {
        [
            self.step.to_string(),
            self.stage.clone(),
            self.controller.name().to_string(),
            self.x_c.to_string(),
            self.y_c.to_string(),
            self.area.to_string(),
            self.conf.to_string(),
            flag(self.detected).to_string(),
            self.yaw_cmd.to_string(),
            self.pitch_cmd.to_string(),
            self.v_cmd.to_string(),
            self.reward.to_string(),
            flag(self.lost).to_string(),
            flag(self.terminal).to_string(),
            self.outer_fraction.to_string(),
        ]
    }

    pub fn parse(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != STEP_HEADER.len() {
            return Err(Error::Config(format!("log row has {} columns, expected {}", rec.len(), STEP_HEADER.len())));
        }
        Ok(Self {
            step: num(rec, 0)?,
            stage: field(rec, 1)?.to_string(),
            controller: field(rec, 2)?.parse()?,
            x_c: num(rec, 3)?,
            y_c: num(rec, 4)?,
            area: num(rec, 5)?,
            conf: num(rec, 6)?,
            detected: bool_field(rec, 7)?,
            yaw_cmd: num(rec, 8)?,
            pitch_cmd: num(rec, 9)?,
            v_cmd: num(rec, 10)?,
            reward: num(rec, 11)?,
            lost: bool_field(rec, 12)?,
            terminal: bool_field(rec, 13)?,
            outer_fraction: num(rec, 14)?,
        })
    }
}

pub fn write_step_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(STEP_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_step_log(path: &Path) -> Result<Vec<LogRow>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(STEP_HEADER) {
        return Err(Error::Config(format!("{} does not have the per-step log header", path.display())));
    }
    r.records().map(|rec| LogRow::parse(&rec?)).collect()
}

/// Robot and target positions at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: u64,
    pub robot: [f64; 3],
    pub target: [f64; 3],
}

impl TrajectoryRow {
    pub fn capture(step: u64, world: &World) -> Self {
        let p = &world.robot.position;
        let t = &world.target.position;
        Self {
            step,
            robot: [p.x, p.y, p.z],
            target: [t.x, t.y, t.z],
        }
    }
}

pub const TRAJECTORY_HEADER: [&str; 7] = ["step", "robot_x", "robot_y", "robot_z", "target_x", "target_y", "target_z"];

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        let mut rec = vec![r.step.to_string()];
        rec.extend(r.robot.iter().chain(&r.target).map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let v = |i: usize| -> Result<f64> { num(&rec, i) };
            Ok(TrajectoryRow {
                step: num(&rec, 0)?,
                robot: [v(1)?, v(2)?, v(3)?],
                target: [v(4)?, v(5)?, v(6)?],
            })
        })
        .collect()
}

pub const SUMMARY_HEADER: [&str; 16] = [
    "seed",
    "controller",
    "history",
    "delay_steps",
    "scenario",
    "tracking_length",
    "expected_cumulative_reward_yaw",
    "expected_cumulative_reward_pitch",
    "immediate_reward_avg_yaw",
    "immediate_reward_avg_pitch",
    "lost_events",
    "lost_frames",
    "missed_detection_rate",
    "mean_x_c",
    "pitch_error_var",
    "terminated",
];

pub fn write_summary(path: &Path, metrics: &[TrialMetrics]) -> Result<()> {
    write_summary_to(BufWriter::new(File::create(path)?), metrics)
}

pub fn write_summary_to<W: std::io::Write>(out: W, metrics: &[TrialMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for m in metrics {
        w.write_record([
            m.seed.to_string(),
            m.controller.clone(),
            m.history.to_string(),
            m.delay_steps.to_string(),
            m.scenario.clone(),
            m.tracking_length.to_string(),
            m.expected_cumulative_reward_yaw.to_string(),
            m.expected_cumulative_reward_pitch.to_string(),
            m.immediate_reward_avg_yaw.to_string(),
            m.immediate_reward_avg_pitch.to_string(),
            m.lost_events.to_string(),
            m.lost_frames.to_string(),
            m.missed_detection_rate.to_string(),
            m.mean_x_c.to_string(),
            m.pitch_error_var.to_string(),
            flag(m.terminated).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<TrialMetrics>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let f = |i: usize| -> Result<f64> {
                let s = field(&rec, i)?;
                s.parse().map_err(|_| Error::Config(format!("summary column {}: cannot parse '{s}'", SUMMARY_HEADER[i])))
            };
            let u = |i: usize| -> Result<u64> {
                let s = field(&rec, i)?;
                s.parse().map_err(|_| Error::Config(format!("summary column {}: cannot parse '{s}'", SUMMARY_HEADER[i])))
            };
            Ok(TrialMetrics {
                seed: u(0)?,
                controller: field(&rec, 1)?.to_string(),
                history: u(2)? as usize,
                delay_steps: u(3)?,
                scenario: field(&rec, 4)?.to_string(),
                tracking_length: u(5)?,
                expected_cumulative_reward_yaw: f(6)?,
                expected_cumulative_reward_pitch: f(7)?,
                immediate_reward_avg_yaw: f(8)?,
                immediate_reward_avg_pitch: f(9)?,
                lost_events: u(10)?,
                lost_frames: u(11)?,
                missed_detection_rate: f(12)?,
                mean_x_c: f(13)?,
                pitch_error_var: f(14)?,
                terminated: u(15)? == 1,
            })
        })
        .collect()
}
