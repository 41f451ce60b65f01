//! Flat `section.key=value` experiment configuration.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::dqn::Optimizer;
use crate::error::{Error, Result};
use crate::pid::PidGains;
use crate::sim::Scenario;

use super::{ControllerKind, TrialConfig};

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

fn set_gain(g: &mut PidGains, field: &str, key: &str, value: &str) -> Result<()> {
    let v = parse(key, value)?;
    match field {
        "kp" => g.kp = v,
        "ki" => g.ki = v,
        "kd" => g.kd = v,
        "integral_limit" => g.integral_limit = v,
        "output_limit" => g.output_limit = v,
        _ => return Err(Error::Config(format!("unknown key '{key}'"))),
    }
    Ok(())
}

impl TrialConfig {
    /// Parse a config file body on top of the defaults.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = TrialConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got '{line}'", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    /// Set one configuration key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.session;
        let w = &mut s.world;
        let hydro = &mut w.vehicle.hydro;
        let t = &mut self.training;
        let unknown = || Err(Error::Config(format!("unknown key '{key}'")));
        let (section, name) = key.split_once('.').ok_or_else(|| Error::Config(format!("key '{key}' lacks a section")))?;
        match (section, name) {
            ("trial", "seed") => self.seed = parse(key, value)?,
            ("trial", "max_frames") => self.max_frames = parse(key, value)?,
            ("trial", "controller") => self.controller = parse(key, value)?,
            ("trial", "scenario") => self.scenario = parse::<Scenario>(key, value)?,
            ("trial", "history") => s.history = parse(key, value)?,
            ("trial", "delay_steps") => w.delay_steps = parse(key, value)?,
            ("trial", "reward_beta") => s.reward.beta = parse(key, value)?,
            ("trial", "dt") => {
                let dt = parse(key, value)?;
                w.dt = dt;
                w.target_motion.dt = dt;
                w.tracker.dt = dt;
            }

            ("hydro", "rho") => hydro.rho = parse(key, value)?,
            ("hydro", "mass") => hydro.mass = parse(key, value)?,
            ("hydro", "g") => hydro.g = parse(key, value)?,
            ("hydro", "b_coef") => hydro.b_coef = parse(key, value)?,
            ("hydro", "v_max") => hydro.v_max = parse(key, value)?,
            ("hydro", "w_max") => hydro.w_max = parse(key, value)?,
            ("hydro", n) if n.len() > 2 && n.as_bytes()[n.len() - 2] == b'_' => {
                let axis = match &n[n.len() - 1..] {
                    "x" => 0,
                    "y" => 1,
                    "z" => 2,
                    _ => return unknown(),
                };
                let v: f64 = parse(key, value)?;
                match &n[..n.len() - 2] {
                    "drag" => hydro.drag_coeffs[axis] = v,
                    "area" => hydro.ref_areas[axis] = v,
                    "damping" => hydro.angular_damping[axis] = v,
                    "inertia" => hydro.inertia[axis] = v,
                    "current" => hydro.current[axis] = v,
                    _ => return unknown(),
                }
            }

            ("vehicle", "k_forward") => w.vehicle.loops.k_forward = parse(key, value)?,
            ("vehicle", "k_yaw") => w.vehicle.loops.k_yaw = parse(key, value)?,
            ("vehicle", "k_pitch") => w.vehicle.loops.k_pitch = parse(key, value)?,
            ("vehicle", "k_roll") => w.vehicle.loops.k_roll = parse(key, value)?,
            ("vehicle", "k_roll_level") => w.vehicle.loops.k_roll_level = parse(key, value)?,
            ("vehicle", "max_force") => w.vehicle.loops.max_force = parse(key, value)?,
            ("vehicle", "max_torque") => w.vehicle.loops.max_torque = parse(key, value)?,
            ("vehicle", "forward_min") => w.vehicle.limits.forward_min = parse(key, value)?,
            ("vehicle", "forward_max") => w.vehicle.limits.forward_max = parse(key, value)?,
            ("vehicle", "rate_max") => w.vehicle.limits.rate_max = parse(key, value)?,
            ("vehicle", "leg_health") => {
                let h: Vec<f64> = parse_list(key, value)?;
                if h.len() != 6 {
                    return Err(Error::Config(format!("{key}: expected 6 values, got {}", h.len())));
                }
                for (leg, v) in h.into_iter().enumerate() {
                    w.vehicle.mixer.set_leg_health(leg, v);
                }
            }

            ("target", "speed_x") => w.target_motion.speed_box.x = parse(key, value)?,
            ("target", "speed_y") => w.target_motion.speed_box.y = parse(key, value)?,
            ("target", "speed_z") => w.target_motion.speed_box.z = parse(key, value)?,
            ("target", "regime_min") => w.target_motion.regime_min = parse(key, value)?,
            ("target", "regime_max") => w.target_motion.regime_max = parse(key, value)?,
            ("target", "moves") => w.target_moves = parse_bool(key, value)?,
            ("target", "initial_range") => w.initial_range = parse(key, value)?,

            ("vision", "hfov_deg") => w.vision.camera.horizontal_fov = parse::<f64>(key, value)?.to_radians(),
            ("vision", "vfov_deg") => w.vision.camera.vertical_fov = parse::<f64>(key, value)?.to_radians(),
            ("vision", "max_range") => w.vision.camera.max_range = parse(key, value)?,
            ("vision", "target_half_width") => w.vision.camera.target_half_width = parse(key, value)?,
            ("vision", "target_half_height") => w.vision.camera.target_half_height = parse(key, value)?,
            ("vision", "base_confidence") => w.vision.field.base_confidence = parse(key, value)?,
            ("vision", "left_bias") => w.vision.field.left_bias_strength = parse(key, value)?,
            ("vision", "confidence_sigma") => w.vision.field.noise_sigma = parse(key, value)?,
            ("vision", "sigma_center") => w.vision.noise.sigma_center = parse(key, value)?,
            ("vision", "sigma_area") => w.vision.noise.sigma_area = parse(key, value)?,
            ("vision", "sigma_aspect") => w.vision.noise.sigma_aspect = parse(key, value)?,
            ("vision", "p_drop") => w.vision.noise.p_drop = parse(key, value)?,

            ("tracker", "q_pos") => w.tracker.q_pos = parse(key, value)?,
            ("tracker", "q_vel") => w.tracker.q_vel = parse(key, value)?,
            ("tracker", "iou_min") => w.tracker.iou_min = parse(key, value)?,
            ("tracker", "max_coast") => w.tracker.max_coast = parse(key, value)?,

            ("pid", "area_ref") => s.gains.area_ref = parse(key, value)?,
            ("pid", n) => {
                let (axis, field) = n.split_once('_').ok_or_else(|| Error::Config(format!("unknown key '{key}'")))?;
                let g = match axis {
                    "yaw" => &mut s.gains.yaw,
                    "pitch" => &mut s.gains.pitch,
                    "forward" => &mut s.gains.forward,
                    _ => return unknown(),
                };
                set_gain(g, field, key, value)?;
            }

            ("agent", "grid_levels") | ("agent", "grid_max") => {
                let (mut k, mut max) = (s.grid.k_yaw(), *s.grid.yaw_levels.last().unwrap_or(&0.5));
                if name == "grid_levels" {
                    k = parse(key, value)?;
                } else {
                    max = parse(key, value)?;
                }
                s.grid = crate::agent::ActionGrid::symmetric(k, max).map_err(|e| Error::Config(e.to_string()))?;
            }
            ("agent", "mu") => s.reward.mu = parse(key, value)?,
            ("agent", "lambda") => s.reward.lambda = parse(key, value)?,
            ("agent", "area_scale") => s.scales.area_max = parse(key, value)?,
            ("agent", "v_scale") => s.scales.v_max = parse(key, value)?,
            ("agent", "rate_scale") => s.scales.rate_max = parse(key, value)?,

            ("dqn", "optimizer") => {
                t.trainer.optimizer = match value {
                    "sgd" => Optimizer::Sgd,
                    "adam" => Optimizer::ADAM,
                    _ => return Err(Error::Config(format!("{key}: expected sgd or adam, got '{value}'"))),
                }
            }
            ("dqn", "eta") => t.trainer.eta = parse(key, value)?,
            ("dqn", "gamma") => t.trainer.gamma = parse(key, value)?,
            ("dqn", "tau") => t.trainer.tau = parse(key, value)?,
            ("dqn", "batch") => t.trainer.batch_size = parse(key, value)?,
            ("dqn", "memory") => t.trainer.memory_size = parse(key, value)?,
            ("dqn", "hidden") => t.hidden = parse_list(key, value)?,

            ("curriculum", "min_prefill") => t.schedule.min_prefill = parse(key, value)?,
            ("curriculum", "decay_steps") => t.schedule.decay_steps = parse(key, value)?,
            ("curriculum", "initial_outer_fraction") => t.schedule.initial_outer_fraction = parse(key, value)?,
            ("curriculum", "random_action_prob") => t.schedule.random_action_prob = parse(key, value)?,
            ("curriculum", "rl_only_steps") => t.rl_only_steps = parse(key, value)?,
            ("curriculum", "epsilon_shared") => t.epsilon_shared = parse(key, value)?,
            ("curriculum", "epsilon_rl") => t.epsilon_rl = parse(key, value)?,
            ("curriculum", "setpoint_range") => s.setpoint_range = parse(key, value)?,
            ("curriculum", "setpoint_period_min") => s.setpoint_period.0 = parse(key, value)?,
            ("curriculum", "setpoint_period_max") => s.setpoint_period.1 = parse(key, value)?,

            ("spiral", "r0") => s.spiral.r0 = parse(key, value)?,
            ("spiral", "growth") => s.spiral.growth = parse(key, value)?,
            ("spiral", "delta") => s.spiral.delta = parse(key, value)?,
            ("spiral", "gain") => s.spiral.gain = parse(key, value)?,
            ("spiral", "max_rate") => s.spiral.max_rate = parse(key, value)?,
            ("spiral", "v_search") => s.spiral.v_search = parse(key, value)?,
            ("spiral", "budget") => s.spiral.budget = parse(key, value)?,

            ("study", "histories") => self.study.histories = parse_list(key, value)?,
            ("study", "eval_trials") => self.study.eval_trials = parse(key, value)?,
            ("study", "eval_frames") => self.study.eval_frames = parse(key, value)?,
            ("study", "trials") => self.study.trials = parse(key, value)?,
            ("study", "trial_frames") => self.study.trial_frames = parse(key, value)?,
            ("study", "online_epsilon") => self.study.online_epsilon = parse(key, value)?,
            ("study", "beta") => self.study.beta = parse(key, value)?,
            ("study", "left_bias") => self.study.left_bias = parse(key, value)?,
            ("study", "finetune_steps") => self.study.finetune_steps = parse(key, value)?,

            ("tune", "frames") => self.tuning.frames = parse(key, value)?,
            ("tune", "seed") => self.tuning.seed = parse(key, value)?,
            ("tune", "kp") => self.tuning.kp = parse_list(key, value)?,
            ("tune", "ki") => self.tuning.ki = parse_list(key, value)?,
            ("tune", "kd") => self.tuning.kd = parse_list(key, value)?,

            _ => return unknown(),
        }
        Ok(())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pid" => Ok(ControllerKind::Pid),
            "rl" => Ok(ControllerKind::Rl),
            "curriculum" => Ok(ControllerKind::Curriculum),
            _ => Err(Error::Config(format!("unknown controller '{s}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let cfg = TrialConfig::parse_str(
            "# comment\nhydro.rho=1025\nhydro.damping_z = 3.5\ntrial.history=10 # trailing\n\
             trial.controller=rl\npid.yaw_kp=2.5\ndqn.hidden=64,32\nvehicle.leg_health=1,1,1,1,1,0\n\
             trial.scenario=right_rear_leg_fault\ntrial.dt=0.05\n",
        )
        .unwrap();
        assert_eq!(cfg.session.world.vehicle.hydro.rho, 1025.0);
        assert_eq!(cfg.session.world.vehicle.hydro.angular_damping.z, 3.5);
        assert_eq!(cfg.session.history, 10);
        assert_eq!(cfg.controller, ControllerKind::Rl);
        assert_eq!(cfg.session.gains.yaw.kp, 2.5);
        assert_eq!(cfg.training.hidden, vec![64, 32]);
        assert_eq!(cfg.session.world.vehicle.mixer.leg_health[5], 0.0);
        assert_eq!(cfg.scenario, Scenario::RightRearLegFault);
        assert_eq!(cfg.session.world.tracker.dt, 0.05);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "hydro.nope=1",
            "nosection=1",
            "hydro.rho",
            "hydro.rho=abc",
            "trial.history=0",
            "trial.max_frames=0",
            "vehicle.leg_health=1,1",
            "hydro.mass=-3",
        ] {
            assert!(TrialConfig::parse_str(bad).is_err(), "{bad}");
        }
    }
}
