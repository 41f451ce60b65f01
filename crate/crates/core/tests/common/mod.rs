//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swimtrack_core::agent::reward;
use swimtrack_core::curriculum::{RecoveryState, SpiralParams};
use swimtrack_core::dqn::{double_dqn_targets, soft_update, Architecture, Experience, QNetwork};
use swimtrack_core::sim::{step_dynamics, DelayLine, RateCommand, RobotState, Vehicle};
use swimtrack_core::tracker::{kf_predict, kf_update, KfModel, Measurement, StateCov, TrackState, MEAS_DIM, STATE_DIM};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest error of the centring reward against its closed form over random points.
pub fn reward_formula_error(samples: usize) -> f64 {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let (x, y): (f64, f64) = (r.random_range(-1.5..1.5), r.random_range(-1.5..1.5));
        let (mu, lambda): (f64, f64) = (r.random_range(0.01..1.0), r.random_range(0.01..1.0));
        let direct = mu / (x.abs() + mu) + lambda / (y.abs() + lambda);
        worst = worst.max((reward(x, y, mu, lambda) - direct).abs());
    }
    worst
}

/// Largest deviation of repeated soft updates toward a fixed network from
/// `θ_c + (1 − τ)ⁿ (θ_t − θ_c)`.
pub fn soft_update_error() -> f64 {
    let arch = Architecture::new(4, vec![6, 5], 3, 3).unwrap();
    let mut r = rng(2);
    let current = QNetwork::init(arch.clone(), &mut r);
    let mut worst = 0.0f64;
    for &tau in &[0.001, 0.01, 0.3] {
        let mut target = QNetwork::init(arch.clone(), &mut r);
        let start = target.params().to_vec();
        for n in 1..=300 {
            soft_update(&mut target, &current, tau).unwrap();
            let k = (1.0 - tau).powi(n);
            for ((t, c), s) in target.params().iter().zip(current.params()).zip(&start) {
                worst = worst.max((t - (c + k * (s - c))).abs());
            }
        }
    }
    worst
}

fn bias_net(q_yaw: &[f64], q_pitch: &[f64]) -> QNetwork {
    let arch = Architecture::new(1, vec![], q_yaw.len(), q_pitch.len()).unwrap();
    let mut p = vec![0.0; q_yaw.len()];
    p.extend_from_slice(q_yaw);
    p.extend(std::iter::repeat_n(0.0, q_pitch.len()));
    p.extend_from_slice(q_pitch);
    QNetwork::from_params(arch, p).unwrap()
}

/// Largest error of the double-Q target on hand-worked cases.
pub fn double_q_error() -> f64 {
    let e = |r: f64, terminal: bool| Experience {
        s: vec![0.0],
        a_yaw: 0,
        a_pitch: 0,
        r,
        s_next: vec![0.0],
        terminal,
    };
    // (current yaw, current pitch, target yaw, target pitch, r, terminal, gamma, expected)
    let cases: [(&[f64], &[f64], &[f64], &[f64], f64, bool, f64, (f64, f64)); 4] = [
        // current picks yaw 1 and pitch 2; 1 + 0.5·3 and 1 + 0.5·(−4)
        (&[0.0, 9.0, 1.0], &[0.0, 1.0, 2.0], &[8.0, 3.0, 7.0], &[5.0, 6.0, -4.0], 1.0, false, 0.5, (2.5, -1.0)),
        // the target's own maximum is ignored
        (&[1.0, 0.0], &[0.0, 1.0], &[0.0, 10.0], &[10.0, 0.0], 0.0, false, 0.99, (0.0, 0.0)),
        // terminal transitions keep only the reward
        (&[1.0, 0.0], &[0.0, 1.0], &[3.0, 3.0], &[3.0, 3.0], -2.0, true, 0.99, (-2.0, -2.0)),
        // 0.25 + 0.9·1.5 and 0.25 + 0.9·(−0.5)
        (&[2.0, 2.0, 1.0], &[-1.0, 0.0], &[1.5, 4.0, 0.0], &[7.0, -0.5], 0.25, false, 0.9, (1.6, -0.2)),
    ];
    let mut worst = 0.0f64;
    for (cy, cp, ty, tp, r, terminal, gamma, want) in cases {
        let exp = e(r, terminal);
        let got = double_dqn_targets(&[&exp], &bias_net(cy, cp), &bias_net(ty, tp), gamma).unwrap()[0];
        worst = worst.max((got.0 - want.0).abs()).max((got.1 - want.1).abs());
    }
    worst
}

/// Worst relative gap between the analytic gradient and central differences
/// over `instances` random networks of about twenty parameters.
pub fn gradient_check(instances: usize) -> f64 {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let input = r.random_range(2..=4);
        let hidden = r.random_range(2..=3);
        let (ky, kp) = (r.random_range(2..=3), r.random_range(2..=3));
        let arch = Architecture::new(input, vec![hidden], ky, kp).unwrap();
        let net = QNetwork::init(arch.clone(), &mut r);
        let batch = r.random_range(1..=4);
        let states: Vec<Vec<f64>> = (0..batch).map(|_| (0..input).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let inputs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        let actions: Vec<(usize, usize)> = (0..batch).map(|_| (r.random_range(0..ky), r.random_range(0..kp))).collect();
        let targets: Vec<(f64, f64)> = (0..batch).map(|_| (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0))).collect();
        let (_, grad) = net.loss_gradient(&inputs, &actions, &targets).unwrap();
        let h = 1e-6;
        for i in 0..arch.param_count() {
            let mut plus = net.clone();
            plus.params_mut()[i] += h;
            let mut minus = net.clone();
            minus.params_mut()[i] -= h;
            let lp = plus.loss_gradient(&inputs, &actions, &targets).unwrap().0;
            let lm = minus.loss_gradient(&inputs, &actions, &targets).unwrap().0;
            let numeric = (lp - lm) / (2.0 * h);
            let scale = grad[i].abs().max(numeric.abs()).max(1e-3);
            worst = worst.max((grad[i] - numeric).abs() / scale);
        }
    }
    worst
}

type Dense = Vec<Vec<f64>>;

fn dense<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> Dense {
    (0..R).map(|i| (0..C).map(|j| m[(i, j)]).collect()).collect()
}

fn mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n).map(|i| (0..m).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
}

fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

fn sub(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
}

fn transpose(a: &Dense) -> Dense {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

fn identity(n: usize) -> Dense {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Gauss-Jordan inverse with partial pivoting.
fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a.iter().zip(identity(n)).map(|(row, id)| row.iter().copied().chain(id).collect()).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                let pivot_row = m[col].clone();
                for (v, p) in m[row].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }
    m.into_iter().map(|row| row[n..].to_vec()).collect()
}

fn column(v: &[f64]) -> Dense {
    v.iter().map(|x| vec![*x]).collect()
}

fn max_gap(a: &Dense, b: &Dense) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn min_eigenvalue(p: &StateCov) -> f64 {
    SymmetricEigen::new(*p).eigenvalues.min()
}

/// Kalman predict/update against a dense reference over random sequences.
/// Returns the largest state or covariance gap and whether every covariance
/// stayed symmetric positive semi-definite.
pub fn kalman_oracle(sequences: usize, steps: usize) -> (f64, bool) {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    let mut psd = true;
    for _ in 0..sequences {
        let r_diag: [f64; MEAS_DIM] = std::array::from_fn(|_| r.random_range(1e-4..1e-1));
        let model = KfModel::constant_velocity(r.random_range(0.01..0.1), r.random_range(1e-5..1e-2), r.random_range(1e-4..1e-1), r_diag);
        let z0 = Measurement::from_fn(|_, _| r.random_range(-1.0..1.0));
        let mut track = TrackState::from_measurement(&z0, &model, r.random_range(0.1..10.0));
        let (f, h, q, rr) = (dense(&model.f), dense(&model.h), dense(&model.q), dense(&model.r));
        let mut x: Dense = column(track.x.as_slice());
        let mut p = dense(&track.p);
        for _ in 0..steps {
            track = kf_predict(&track, &model);
            x = mul(&f, &x);
            p = add(&mul(&mul(&f, &p), &transpose(&f)), &q);
            if r.random_bool(0.8) {
                let z = Measurement::from_fn(|_, _| r.random_range(-1.0..1.0));
                track = kf_update(&track, &z, &model).unwrap();
                let ht = transpose(&h);
                let s = add(&mul(&mul(&h, &p), &ht), &rr);
                let k = mul(&mul(&p, &ht), &inverse(&s));
                let innovation = sub(&column(z.as_slice()), &mul(&h, &x));
                x = add(&x, &mul(&k, &innovation));
                p = mul(&sub(&identity(STATE_DIM), &mul(&k, &h)), &p);
            }
            worst = worst.max(max_gap(&column(track.x.as_slice()), &x)).max(max_gap(&dense(&track.p), &p));
            let asym = (track.p - track.p.transpose()).abs().max();
            psd &= asym == 0.0 && min_eigenvalue(&track.p) >= -1e-12;
        }
    }
    (worst, psd)
}

/// Largest state gap between the open-loop response through a `delay`-step
/// line and the zero-delay response shifted by `delay` steps.
pub fn delay_shift_gap(delay: u64, steps: u64) -> f64 {
    let vehicle = Vehicle::default();
    let dt = 0.04;
    let mut r = rng(5);
    let commands: Vec<RateCommand> = (0..steps)
        .map(|_| RateCommand::new(r.random_range(0.0..1.0), r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)))
        .collect();
    let run = |d: u64| -> Vec<RobotState> {
        let mut line = DelayLine::new(d, RateCommand::NEUTRAL);
        let mut state = RobotState::default();
        let mut out = Vec::new();
        for (t, c) in commands.iter().enumerate() {
            line.push(*c, t as u64).unwrap();
            let applied = line.pop(t as u64).unwrap();
            state = step_dynamics(&state, &applied, &vehicle, dt).unwrap();
            out.push(state.clone());
        }
        out
    };
    let undelayed = run(0);
    let delayed = run(delay);
    let rest = RobotState::default();
    let gap = |a: &RobotState, b: &RobotState| {
        (a.position - b.position)
            .amax()
            .max((a.linear_velocity - b.linear_velocity).amax())
            .max((a.angular_velocity - b.angular_velocity).amax())
            .max((a.orientation.coords - b.orientation.coords).amax())
    };
    let mut worst = 0.0f64;
    for t in 0..steps as usize {
        let reference = if t < delay as usize { &rest } else { &undelayed[t - delay as usize] };
        worst = worst.max(gap(&delayed[t], reference));
    }
    worst
}

/// Share of the disc reached by the spiral after `steps` steps that lies
/// within half of `resolution` of the way-point path.
pub fn spiral_coverage(steps: u64, resolution: f64) -> f64 {
    let params = SpiralParams::default();
    let bearing = (0.3, -0.2);
    let mut rec = RecoveryState::new(bearing, &params);
    let mut path = vec![rec.waypoint()];
    for _ in 0..steps {
        swimtrack_core::curriculum::spiral_search_step(&mut rec, &params, 0.04);
        path.push(rec.waypoint());
    }
    let radius = params.radius_after(steps);
    let seg_dist = |p: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
    };
    let cell = resolution / 5.0;
    let n = (radius / cell).ceil() as i64;
    let (mut inside, mut covered) = (0usize, 0usize);
    for i in -n..=n {
        for j in -n..=n {
            let (u, v) = (i as f64 * cell, j as f64 * cell);
            if u * u + v * v > radius * radius {
                continue;
            }
            inside += 1;
            let p = (bearing.0 + u, bearing.1 + v);
            if path.windows(2).any(|w| seg_dist(p, w[0], w[1]) <= resolution / 2.0) {
                covered += 1;
            }
        }
    }
    covered as f64 / inside as f64
}

/// A trial configuration with a short curriculum and small networks.
pub fn tiny_config() -> swimtrack_core::harness::TrialConfig {
    let mut cfg = swimtrack_core::harness::TrialConfig::default();
    for (k, v) in [
        ("dqn.hidden", "8"),
        ("dqn.batch", "8"),
        ("dqn.memory", "300"),
        ("curriculum.min_prefill", "100"),
        ("curriculum.decay_steps", "300"),
        ("curriculum.rl_only_steps", "100"),
        ("study.eval_frames", "300"),
        ("study.trials", "3"),
        ("study.trial_frames", "100"),
        ("study.finetune_steps", "100"),
        ("tune.frames", "200"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg
}

/// Discounted return-to-go averaged over the trial, straight from the definition.
pub fn mean_return_to_go(rewards: &[f64], gamma: f64) -> f64 {
    let n = rewards.len();
    let mut total = 0.0;
    for t in 0..n {
        total += (t..n).map(|k| gamma.powi((k - t) as i32) * rewards[k]).sum::<f64>();
    }
    total / n as f64
}
