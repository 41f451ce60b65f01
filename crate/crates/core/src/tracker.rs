//! SORT-style single-target tracker.
//!
//! State layout is `[x_c, y_c, a_b, r_b, c_d, ẋ_c, ẏ_c, ȧ_b, ṙ_b, ċ_d]`: box
//! centre, area, aspect ratio and detection confidence, followed by their
//! velocities. The model is constant-velocity and the measurement picks the
//! first five entries.

use std::io::Write;

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::vision::{BBoxObservation, Detection};

pub const STATE_DIM: usize = 10;
pub const MEAS_DIM: usize = 5;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateCov = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type Measurement = SVector<f64, MEAS_DIM>;

#[derive(Debug, Clone, PartialEq)]
pub struct KfModel {
    pub f: StateCov,
    pub h: SMatrix<f64, MEAS_DIM, STATE_DIM>,
    pub q: StateCov,
    pub r: SMatrix<f64, MEAS_DIM, MEAS_DIM>,
}

impl KfModel {
    /// Constant-velocity model with diagonal process and measurement noise.
    pub fn constant_velocity(dt: f64, q_pos: f64, q_vel: f64, r_diag: [f64; MEAS_DIM]) -> Self {
        let mut f = StateCov::identity();
        let mut h = SMatrix::<f64, MEAS_DIM, STATE_DIM>::zeros();
        let mut q = StateCov::zeros();
        let mut r = SMatrix::<f64, MEAS_DIM, MEAS_DIM>::zeros();
        for i in 0..MEAS_DIM {
            f[(i, i + MEAS_DIM)] = dt;
            h[(i, i)] = 1.0;
            q[(i, i)] = q_pos;
            q[(i + MEAS_DIM, i + MEAS_DIM)] = q_vel;
            r[(i, i)] = r_diag[i];
        }
        Self { f, h, q, r }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub x: StateVector,
    pub p: StateCov,
    pub age_since_update: u32,
}

impl TrackState {
    /// Track seeded from a first detection with unknown velocities.
    pub fn from_measurement(z: &Measurement, model: &KfModel, velocity_variance: f64) -> Self {
        let mut x = StateVector::zeros();
        let mut p = StateCov::zeros();
        for i in 0..MEAS_DIM {
            x[i] = z[i];
            p[(i, i)] = model.r[(i, i)];
            p[(i + MEAS_DIM, i + MEAS_DIM)] = velocity_variance;
        }
        Self {
            x,
            p,
            age_since_update: 0,
        }
    }

    pub fn measured_trace(&self) -> f64 {
        (0..MEAS_DIM).map(|i| self.p[(i, i)]).sum()
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_box_state(self.x[0], self.x[1], self.x[2], self.x[3])
    }
}

/// `x ← F x`, `P ← F P Fᵀ + Q`.
pub fn kf_predict(track: &TrackState, model: &KfModel) -> TrackState {
    let p = model.f * track.p * model.f.transpose() + model.q;
    TrackState {
        x: model.f * track.x,
        p: symmetrize(&p),
        age_since_update: track.age_since_update + 1,
    }
}

/// Kalman correction with the simple covariance form `(I − K H) P`, symmetrized.
pub fn kf_update(track: &TrackState, z: &Measurement, model: &KfModel) -> Result<TrackState> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Usage("non-finite measurement".into()));
    }
    let ph_t = track.p * model.h.transpose();
    let s = model.h * ph_t + model.r;
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Numerical("innovation covariance is not positive definite".into()))?;
    // K = P Hᵀ S⁻¹  ⇔  S Kᵀ = H P
    let gain = chol.solve(&ph_t.transpose()).transpose();
    let innovation = z - model.h * track.x;
    let x = track.x + gain * innovation;
    let p = (StateCov::identity() - gain * model.h) * track.p;
    Ok(TrackState {
        x,
        p: symmetrize(&p),
        age_since_update: 0,
    })
}

fn symmetrize(p: &StateCov) -> StateCov {
    (p + p.transpose()) * 0.5
}

/// Axis-aligned box in normalized image coordinates (image spans `[-1, 1]²`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    /// Box from centre, area fraction and width/height ratio.
    pub fn from_box_state(x_c: f64, y_c: f64, area: f64, aspect: f64) -> Self {
        // the normalized image is 2×2, so box area is 4·area
        let area = area.max(0.0);
        let aspect = aspect.max(1e-6);
        Self::new(x_c, y_c, (4.0 * area * aspect).sqrt(), (4.0 * area / aspect).sqrt())
    }

    pub fn from_detection(d: &Detection) -> Self {
        Self::from_box_state(d.x_c, d.y_c, d.area, d.aspect)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = ((a.cx + 0.5 * a.w).min(b.cx + 0.5 * b.w) - (a.cx - 0.5 * a.w).max(b.cx - 0.5 * b.w)).max(0.0);
    let iy = ((a.cy + 0.5 * a.h).min(b.cy + 0.5 * b.h) - (a.cy - 0.5 * a.h).max(b.cy - 0.5 * b.h)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub dt: f64,
    pub q_pos: f64,
    pub q_vel: f64,
    /// Measurement noise variances for `[x_c, y_c, a_b, r_b, c_d]`.
    pub r_diag: [f64; MEAS_DIM],
    pub iou_min: f64,
    /// Consecutive misses after which the track is declared lost.
    pub max_coast: u32,
    pub init_velocity_variance: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            dt: 0.04,
            q_pos: 1e-4,
            q_vel: 1e-2,
            r_diag: [1e-4, 1e-4, 1e-5, 4e-4, 2.5e-3],
            iou_min: 0.1,
            max_coast: 12,
            init_velocity_variance: 1.0,
        }
    }
}

impl TrackerConfig {
    pub fn model(&self) -> KfModel {
        KfModel::constant_velocity(self.dt, self.q_pos, self.q_vel, self.r_diag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    /// Updated by a detection this step.
    Tracking,
    /// Predicted only; the detection was missing or failed the gate.
    Coasting,
    /// No usable track; recovery owns the vehicle.
    Lost,
}

/// Gate a detection against the predicted track.
pub fn associate(track: &TrackState, obs: &BBoxObservation, iou_min: f64) -> bool {
    match obs.detection() {
        Some(d) => iou(&track.bbox(), &BBox::from_detection(d)) >= iou_min,
        None => false,
    }
}

/// Single-target tracker: predict, gate, update or coast, declare loss.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    model: KfModel,
    track: Option<TrackState>,
    misses: u32,
    status: TrackStatus,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Self {
        let model = cfg.model();
        Self {
            cfg,
            model,
            track: None,
            misses: 0,
            status: TrackStatus::Lost,
        }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn status(&self) -> TrackStatus {
        self.status
    }

    pub fn is_lost(&self) -> bool {
        self.status == TrackStatus::Lost
    }

    /// Latest estimate; after a loss this is the last estimate before it.
    pub fn track(&self) -> Option<&TrackState> {
        self.track.as_ref()
    }

    pub fn step(&mut self, obs: &BBoxObservation) -> Result<TrackStatus> {
        let detection = obs.detection().map(|d| Measurement::from_row_slice(&d.as_measurement()));
        if self.status == TrackStatus::Lost {
            // reacquire on any detection
            if let Some(z) = detection {
                self.track = Some(TrackState::from_measurement(&z, &self.model, self.cfg.init_velocity_variance));
                self.misses = 0;
                self.status = TrackStatus::Tracking;
            }
            return Ok(self.status);
        }
        let current = self.track.as_ref().expect("tracked status implies a track");
        let predicted = kf_predict(current, &self.model);
        match detection {
            Some(z) if associate(&predicted, obs, self.cfg.iou_min) => {
                self.track = Some(kf_update(&predicted, &z, &self.model)?);
                self.misses = 0;
                self.status = TrackStatus::Tracking;
            }
            _ => {
                self.misses += 1;
                if self.misses >= self.cfg.max_coast {
                    self.status = TrackStatus::Lost;
                    // keep the last corrected estimate as the best bearing guess
                } else {
                    self.track = Some(predicted);
                    self.status = TrackStatus::Coasting;
                }
            }
        }
        Ok(self.status)
    }
}

/// Writer for the per-step track log.
pub struct TrackLogWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TrackLogWriter<W> {
    pub const HEADER: [&'static str; 18] = [
        "step", "z_x_c", "z_y_c", "z_area", "z_aspect", "z_conf", "x_c", "y_c", "area", "aspect", "conf", "vx_c",
        "vy_c", "v_area", "v_aspect", "v_conf", "trace_p", "lost",
    ];

    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(Self::HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, step: u64, obs: &BBoxObservation, tracker: &Tracker) -> Result<()> {
        let mut row = Vec::with_capacity(Self::HEADER.len());
        row.push(step.to_string());
        match obs.detection() {
            Some(d) => row.extend(d.as_measurement().iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n("MISS".to_string(), MEAS_DIM)),
        }
        match tracker.track() {
            Some(t) => {
                row.extend(t.x.iter().map(|v| v.to_string()));
                row.push(t.p.trace().to_string());
            }
            None => row.extend(std::iter::repeat_n(String::new(), STATE_DIM + 1)),
        }
        row.push(u8::from(tracker.is_lost()).to_string());
        self.inner.write_record(&row)?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}
