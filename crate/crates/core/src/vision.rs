//! Synthetic detector: projects the target into the robot camera and emits a
//! noisy normalized bounding box with a spatially varying confidence.
//!
//! Image coordinates are normalized with the origin at the image centre:
//! `x_c` grows to the right, `y_c` grows upward, both in `[-1, 1]` at the
//! frame edge. `area` is the box area as a fraction of the image.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::sim::{RobotState, TargetState};

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub horizontal_fov: f64,
    pub vertical_fov: f64,
    /// Targets farther than this are never detected (m).
    pub max_range: f64,
    /// Half extents of the target ellipsoid seen by the camera (width, height) in m.
    pub target_half_width: f64,
    pub target_half_height: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            horizontal_fov: 80f64.to_radians(),
            vertical_fov: 60f64.to_radians(),
            max_range: 8.0,
            target_half_width: 0.25,
            target_half_height: 0.35,
        }
    }
}

/// Detection confidence as a function of image position.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceField {
    pub base_confidence: f64,
    /// Confidence lost per unit of leftward offset (`x_c < 0`).
    pub left_bias_strength: f64,
    pub noise_sigma: f64,
}

impl Default for ConfidenceField {
    fn default() -> Self {
        Self {
            base_confidence: 0.9,
            left_bias_strength: 0.0,
            noise_sigma: 0.05,
        }
    }
}

impl ConfidenceField {
    /// Confidence at `x_c` for a given standard-normal noise draw.
    pub fn evaluate(&self, x_c: f64, noise: f64) -> f64 {
        (self.base_confidence - self.left_bias_strength * (-x_c).max(0.0) + self.noise_sigma * noise).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisionNoise {
    pub sigma_center: f64,
    /// Relative standard deviation of the box area.
    pub sigma_area: f64,
    pub sigma_aspect: f64,
    /// Scale of the confidence-coupled dropout: `P(miss) = (1 − c)·p_drop`.
    pub p_drop: f64,
}

impl Default for VisionNoise {
    fn default() -> Self {
        Self {
            sigma_center: 0.01,
            sigma_area: 0.03,
            sigma_aspect: 0.02,
            p_drop: 0.5,
        }
    }
}

impl VisionNoise {
    pub fn noiseless() -> Self {
        Self {
            sigma_center: 0.0,
            sigma_area: 0.0,
            sigma_aspect: 0.0,
            p_drop: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VisionConfig {
    pub camera: CameraModel,
    pub field: ConfidenceField,
    pub noise: VisionNoise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub x_c: f64,
    pub y_c: f64,
    pub area: f64,
    /// Width over height of the box.
    pub aspect: f64,
    pub confidence: f64,
}

impl Detection {
    pub fn as_measurement(&self) -> [f64; 5] {
        [self.x_c, self.y_c, self.area, self.aspect, self.confidence]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BBoxObservation {
    Detected(Detection),
    Missed,
}

impl BBoxObservation {
    pub fn detection(&self) -> Option<&Detection> {
        match self {
            BBoxObservation::Detected(d) => Some(d),
            BBoxObservation::Missed => None,
        }
    }

    pub fn is_detected(&self) -> bool {
        matches!(self, BBoxObservation::Detected(_))
    }
}

/// Noise-free pinhole projection of the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub x_c: f64,
    pub y_c: f64,
    pub area: f64,
    pub aspect: f64,
    pub depth: f64,
    pub range: f64,
}

impl Projection {
    pub fn in_view(&self, camera: &CameraModel) -> bool {
        self.depth > 0.0 && self.x_c.abs() <= 1.0 && self.y_c.abs() <= 1.0 && self.range <= camera.max_range
    }
}

/// Project the target centre; `None` when it is behind the image plane.
pub fn project(robot: &RobotState, target_position: &Vector3<f64>, camera: &CameraModel) -> Option<Projection> {
    let rel = robot.orientation.inverse_transform_vector(&(target_position - robot.position));
    let depth = rel.x;
    if depth <= 0.0 {
        return None;
    }
    let tan_h = (0.5 * camera.horizontal_fov).tan();
    let tan_v = (0.5 * camera.vertical_fov).tan();
    // body y points left, image x points right
    let x_c = (-rel.y / depth) / tan_h;
    let y_c = (rel.z / depth) / tan_v;
    let half_w = camera.target_half_width / depth / tan_h;
    let half_h = camera.target_half_height / depth / tan_v;
    Some(Projection {
        x_c,
        y_c,
        area: (half_w * half_h).min(1.0),
        aspect: half_w / half_h,
        depth,
        range: rel.norm(),
    })
}

/// One detector frame.
///
/// Every call consumes exactly five draws from `rng`, whether or not the target
/// is visible, so the vision stream stays aligned across controllers.
pub fn observe<R: Rng + ?Sized>(robot: &RobotState, target: &TargetState, cfg: &VisionConfig, rng: &mut R) -> BBoxObservation {
    let n_x: f64 = rng.sample(StandardNormal);
    let n_y: f64 = rng.sample(StandardNormal);
    let n_a: f64 = rng.sample(StandardNormal);
    let n_c: f64 = rng.sample(StandardNormal);
    let u_drop: f64 = rng.random();

    let Some(p) = project(robot, &target.position, &cfg.camera) else {
        return BBoxObservation::Missed;
    };
    if !p.in_view(&cfg.camera) {
        return BBoxObservation::Missed;
    }
    let confidence = cfg.field.evaluate(p.x_c, n_c);
    if u_drop < (1.0 - confidence) * cfg.noise.p_drop {
        return BBoxObservation::Missed;
    }
    let noise = &cfg.noise;
    BBoxObservation::Detected(Detection {
        x_c: (p.x_c + noise.sigma_center * n_x).clamp(-1.0, 1.0),
        y_c: (p.y_c + noise.sigma_center * n_y).clamp(-1.0, 1.0),
        area: (p.area * (1.0 + noise.sigma_area * n_a)).clamp(1e-6, 1.0),
        aspect: (p.aspect * (1.0 + noise.sigma_aspect * n_a)).max(1e-3),
        confidence,
    })
}
