use nalgebra::Vector3;
use rand::Rng;

/// Random piecewise-constant-velocity motion model for the tracked target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMotion {
    /// Per-axis speed half-range; each axis is drawn from `[-box, box]`.
    pub speed_box: Vector3<f64>,
    /// Shortest constant-velocity segment (steps).
    pub regime_min: u32,
    /// Longest constant-velocity segment (steps).
    pub regime_max: u32,
    pub dt: f64,
}

impl Default for TargetMotion {
    fn default() -> Self {
        Self {
            speed_box: Vector3::new(0.6, 0.6, 0.6),
            regime_min: 50,
            regime_max: 250,
            dt: 0.04,
        }
    }
}

impl TargetMotion {
    pub fn max_speed(&self) -> f64 {
        self.speed_box.norm()
    }

    pub fn sample_velocity<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector3<f64> {
        Vector3::from_fn(|i, _| {
            let b = self.speed_box[i];
            if b > 0.0 {
                rng.random_range(-b..=b)
            } else {
                0.0
            }
        })
    }

    pub fn sample_timer<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.random_range(self.regime_min.max(1)..=self.regime_max.max(self.regime_min).max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Steps left in the current constant-velocity segment.
    pub regime_timer: u32,
}

impl TargetState {
    pub fn stationary(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            regime_timer: u32::MAX,
        }
    }
}

/// Move the target one step and resample its velocity when the segment ends.
pub fn step_target<R: Rng + ?Sized>(target: &TargetState, motion: &TargetMotion, rng: &mut R) -> TargetState {
    let mut next = TargetState {
        position: target.position + target.velocity * motion.dt,
        velocity: target.velocity,
        regime_timer: target.regime_timer.saturating_sub(1),
    };
    if next.regime_timer == 0 {
        next.velocity = motion.sample_velocity(rng);
        next.regime_timer = motion.sample_timer(rng);
    }
    next
}
