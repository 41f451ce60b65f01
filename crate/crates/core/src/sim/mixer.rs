use nalgebra::{SMatrix, SVector};

/// Leg order used by every 6-vector in this module.
pub const LEG_NAMES: [&str; 6] = [
    "front_left",
    "front_right",
    "middle_left",
    "middle_right",
    "rear_left",
    "rear_right",
];

pub const RIGHT_REAR: usize = 5;

/// Generalized effort requested from (or realized by) the legs.
///
/// `pitch` is nose-up positive; `yaw` and `roll` follow the body z and x axes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneralizedForce {
    pub forward: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl GeneralizedForce {
    fn to_vector(self) -> SVector<f64, 4> {
        SVector::<f64, 4>::new(self.forward, self.yaw, self.pitch, self.roll)
    }

    fn from_vector(v: &SVector<f64, 4>) -> Self {
        Self {
            forward: v[0],
            yaw: v[1],
            pitch: v[2],
            roll: v[3],
        }
    }
}

/// Six-leg thrust allocation with per-leg health.
///
/// `allocation` (4×6) gives the generalized effort produced by unit thrust on
/// each leg; `mixing_matrix` (6×4) is its pseudo-inverse, so healthy legs
/// realize any commanded effort exactly. A degraded leg breaks that identity
/// and couples the axes (a dead rear leg turns forward thrust into yaw).
#[derive(Debug, Clone, PartialEq)]
pub struct LegMixer {
    allocation: SMatrix<f64, 4, 6>,
    mixing_matrix: SMatrix<f64, 6, 4>,
    pub leg_health: [f64; 6],
}

impl LegMixer {
    /// Front/middle/rear leg pairs; `lateral` is the half-track used for yaw,
    /// `longitudinal` the fore/aft lever used for pitch, `roll_lever` the
    /// alternating-pair lever used for roll.
    pub fn with_geometry(lateral: f64, longitudinal: f64, roll_lever: f64) -> Self {
        let (ly, lx, c) = (lateral, longitudinal, roll_lever);
        #[rustfmt::skip]
        let allocation = SMatrix::<f64, 4, 6>::from_row_slice(&[
            1.0, 1.0, 1.0, 1.0, 1.0, 1.0,
            -ly, ly, -ly, ly, -ly, ly,
            lx, lx, 0.0, 0.0, -lx, -lx,
            c, -c, -2.0 * c, 2.0 * c, c, -c,
        ]);
        // Rows are mutually orthogonal, so B⁺ = Bᵀ (B Bᵀ)⁻¹ with a diagonal Gram matrix.
        let gram = allocation * allocation.transpose();
        let mut inv_gram = SMatrix::<f64, 4, 4>::zeros();
        for i in 0..4 {
            inv_gram[(i, i)] = 1.0 / gram[(i, i)];
        }
        let mixing_matrix = allocation.transpose() * inv_gram;
        Self {
            allocation,
            mixing_matrix,
            leg_health: [1.0; 6],
        }
    }

    pub fn mixing_matrix(&self) -> &SMatrix<f64, 6, 4> {
        &self.mixing_matrix
    }

    pub fn allocation(&self) -> &SMatrix<f64, 4, 6> {
        &self.allocation
    }

    /// Leg thrusts the gait layer asks for, before health is applied.
    pub fn commanded_thrusts(&self, effort: &GeneralizedForce) -> [f64; 6] {
        let t = self.mixing_matrix * effort.to_vector();
        [t[0], t[1], t[2], t[3], t[4], t[5]]
    }

    /// Thrust each leg actually delivers.
    pub fn apply_health(&self, commanded: &[f64; 6]) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (i, o) in out.iter_mut().enumerate() {
            let h = self.leg_health[i].clamp(0.0, 1.0);
            // A dead leg delivers exactly nothing, whatever it was asked for.
            *o = if h == 0.0 { 0.0 } else { h * commanded[i] };
        }
        out
    }

    pub fn leg_thrusts(&self, effort: &GeneralizedForce) -> [f64; 6] {
        self.apply_health(&self.commanded_thrusts(effort))
    }

    /// Generalized effort produced by the given leg thrusts.
    pub fn realized(&self, thrusts: &[f64; 6]) -> GeneralizedForce {
        let t = SVector::<f64, 6>::from_row_slice(thrusts);
        GeneralizedForce::from_vector(&(self.allocation * t))
    }

    pub fn set_leg_health(&mut self, leg: usize, health: f64) {
        self.leg_health[leg] = health.clamp(0.0, 1.0);
    }
}

impl Default for LegMixer {
    fn default() -> Self {
        Self::with_geometry(0.2, 0.25, 0.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn healthy_mixer_realizes_command_exactly() {
        let m = LegMixer::default();
        let cmd = GeneralizedForce {
            forward: 12.0,
            yaw: -0.7,
            pitch: 0.4,
            roll: 0.1,
        };
        let got = m.realized(&m.leg_thrusts(&cmd));
        assert!((got.forward - cmd.forward).abs() < 1e-12);
        assert!((got.yaw - cmd.yaw).abs() < 1e-12);
        assert!((got.pitch - cmd.pitch).abs() < 1e-12);
        assert!((got.roll - cmd.roll).abs() < 1e-12);
    }

    #[test]
    fn zero_command_gives_zero_thrust() {
        let m = LegMixer::default();
        assert_eq!(m.leg_thrusts(&GeneralizedForce::default()), [0.0; 6]);
    }

    #[test]
    fn dead_leg_produces_no_thrust() {
        let mut m = LegMixer::default();
        m.set_leg_health(RIGHT_REAR, 0.0);
        for k in 0..20 {
            let cmd = GeneralizedForce {
                forward: k as f64 - 7.0,
                yaw: 0.3 * k as f64,
                pitch: -0.1 * k as f64,
                roll: 1.0,
            };
            assert_eq!(m.leg_thrusts(&cmd)[RIGHT_REAR], 0.0);
        }
    }

    #[test]
    fn right_rear_fault_couples_forward_thrust_into_yaw() {
        let mut m = LegMixer::default();
        m.set_leg_health(RIGHT_REAR, 0.0);
        let got = m.realized(&m.leg_thrusts(&GeneralizedForce {
            forward: 6.0,
            ..Default::default()
        }));
        // five of six equal shares survive; the missing right leg leaves a right turn
        assert!((got.forward - 5.0).abs() < 1e-12);
        assert!((got.yaw + 0.2).abs() < 1e-12);
    }

    #[test]
    fn mixing_matrix_is_right_inverse_of_allocation() {
        let m = LegMixer::default();
        let id = m.allocation() * m.mixing_matrix();
        assert!((id - SMatrix::<f64, 4, 4>::identity()).abs().max() < 1e-12);
    }
}
