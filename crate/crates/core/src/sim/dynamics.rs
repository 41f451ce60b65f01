use nalgebra::{UnitQuaternion, Vector3};

use super::mixer::{GeneralizedForce, LegMixer};
use super::RateCommand;
use crate::error::{Error, Result};

/// Rigid-body state of the vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    /// World-frame position (m).
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    /// Body-frame linear velocity (m/s).
    pub linear_velocity: Vector3<f64>,
    /// Body-frame angular velocity (rad/s).
    pub angular_velocity: Vector3<f64>,
    /// Thrust delivered by each leg on the last step (N).
    pub leg_thrusts: [f64; 6],
}

impl RobotState {
    pub fn at_rest(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            leg_thrusts: [0.0; 6],
        }
    }

    pub fn world_velocity(&self) -> Vector3<f64> {
        self.orientation * self.linear_velocity
    }

    pub fn speed(&self) -> f64 {
        self.linear_velocity.norm()
    }

    /// Nose-up pitch rate, the convention used by [`RateCommand`].
    pub fn pitch_rate(&self) -> f64 {
        -self.angular_velocity.y
    }

    pub fn yaw_rate(&self) -> f64 {
        self.angular_velocity.z
    }

    fn check_finite(&self) -> Result<()> {
        let checks: [(&'static str, bool); 5] = [
            ("position", self.position.iter().all(|v| v.is_finite())),
            ("orientation", self.orientation.coords.iter().all(|v| v.is_finite())),
            ("linear_velocity", self.linear_velocity.iter().all(|v| v.is_finite())),
            ("angular_velocity", self.angular_velocity.iter().all(|v| v.is_finite())),
            ("leg_thrusts", self.leg_thrusts.iter().all(|v| v.is_finite())),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((quantity, _)) => Err(Error::NonFinite { quantity }),
            None => Ok(()),
        }
    }
}

impl Default for RobotState {
    fn default() -> Self {
        Self::at_rest(Vector3::zeros(), UnitQuaternion::identity())
    }
}

/// Hydrodynamic and inertial parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroParams {
    /// Fluid density (kg/m³).
    pub rho: f64,
    /// Drag coefficient per body axis.
    pub drag_coeffs: Vector3<f64>,
    /// Reference area per body axis (m²).
    pub ref_areas: Vector3<f64>,
    pub mass: f64,
    pub g: f64,
    /// Buoyancy tuning scalar; 1 is neutral, below 1 sinks.
    pub b_coef: f64,
    /// Linear angular drag per body axis (N·m·s/rad).
    pub angular_damping: Vector3<f64>,
    /// Principal moments of inertia (kg·m²).
    pub inertia: Vector3<f64>,
    /// Constant world-frame water current (m/s).
    pub current: Vector3<f64>,
    /// Speed cap (m/s).
    pub v_max: f64,
    /// Angular speed cap (rad/s).
    pub w_max: f64,
}

impl Default for HydroParams {
    fn default() -> Self {
        Self {
            rho: 1000.0,
            drag_coeffs: Vector3::new(0.9, 1.2, 1.2),
            ref_areas: Vector3::new(0.06, 0.085, 0.29),
            mass: 16.0,
            g: 9.81,
            b_coef: 1.0,
            angular_damping: Vector3::new(2.0, 2.0, 2.0),
            inertia: Vector3::new(0.3, 0.6, 0.8),
            current: Vector3::zeros(),
            v_max: 1.5,
            w_max: 3.0,
        }
    }
}

impl HydroParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > 0.0
            && self.mass > 0.0
            && self.g > 0.0
            && self.ref_areas.iter().all(|a| *a >= 0.0)
            && self.drag_coeffs.iter().all(|c| *c >= 0.0)
            && self.inertia.iter().all(|i| *i > 0.0)
            && self.angular_damping.iter().all(|d| *d >= 0.0)
            && self.v_max > 0.0
            && self.w_max > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid hydro parameters: {self:?}")))
        }
    }
}

/// Quadratic drag per body axis, ½ρ v|v| C_d A, opposing the relative velocity.
pub fn drag_force_body(v_rel_body: &Vector3<f64>, params: &HydroParams) -> Vector3<f64> {
    Vector3::from_fn(|i, _| {
        -0.5 * params.rho * v_rel_body[i] * v_rel_body[i].abs() * params.drag_coeffs[i] * params.ref_areas[i]
    })
}

/// Net of buoyancy and weight along world z: `mass·g·(b_coef − 1)`.
pub fn net_vertical_force(params: &HydroParams) -> f64 {
    params.mass * params.g * (params.b_coef - 1.0)
}

/// Proportional inner loops turning rate set-points into generalized effort.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerLoops {
    pub k_forward: f64,
    pub k_yaw: f64,
    pub k_pitch: f64,
    pub k_roll: f64,
    /// Roll-angle leveling gain feeding the roll-rate loop.
    pub k_roll_level: f64,
    pub max_force: f64,
    pub max_torque: f64,
}

impl Default for InnerLoops {
    fn default() -> Self {
        Self {
            k_forward: 40.0,
            k_yaw: 8.0,
            k_pitch: 8.0,
            k_roll: 4.0,
            k_roll_level: 2.0,
            max_force: 60.0,
            max_torque: 6.0,
        }
    }
}

impl InnerLoops {
    /// Effort that drives the current body rates toward `cmd`.
    pub fn generalized_forces(&self, state: &RobotState, cmd: &RateCommand) -> GeneralizedForce {
        let (roll, _, _) = state.orientation.euler_angles();
        let w = &state.angular_velocity;
        let clamp_t = |v: f64| v.clamp(-self.max_torque, self.max_torque);
        GeneralizedForce {
            forward: (self.k_forward * (cmd.forward_velocity - state.linear_velocity.x))
                .clamp(-self.max_force, self.max_force),
            yaw: clamp_t(self.k_yaw * (cmd.yaw_rate - w.z)),
            pitch: clamp_t(self.k_pitch * (cmd.pitch_rate - state.pitch_rate())),
            roll: clamp_t(self.k_roll * (-self.k_roll_level * roll - w.x)),
        }
    }
}

/// Actuator set-point limits applied before the inner loops.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandLimits {
    pub forward_min: f64,
    pub forward_max: f64,
    pub rate_max: f64,
}

impl Default for CommandLimits {
    fn default() -> Self {
        Self {
            forward_min: -0.3,
            forward_max: 1.0,
            rate_max: 1.0,
        }
    }
}

impl CommandLimits {
    pub fn clamp(&self, cmd: &RateCommand) -> RateCommand {
        let finite_or_zero = |v: f64| if v.is_finite() { v } else { 0.0 };
        RateCommand {
            forward_velocity: finite_or_zero(cmd.forward_velocity).clamp(self.forward_min, self.forward_max),
            yaw_rate: finite_or_zero(cmd.yaw_rate).clamp(-self.rate_max, self.rate_max),
            pitch_rate: finite_or_zero(cmd.pitch_rate).clamp(-self.rate_max, self.rate_max),
        }
    }
}

/// Everything about the vehicle that stays fixed during a trial.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vehicle {
    pub hydro: HydroParams,
    pub mixer: LegMixer,
    pub loops: InnerLoops,
    pub limits: CommandLimits,
}

/// Advance the vehicle by `dt` with semi-implicit Euler.
///
/// Velocities are updated from forces evaluated at the current state; pose is
/// then advanced with the new velocities. Drag is evaluated per body axis on
/// the velocity relative to the current and rotated to world.
pub fn step_dynamics(state: &RobotState, command: &RateCommand, vehicle: &Vehicle, dt: f64) -> Result<RobotState> {
    if !(dt > 0.0) {
        return Err(Error::Usage(format!("dt must be positive, got {dt}")));
    }
    let cmd = vehicle.limits.clamp(command);
    let effort = vehicle.loops.generalized_forces(state, &cmd);
    let commanded = vehicle.mixer.commanded_thrusts(&effort);
    integrate(state, &commanded, vehicle, dt)
}

/// Integration from commanded leg thrusts; health is applied here.
pub(crate) fn integrate(state: &RobotState, commanded_legs: &[f64; 6], vehicle: &Vehicle, dt: f64) -> Result<RobotState> {
    let p = &vehicle.hydro;
    let legs = vehicle.mixer.apply_health(commanded_legs);
    let effort = vehicle.mixer.realized(&legs);

    let rot = state.orientation;
    let current_body = rot.inverse_transform_vector(&p.current);
    let v_rel = state.linear_velocity - current_body;
    let force_body = Vector3::new(effort.forward, 0.0, 0.0) + drag_force_body(&v_rel, p);
    let force_world = rot * force_body + Vector3::new(0.0, 0.0, net_vertical_force(p));

    let mut v_world = rot * state.linear_velocity + force_world * (dt / p.mass);
    let speed = v_world.norm();
    if speed > p.v_max {
        v_world *= p.v_max / speed;
    }

    let w = state.angular_velocity;
    let torque_body = Vector3::new(effort.roll, -effort.pitch, effort.yaw)
        - p.angular_damping.component_mul(&w)
        - w.cross(&p.inertia.component_mul(&w));
    let mut w_new = w + torque_body.component_div(&p.inertia) * dt;
    let w_norm = w_new.norm();
    if w_norm > p.w_max {
        w_new *= p.w_max / w_norm;
    }

    let orientation = UnitQuaternion::new_normalize(
        state.orientation.into_inner() * UnitQuaternion::from_scaled_axis(w_new * dt).into_inner(),
    );
    let next = RobotState {
        position: state.position + v_world * dt,
        linear_velocity: orientation.inverse_transform_vector(&v_world),
        angular_velocity: w_new,
        orientation,
        leg_thrusts: legs,
    };
    next.check_finite()?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::mixer::RIGHT_REAR;
    use proptest::prelude::*;

    fn unit_params() -> HydroParams {
        HydroParams {
            drag_coeffs: Vector3::new(1.0, 1.0, 1.0),
            ref_areas: Vector3::new(1.0, 1.0, 1.0),
            mass: 10.0,
            v_max: 100.0,
            ..HydroParams::default()
        }
    }

    #[test]
    fn drag_on_unit_axis() {
        let f = drag_force_body(&Vector3::new(1.0, 0.0, 0.0), &unit_params());
        assert_eq!(f, Vector3::new(-500.0, 0.0, 0.0));
    }

    #[test]
    fn neutral_buoyancy_cancels_weight() {
        let p = HydroParams::default();
        assert_eq!(net_vertical_force(&p), 0.0);
        let sinking = HydroParams { b_coef: 0.97, ..p };
        assert!(net_vertical_force(&sinking) < 0.0);
    }

    #[test]
    fn rest_is_an_equilibrium() {
        let vehicle = Vehicle::default();
        let s0 = RobotState::at_rest(Vector3::new(1.0, -2.0, 3.0), UnitQuaternion::from_euler_angles(0.0, 0.1, 0.7));
        for dt in [0.001, 0.04, 0.5] {
            let s1 = step_dynamics(&s0, &RateCommand::NEUTRAL, &vehicle, dt).unwrap();
            assert_eq!(s1.position, s0.position);
            assert_eq!(s1.linear_velocity, s0.linear_velocity);
            assert_eq!(s1.angular_velocity, s0.angular_velocity);
            assert!((s1.orientation.angle_to(&s0.orientation)).abs() < 1e-15);
        }
    }

    /// Scalar explicit integration of m·dv/dt = −½ρC_dA v|v| over one step.
    fn scalar_drag_step(v: f64, rho: f64, cd: f64, area: f64, mass: f64, dt: f64) -> f64 {
        let force = -0.5 * rho * cd * area * v * v.abs();
        v + force / mass * dt
    }

    #[test]
    fn one_step_velocity_change_matches_scalar_oracle() {
        let limits = CommandLimits {
            forward_max: 5.0,
            ..CommandLimits::default()
        };
        let vehicle = Vehicle {
            hydro: unit_params(),
            limits: limits.clone(),
            ..Vehicle::default()
        };
        let mut s0 = RobotState::default();
        s0.linear_velocity = Vector3::new(2.0, 0.0, 0.0);
        // the forward loop would push back toward the 0 set-point; hold the set-point at 2
        let cmd = RateCommand::new(2.0, 0.0, 0.0);
        let s1 = step_dynamics(&s0, &cmd, &vehicle, 0.05).unwrap();
        let expected = scalar_drag_step(2.0, 1000.0, 1.0, 1.0, 10.0, 0.05) - 2.0;
        assert!((s1.linear_velocity.x - 2.0 - expected).abs() < 1e-12);
        assert!((expected + 10.0).abs() < 1e-12);

        let heavy = Vehicle {
            hydro: HydroParams { mass: 100.0, ..unit_params() },
            limits,
            ..Vehicle::default()
        };
        let s1 = step_dynamics(&s0, &cmd, &heavy, 0.05).unwrap();
        assert!((s1.linear_velocity.x - 2.0 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn matching_rates_give_zero_effort() {
        let loops = InnerLoops::default();
        let mut s = RobotState::default();
        s.linear_velocity.x = 0.4;
        s.angular_velocity = Vector3::new(0.0, -0.2, 0.3);
        let e = loops.generalized_forces(&s, &RateCommand::new(0.4, 0.3, 0.2));
        assert_eq!(e, GeneralizedForce::default());
    }

    #[test]
    fn yaw_rate_demand_sign() {
        let loops = InnerLoops::default();
        let s = RobotState::default();
        assert!(loops.generalized_forces(&s, &RateCommand::new(0.0, 0.2, 0.0)).yaw > 0.0);
        assert!(loops.generalized_forces(&s, &RateCommand::new(0.0, -0.2, 0.0)).yaw < 0.0);
        assert!(loops.generalized_forces(&s, &RateCommand::new(0.0, 0.0, 0.2)).pitch > 0.0);
    }

    #[test]
    fn locked_yaw_axis_matches_first_order_response() {
        let r_cmd = 0.4;
        let inertia_z = 8.0;
        let damping = 1.0;
        for k in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let vehicle = Vehicle {
                hydro: HydroParams {
                    inertia: Vector3::new(1.0, 1.0, inertia_z),
                    angular_damping: Vector3::new(1.0, 1.0, damping),
                    ..HydroParams::default()
                },
                loops: InnerLoops {
                    k_yaw: k,
                    max_torque: 1e6,
                    ..InnerLoops::default()
                },
                ..Vehicle::default()
            };
            let w_inf = r_cmd * k / (k + damping);
            let tau = inertia_z / (k + damping);
            let dt = 0.04;
            let mut s = RobotState::default();
            for n in 1..=200 {
                s = step_dynamics(&s, &RateCommand::new(0.0, r_cmd, 0.0), &vehicle, dt).unwrap();
                let exact = w_inf * (1.0 - (-(n as f64) * dt / tau).exp());
                assert!(
                    (s.angular_velocity.z - exact).abs() <= 0.02 * w_inf,
                    "k={k} n={n} sim={} exact={exact}",
                    s.angular_velocity.z
                );
            }
        }
    }

    #[test]
    fn drag_rotated_from_body_equals_world_evaluation_at_identity() {
        let p = HydroParams::default();
        let v = Vector3::new(0.3, -0.7, 0.2);
        let rot = UnitQuaternion::identity();
        let body = rot * drag_force_body(&rot.inverse_transform_vector(&v), &p);
        assert_eq!(body, drag_force_body(&v, &p));
    }

    #[test]
    fn rejects_non_positive_dt() {
        assert!(step_dynamics(&RobotState::default(), &RateCommand::NEUTRAL, &Vehicle::default(), 0.0).is_err());
    }

    #[test]
    fn non_finite_state_is_reported() {
        let mut s = RobotState::default();
        s.position.x = f64::NAN;
        match step_dynamics(&s, &RateCommand::NEUTRAL, &Vehicle::default(), 0.04) {
            Err(Error::NonFinite { quantity }) => assert_eq!(quantity, "position"),
            other => panic!("expected fault, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn coasting_speed_never_increases(vx in -1.2f64..1.2, vy in -0.8f64..0.8, vz in -0.8f64..0.8,
                                          wz in -0.5f64..0.5, yaw in -3.0f64..3.0) {
            prop_assume!(vx.abs() + vy.abs() + vz.abs() > 1e-3);
            let vehicle = Vehicle::default();
            let mut s = RobotState::at_rest(Vector3::zeros(), UnitQuaternion::from_euler_angles(0.0, 0.0, yaw));
            s.linear_velocity = Vector3::new(vx, vy, vz);
            s.angular_velocity = Vector3::new(0.0, 0.0, wz);
            let zero_legs = [0.0; 6];
            for _ in 0..200 {
                let next = integrate(&s, &zero_legs, &vehicle, 0.04).unwrap();
                prop_assert!(next.speed() < s.speed() || s.speed() == 0.0);
                prop_assert!((next.orientation.norm() - 1.0).abs() < 1e-9);
                s = next;
            }
        }

        #[test]
        fn dead_leg_ignores_its_own_command(perturb in prop::collection::vec(-50.0f64..50.0, 60)) {
            let mut vehicle = Vehicle::default();
            vehicle.mixer.set_leg_health(RIGHT_REAR, 0.0);
            let cmd = RateCommand::new(0.6, 0.2, -0.1);
            let mut a = RobotState::default();
            let mut b = RobotState::default();
            for d in perturb {
                let effort_a = vehicle.loops.generalized_forces(&a, &vehicle.limits.clamp(&cmd));
                let legs_a = vehicle.mixer.commanded_thrusts(&effort_a);
                let effort_b = vehicle.loops.generalized_forces(&b, &vehicle.limits.clamp(&cmd));
                let mut legs_b = vehicle.mixer.commanded_thrusts(&effort_b);
                legs_b[RIGHT_REAR] += d;
                a = integrate(&a, &legs_a, &vehicle, 0.04).unwrap();
                b = integrate(&b, &legs_b, &vehicle, 0.04).unwrap();
                prop_assert_eq!(&a, &b);
            }
        }

        #[test]
        fn speed_stays_under_cap(v in 0.0f64..1.0, yaw in -1.0f64..1.0, pitch in -1.0f64..1.0) {
            let vehicle = Vehicle::default();
            let mut s = RobotState::default();
            for _ in 0..300 {
                s = step_dynamics(&s, &RateCommand::new(v, yaw, pitch), &vehicle, 0.04).unwrap();
                prop_assert!(s.speed() <= vehicle.hydro.v_max + 1e-12);
                prop_assert!((s.orientation.norm() - 1.0).abs() < 1e-9);
            }
        }
    }
}
