use std::fmt;
use std::str::FromStr;

use super::dynamics::Vehicle;
use super::mixer::RIGHT_REAR;
use crate::error::Error;

/// Vehicle condition presets used by the studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Nominal,
    /// Angular damping scaled up and the vehicle made negatively buoyant.
    HighDampingNegativeBuoyancy,
    /// The right-rear leg stops responding to commands.
    RightRearLegFault,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::Nominal,
        Scenario::HighDampingNegativeBuoyancy,
        Scenario::RightRearLegFault,
    ];

    pub const DAMPING_FACTOR: f64 = 4.0;
    pub const NEGATIVE_B_COEF: f64 = 0.97;

    pub fn apply(&self, vehicle: &mut Vehicle) {
        match self {
            Scenario::Nominal => {}
            Scenario::HighDampingNegativeBuoyancy => {
                vehicle.hydro.angular_damping *= Self::DAMPING_FACTOR;
                vehicle.hydro.b_coef = Self::NEGATIVE_B_COEF;
            }
            Scenario::RightRearLegFault => vehicle.mixer.set_leg_health(RIGHT_REAR, 0.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Nominal => "nominal",
            Scenario::HighDampingNegativeBuoyancy => "high_damping_negative_buoyancy",
            Scenario::RightRearLegFault => "right_rear_leg_fault",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!("sideways".parse::<Scenario>().is_err());
    }

    #[test]
    fn presets_change_the_vehicle() {
        let base = Vehicle::default();
        let mut v = base.clone();
        Scenario::Nominal.apply(&mut v);
        assert_eq!(v, base);
        Scenario::RightRearLegFault.apply(&mut v);
        assert_eq!(v.mixer.leg_health[RIGHT_REAR], 0.0);
        let mut v = base.clone();
        Scenario::HighDampingNegativeBuoyancy.apply(&mut v);
        assert!(v.hydro.b_coef < 1.0);
        assert!(v.hydro.angular_damping.x > base.hydro.angular_damping.x);
    }
}
