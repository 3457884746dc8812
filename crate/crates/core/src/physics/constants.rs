use crate::error::{Error, Result};

/// CODATA 2018 values in the units used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    elementary_charge: f64,
    boltzmann_ev: f64,
    planck_ev: f64,
    speed_of_light: f64,
    vacuum_permittivity: f64,
    fine_structure_alpha: f64,
    electron_mass: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    elementary_charge: 1.602_176_634e-19,
    boltzmann_ev: 8.617_333_262e-5,
    planck_ev: 4.135_667_696e-15,
    speed_of_light: 299_792_458.0,
    vacuum_permittivity: 8.854_187_812_8e-12,
    fine_structure_alpha: 7.297_352_569_3e-3,
    electron_mass: 9.109_383_701_5e-31,
};

impl PhysicalConstants {
    pub fn new(
        elementary_charge: f64,
        boltzmann_ev: f64,
        planck_ev: f64,
        speed_of_light: f64,
        vacuum_permittivity: f64,
        fine_structure_alpha: f64,
    ) -> Result<Self> {
        let values = [
            ("elementary_charge", elementary_charge),
            ("boltzmann", boltzmann_ev),
            ("planck", planck_ev),
            ("speed_of_light", speed_of_light),
            ("vacuum_permittivity", vacuum_permittivity),
            ("fine_structure_alpha", fine_structure_alpha),
        ];
        for (name, v) in values {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!(
                    "constant {name} must be > 0 (got {v})"
                )));
            }
        }
        Ok(Self {
            elementary_charge,
            boltzmann_ev,
            planck_ev,
            speed_of_light,
            vacuum_permittivity,
            fine_structure_alpha,
            electron_mass: CONSTANTS.electron_mass,
        })
    }

    /// C
    pub fn elementary_charge(&self) -> f64 {
        self.elementary_charge
    }
    /// eV/K
    pub fn boltzmann(&self) -> f64 {
        self.boltzmann_ev
    }
    /// J/K
    pub fn boltzmann_si(&self) -> f64 {
        self.boltzmann_ev * self.elementary_charge
    }
    /// eV·s
    pub fn planck(&self) -> f64 {
        self.planck_ev
    }
    /// J·s
    pub fn planck_si(&self) -> f64 {
        self.planck_ev * self.elementary_charge
    }
    /// m/s
    pub fn speed_of_light(&self) -> f64 {
        self.speed_of_light
    }
    /// F/m
    pub fn vacuum_permittivity(&self) -> f64 {
        self.vacuum_permittivity
    }
    pub fn fine_structure_alpha(&self) -> f64 {
        self.fine_structure_alpha
    }
    /// kg
    pub fn electron_mass(&self) -> f64 {
        self.electron_mass
    }
    /// h·c in eV·nm, for photon energy ↔ wavelength conversion.
    pub fn hc_ev_nm(&self) -> f64 {
        self.planck_ev * self.speed_of_light * 1e9
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_positive() {
        assert!(PhysicalConstants::new(1.0, 1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(PhysicalConstants::new(1.0, -1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(PhysicalConstants::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn hc_is_about_1240_ev_nm() {
        assert!((CONSTANTS.hc_ev_nm() - 1239.84198).abs() < 1e-4);
    }
}
