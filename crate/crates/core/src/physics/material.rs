use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

/// Top-surface metal stripe. The stripe edge sits at lateral coordinate 0 and
/// the stripe extends towards negative x; `half_width_um` is the distance from
/// the stripe centre to that edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactGeometry {
    pub half_width_um: f64,
    /// Stripe length along the invariant direction, used only for the contact area.
    pub length_um: f64,
}

impl Default for ContactGeometry {
    fn default() -> Self {
        Self {
            half_width_um: 25.0,
            length_um: 500.0,
        }
    }
}

impl ContactGeometry {
    pub fn area_m2(&self) -> f64 {
        2.0 * self.half_width_um * 1e-6 * self.length_um * 1e-6
    }
}

/// Layered Schottky device: metal stripe / n⁻ epi layer / n⁺ substrate / ohmic back contact.
///
/// Defaults are the 15 K simulation parameters of the studied sample, plus the
/// static permittivity and donor level, which are literature values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialStack {
    pub metal_workfunction_ev: f64,
    pub band_gap_ev: f64,
    pub electron_affinity_ev: f64,
    pub refractive_index: f64,
    pub static_relative_permittivity: f64,
    /// Conduction-band effective density of states at `dos_reference_temperature_k`.
    pub nc_m3: f64,
    pub nv_m3: f64,
    /// Nc and Nv scale as (T / T_ref)^(3/2) away from this temperature.
    pub dos_reference_temperature_k: f64,
    pub doping_epi_cm3: f64,
    pub doping_substrate_cm3: f64,
    pub mobility_epi_m2_per_vs: f64,
    pub mobility_substrate_m2_per_vs: f64,
    pub m_eff_e_kg: f64,
    pub m_eff_h_kg: f64,
    pub donor_ionization_energy_ev: f64,
    pub donor_degeneracy: f64,
    pub epi_thickness_um: f64,
    /// Portion of the substrate included in the simulation domain.
    pub substrate_thickness_um: f64,
    pub contact: ContactGeometry,
}

impl Default for MaterialStack {
    fn default() -> Self {
        Self {
            metal_workfunction_ev: 5.1,
            band_gap_ev: 3.23,
            electron_affinity_ev: 3.24,
            refractive_index: 2.588,
            static_relative_permittivity: 9.66,
            nc_m3: 1.8881e23,
            nv_m3: 2.7885e23,
            dos_reference_temperature_k: 15.0,
            doping_epi_cm3: 7e13,
            doping_substrate_cm3: 1e17,
            mobility_epi_m2_per_vs: 237.02,
            mobility_substrate_m2_per_vs: 29.556,
            m_eff_e_kg: 3.6578e-31,
            m_eff_h_kg: 2.4083e-30,
            donor_ionization_energy_ev: 0.061,
            donor_degeneracy: 2.0,
            epi_thickness_um: 10.0,
            substrate_thickness_um: 3.0,
            contact: ContactGeometry::default(),
        }
    }
}

impl MaterialStack {
    pub fn validate(&self) -> Result<()> {
        let p = |f: &str| format!("material.{f}");
        ensure_positive(&p("band_gap_ev"), self.band_gap_ev)?;
        ensure_positive(&p("refractive_index"), self.refractive_index)?;
        ensure_positive(
            &p("static_relative_permittivity"),
            self.static_relative_permittivity,
        )?;
        ensure_positive(&p("nc_m3"), self.nc_m3)?;
        ensure_positive(&p("nv_m3"), self.nv_m3)?;
        ensure_positive(
            &p("dos_reference_temperature_k"),
            self.dos_reference_temperature_k,
        )?;
        ensure_positive(&p("doping_epi_cm3"), self.doping_epi_cm3)?;
        ensure_positive(&p("doping_substrate_cm3"), self.doping_substrate_cm3)?;
        ensure_positive(&p("mobility_epi_m2_per_vs"), self.mobility_epi_m2_per_vs)?;
        ensure_positive(
            &p("mobility_substrate_m2_per_vs"),
            self.mobility_substrate_m2_per_vs,
        )?;
        ensure_positive(&p("m_eff_e_kg"), self.m_eff_e_kg)?;
        ensure_positive(&p("m_eff_h_kg"), self.m_eff_h_kg)?;
        ensure_non_negative(
            &p("donor_ionization_energy_ev"),
            self.donor_ionization_energy_ev,
        )?;
        ensure_positive(&p("donor_degeneracy"), self.donor_degeneracy)?;
        ensure_positive(&p("epi_thickness_um"), self.epi_thickness_um)?;
        ensure_non_negative(&p("substrate_thickness_um"), self.substrate_thickness_um)?;
        ensure_positive(&p("contact.half_width_um"), self.contact.half_width_um)?;
        ensure_positive(&p("contact.length_um"), self.contact.length_um)?;
        if !self.metal_workfunction_ev.is_finite() || !self.electron_affinity_ev.is_finite() {
            return Err(Error::validation(
                p("metal_workfunction_ev"),
                "work function and electron affinity must be finite",
            ));
        }
        if self.electron_affinity_ev >= self.metal_workfunction_ev {
            return Err(Error::validation(
                p("electron_affinity_ev"),
                format!(
                    "electron affinity {} eV must be below the metal work function {} eV for a rectifying contact",
                    self.electron_affinity_ev, self.metal_workfunction_ev
                ),
            ));
        }
        Ok(())
    }

    /// Same stack with both layers undoped. Only meaningful for the
    /// electrostatics (Laplace limit); [`validate`](Self::validate) rejects it.
    pub fn undoped(&self) -> Self {
        Self {
            doping_epi_cm3: 0.0,
            doping_substrate_cm3: 0.0,
            ..self.clone()
        }
    }

    /// Schottky barrier height Φ_B = W_metal − χ (eV).
    pub fn barrier_height_ev(&self) -> f64 {
        self.metal_workfunction_ev - self.electron_affinity_ev
    }

    pub fn permittivity(&self) -> f64 {
        self.static_relative_permittivity * super::CONSTANTS.vacuum_permittivity()
    }

    pub fn nc_at(&self, temperature_k: f64) -> f64 {
        self.nc_m3 * (temperature_k / self.dos_reference_temperature_k).powf(1.5)
    }

    pub fn nv_at(&self, temperature_k: f64) -> f64 {
        self.nv_m3 * (temperature_k / self.dos_reference_temperature_k).powf(1.5)
    }

    pub fn total_thickness_um(&self) -> f64 {
        self.epi_thickness_um + self.substrate_thickness_um
    }
}

/// Defect level picture used by the photoionization defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChargeLevelDiagram {
    pub gap_ev: f64,
    pub v2_zpl_ev: f64,
    pub ionization_threshold_minus_to_2minus_ev: f64,
}

impl Default for ChargeLevelDiagram {
    fn default() -> Self {
        Self {
            gap_ev: 3.26,
            v2_zpl_ev: 1.352,
            ionization_threshold_minus_to_2minus_ev: 1.31,
        }
    }
}

impl ChargeLevelDiagram {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("levels.gap_ev", self.gap_ev)?;
        ensure_positive("levels.v2_zpl_ev", self.v2_zpl_ev)?;
        ensure_positive(
            "levels.ionization_threshold_minus_to_2minus_ev",
            self.ionization_threshold_minus_to_2minus_ev,
        )?;
        if self.v2_zpl_ev >= self.gap_ev {
            return Err(Error::validation(
                "levels.v2_zpl_ev",
                "must lie inside the gap",
            ));
        }
        if self.ionization_threshold_minus_to_2minus_ev >= self.gap_ev {
            return Err(Error::validation(
                "levels.ionization_threshold_minus_to_2minus_ev",
                "must lie inside the gap",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        MaterialStack::default().validate().unwrap();
        ChargeLevelDiagram::default().validate().unwrap();
    }

    #[test]
    fn ohmic_top_contact_rejected() {
        let stack = MaterialStack {
            metal_workfunction_ev: 3.0,
            ..Default::default()
        };
        let err = stack.validate().unwrap_err();
        assert!(err.to_string().contains("material.electron_affinity_ev"));
    }

    #[test]
    fn zero_doping_rejected() {
        let stack = MaterialStack::default().undoped();
        assert!(stack.validate().is_err());
    }

    #[test]
    fn zpl_outside_gap_rejected() {
        let levels = ChargeLevelDiagram {
            v2_zpl_ev: 3.5,
            ..Default::default()
        };
        assert!(levels.validate().is_err());
    }

    #[test]
    fn barrier_for_gold() {
        let stack = MaterialStack::default();
        assert!((stack.barrier_height_ev() - 1.86).abs() < 1e-12);
    }

    #[test]
    fn dos_is_table_value_at_reference() {
        let stack = MaterialStack::default();
        assert_eq!(stack.nc_at(15.0), 1.8881e23);
        let ratio = stack.nc_at(300.0) / stack.nc_at(15.0);
        assert!((ratio - 20f64.powf(1.5)).abs() < 1e-9);
    }
}
