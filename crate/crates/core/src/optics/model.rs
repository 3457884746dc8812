use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

/// Carrier density → Gaussian (excess) broadening calibration: two anchors
/// given as total Voigt FWHMs, joined by a logistic in log10(n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BroadeningLaw {
    pub low_density_cm3: f64,
    pub low_total_mhz: f64,
    pub high_density_cm3: f64,
    pub high_total_mhz: f64,
    /// Logistic slope in 1/decade.
    pub steepness_per_decade: f64,
    /// Excitation power at which the anchor totals were measured.
    pub anchor_power_nw: f64,
}

impl Default for BroadeningLaw {
    fn default() -> Self {
        Self {
            low_density_cm3: 1e12,
            low_total_mhz: 40.0,
            high_density_cm3: 7e13,
            high_total_mhz: 170.0,
            steepness_per_decade: 4.0,
            anchor_power_nw: 0.0,
        }
    }
}

impl BroadeningLaw {
    pub fn validate(&self) -> Result<()> {
        let p = |f: &str| format!("optics.broadening.{f}");
        ensure_positive(&p("low_density_cm3"), self.low_density_cm3)?;
        ensure_positive(&p("high_density_cm3"), self.high_density_cm3)?;
        ensure_positive(&p("low_total_mhz"), self.low_total_mhz)?;
        ensure_positive(&p("high_total_mhz"), self.high_total_mhz)?;
        ensure_positive(&p("steepness_per_decade"), self.steepness_per_decade)?;
        ensure_non_negative(&p("anchor_power_nw"), self.anchor_power_nw)?;
        if self.high_density_cm3 <= self.low_density_cm3 {
            return Err(Error::validation(
                p("high_density_cm3"),
                "must exceed low_density_cm3",
            ));
        }
        if self.high_total_mhz < self.low_total_mhz {
            return Err(Error::validation(
                p("high_total_mhz"),
                "must be >= low_total_mhz",
            ));
        }
        Ok(())
    }

    /// log10 density at which the logistic is centred.
    pub fn midpoint_log10(&self) -> f64 {
        0.5 * (self.low_density_cm3.log10() + self.high_density_cm3.log10())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefectOpticalModel {
    pub zpl_energy_ev: f64,
    pub excited_state_splitting_ghz: f64,
    pub lifetime_a1_ns: f64,
    pub lifetime_a2_ns: f64,
    pub weight_a1: f64,
    pub weight_a2: f64,
    /// GHz/(MV/m)²
    pub stark_perp_quadratic: f64,
    /// GHz/(MV/m)
    pub stark_par_linear: f64,
    pub saturation_power_nw: f64,
    pub broadening: BroadeningLaw,
}

impl Default for DefectOpticalModel {
    fn default() -> Self {
        Self {
            zpl_energy_ev: 1.352,
            excited_state_splitting_ghz: 1.0,
            lifetime_a1_ns: 6.09,
            lifetime_a2_ns: 11.35,
            weight_a1: 0.5,
            weight_a2: 1.0,
            stark_perp_quadratic: 0.047,
            stark_par_linear: 3.7,
            saturation_power_nw: 20.0,
            broadening: BroadeningLaw::default(),
        }
    }
}

impl DefectOpticalModel {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("optics.zpl_energy_ev", self.zpl_energy_ev)?;
        ensure_non_negative(
            "optics.excited_state_splitting_ghz",
            self.excited_state_splitting_ghz,
        )?;
        for (path, v) in [
            ("optics.lifetime_a1_ns", self.lifetime_a1_ns),
            ("optics.lifetime_a2_ns", self.lifetime_a2_ns),
        ] {
            if !(v > 0.0) {
                return Err(Error::validation(path, "lifetime must be > 0"));
            }
        }
        ensure_non_negative("optics.weight_a1", self.weight_a1)?;
        ensure_non_negative("optics.weight_a2", self.weight_a2)?;
        if self.weight_a1 + self.weight_a2 <= 0.0 {
            return Err(Error::validation(
                "optics.weight_a2",
                "weights must not both be zero",
            ));
        }
        for (path, v) in [
            ("optics.stark_perp_quadratic", self.stark_perp_quadratic),
            ("optics.stark_par_linear", self.stark_par_linear),
        ] {
            if !v.is_finite() {
                return Err(Error::validation(path, "must be finite"));
            }
        }
        ensure_positive("optics.saturation_power_nw", self.saturation_power_nw)?;
        self.broadening.validate()
    }
}
