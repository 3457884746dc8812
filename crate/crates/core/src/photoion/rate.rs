use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::cross_section::{convolve_cross_section, ElectronicCrossSection};
use super::spectral::{spectral_function, SpectralFunction, TransformOptions, VibrationalModeSet};
use crate::error::{Error, Result};
use crate::fit::levenberg_marquardt;
use crate::physics::CONSTANTS;
use crate::units::num;

pub const DEFAULT_NUMERICAL_APERTURE: f64 = 0.75;

/// Laser spot area π(0.9λ/NA)² in µm².
pub fn spot_area_um2(wavelength_nm: f64, numerical_aperture: f64) -> f64 {
    let r = 0.9 * wavelength_nm * 1e-3 / numerical_aperture;
    PI * r * r
}

/// Γ_PI = σ·λ/(hc·A_spot) in Hz/µW for σ in cm².
pub fn rate_per_power(sigma_pi_cm2: f64, wavelength_nm: f64, numerical_aperture: f64) -> f64 {
    let photons_per_uw =
        1e-6 * wavelength_nm * 1e-9 / (CONSTANTS.planck_si() * CONSTANTS.speed_of_light());
    let area_cm2 = spot_area_um2(wavelength_nm, numerical_aperture) * 1e-8;
    sigma_pi_cm2 * photons_per_uw / area_cm2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IonizationSettings {
    pub modes: VibrationalModeSet,
    pub sigma_el: ElectronicCrossSection,
    pub numerical_aperture: f64,
    pub transform: TransformOptions,
}

impl Default for IonizationSettings {
    fn default() -> Self {
        Self {
            modes: VibrationalModeSet::default(),
            sigma_el: ElectronicCrossSection::default(),
            numerical_aperture: DEFAULT_NUMERICAL_APERTURE,
            transform: TransformOptions::default(),
        }
    }
}

/// Spectral function and cross section prepared once for repeated rate queries.
#[derive(Debug, Clone)]
pub struct IonizationPipeline {
    pub spectral: SpectralFunction,
    pub sigma_el: ElectronicCrossSection,
    pub numerical_aperture: f64,
}

impl IonizationPipeline {
    pub fn new(settings: &IonizationSettings) -> Result<Self> {
        if !(settings.numerical_aperture > 0.0 && settings.numerical_aperture <= 1.0) {
            return Err(Error::validation(
                "ionization.numerical_aperture",
                "must be in (0, 1]",
            ));
        }
        settings.sigma_el.validate()?;
        let a = spectral_function(
            &settings.modes,
            &settings.modes.default_grid(),
            &settings.transform,
        )?;
        Ok(Self {
            spectral: a,
            sigma_el: settings.sigma_el.clone(),
            numerical_aperture: settings.numerical_aperture,
        })
    }

    pub fn sigma_pi_cm2(&self, photon_energies_ev: &[f64]) -> Result<Vec<f64>> {
        convolve_cross_section(&self.sigma_el, &self.spectral, photon_energies_ev)
    }

    pub fn gamma_per_uw(&self, wavelength_nm: f64) -> Result<f64> {
        if !(wavelength_nm > 0.0 && wavelength_nm.is_finite()) {
            return Err(Error::domain(format!(
                "wavelength must be > 0 nm (got {wavelength_nm})"
            )));
        }
        let e = CONSTANTS.hc_ev_nm() / wavelength_nm;
        let s = self.sigma_pi_cm2(&[e])?[0];
        Ok(rate_per_power(s, wavelength_nm, self.numerical_aperture))
    }

    pub fn rate_curve(&self, wavelengths_nm: &[f64]) -> Result<IonizationRateCurve> {
        let gamma = wavelengths_nm
            .iter()
            .map(|&l| self.gamma_per_uw(l))
            .collect::<Result<Vec<_>>>()?;
        let max = gamma.iter().cloned().fold(0.0, f64::max);
        let normalized = gamma
            .iter()
            .map(|&g| if max > 0.0 { g / max } else { 0.0 })
            .collect();
        Ok(IonizationRateCurve {
            wavelengths_nm: wavelengths_nm.to_vec(),
            gamma_per_uw: gamma,
            normalized,
            max_gamma_per_uw: max,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IonizationRateCurve {
    pub wavelengths_nm: Vec<f64>,
    pub gamma_per_uw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub max_gamma_per_uw: f64,
}

impl IonizationRateCurve {
    /// (lambda_nm, gamma_per_uW, normalized) rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda_nm,gamma_per_uW,normalized\n");
        for i in 0..self.wavelengths_nm.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                num(self.wavelengths_nm[i]),
                num(self.gamma_per_uw[i]),
                num(self.normalized[i])
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FermiFit {
    pub threshold_nm: f64,
    pub threshold_err_nm: f64,
    pub width_nm: f64,
    pub width_err_nm: f64,
    pub amplitude: f64,
    pub baseline: f64,
    pub rms_residual: f64,
}

fn fermi(p: &[f64], l: f64) -> f64 {
    p[1] / (1.0 + ((l - p[2]) / p[3].exp()).exp()) + p[0]
}

/// Fits rate(λ) = baseline + amplitude / (1 + exp((λ − λ_th)/w)).
pub fn fit_fermi_threshold(wavelengths_nm: &[f64], rates: &[f64]) -> Result<FermiFit> {
    let n = wavelengths_nm.len();
    if n != rates.len() || n < 6 {
        return Err(Error::FitFailed {
            what: "Fermi threshold",
            reason: "need at least 6 (wavelength, rate) pairs".into(),
        });
    }
    if wavelengths_nm.iter().chain(rates).any(|v| !v.is_finite()) {
        return Err(Error::FitFailed {
            what: "Fermi threshold",
            reason: "non-finite input".into(),
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| wavelengths_nm[a].partial_cmp(&wavelengths_nm[b]).unwrap());
    let x: Vec<f64> = idx.iter().map(|&i| wavelengths_nm[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| rates[i]).collect();
    let span = x[n - 1] - x[0];
    if !(span > 0.0) {
        return Err(Error::FitFailed {
            what: "Fermi threshold",
            reason: "wavelengths do not span a range".into(),
        });
    }
    let k = (n / 4).max(1);
    let short = y[..k].iter().sum::<f64>() / k as f64;
    let long = y[n - k..].iter().sum::<f64>() / k as f64;
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if (short - long).abs() <= 1e-9 * scale.max(1e-300) {
        return Err(Error::FitFailed {
            what: "Fermi threshold",
            reason: "data are flat; no threshold to locate".into(),
        });
    }
    let mid = 0.5 * (short + long);
    let l0 = x
        .windows(2)
        .zip(y.windows(2))
        .find(|(_, yw)| (yw[0] - mid) * (yw[1] - mid) <= 0.0)
        .map_or(x[0] + 0.5 * span, |(xw, _)| 0.5 * (xw[0] + xw[1]));
    let p0 = [long, short - long, l0, (span / 20.0).ln()];
    let f = levenberg_marquardt(
        "Fermi threshold",
        |p| x.iter().zip(&y).map(|(&l, &v)| fermi(p, l) - v).collect(),
        &p0,
    )?;
    let p = &f.params;
    let w = p[3].exp();
    if !(w.is_finite() && w < span) || !(p[2] > x[0] - span && p[2] < x[n - 1] + span) {
        return Err(Error::FitFailed {
            what: "Fermi threshold",
            reason: format!(
                "width {w:.3} nm or threshold {:.3} nm unconstrained by the data (rms residual {:.3e})",
                p[2],
                (f.sum_squares / n as f64).sqrt()
            ),
        });
    }
    Ok(FermiFit {
        threshold_nm: p[2],
        threshold_err_nm: f.std_errors[2],
        width_nm: w,
        width_err_nm: w * f.std_errors[3],
        amplitude: p[1],
        baseline: p[0],
        rms_residual: (f.sum_squares / n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoPhotonModel {
    /// Ionization rate per resonant power, Γ_res (Hz/nW).
    pub resonant_slope_hz_per_nw: f64,
    pub saturation_power_nw: f64,
}

impl Default for TwoPhotonModel {
    fn default() -> Self {
        Self {
            resonant_slope_hz_per_nw: 0.5,
            saturation_power_nw: 20.0,
        }
    }
}

impl TwoPhotonModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.resonant_slope_hz_per_nw >= 0.0 && self.resonant_slope_hz_per_nw.is_finite()) {
            return Err(Error::validation(
                "two_photon.resonant_slope_hz_per_nw",
                "must be >= 0",
            ));
        }
        if !(self.saturation_power_nw > 0.0 && self.saturation_power_nw.is_finite()) {
            return Err(Error::validation(
                "two_photon.saturation_power_nw",
                "must be > 0",
            ));
        }
        Ok(())
    }

    /// Excited-state occupation: half the two-level saturation fraction.
    pub fn excited_fraction(&self, resonant_power_nw: f64) -> f64 {
        let x = resonant_power_nw / self.saturation_power_nw;
        0.5 * x / (1.0 + x)
    }
}

/// γ = Γ_res·P_res + s(P_res)·Γ_PI(λ₂)·P₂ in Hz.
pub fn two_photon_rate(
    resonant_power_nw: f64,
    second_power_uw: f64,
    second_wavelength_nm: f64,
    model: &TwoPhotonModel,
    pipeline: &IonizationPipeline,
) -> Result<f64> {
    model.validate()?;
    if !(resonant_power_nw >= 0.0 && second_power_uw >= 0.0) {
        return Err(Error::domain("laser powers must be >= 0"));
    }
    let direct = model.resonant_slope_hz_per_nw * resonant_power_nw;
    if second_power_uw == 0.0 || resonant_power_nw == 0.0 {
        return Ok(direct);
    }
    let g = pipeline.gamma_per_uw(second_wavelength_nm)?;
    Ok(direct + model.excited_fraction(resonant_power_nw) * g * second_power_uw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_area_at_950_nm() {
        assert!((spot_area_um2(950.0, 0.75) - 4.083).abs() < 1e-3);
    }

    #[test]
    fn prefactor_decreases_with_wavelength() {
        let mut last = f64::INFINITY;
        for l in (850..=1200).step_by(25) {
            let r = rate_per_power(1e-16, l as f64, 0.75);
            assert!(r < last);
            last = r;
        }
        assert_eq!(rate_per_power(0.0, 900.0, 0.75), 0.0);
    }

    #[test]
    fn fermi_fit_noiseless() {
        let x: Vec<f64> = (0..25).map(|i| 880.0 + 5.0 * i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&l| 0.1 + 2.0 / (1.0 + ((l - 948.0) / 6.0).exp()))
            .collect();
        let f = fit_fermi_threshold(&x, &y).unwrap();
        assert!((f.threshold_nm - 948.0).abs() < 0.5);
        assert!((f.width_nm - 6.0).abs() < 0.1);
    }

    #[test]
    fn flat_data_rejected() {
        let x: Vec<f64> = (0..10).map(|i| 900.0 + 10.0 * i as f64).collect();
        assert!(fit_fermi_threshold(&x, &[1.0; 10]).is_err());
        assert!(fit_fermi_threshold(&x[..4], &[1.0; 4]).is_err());
    }
}
