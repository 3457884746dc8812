use std::f64::consts::{LN_2, PI};

use errorfunctions::ComplexErrorFunctions;
use num_complex::Complex64;

use super::model::DefectOpticalModel;
use crate::error::{Error, Result};

const OLIVERO_A: f64 = 0.5346;
const OLIVERO_B: f64 = 0.2166;

/// Lifetime-limited linewidth Δν = 1/(2πτ) in MHz for τ in ns.
pub fn fourier_limit(lifetime_ns: f64) -> Result<f64> {
    if !(lifetime_ns > 0.0) {
        return Err(Error::domain(format!(
            "lifetime must be > 0 ns (got {lifetime_ns})"
        )));
    }
    if lifetime_ns.is_infinite() {
        return Ok(0.0);
    }
    Ok(1e3 / (2.0 * PI * lifetime_ns))
}

/// Voigt FWHM from Lorentzian and Gaussian FWHMs (Olivero–Longbothum).
pub fn olivero_fwhm(lorentz_fwhm: f64, gauss_fwhm: f64) -> f64 {
    OLIVERO_A * lorentz_fwhm
        + (OLIVERO_B * lorentz_fwhm * lorentz_fwhm + gauss_fwhm * gauss_fwhm).sqrt()
}

/// Gaussian FWHM that brings a Lorentzian of `lorentz_fwhm` to a Voigt FWHM of `total`.
pub fn gaussian_fwhm_for_total(lorentz_fwhm: f64, total: f64) -> Result<f64> {
    let base = olivero_fwhm(lorentz_fwhm, 0.0);
    if total < base * (1.0 - 1e-4) {
        return Err(Error::domain(format!(
            "total width {total} MHz is below the homogeneous width {base} MHz"
        )));
    }
    let d = total - OLIVERO_A * lorentz_fwhm;
    Ok((d * d - OLIVERO_B * lorentz_fwhm * lorentz_fwhm)
        .max(0.0)
        .sqrt())
}

/// Peak-normalized Lorentzian.
#[inline]
pub fn lorentzian(detuning: f64, fwhm: f64) -> f64 {
    let u = 2.0 * detuning / fwhm;
    1.0 / (1.0 + u * u)
}

/// Area-normalized Voigt profile (per MHz) via the Faddeeva function.
pub fn voigt(detuning: f64, lorentz_fwhm: f64, gauss_fwhm: f64) -> f64 {
    let gamma = 0.5 * lorentz_fwhm;
    let sigma = gauss_fwhm / (2.0 * (2.0 * LN_2).sqrt());
    if sigma <= 1e-12 * gamma.max(1e-300) {
        return gamma / (PI * (detuning * detuning + gamma * gamma));
    }
    let z = Complex64::new(detuning, gamma) / (sigma * 2f64.sqrt());
    z.w().re / (sigma * (2.0 * PI).sqrt())
}

/// Power-broadened homogeneous lines (weight, FWHM MHz) of the two co-scanned transitions.
pub fn homogeneous_lines(model: &DefectOpticalModel, power_nw: f64) -> Result<[(f64, f64); 2]> {
    if !(power_nw >= 0.0) {
        return Err(Error::domain(format!(
            "power must be >= 0 (got {power_nw})"
        )));
    }
    let broadening = (1.0 + power_nw / model.saturation_power_nw).sqrt();
    Ok([
        (
            model.weight_a1,
            fourier_limit(model.lifetime_a1_ns)? * broadening,
        ),
        (
            model.weight_a2,
            fourier_limit(model.lifetime_a2_ns)? * broadening,
        ),
    ])
}

/// Σ wᵢ·Lᵢ(δ) / Σ wᵢ for peak-normalized Lorentzians.
pub fn composite_lorentzian(lines: &[(f64, f64)], detuning: f64) -> f64 {
    let total: f64 = lines.iter().map(|l| l.0).sum();
    lines
        .iter()
        .filter(|l| l.0 > 0.0)
        .map(|&(w, g)| w * lorentzian(detuning, g))
        .sum::<f64>()
        / total
}

/// FWHM of a symmetric, peak-at-zero profile by bisection on the half-maximum crossing.
pub fn symmetric_fwhm(profile: impl Fn(f64) -> f64, scale_hint: f64) -> f64 {
    let peak = profile(0.0);
    let half = 0.5 * peak;
    let mut hi = scale_hint.max(1e-12);
    while profile(hi) > half {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if profile(mid) > half {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    lo + hi
}

/// FWHM (MHz) of the weighted two-transition resonance seen in a two-laser co-scan.
pub fn effective_two_laser_linewidth(model: &DefectOpticalModel, power_nw: f64) -> Result<f64> {
    model.validate()?;
    let lines = homogeneous_lines(model, power_nw)?;
    let hint = lines.iter().map(|l| l.1).fold(0.0, f64::max);
    Ok(symmetric_fwhm(|d| composite_lorentzian(&lines, d), hint))
}

/// Gaussian FWHM (MHz) of the spectral-diffusion broadening at local electron density `n_cm3`.
pub fn excess_broadening(n_cm3: f64, model: &DefectOpticalModel) -> Result<f64> {
    if !(n_cm3 >= 0.0) {
        return Err(Error::domain(format!(
            "carrier density must be >= 0 (got {n_cm3})"
        )));
    }
    let law = &model.broadening;
    let fl = effective_two_laser_linewidth(model, law.anchor_power_nw)?;
    let g_lo = gaussian_fwhm_for_total(fl, law.low_total_mhz)?;
    let g_hi = gaussian_fwhm_for_total(fl, law.high_total_mhz)?;
    let m = law.midpoint_log10();
    let k = law.steepness_per_decade;
    let logistic = |lg: f64| 1.0 / (1.0 + (-k * (lg - m)).exp());
    let s_lo = logistic(law.low_density_cm3.log10());
    let s_hi = logistic(law.high_density_cm3.log10());
    let s = if n_cm3 == 0.0 {
        0.0
    } else {
        logistic(n_cm3.log10())
    };
    let frac = ((s - s_lo) / (s_hi - s_lo)).clamp(0.0, 1.0);
    Ok(g_lo + (g_hi - g_lo) * frac)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_limits_of_both_transitions() {
        assert!((fourier_limit(6.09).unwrap() - 26.1).abs() < 0.1);
        assert!((fourier_limit(11.35).unwrap() - 14.0).abs() < 0.1);
        assert_eq!(fourier_limit(f64::INFINITY).unwrap(), 0.0);
        assert!(fourier_limit(0.0).is_err());
    }

    #[test]
    fn olivero_inverse_round_trip() {
        let g = gaussian_fwhm_for_total(20.0, 170.0).unwrap();
        assert!((olivero_fwhm(20.0, g) - 170.0).abs() < 1e-9);
        assert!(gaussian_fwhm_for_total(20.0, 5.0).is_err());
    }

    #[test]
    fn voigt_limits_and_normalization() {
        // Pure Lorentzian limit.
        let v = voigt(3.0, 10.0, 0.0);
        let l = 5.0 / (PI * (9.0 + 25.0));
        assert!((v - l).abs() < 1e-12);
        // Area ≈ 1; Lorentzian tails beyond ±2 GHz hold about 0.2 %.
        let h = 0.05;
        let area: f64 = (-40000..=40000)
            .map(|i| voigt(i as f64 * h, 14.0, 30.0) * h)
            .sum();
        let tail = 2.0 * 7.0 / (std::f64::consts::PI * 2000.0);
        assert!((area + tail - 1.0).abs() < 2e-4);
    }

    #[test]
    fn voigt_fwhm_close_to_olivero() {
        for (fl, fg) in [(14.0, 0.0), (14.0, 30.0), (20.0, 160.0), (5.0, 5.0)] {
            let w = symmetric_fwhm(|d| voigt(d, fl, fg), fl + fg);
            assert!(
                (w / olivero_fwhm(fl, fg) - 1.0).abs() < 3e-4,
                "{fl} {fg} {w}"
            );
        }
    }

    #[test]
    fn composite_width_limits() {
        let mut m = DefectOpticalModel {
            lifetime_a1_ns: 8.0,
            lifetime_a2_ns: 8.0,
            weight_a1: 1.0,
            weight_a2: 1.0,
            ..Default::default()
        };
        let single = fourier_limit(8.0).unwrap();
        assert!((effective_two_laser_linewidth(&m, 0.0).unwrap() - single).abs() < 1e-9);
        m = DefectOpticalModel {
            weight_a1: 0.0,
            ..Default::default()
        };
        let w = effective_two_laser_linewidth(&m, 0.0).unwrap();
        assert!((w - fourier_limit(11.35).unwrap()).abs() < 1e-9);
        let w = effective_two_laser_linewidth(&DefectOpticalModel::default(), 0.0).unwrap();
        assert!(w > 14.0 && w < 26.1);
    }

    #[test]
    fn power_broadening_factor() {
        let m = DefectOpticalModel::default();
        let w0 = effective_two_laser_linewidth(&m, 0.0).unwrap();
        let w3 = effective_two_laser_linewidth(&m, 3.0 * m.saturation_power_nw).unwrap();
        assert!((w3 / w0 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn excess_anchors_and_midpoint() {
        let m = DefectOpticalModel::default();
        let fl = effective_two_laser_linewidth(&m, 0.0).unwrap();
        let lo = excess_broadening(0.0, &m).unwrap();
        let hi = excess_broadening(7e13, &m).unwrap();
        assert!((olivero_fwhm(fl, lo) - 40.0).abs() < 1e-9);
        assert!((olivero_fwhm(fl, hi) - 170.0).abs() < 1e-9);
        assert_eq!(excess_broadening(1e12, &m).unwrap(), lo);
        assert_eq!(excess_broadening(1e16, &m).unwrap(), hi);
        let mid = excess_broadening(10f64.powf(m.broadening.midpoint_log10()), &m).unwrap();
        assert!((mid - 0.5 * (lo + hi)).abs() < 1e-9);
        let mut last = 0.0;
        for i in 0..60 {
            let e = excess_broadening(10f64.powf(10.0 + 0.1 * i as f64), &m).unwrap();
            assert!(e >= last);
            last = e;
        }
        assert!(excess_broadening(-1.0, &m).is_err());
    }
}
