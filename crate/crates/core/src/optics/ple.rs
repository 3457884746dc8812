use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::lineshape::{excess_broadening, homogeneous_lines, voigt};
use super::model::DefectOpticalModel;
use super::stark::stark_detuning;
use crate::error::{Error, Result};
use crate::fit::levenberg_marquardt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanGrid {
    pub start_mhz: f64,
    pub stop_mhz: f64,
    pub points: usize,
}

impl ScanGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.start_mhz.is_finite()
            && self.stop_mhz.is_finite()
            && self.stop_mhz > self.start_mhz)
        {
            return Err(Error::validation(
                "scan.stop_mhz",
                "need start_mhz < stop_mhz",
            ));
        }
        if self.points < 8 {
            return Err(Error::validation("scan.points", "need at least 8 points"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.stop_mhz - self.start_mhz) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points)
            .map(|i| self.start_mhz + i as f64 * self.step())
            .collect()
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.start_mhz && v <= self.stop_mhz
    }

    /// Symmetric grid around `centre`.
    pub fn around(centre: f64, half_span: f64, points: usize) -> Self {
        Self {
            start_mhz: centre - half_span,
            stop_mhz: centre + half_span,
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PleScanSettings {
    pub power_nw: f64,
    /// Mean counts per bin at the line maximum.
    pub peak_counts: f64,
    pub background_counts: f64,
    /// Poisson noise when true; noiseless expectation otherwise.
    pub noise: bool,
}

impl Default for PleScanSettings {
    fn default() -> Self {
        Self {
            power_nw: 0.0,
            peak_counts: 1000.0,
            background_counts: 10.0,
            noise: true,
        }
    }
}

impl PleScanSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.power_nw >= 0.0) {
            return Err(Error::validation("ple.power_nw", "must be >= 0"));
        }
        if !(self.peak_counts > 0.0 && self.peak_counts.is_finite()) {
            return Err(Error::validation("ple.peak_counts", "must be > 0"));
        }
        if !(self.background_counts >= 0.0 && self.background_counts.is_finite()) {
            return Err(Error::validation("ple.background_counts", "must be >= 0"));
        }
        Ok(())
    }
}

/// Pseudo-Voigt fit of a PLE scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PleFit {
    pub center_mhz: f64,
    pub center_err_mhz: f64,
    pub fwhm_mhz: f64,
    pub fwhm_err_mhz: f64,
    pub amplitude: f64,
    pub background: f64,
    /// Lorentzian fraction of the pseudo-Voigt.
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PleSpectrum {
    pub detuning_mhz: Vec<f64>,
    pub counts: Vec<f64>,
    /// Line centre from the Stark shift.
    pub model_center_mhz: f64,
    /// Gaussian FWHM applied on top of the homogeneous lines.
    pub excess_fwhm_mhz: f64,
    pub fit: Option<PleFit>,
    /// False when the line or the fitted centre falls outside the scan, or the fit failed.
    pub reliable: bool,
}

/// Peak-normalized composite Voigt profile centred at zero.
pub fn composite_voigt(lines: &[(f64, f64)], gauss_fwhm: f64) -> impl Fn(f64) -> f64 + '_ {
    let raw = move |d: f64| -> f64 {
        lines
            .iter()
            .filter(|l| l.0 > 0.0)
            .map(|&(w, g)| w * voigt(d, g, gauss_fwhm))
            .sum()
    };
    let peak = raw(0.0);
    move |d| raw(d) / peak
}

pub fn synthesize_ple_scan(
    model: &DefectOpticalModel,
    field: (f64, f64),
    n_local_cm3: f64,
    grid: &ScanGrid,
    settings: &PleScanSettings,
    seed: u64,
) -> Result<PleSpectrum> {
    model.validate()?;
    grid.validate()?;
    settings.validate()?;
    let centre = 1e3 * stark_detuning(field.0, field.1, model);
    let excess = excess_broadening(n_local_cm3, model)?;
    let lines = homogeneous_lines(model, settings.power_nw)?;
    let profile = composite_voigt(&lines, excess);
    let detuning = grid.values();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Vec::with_capacity(detuning.len());
    for &d in &detuning {
        let mean = settings.background_counts + settings.peak_counts * profile(d - centre);
        let c = if settings.noise && mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::Numerical(format!("poisson mean {mean}: {e}")))?
                .sample(&mut rng)
        } else {
            mean
        };
        counts.push(c);
    }
    let fit = fit_ple(&detuning, &counts).ok();
    let reliable = grid.contains(centre)
        && fit.is_some_and(|f| grid.contains(f.center_mhz) && f.fwhm_mhz > 0.0);
    Ok(PleSpectrum {
        detuning_mhz: detuning,
        counts,
        model_center_mhz: centre,
        excess_fwhm_mhz: excess,
        fit,
        reliable,
    })
}

fn pseudo_voigt(p: &[f64], x: f64) -> f64 {
    let (b, a, c, f) = (p[0], p[1], p[2], p[3].abs());
    let eta = logistic(p[4]);
    let u = 2.0 * (x - c) / f;
    let l = 1.0 / (1.0 + u * u);
    let g = (-std::f64::consts::LN_2 * u * u).exp();
    b + a * (eta * l + (1.0 - eta) * g)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fits background + amplitude·pseudo-Voigt(centre, FWHM, η) with Poisson weights.
pub fn fit_ple(detuning: &[f64], counts: &[f64]) -> Result<PleFit> {
    if detuning.len() != counts.len() || detuning.len() < 8 {
        return Err(Error::FitFailed {
            what: "PLE pseudo-Voigt",
            reason: "need at least 8 matching points".into(),
        });
    }
    let (imax, &cmax) = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let cmin = counts.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = 0.5 * (cmax + cmin);
    let above: Vec<f64> = detuning
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c >= half)
        .map(|(&d, _)| d)
        .collect();
    let step = (detuning[detuning.len() - 1] - detuning[0]) / (detuning.len() - 1) as f64;
    let w0 = (above.last().unwrap() - above[0]).max(2.0 * step.abs());
    let p0 = [cmin, cmax - cmin, detuning[imax], w0, 0.0];
    let weights: Vec<f64> = counts.iter().map(|&c| 1.0 / c.max(1.0).sqrt()).collect();
    let fit = levenberg_marquardt(
        "PLE pseudo-Voigt",
        |p| {
            detuning
                .iter()
                .zip(counts)
                .zip(&weights)
                .map(|((&x, &y), &w)| (pseudo_voigt(p, x) - y) * w)
                .collect()
        },
        &p0,
    )?;
    let p = &fit.params;
    let fwhm = p[3].abs();
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(Error::FitFailed {
            what: "PLE pseudo-Voigt",
            reason: "degenerate width".into(),
        });
    }
    Ok(PleFit {
        center_mhz: p[2],
        center_err_mhz: fit.std_errors[2],
        fwhm_mhz: fwhm,
        fwhm_err_mhz: fit.std_errors[3],
        amplitude: p[1],
        background: p[0],
        eta: logistic(p[4]),
    })
}
