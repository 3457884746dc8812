use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::diffusion::DiffusionModel;
use crate::error::{Error, Result};
use crate::optics::{effective_two_laser_linewidth, lorentzian, DefectOpticalModel};
use crate::units::num;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonCountRecord {
    pub index: usize,
    pub window_ms: f64,
    pub counts: u64,
    /// Line position relative to the laser at the event (MHz).
    pub detuning_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrcSettings {
    pub peak_kcps: f64,
    pub background_kcps: f64,
    pub window_ms: f64,
    pub n_events: usize,
    /// Time between consecutive checks, for the diffusion dynamics.
    pub event_spacing_ms: f64,
    /// Static laser detuning from the unperturbed line (MHz).
    pub laser_offset_mhz: f64,
    /// Homogeneous FWHM; the optical model's two-laser linewidth when absent.
    pub linewidth_mhz: Option<f64>,
}

impl Default for CrcSettings {
    fn default() -> Self {
        Self {
            peak_kcps: 40.0,
            background_kcps: 0.5,
            window_ms: 1.0,
            n_events: 100_000,
            event_spacing_ms: 5.0,
            laser_offset_mhz: 0.0,
            linewidth_mhz: None,
        }
    }
}

impl CrcSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_kcps >= 0.0 && self.peak_kcps.is_finite()) {
            return Err(Error::validation("crc.peak_kcps", "must be >= 0"));
        }
        if !(self.background_kcps >= 0.0 && self.background_kcps.is_finite()) {
            return Err(Error::validation("crc.background_kcps", "must be >= 0"));
        }
        if !(self.window_ms > 0.0 && self.window_ms.is_finite()) {
            return Err(Error::validation("crc.window_ms", "must be > 0"));
        }
        if self.n_events == 0 {
            return Err(Error::validation("crc.n_events", "must be >= 1"));
        }
        if !(self.event_spacing_ms > 0.0 && self.event_spacing_ms.is_finite()) {
            return Err(Error::validation("crc.event_spacing_ms", "must be > 0"));
        }
        if !self.laser_offset_mhz.is_finite() {
            return Err(Error::validation("crc.laser_offset_mhz", "must be finite"));
        }
        if let Some(w) = self.linewidth_mhz {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::validation("crc.linewidth_mhz", "must be > 0"));
            }
        }
        Ok(())
    }

    pub fn linewidth(&self, optical: &DefectOpticalModel) -> Result<f64> {
        match self.linewidth_mhz {
            Some(w) => Ok(w),
            None => effective_two_laser_linewidth(optical, 0.0),
        }
    }
}

/// Photon counts of repeated charge-resonance checks under spectral diffusion.
pub fn simulate_crc(
    optical: &DefectOpticalModel,
    diffusion: &DiffusionModel,
    settings: &CrcSettings,
    seed: u64,
) -> Result<Vec<PhotonCountRecord>> {
    settings.validate()?;
    let fwhm = settings.linewidth(optical)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets =
        diffusion.sample_offsets(settings.n_events, settings.event_spacing_ms, &mut rng)?;
    let mut out = Vec::with_capacity(settings.n_events);
    for (index, off) in offsets.into_iter().enumerate() {
        let d = off - settings.laser_offset_mhz;
        let mean = settings.window_ms
            * (settings.background_kcps + settings.peak_kcps * lorentzian(d, fwhm));
        let counts = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::Numerical(format!("poisson mean {mean}: {e}")))?
                .sample(&mut rng) as u64
        } else {
            0
        };
        out.push(PhotonCountRecord {
            index,
            window_ms: settings.window_ms,
            counts,
            detuning_mhz: d,
        });
    }
    Ok(out)
}

/// Sample mean and (population) standard deviation.
pub fn count_moments(counts: &[f64]) -> Result<(f64, f64)> {
    if counts.is_empty() {
        return Err(Error::domain("count distribution is empty"));
    }
    let n = counts.len() as f64;
    let mu = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mu).powi(2)).sum::<f64>() / n;
    Ok((mu, var.sqrt()))
}

/// Smallest integer ≥ μ + k·σ.
pub fn threshold_from_moments(mu: f64, sigma: f64, k_sigma: f64) -> u64 {
    (mu + k_sigma * sigma - 1e-9).ceil().max(0.0) as u64
}

/// μ + 3σ threshold from a reference count distribution.
pub fn threshold_for_confidence(counts: &[f64]) -> Result<u64> {
    let (mu, sigma) = count_moments(counts)?;
    Ok(threshold_from_moments(mu, sigma, 3.0))
}

/// Threshold from a frozen line detuned by the natural HWHM.
pub fn hwhm_reference_threshold(
    optical: &DefectOpticalModel,
    settings: &CrcSettings,
    seed: u64,
) -> Result<u64> {
    let hwhm = 0.5 * settings.linewidth(optical)?;
    let reference = CrcSettings {
        laser_offset_mhz: settings.laser_offset_mhz + hwhm,
        ..settings.clone()
    };
    let recs = simulate_crc(optical, &DiffusionModel::frozen(), &reference, seed)?;
    let counts: Vec<f64> = recs.iter().map(|r| r.counts as f64).collect();
    threshold_for_confidence(&counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrcOutcome {
    pub threshold: u64,
    /// Fraction of all events passing the check.
    pub success: f64,
    /// Fraction of all events passing while the line sits outside the HWHM window.
    pub false_accept: f64,
    /// Same, relative to the passing events only.
    pub false_accept_given_pass: f64,
}

pub fn crc_success_rate(
    records: &[PhotonCountRecord],
    threshold: u64,
    hwhm_mhz: f64,
) -> CrcOutcome {
    let n = records.len().max(1) as f64;
    let pass: Vec<&PhotonCountRecord> = records.iter().filter(|r| r.counts >= threshold).collect();
    let outside = pass
        .iter()
        .filter(|r| r.detuning_mhz.abs() > hwhm_mhz)
        .count() as f64;
    CrcOutcome {
        threshold,
        success: pass.len() as f64 / n,
        false_accept: outside / n,
        false_accept_given_pass: if pass.is_empty() {
            0.0
        } else {
            outside / pass.len() as f64
        },
    }
}

/// (counts, frequency, scenario_label) rows.
pub fn histogram_csv(counts: &[u64], label: &str) -> String {
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut h = vec![0usize; max + 1];
    for &c in counts {
        h[c as usize] += 1;
    }
    let n = counts.len().max(1) as f64;
    let mut s = String::from("counts,frequency,scenario_label\n");
    for (c, k) in h.iter().enumerate() {
        s.push_str(&format!("{c},{},{label}\n", num(*k as f64 / n)));
    }
    s
}

/// OU standard deviation (MHz) at which the CRC success rate equals `target`.
pub fn calibrate_ou_sigma(
    optical: &DefectOpticalModel,
    settings: &CrcSettings,
    tau_ms: f64,
    target_success: f64,
    seed: u64,
) -> Result<f64> {
    if !(0.0 < target_success && target_success < 1.0) {
        return Err(Error::domain("target success must lie in (0, 1)"));
    }
    let fwhm = settings.linewidth(optical)?;
    let threshold = hwhm_reference_threshold(optical, settings, seed ^ 0x5eed)?;
    let success = |sigma: f64| -> Result<f64> {
        let d = if sigma > 0.0 {
            DiffusionModel::ou(sigma, tau_ms)
        } else {
            DiffusionModel::frozen()
        };
        let recs = simulate_crc(optical, &d, settings, seed)?;
        Ok(crc_success_rate(&recs, threshold, 0.5 * fwhm).success)
    };
    let mut lo = 0.0;
    let mut hi = 20.0 * fwhm;
    let (s_lo, s_hi) = (success(lo)?, success(hi)?);
    if !(s_lo >= target_success && s_hi <= target_success) {
        return Err(Error::Bracket {
            what: "OU sigma calibration",
            lo,
            hi,
            f_lo: s_lo - target_success,
            f_hi: s_hi - target_success,
        });
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if success(mid)? >= target_success {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-3 * fwhm {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_by_arithmetic() {
        assert_eq!(threshold_from_moments(100.0, 10.0, 3.0), 130);
        assert_eq!(threshold_from_moments(25.0, 5.0, 3.0), 40);
        assert_eq!(threshold_from_moments(25.0, 5.01, 3.0), 41);
        assert!(threshold_for_confidence(&[]).is_err());
    }

    #[test]
    fn success_limits() {
        let recs: Vec<PhotonCountRecord> = (0..10)
            .map(|i| PhotonCountRecord {
                index: i,
                window_ms: 1.0,
                counts: i as u64,
                detuning_mhz: i as f64,
            })
            .collect();
        assert_eq!(crc_success_rate(&recs, 0, 5.0).success, 1.0);
        assert_eq!(crc_success_rate(&recs, u64::MAX, 5.0).success, 0.0);
        let o = crc_success_rate(&recs, 4, 5.0);
        assert!((o.success - 0.6).abs() < 1e-12);
        assert!((o.false_accept - 0.4).abs() < 1e-12);
    }

    #[test]
    fn histogram_rows() {
        let s = histogram_csv(&[0, 2, 2], "x");
        assert_eq!(s, "counts,frequency,scenario_label\n0,0.3333333333333333,x\n1,0,x\n2,0.6666666666666666,x\n");
    }
}
