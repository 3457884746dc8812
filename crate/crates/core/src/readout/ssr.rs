use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::optics::lorentzian;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsrSettings {
    /// Mean counts per repetition in the bright spin state.
    pub bright_counts_per_rep: f64,
    pub dark_counts_per_rep: f64,
    /// Spin-flip probability after each repetition.
    pub flip_probability: f64,
    pub repetitions: usize,
    pub shots_per_state: usize,
    /// Static per-shot line offset spread (MHz) reducing the bright rate.
    pub detuning_sigma_mhz: f64,
    pub linewidth_mhz: f64,
}

impl Default for SsrSettings {
    fn default() -> Self {
        Self {
            bright_counts_per_rep: 0.2,
            dark_counts_per_rep: 0.02,
            flip_probability: 0.002,
            repetitions: 100,
            shots_per_state: 20_000,
            detuning_sigma_mhz: 0.0,
            linewidth_mhz: 20.0,
        }
    }
}

impl SsrSettings {
    pub fn validate(&self) -> Result<()> {
        for (path, v) in [
            ("ssr.bright_counts_per_rep", self.bright_counts_per_rep),
            ("ssr.dark_counts_per_rep", self.dark_counts_per_rep),
            ("ssr.detuning_sigma_mhz", self.detuning_sigma_mhz),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(path, "must be >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::validation(
                "ssr.flip_probability",
                "must lie in [0, 1]",
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::validation("ssr.repetitions", "must be >= 1"));
        }
        if self.shots_per_state == 0 {
            return Err(Error::validation("ssr.shots_per_state", "must be >= 1"));
        }
        if !(self.linewidth_mhz > 0.0 && self.linewidth_mhz.is_finite()) {
            return Err(Error::validation("ssr.linewidth_mhz", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonMixture {
    /// Weight of the high-mean component.
    pub weight_high: f64,
    pub mean_low: f64,
    pub mean_high: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsrResult {
    pub bright: Vec<u64>,
    pub dark: Vec<u64>,
    pub mixture: Option<PoissonMixture>,
    /// Counts ≥ cut are assigned bright.
    pub cut: Option<u64>,
    /// 1 − overlap of the fitted components at the optimal cut.
    pub fidelity: Option<f64>,
    pub fit_error: Option<String>,
    /// Assignment fidelity at the cut, using the known preparation labels.
    pub labelled_fidelity: Option<f64>,
}

fn ln_poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0)
}

fn poisson_cdf_below(cut: u64, mean: f64) -> f64 {
    (0..cut)
        .map(|k| ln_poisson_pmf(k, mean).exp())
        .sum::<f64>()
        .min(1.0)
}

/// Two-component Poisson mixture by expectation–maximization.
pub fn fit_poisson_mixture(counts: &[u64]) -> Result<PoissonMixture> {
    if counts.len() < 2 {
        return Err(Error::FitFailed {
            what: "Poisson mixture",
            reason: "need at least two shots".into(),
        });
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let half = sorted.len() / 2;
    let mean = |s: &[u64]| s.iter().sum::<u64>() as f64 / s.len() as f64;
    let (mut lo, mut hi, mut w): (f64, f64, f64) =
        (mean(&sorted[..half]), mean(&sorted[half..]), 0.5);
    let n = counts.len() as f64;
    let mut last_ll = f64::NEG_INFINITY;
    for it in 1..=2000 {
        let (mut sw, mut sx_hi, mut sx_lo, mut ll) = (0.0, 0.0, 0.0, 0.0);
        for &k in counts {
            let a = w.ln() + ln_poisson_pmf(k, hi);
            let b = (1.0 - w).ln() + ln_poisson_pmf(k, lo);
            let m = a.max(b);
            let r = if m == f64::NEG_INFINITY {
                0.5
            } else {
                let (ea, eb) = ((a - m).exp(), (b - m).exp());
                ll += m + (ea + eb).ln();
                ea / (ea + eb)
            };
            sw += r;
            sx_hi += r * k as f64;
            sx_lo += (1.0 - r) * k as f64;
        }
        let nw = (sw / n).clamp(1e-12, 1.0 - 1e-12);
        let nhi = if sw > 0.0 { sx_hi / sw } else { hi };
        let nlo = if n - sw > 0.0 { sx_lo / (n - sw) } else { lo };
        let delta = (nw - w).abs() + (nhi - hi).abs() + (nlo - lo).abs();
        w = nw;
        hi = nhi;
        lo = nlo;
        // Flat likelihood ridges (near-identical components) stop on the log-likelihood.
        let stalled = (ll - last_ll).abs() <= 1e-10 * ll.abs();
        last_ll = ll;
        if delta < 1e-10 * (1.0 + hi) || stalled {
            let (lo, hi, w) = if lo <= hi {
                (lo, hi, w)
            } else {
                (hi, lo, 1.0 - w)
            };
            return Ok(PoissonMixture {
                weight_high: w,
                mean_low: lo,
                mean_high: hi,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "Poisson mixture EM",
        iterations: 2000,
        residual: f64::NAN,
    })
}

/// Cut maximizing ½[P(bright ≥ c) + P(dark < c)] and the resulting fidelity.
pub fn optimal_cut(mean_dark: f64, mean_bright: f64) -> (u64, f64) {
    let top = (mean_bright.max(mean_dark) + 10.0 * mean_bright.max(mean_dark).sqrt() + 10.0) as u64;
    let mut best = (0, 0.5);
    for c in 0..=top {
        let f = 0.5 * (1.0 - poisson_cdf_below(c, mean_bright) + poisson_cdf_below(c, mean_dark));
        if f > best.1 + 1e-15 {
            best = (c, f);
        }
    }
    best
}

fn run_shot<R: Rng>(s: &SsrSettings, start_bright: bool, rng: &mut R) -> Result<u64> {
    let bright_rate = if s.detuning_sigma_mhz > 0.0 {
        let d: f64 = Normal::new(0.0, s.detuning_sigma_mhz).unwrap().sample(rng);
        s.bright_counts_per_rep * lorentzian(d, s.linewidth_mhz)
    } else {
        s.bright_counts_per_rep
    };
    let mut bright = start_bright;
    let mut total = 0u64;
    for _ in 0..s.repetitions {
        let m = if bright {
            bright_rate
        } else {
            s.dark_counts_per_rep
        };
        if m > 0.0 {
            total += Poisson::new(m)
                .map_err(|e| Error::Numerical(format!("poisson mean {m}: {e}")))?
                .sample(rng) as u64;
        }
        if s.flip_probability > 0.0 && rng.random::<f64>() < s.flip_probability {
            bright = !bright;
        }
    }
    Ok(total)
}

/// Repetitive single-shot readout of a bright/dark two-state emitter.
pub fn simulate_ssr(settings: &SsrSettings, seed: u64) -> Result<SsrResult> {
    settings.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bright = Vec::with_capacity(settings.shots_per_state);
    let mut dark = Vec::with_capacity(settings.shots_per_state);
    for _ in 0..settings.shots_per_state {
        bright.push(run_shot(settings, true, &mut rng)?);
        dark.push(run_shot(settings, false, &mut rng)?);
    }
    let pooled: Vec<u64> = bright.iter().chain(&dark).copied().collect();
    let (mixture, fit_error) = match fit_poisson_mixture(&pooled) {
        Ok(m) => (Some(m), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (cut, fidelity, labelled) = match mixture {
        Some(m) => {
            let (c, f) = optimal_cut(m.mean_low, m.mean_high);
            let nb = bright.iter().filter(|&&k| k >= c).count() as f64;
            let nd = dark.iter().filter(|&&k| k < c).count() as f64;
            let lf = 0.5 * (nb + nd) / settings.shots_per_state as f64;
            (Some(c), Some(f), Some(lf))
        }
        None => (None, None, None),
    };
    Ok(SsrResult {
        bright,
        dark,
        mixture,
        cut,
        fidelity,
        fit_error,
        labelled_fidelity: labelled,
    })
}
