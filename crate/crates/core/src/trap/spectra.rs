use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::gillespie::{simulate_trajectory, ConditionSchedule, TrapTrajectory};
use super::model::{Condition, Generator, TrapMarkovModel};
use super::stationary::stationary_distribution;
use crate::error::{Error, Result};
use crate::optics::{
    composite_voigt, excess_broadening, fit_ple, homogeneous_lines, stark_detuning,
    DefectOpticalModel, PleScanSettings, PleSpectrum, ScanGrid,
};
use crate::units::num;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapScanSettings {
    pub grid: ScanGrid,
    pub ple: PleScanSettings,
    pub scans: usize,
    /// Integration time per scan point.
    pub dwell_ms: f64,
    pub e_par_mv_per_m: f64,
    pub e_perp_mv_per_m: f64,
    pub n_local_cm3: f64,
    /// Starting trap state; drawn from the steady state when absent.
    pub initial_state: Option<usize>,
}

impl Default for TrapScanSettings {
    fn default() -> Self {
        Self {
            grid: ScanGrid::around(0.0, 800.0, 201),
            ple: PleScanSettings::default(),
            scans: 20,
            dwell_ms: 0.01,
            e_par_mv_per_m: 0.0,
            e_perp_mv_per_m: 0.0,
            n_local_cm3: 0.0,
            initial_state: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchingRegime {
    /// Many switches per scan point: stationary spectrum of the jump process.
    Fast,
    /// Trajectory time-sliced against the scan.
    Slow,
}

#[derive(Debug, Clone)]
pub struct TrapScanStack {
    pub spectra: Vec<PleSpectrum>,
    pub regime: SwitchingRegime,
    /// Absolute line positions (MHz) of each trap state.
    pub line_centers_mhz: Vec<f64>,
    /// Time fraction in each trap state, per scan.
    pub occupancy_per_scan: Vec<Vec<f64>>,
    pub trajectory: Option<TrapTrajectory>,
}

impl TrapScanStack {
    /// (scan_index, detuning_MHz, counts) rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scan_index,detuning_MHz,counts\n");
        for (k, sp) in self.spectra.iter().enumerate() {
            for (d, c) in sp.detuning_mhz.iter().zip(&sp.counts) {
                s.push_str(&format!("{k},{},{}\n", num(*d), num(*c)));
            }
        }
        s
    }
}

/// Switching rate × dwell above which a scan point averages over the jump process.
const FAST_SWITCHING_THRESHOLD: f64 = 20.0;

/// Stationary emission spectrum of a line jumping between `shifts` (MHz) with
/// generator `g`; Kubo–Anderson form Re[1ᵀ(D − Qᵀ)⁻¹π] per homogeneous line,
/// then convolved with a Gaussian of FWHM `gauss_fwhm`. Not normalized.
pub fn jump_spectrum(
    lines: &[(f64, f64)],
    shifts: &[f64],
    g: &Generator,
    pi: &[f64],
    gauss_fwhm: f64,
) -> impl Fn(f64) -> f64 {
    let n = shifts.len();
    // Rates in µs⁻¹ so that 2π·MHz is the matching angular unit.
    let qt = DMatrix::from_fn(n, n, |i, j| Complex64::new(g.rate(j, i) * 1e-6, 0.0));
    let piv = DVector::from_iterator(n, pi.iter().map(|&p| Complex64::new(p, 0.0)));
    let lines = lines.to_vec();
    let shifts = shifts.to_vec();
    let lorentz = move |x: f64| -> f64 {
        let mut total = 0.0;
        for &(w, fwhm) in &lines {
            if w <= 0.0 {
                continue;
            }
            let mut m = -qt.clone();
            for s in 0..n {
                m[(s, s)] += Complex64::new(PI * fwhm, 2.0 * PI * (x - shifts[s]));
            }
            let sol = m.lu().solve(&piv).expect("jump-spectrum system is regular");
            total += w * sol.iter().map(|z| z.re).sum::<f64>();
        }
        total
    };
    let sigma = gauss_fwhm / (2.0 * (2.0 * LN_2).sqrt());
    let nodes: Vec<(f64, f64)> = if sigma > 0.0 {
        let k = 60;
        let raw: Vec<(f64, f64)> = (-k..=k)
            .map(|i| {
                let u = 5.0 * i as f64 / k as f64;
                (u * sigma, (-0.5 * u * u).exp())
            })
            .collect();
        let norm: f64 = raw.iter().map(|r| r.1).sum();
        raw.into_iter().map(|(u, w)| (u, w / norm)).collect()
    } else {
        vec![(0.0, 1.0)]
    };
    move |x| nodes.iter().map(|&(u, w)| w * lorentz(x - u)).sum()
}

fn sample_counts(mean: f64, noise: bool, rng: &mut ChaCha8Rng) -> Result<f64> {
    if noise && mean > 0.0 {
        Ok(Poisson::new(mean)
            .map_err(|e| Error::Numerical(format!("poisson mean {mean}: {e}")))?
            .sample(rng))
    } else {
        Ok(mean)
    }
}

fn finish_spectrum(
    detuning: Vec<f64>,
    counts: Vec<f64>,
    centre: f64,
    excess: f64,
    grid: &ScanGrid,
) -> PleSpectrum {
    let fit = fit_ple(&detuning, &counts).ok();
    let reliable = grid.contains(centre)
        && fit.is_some_and(|f| grid.contains(f.center_mhz) && f.fwhm_mhz > 0.0);
    PleSpectrum {
        detuning_mhz: detuning,
        counts,
        model_center_mhz: centre,
        excess_fwhm_mhz: excess,
        fit,
        reliable,
    }
}

/// Repeated PLE scans of a defect whose line is Stark-shifted by a switching trap.
pub fn ple_with_trap(
    optical: &DefectOpticalModel,
    trap: &TrapMarkovModel,
    condition: Condition,
    settings: &TrapScanSettings,
    seed: u64,
) -> Result<TrapScanStack> {
    optical.validate()?;
    trap.validate()?;
    settings.grid.validate()?;
    settings.ple.validate()?;
    if settings.scans == 0 {
        return Err(Error::validation(
            "trap_scan.scans",
            "need at least one scan",
        ));
    }
    if !(settings.dwell_ms > 0.0 && settings.dwell_ms.is_finite()) {
        return Err(Error::validation("trap_scan.dwell_ms", "must be > 0"));
    }
    let base = 1e3 * stark_detuning(settings.e_par_mv_per_m, settings.e_perp_mv_per_m, optical);
    let shifts = trap.line_shifts_mhz();
    let centers: Vec<f64> = shifts.iter().map(|s| base + s).collect();
    if let Some(c) = centers.iter().find(|&&c| !settings.grid.contains(c)) {
        return Err(Error::validation(
            "trap_scan.grid",
            format!("scan does not cover the trap line at {c:.1} MHz"),
        ));
    }
    let excess = excess_broadening(settings.n_local_cm3, optical)?;
    let lines = homogeneous_lines(optical, settings.ple.power_nw)?;
    let g = trap.generator(condition)?;
    let n = trap.n_states();
    let detuning = settings.grid.values();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (peak, bg, noise) = (
        settings.ple.peak_counts,
        settings.ple.background_counts,
        settings.ple.noise,
    );

    let fast_pi = if g.max_exit_rate() * 1e-3 * settings.dwell_ms > FAST_SWITCHING_THRESHOLD {
        stationary_distribution(&g)?.unique
    } else {
        None
    };

    if let Some(pi) = fast_pi {
        let spec = jump_spectrum(&lines, &shifts, &g, &pi, excess);
        let one = jump_spectrum(&lines, &[0.0], &Generator::zeros(1), &[1.0], excess);
        let norm = one(0.0);
        let mean: Vec<f64> = detuning
            .iter()
            .map(|&d| bg + peak * spec(d - base) / norm)
            .collect();
        let centre = base + pi.iter().zip(&shifts).map(|(p, s)| p * s).sum::<f64>();
        let mut spectra = Vec::with_capacity(settings.scans);
        for _ in 0..settings.scans {
            let counts = mean
                .iter()
                .map(|&m| sample_counts(m, noise, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            spectra.push(finish_spectrum(
                detuning.clone(),
                counts,
                centre,
                excess,
                &settings.grid,
            ));
        }
        return Ok(TrapScanStack {
            spectra,
            regime: SwitchingRegime::Fast,
            line_centers_mhz: centers,
            occupancy_per_scan: vec![pi; settings.scans],
            trajectory: None,
        });
    }

    let points = detuning.len();
    let scan_ms = points as f64 * settings.dwell_ms;
    let total_ms = scan_ms * settings.scans as f64;
    let tr = simulate_trajectory(
        trap,
        &ConditionSchedule::constant(condition),
        total_ms,
        settings.initial_state,
        &mut rng,
    )?;
    let profile = composite_voigt(&lines, excess);
    let mut spectra = Vec::with_capacity(settings.scans);
    let mut occupancy = Vec::with_capacity(settings.scans);
    for k in 0..settings.scans {
        let t0 = k as f64 * scan_ms;
        let mut counts = Vec::with_capacity(points);
        for (i, &d) in detuning.iter().enumerate() {
            let a = t0 + i as f64 * settings.dwell_ms;
            let frac = tr.occupancy(n, a, a + settings.dwell_ms);
            let m = bg
                + peak
                    * frac
                        .iter()
                        .zip(&centers)
                        .map(|(f, c)| if *f > 0.0 { f * profile(d - c) } else { 0.0 })
                        .sum::<f64>();
            counts.push(sample_counts(m, noise, &mut rng)?);
        }
        let occ = tr.occupancy(n, t0, t0 + scan_ms);
        let centre = occ.iter().zip(&centers).map(|(f, c)| f * c).sum();
        spectra.push(finish_spectrum(
            detuning.clone(),
            counts,
            centre,
            excess,
            &settings.grid,
        ));
        occupancy.push(occ);
    }
    Ok(TrapScanStack {
        spectra,
        regime: SwitchingRegime::Slow,
        line_centers_mhz: centers,
        occupancy_per_scan: occupancy,
        trajectory: Some(tr),
    })
}
