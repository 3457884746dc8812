use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::num;

/// Phonon modes with partial Huang–Rhys factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VibrationalModeSet {
    /// (ħω in meV, S_k).
    pub modes: Vec<(f64, f64)>,
    /// Gaussian standard deviation applied to every replica (meV).
    pub broadening_mev: f64,
}

impl Default for VibrationalModeSet {
    fn default() -> Self {
        Self {
            modes: vec![(36.0, 1.2), (62.0, 0.8)],
            broadening_mev: 5.0,
        }
    }
}

impl VibrationalModeSet {
    pub fn validate(&self) -> Result<()> {
        for (i, &(e, s)) in self.modes.iter().enumerate() {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::validation(
                    format!("modes[{i}].energy_meV"),
                    "must be > 0",
                ));
            }
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::validation(format!("modes[{i}].S_k"), "must be >= 0"));
            }
        }
        if !(self.broadening_mev > 0.0 && self.broadening_mev.is_finite()) {
            return Err(Error::validation("broadening_mev", "must be > 0"));
        }
        Ok(())
    }

    pub fn total_huang_rhys(&self) -> f64 {
        self.modes.iter().map(|m| m.1).sum()
    }

    /// Σ S_k ħω_k in eV.
    pub fn relaxation_energy_ev(&self) -> f64 {
        1e-3 * self.modes.iter().map(|&(e, s)| e * s).sum::<f64>()
    }

    /// Grid covering the mean ± 8 standard deviations with ≥ 8 points per σ_γ.
    pub fn default_grid(&self) -> EnergyGrid {
        let g = 1e-3 * self.broadening_mev;
        let var: f64 = self
            .modes
            .iter()
            .map(|&(e, s)| s * (1e-3 * e).powi(2))
            .sum::<f64>()
            + g * g;
        let mean = self.relaxation_energy_ev();
        let half = 8.0 * var.sqrt() + 6.0 * g;
        let start = (mean - half).min(-6.0 * g);
        let stop = mean + half;
        let points = (((stop - start) / (g / 8.0)).ceil() as usize + 1).clamp(513, 20001);
        EnergyGrid {
            start_ev: start,
            stop_ev: stop,
            points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyGrid {
    pub start_ev: f64,
    pub stop_ev: f64,
    pub points: usize,
}

impl EnergyGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.start_ev.is_finite() && self.stop_ev.is_finite() && self.stop_ev > self.start_ev)
        {
            return Err(Error::validation("grid", "need start_ev < stop_ev"));
        }
        if self.points < 3 {
            return Err(Error::validation("grid.points", "need at least 3 points"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.stop_ev - self.start_ev) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points)
            .map(|i| self.start_ev + i as f64 * self.step())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformOptions {
    pub time_points: usize,
    /// Upper time limit in units of ħ/γ.
    pub t_max_widths: f64,
    /// Largest tolerated norm deficit on the energy grid.
    pub max_norm_deficit: f64,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self {
            time_points: 1 << 14,
            t_max_widths: 10.0,
            max_norm_deficit: 0.01,
        }
    }
}

/// Normalized vibrational lineshape on an energy grid (eV, 1/eV).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    pub energies_ev: Vec<f64>,
    pub values: Vec<f64>,
    /// ∫A before normalization.
    pub raw_norm: f64,
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

impl SpectralFunction {
    /// Builds from samples, clipping negatives and normalizing to unit area.
    pub fn from_samples(energies_ev: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if energies_ev.len() != values.len() || energies_ev.len() < 2 {
            return Err(Error::domain(
                "spectral function needs matching energy and value arrays",
            ));
        }
        if energies_ev.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("spectral-function energies must increase"));
        }
        let mut values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        let raw_norm = trapezoid(&energies_ev, &values);
        if !(raw_norm > 0.0 && raw_norm.is_finite()) {
            return Err(Error::Numerical("spectral function has zero area".into()));
        }
        for v in &mut values {
            *v /= raw_norm;
        }
        Ok(Self {
            energies_ev,
            values,
            raw_norm,
        })
    }

    pub fn norm(&self) -> f64 {
        trapezoid(&self.energies_ev, &self.values)
    }

    pub fn first_moment_ev(&self) -> f64 {
        let y: Vec<f64> = self
            .energies_ev
            .iter()
            .zip(&self.values)
            .map(|(e, v)| e * v)
            .collect();
        trapezoid(&self.energies_ev, &y)
    }

    /// ∫A over [lo, hi] on the grid points inside the window.
    pub fn weight_between(&self, lo: f64, hi: f64) -> f64 {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .energies_ev
            .iter()
            .zip(&self.values)
            .filter(|(e, _)| **e >= lo && **e <= hi)
            .map(|(e, v)| (*e, *v))
            .unzip();
        trapezoid(&x, &y)
    }

    pub fn eval(&self, e: f64) -> f64 {
        let x = &self.energies_ev;
        if e < x[0] || e > x[x.len() - 1] {
            return 0.0;
        }
        let i = x.partition_point(|&v| v <= e).clamp(1, x.len() - 1);
        let t = (e - x[i - 1]) / (x[i] - x[i - 1]);
        self.values[i - 1] + t * (self.values[i] - self.values[i - 1])
    }

    /// (energy_eV, A_per_eV) rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("energy_eV,A_per_eV\n");
        for (e, v) in self.energies_ev.iter().zip(&self.values) {
            s.push_str(&format!("{},{}\n", num(*e), num(*v)));
        }
        s
    }
}

/// A(ε) = (1/π)·Re ∫₀^∞ G(t)·exp(−γ²t²/2ħ²)·e^{iεt/ħ} dt with
/// G(t) = exp(Σ S_k (e^{−iω_k t} − 1)), by direct quadrature.
pub fn spectral_function(
    modes: &VibrationalModeSet,
    grid: &EnergyGrid,
    options: &TransformOptions,
) -> Result<SpectralFunction> {
    modes.validate()?;
    grid.validate()?;
    if options.time_points < 16 || !(options.t_max_widths > 0.0) {
        return Err(Error::validation(
            "transform",
            "need >= 16 time points and t_max_widths > 0",
        ));
    }
    // Time in units of ħ/eV.
    let gamma = 1e-3 * modes.broadening_mev;
    let tmax = options.t_max_widths / gamma;
    let nt = options.time_points;
    let dt = tmax / (nt - 1) as f64;
    let wk: Vec<(f64, f64)> = modes.modes.iter().map(|&(e, s)| (1e-3 * e, s)).collect();
    // Weighted G(t)·D(t) with trapezoid end weights.
    let kernel: Vec<(f64, f64)> = (0..nt)
        .map(|j| {
            let t = j as f64 * dt;
            let (mut re, mut im) = (0.0, 0.0);
            for &(w, s) in &wk {
                re += s * ((w * t).cos() - 1.0);
                im -= s * (w * t).sin();
            }
            let damp = (re - 0.5 * gamma * gamma * t * t).exp();
            let edge = if j == 0 || j == nt - 1 { 0.5 } else { 1.0 };
            let a = damp * edge * dt;
            (a * im.cos(), a * im.sin())
        })
        .collect();
    let energies = grid.values();
    let values: Vec<f64> = energies
        .par_iter()
        .map(|&e| {
            let mut acc = 0.0;
            for (j, &(gr, gi)) in kernel.iter().enumerate() {
                let (s, c) = (e * j as f64 * dt).sin_cos();
                acc += gr * c - gi * s;
            }
            acc / std::f64::consts::PI
        })
        .collect();
    let a = SpectralFunction::from_samples(energies, values)?;
    let deficit = (1.0 - a.raw_norm).abs();
    if deficit > options.max_norm_deficit {
        return Err(Error::domain(format!(
            "energy grid [{:.4}, {:.4}] eV holds {:.2}% of the spectral weight (deficit {:.2}%)",
            grid.start_ev,
            grid.stop_ev,
            100.0 * a.raw_norm,
            100.0 * deficit
        )));
    }
    Ok(a)
}
