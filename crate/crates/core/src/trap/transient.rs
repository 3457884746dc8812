use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gillespie::{sample_index, simulate_trajectory, ConditionSchedule};
use super::model::{Condition, Generator, TrapMarkovModel};
use super::stationary::stationary_distribution;
use crate::error::{Error, Result};
use crate::fit::levenberg_marquardt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Steady state of a condition (must be unique).
    Stationary(Condition),
    Distribution(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransientProtocol {
    pub initial: InitialState,
    pub pump: Condition,
    pub max_duration_ms: f64,
    pub points: usize,
    /// Index of the state whose line is probed.
    pub probe_state: usize,
    pub ensemble: usize,
}

impl TransientProtocol {
    pub fn durations_ms(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n)
            .map(|i| self.max_duration_ms * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentialFit {
    pub rate_per_ms: f64,
    pub rate_err_per_ms: f64,
    pub initial: f64,
    pub asymptote: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientResult {
    pub durations_ms: Vec<f64>,
    /// Ensemble-averaged probe occupancy.
    pub occupancy: Vec<f64>,
    /// Exact probe occupancy from the master equation.
    pub expected: Vec<f64>,
    pub fit: Option<ExponentialFit>,
    pub fit_error: Option<String>,
    /// Relaxation rates (ms⁻¹) of the pump generator, i.e. −Re λ for λ ≠ 0.
    pub relaxation_rates_per_ms: Vec<f64>,
    /// Relaxation rate closest to the fitted one.
    pub matched_rate_per_ms: Option<f64>,
}

fn resolve_initial(model: &TrapMarkovModel, init: &InitialState) -> Result<Vec<f64>> {
    let n = model.n_states();
    match init {
        InitialState::Stationary(c) => {
            let st = stationary_distribution(&model.generator(*c)?)?;
            Ok(st.expect_unique()?.to_vec())
        }
        InitialState::Distribution(p) => {
            let s: f64 = p.iter().sum();
            if p.len() != n || p.iter().any(|&v| !(v >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!(
                    "initial distribution must have {n} non-negative entries summing to 1"
                )));
            }
            Ok(p.clone())
        }
    }
}

fn ln_poisson(k: usize, mean: f64) -> f64 {
    k as f64 * mean.ln() - mean - statrs::function::gamma::ln_gamma(k as f64 + 1.0)
}

/// p(t) = p₀·exp(Q t) by uniformization; t in ms, Q in s⁻¹.
pub fn propagate(g: &Generator, p0: &[f64], t_ms: f64) -> Vec<f64> {
    let n = g.n();
    let lambda = g.max_exit_rate() * 1e-3;
    if lambda == 0.0 || t_ms == 0.0 {
        return p0.to_vec();
    }
    let mean = lambda * t_ms;
    let mut v = p0.to_vec();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    let kmax = (mean + 12.0 * mean.sqrt() + 30.0) as usize;
    for k in 0..=kmax {
        let w = ln_poisson(k, mean).exp();
        for (o, x) in out.iter_mut().zip(&v) {
            *o += w * x;
        }
        acc += w;
        if acc > 1.0 - 1e-14 && k as f64 > mean {
            break;
        }
        // v ← v·(I + Q/Λ)
        let mut next = v.clone();
        for i in 0..n {
            for j in 0..n {
                next[j] += v[i] * g.rate(i, j) * 1e-3 / lambda;
            }
        }
        v = next;
    }
    out
}

/// −Re λ (ms⁻¹) for the non-zero eigenvalues of Q.
pub fn relaxation_rates(g: &Generator) -> Vec<f64> {
    let n = g.n();
    let m = DMatrix::from_fn(n, n, |i, j| g.rate(i, j) * 1e-3);
    let scale = g.max_exit_rate() * 1e-3;
    let mut r: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .map(|z| -z.re)
        .filter(|&x| x > 1e-9 * scale.max(1e-300))
        .collect();
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    r.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    r
}

/// y(t) = c + a·e^{−kt}.
pub fn fit_exponential(t: &[f64], y: &[f64]) -> Result<ExponentialFit> {
    if t.len() != y.len() || t.len() < 4 {
        return Err(Error::FitFailed {
            what: "exponential",
            reason: "need at least 4 points".into(),
        });
    }
    let y0 = y[0];
    let yl = *y.last().unwrap();
    let span = y0 - yl;
    if span.abs() < 1e-12 {
        return Err(Error::FitFailed {
            what: "exponential",
            reason: "curve is flat".into(),
        });
    }
    let target = yl + span / std::f64::consts::E;
    let t_e = t
        .iter()
        .zip(y)
        .find(|(_, &v)| (v - target) * span.signum() <= 0.0)
        .map_or(*t.last().unwrap() / 3.0, |(&x, _)| x)
        .max(t[1] - t[0]);
    let p0 = [yl, span, (1.0 / t_e).ln()];
    let f = levenberg_marquardt(
        "exponential",
        |p| {
            let k = p[2].exp();
            t.iter()
                .zip(y)
                .map(|(&x, &v)| p[0] + p[1] * (-k * x).exp() - v)
                .collect()
        },
        &p0,
    )?;
    let k = f.params[2].exp();
    if !k.is_finite() || k > 1e3 / (t[1] - t[0]) {
        return Err(Error::FitFailed {
            what: "exponential",
            reason: format!("rate {k} ms⁻¹ not resolved by the sampling"),
        });
    }
    Ok(ExponentialFit {
        rate_per_ms: k,
        rate_err_per_ms: k * f.std_errors[2],
        initial: f.params[0] + f.params[1],
        asymptote: f.params[0],
    })
}

/// Probe-line occupancy vs pump duration, Monte Carlo and exact, with a single-exponential fit.
pub fn transient_recovery(
    model: &TrapMarkovModel,
    protocol: &TransientProtocol,
    seed: u64,
) -> Result<TransientResult> {
    model.validate()?;
    if !(protocol.max_duration_ms > 0.0 && protocol.max_duration_ms.is_finite()) {
        return Err(Error::domain("pump duration must be > 0 ms"));
    }
    if protocol.probe_state >= model.n_states() {
        return Err(Error::domain("probe state out of range"));
    }
    if protocol.ensemble == 0 {
        return Err(Error::domain("ensemble must have at least one member"));
    }
    let p0 = resolve_initial(model, &protocol.initial)?;
    let g = model.generator(protocol.pump)?;
    let durations = protocol.durations_ms();
    let probe = protocol.probe_state;
    let expected: Vec<f64> = durations
        .iter()
        .map(|&t| propagate(&g, &p0, t)[probe])
        .collect();

    let schedule = ConditionSchedule::constant(protocol.pump);
    let counts = (0..protocol.ensemble)
        .into_par_iter()
        .map(|i| -> Result<Vec<u32>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let s0 = sample_index(&p0, &mut rng);
            let end = protocol.max_duration_ms * (1.0 + 1e-9);
            let tr = simulate_trajectory(model, &schedule, end, Some(s0), &mut rng)?;
            Ok(durations
                .iter()
                .map(|&t| u32::from(tr.state_at(t) == probe))
                .collect())
        })
        .try_reduce(
            || vec![0u32; durations.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    let occupancy: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / protocol.ensemble as f64)
        .collect();

    let rates = relaxation_rates(&g);
    let (fit, fit_error) = match fit_exponential(&durations, &occupancy) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let matched = fit.as_ref().and_then(|f| {
        rates.iter().copied().min_by(|a, b| {
            (a - f.rate_per_ms)
                .abs()
                .partial_cmp(&(b - f.rate_per_ms).abs())
                .unwrap()
        })
    });
    Ok(TransientResult {
        durations_ms: durations,
        occupancy,
        expected,
        fit,
        fit_error,
        relaxation_rates_per_ms: rates,
        matched_rate_per_ms: matched,
    })
}
