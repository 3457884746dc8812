use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, linear_least_squares};
use crate::units::num;

/// C(t) = exp(−(t/T2)^β), optionally with additive Gaussian noise.
pub fn coherence_decay(
    t2_ms: f64,
    beta: f64,
    times_ms: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(t2_ms > 0.0 && t2_ms.is_finite()) {
        return Err(Error::domain(format!("T2 must be > 0 (got {t2_ms})")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!(
            "stretch exponent must be > 0 (got {beta})"
        )));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::domain("noise sigma must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma).unwrap();
    Ok(times_ms
        .iter()
        .map(|&t| {
            let c = (-(t / t2_ms).powf(beta)).exp();
            if noise_sigma > 0.0 {
                c + noise.sample(&mut rng)
            } else {
                c
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StretchedFit {
    pub t2_ms: f64,
    pub t2_err_ms: f64,
    pub beta: f64,
    pub beta_err: f64,
    /// Covariance of (T2, β).
    pub covariance: [[f64; 2]; 2],
}

pub fn fit_stretched_exponential(times_ms: &[f64], signal: &[f64]) -> Result<StretchedFit> {
    let n = times_ms.len();
    let fail = |reason: &str| Error::FitFailed {
        what: "stretched exponential",
        reason: reason.into(),
    };
    if n != signal.len() || n < 5 {
        return Err(fail("need at least 5 (time, signal) points"));
    }
    if times_ms.windows(2).any(|w| !(w[1] > w[0])) || times_ms[0] < 0.0 {
        return Err(fail("times must be non-negative and increasing"));
    }
    let k = (n / 4).max(1);
    let head = signal[..k].iter().sum::<f64>() / k as f64;
    let tail = signal[n - k..].iter().sum::<f64>() / k as f64;
    if !(head - tail > 0.1) {
        return Err(fail("signal does not decay"));
    }
    // ln(−ln C) = β ln t − β ln T2 on the informative points.
    let pts: Vec<(f64, f64)> = times_ms
        .iter()
        .zip(signal)
        .filter(|(&t, &c)| t > 0.0 && c > 0.05 && c < 0.95)
        .map(|(&t, &c)| (t.ln(), (-c.ln()).ln()))
        .collect();
    let (mut t2, mut beta) = (times_ms[n / 2].max(times_ms[n - 1] / 3.0), 1.0);
    if pts.len() >= 2 {
        let x: Vec<Vec<f64>> = pts.iter().map(|p| vec![1.0, p.0]).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        if let Ok((b, _)) = linear_least_squares(&x, &y) {
            if b[1] > 0.05 && b[1] < 5.0 {
                beta = b[1];
                t2 = (-b[0] / b[1]).exp();
            }
        }
    }
    let f = levenberg_marquardt(
        "stretched exponential",
        |p| {
            let (t2, b) = (p[0].exp(), p[1]);
            times_ms
                .iter()
                .zip(signal)
                .map(|(&t, &c)| (-(t / t2).powf(b)).exp() - c)
                .collect()
        },
        &[t2.ln(), beta],
    )?;
    let t2 = f.params[0].exp();
    let beta = f.params[1];
    if !(beta > 0.0 && beta <= 3.0) {
        return Err(fail(&format!("stretch exponent {beta:.3} outside (0, 3]")));
    }
    let c = &f.covariance;
    // Map ln T2 uncertainties to T2.
    let covariance = [[t2 * t2 * c[0][0], t2 * c[0][1]], [t2 * c[1][0], c[1][1]]];
    Ok(StretchedFit {
        t2_ms: t2,
        t2_err_ms: t2 * f.std_errors[0],
        beta,
        beta_err: f.std_errors[1],
        covariance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DdScalingFit {
    pub exponent: f64,
    pub exponent_err: f64,
    /// Extrapolated T2 at N = 1 (ms).
    pub t2_single_ms: f64,
}

/// Log-log regression of T2(N) = T2(1)·N^p.
pub fn dd_scaling_fit(orders: &[f64], t2_ms: &[f64]) -> Result<DdScalingFit> {
    if orders.len() != t2_ms.len() {
        return Err(Error::domain(
            "orders and T2 values must have the same length",
        ));
    }
    if orders
        .iter()
        .chain(t2_ms)
        .any(|v| !(*v > 0.0 && v.is_finite()))
    {
        return Err(Error::domain("orders and T2 values must be positive"));
    }
    let mut distinct = orders.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::FitFailed {
            what: "DD scaling",
            reason: "need at least 3 distinct sequence orders".into(),
        });
    }
    let x: Vec<Vec<f64>> = orders.iter().map(|n| vec![1.0, n.ln()]).collect();
    let y: Vec<f64> = t2_ms.iter().map(|t| t.ln()).collect();
    let (b, se) = linear_least_squares(&x, &y)?;
    Ok(DdScalingFit {
        exponent: b[1],
        exponent_err: se[1],
        t2_single_ms: b[0].exp(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceDataset {
    pub order: u32,
    pub tau_ms: Vec<f64>,
    pub signal: Vec<f64>,
    pub fit: Option<StretchedFit>,
}

/// (N, tau_ms, signal) rows for several datasets.
pub fn coherence_csv(sets: &[CoherenceDataset]) -> String {
    let mut s = String::from("N,tau_ms,signal\n");
    for d in sets {
        for (t, c) in d.tau_ms.iter().zip(&d.signal) {
            s.push_str(&format!("{},{},{}\n", d.order, num(*t), num(*c)));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(t2: f64) -> Vec<f64> {
        (0..30).map(|i| 3.0 * t2 * i as f64 / 29.0).collect()
    }

    #[test]
    fn decay_trivia() {
        let c = coherence_decay(0.4, 1.0, &[0.0, 0.4], 0.0, 1).unwrap();
        assert_eq!(c[0], 1.0);
        assert!((c[1] - (-1f64).exp()).abs() < 1e-15);
        assert!(coherence_decay(0.0, 1.0, &[1.0], 0.0, 1).is_err());
    }

    #[test]
    fn noiseless_round_trip() {
        let t = times(0.4);
        let c = coherence_decay(0.4, 1.5, &t, 0.0, 1).unwrap();
        let f = fit_stretched_exponential(&t, &c).unwrap();
        assert!((f.t2_ms / 0.4 - 1.0).abs() < 0.01);
        assert!((f.beta / 1.5 - 1.0).abs() < 0.01);
        let c = coherence_decay(70.0, 1.0, &times(70.0), 0.0, 1).unwrap();
        let f = fit_stretched_exponential(&times(70.0), &c).unwrap();
        assert!((f.beta - 1.0).abs() < 0.02);
    }

    #[test]
    fn flat_signal_rejected() {
        let t = times(1.0);
        assert!(fit_stretched_exponential(&t, &vec![0.9; t.len()]).is_err());
    }

    #[test]
    fn dd_exponent() {
        let n = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        let t: Vec<f64> = n.iter().map(|x: &f64| 0.4 * x.powf(2.0 / 3.0)).collect();
        let f = dd_scaling_fit(&n, &t).unwrap();
        assert!((f.exponent - 2.0 / 3.0).abs() < 1e-3);
        let f = dd_scaling_fit(&n, &[1.0; 6]).unwrap();
        assert!(f.exponent.abs() < 1e-12);
        assert!(dd_scaling_fit(&[1.0, 2.0, 2.0], &[1.0, 2.0, 2.0]).is_err());
    }
}
