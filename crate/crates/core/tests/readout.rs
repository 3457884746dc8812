use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF, DiscreteCDF, Poisson};

use v2sim::optics::DefectOpticalModel;
use v2sim::readout::*;

fn settings(n: usize) -> CrcSettings {
    CrcSettings {
        n_events: n,
        linewidth_mhz: Some(20.0),
        ..Default::default()
    }
}

fn counts(recs: &[PhotonCountRecord]) -> Vec<f64> {
    recs.iter().map(|r| r.counts as f64).collect()
}

fn dispersion(c: &[f64]) -> f64 {
    let (mu, sd) = count_moments(c).unwrap();
    sd * sd / mu
}

/// χ² goodness of fit against Poisson(mean), pooling bins with expectation below 5.
fn chi2_poisson_p(c: &[f64], mean: f64) -> f64 {
    let n = c.len() as f64;
    let pois = Poisson::new(mean).unwrap();
    let max = c.iter().cloned().fold(0.0, f64::max) as u64;
    let mut observed = vec![0.0; max as usize + 2];
    for &x in c {
        observed[x as usize] += 1.0;
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for k in 0..=max {
        o_acc += observed[k as usize];
        e_acc += n * (pois.cdf(k) - if k == 0 { 0.0 } else { pois.cdf(k - 1) });
        if e_acc >= 5.0 && n * (1.0 - pois.cdf(k)) >= 5.0 {
            bins.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    // Upper tail absorbs the rest.
    let tail_e = n - bins.iter().map(|b| b.1).sum::<f64>();
    let tail_o = n - bins.iter().map(|b| b.0).sum::<f64>();
    bins.push((tail_o, tail_e));
    let chi2: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (bins.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(chi2)
}

#[test]
fn frozen_line_is_poissonian() {
    let model = DefectOpticalModel::default();
    let s = settings(100_000);
    let recs = simulate_crc(&model, &DiffusionModel::frozen(), &s, 11).unwrap();
    let c = counts(&recs);
    let (mu, _) = count_moments(&c).unwrap();
    let expected = s.window_ms * (s.peak_kcps + s.background_kcps);
    assert!((mu / expected - 1.0).abs() < 0.01, "{mu}");
    let r = dispersion(&c);
    assert!((0.95..=1.05).contains(&r), "{r}");
    let p = chi2_poisson_p(&c, expected);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn diffusing_line_is_overdispersed() {
    let model = DefectOpticalModel::default();
    let s = settings(100_000);
    let recs = simulate_crc(&model, &DiffusionModel::ou(60.0, 2.0), &s, 12).unwrap();
    assert!(dispersion(&counts(&recs)) > 1.5);
}

#[test]
fn hwhm_reference_mean() {
    let model = DefectOpticalModel::default();
    let s = settings(100_000);
    let hwhm = 10.0;
    let reference = CrcSettings {
        laser_offset_mhz: hwhm,
        ..s.clone()
    };
    let recs = simulate_crc(&model, &DiffusionModel::frozen(), &reference, 13).unwrap();
    let (mu, sd) = count_moments(&counts(&recs)).unwrap();
    let expected = s.window_ms * (s.background_kcps + 0.5 * s.peak_kcps);
    assert!((mu / expected - 1.0).abs() < 0.01);
    assert_eq!(
        hwhm_reference_threshold(&model, &s, 13).unwrap(),
        threshold_from_moments(mu, sd, 3.0)
    );
}

#[test]
fn success_and_false_accept_monotone() {
    let model = DefectOpticalModel::default();
    let s = settings(20_000);
    let recs = simulate_crc(&model, &DiffusionModel::ou(30.0, 2.0), &s, 14).unwrap();
    let mut prev = crc_success_rate(&recs, 0, 10.0);
    assert_eq!(prev.success, 1.0);
    for t in 1..=80 {
        let o = crc_success_rate(&recs, t, 10.0);
        assert!(o.success <= prev.success && o.false_accept <= prev.false_accept);
        prev = o;
    }
    assert_eq!(crc_success_rate(&recs, 10_000, 10.0).success, 0.0);
}

#[test]
fn ou_autocorrelation() {
    let tau = 2.0;
    let d = DiffusionModel::ou(5.0, tau);
    let x = d
        .sample_offsets(400_000, 0.5, &mut ChaCha8Rng::seed_from_u64(15))
        .unwrap();
    let n = x.len();
    let var = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    for lag in [1usize, 2, 4] {
        let c = (0..n - lag).map(|i| x[i] * x[i + lag]).sum::<f64>() / (n - lag) as f64 / var;
        let expected = (-(lag as f64) * 0.5 / tau).exp();
        assert!(
            (c / expected - 1.0).abs() < 0.05,
            "lag {lag}: {c} vs {expected}"
        );
    }
}

#[test]
fn calibrated_pair_orders_success() {
    let model = DefectOpticalModel::default();
    let s = settings(20_000);
    let sigma_dep = calibrate_ou_sigma(&model, &s, 2.0, 0.60, 21).unwrap();
    let sigma_und = calibrate_ou_sigma(&model, &s, 2.0, 0.35, 21).unwrap();
    assert!(sigma_dep < sigma_und);
    let threshold = hwhm_reference_threshold(&model, &s, 22).unwrap();
    let dep = simulate_crc(&model, &DiffusionModel::ou(sigma_dep, 2.0), &s, 23).unwrap();
    let und = simulate_crc(&model, &DiffusionModel::ou(sigma_und, 2.0), &s, 23).unwrap();
    let a = crc_success_rate(&dep, threshold, 10.0).success;
    let b = crc_success_rate(&und, threshold, 10.0).success;
    assert!(
        (a - 0.60).abs() < 0.10 && (b - 0.35).abs() < 0.10,
        "{a} {b}"
    );
    for t in 0..=80 {
        assert!(
            crc_success_rate(&dep, t, 10.0).success >= crc_success_rate(&und, t, 10.0).success,
            "threshold {t}"
        );
    }
}

/// max over cuts of ½[P(B ≥ c) + P(D < c)] from the Poisson CDFs.
fn overlap_oracle(dark: f64, bright: f64) -> f64 {
    let b = Poisson::new(bright).unwrap();
    let d = Poisson::new(dark).unwrap();
    (1..200u64)
        .map(|c| 0.5 * ((1.0 - b.cdf(c - 1)) + d.cdf(c - 1)))
        .fold(0.5, f64::max)
}

#[test]
fn ssr_separated_rates() {
    let s = SsrSettings {
        bright_counts_per_rep: 2.0,
        dark_counts_per_rep: 0.2,
        flip_probability: 0.0,
        repetitions: 10,
        shots_per_state: 20_000,
        ..Default::default()
    };
    let r = simulate_ssr(&s, 31).unwrap();
    let oracle = overlap_oracle(2.0, 20.0);
    let f = r.fidelity.unwrap();
    assert!(f > 0.99 && (f - oracle).abs() < 0.003, "{f} vs {oracle}");
    assert!((r.labelled_fidelity.unwrap() - oracle).abs() < 0.005);
    assert!((optimal_cut(2.0, 20.0).1 - oracle).abs() < 1e-12);
}

#[test]
fn ssr_diffusion_fills_overlap() {
    let base = SsrSettings {
        shots_per_state: 10_000,
        ..Default::default()
    };
    let diffusing = SsrSettings {
        detuning_sigma_mhz: 30.0,
        ..base.clone()
    };
    let a = simulate_ssr(&base, 32).unwrap();
    let b = simulate_ssr(&diffusing, 32).unwrap();
    // Shared mass of the two normalized histograms.
    let overlap = |r: &SsrResult| {
        let max = *r.bright.iter().chain(&r.dark).max().unwrap() as usize;
        let hist = |v: &[u64]| {
            let mut h = vec![0.0; max + 1];
            for &k in v {
                h[k as usize] += 1.0 / v.len() as f64;
            }
            h
        };
        let (hb, hd) = (hist(&r.bright), hist(&r.dark));
        hb.iter().zip(&hd).map(|(x, y)| x.min(*y)).sum::<f64>()
    };
    assert!(
        overlap(&b) > overlap(&a) + 0.05,
        "{} {}",
        overlap(&a),
        overlap(&b)
    );
    assert!(b.labelled_fidelity.unwrap() < a.labelled_fidelity.unwrap());
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

#[test]
fn stretched_fit_noisy_median() {
    let t2 = 0.4;
    let times: Vec<f64> = (0..30).map(|i| 3.0 * t2 * i as f64 / 29.0).collect();
    let est: Vec<f64> = (0..100)
        .map(|seed| {
            let c = coherence_decay(t2, 1.5, &times, 0.03, seed).unwrap();
            fit_stretched_exponential(&times, &c).unwrap().t2_ms
        })
        .collect();
    assert!((median(est) / t2 - 1.0).abs() < 0.05);
}

#[test]
fn dd_exponent_noisy_median() {
    let n = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let noise = Normal::new(0.0, 0.05).unwrap();
    let est: Vec<f64> = (0..100)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t: Vec<f64> = n
                .iter()
                .map(|x: &f64| 0.4 * x.powf(2.0 / 3.0) * (1.0 + noise.sample(&mut rng)))
                .collect();
            dd_scaling_fit(&n, &t).unwrap().exponent
        })
        .collect();
    assert!((median(est) - 2.0 / 3.0).abs() < 0.05);
}

#[test]
fn coherence_csv_layout() {
    let set = CoherenceDataset {
        order: 1,
        tau_ms: vec![0.0, 0.5],
        signal: vec![1.0, 0.25],
        fit: None,
    };
    assert_eq!(
        coherence_csv(&[set]),
        "N,tau_ms,signal\n1,0,1\n1,0.5,0.25\n"
    );
}
