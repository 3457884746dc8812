use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use v2sim::photoion::*;

fn poisson(s: f64, n: usize) -> f64 {
    (-s).exp() * s.powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>()
}

fn gauss(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Sideband positions (eV) and weights from the direct double sum of Poisson factors.
fn sidebands(modes: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let (w1, s1) = (1e-3 * modes[0].0, modes[0].1);
    let (w2, s2) = modes.get(1).map_or((0.0, 0.0), |m| (1e-3 * m.0, m.1));
    let mut out = Vec::new();
    for n in 0..30 {
        for m in 0..30 {
            let p = poisson(s1, n) * poisson(s2, m);
            if p >= 1e-16 {
                out.push((n as f64 * w1 + m as f64 * w2, p));
            }
        }
    }
    out
}

fn sideband_oracle(bands: &[(f64, f64)], gamma_ev: f64, e: f64) -> f64 {
    bands.iter().map(|&(c, p)| p * gauss(e - c, gamma_ev)).sum()
}

#[test]
fn single_mode_replica_weights_are_poisson() {
    let m = VibrationalModeSet {
        modes: vec![(30.0, 1.0)],
        broadening_mev: 2.0,
    };
    let a = spectral_function(&m, &m.default_grid(), &TransformOptions::default()).unwrap();
    for n in 0..=5 {
        let c = 0.030 * n as f64;
        let w = a.weight_between(c - 0.015, c + 0.015);
        let expect = (-1f64).exp() / (1..=n).map(|k| k as f64).product::<f64>();
        assert!((w / expect - 1.0).abs() < 0.01, "n={n}: {w} vs {expect}");
    }
    assert!((a.raw_norm - 1.0).abs() < 1e-3);
    assert!((a.first_moment_ev() / 0.030 - 1.0).abs() < 0.01);
}

#[test]
fn two_mode_lineshape_matches_double_sum() {
    let modes = vec![(30.0, 0.7), (47.0, 0.5)];
    let m = VibrationalModeSet {
        modes: modes.clone(),
        broadening_mev: 1.5,
    };
    let a = spectral_function(&m, &m.default_grid(), &TransformOptions::default()).unwrap();
    let bands = sidebands(&modes);
    let peak = a.values.iter().cloned().fold(0.0, f64::max);
    for (&e, &v) in a.energies_ev.iter().zip(&a.values) {
        let o = sideband_oracle(&bands, 0.0015, e);
        assert!((v - o).abs() < 0.01 * peak, "{e}: {v} vs {o}");
    }
    assert!((a.first_moment_ev() / m.relaxation_energy_ev() - 1.0).abs() < 0.01);
}

#[test]
fn norm_and_moment_for_several_mode_sets() {
    for modes in [
        vec![(20.0, 3.0)],
        vec![(36.0, 1.2), (62.0, 0.8)],
        vec![(10.0, 0.2), (25.0, 0.5), (80.0, 1.5)],
    ] {
        let m = VibrationalModeSet {
            modes,
            broadening_mev: 4.0,
        };
        let a = spectral_function(&m, &m.default_grid(), &TransformOptions::default()).unwrap();
        assert!((a.raw_norm - 1.0).abs() < 1e-3, "{}", a.raw_norm);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert!(a.values.iter().all(|&v| v >= 0.0));
        assert!((a.first_moment_ev() / m.relaxation_energy_ev() - 1.0).abs() < 0.01);
    }
}

#[test]
fn delta_like_spectral_function_is_identity() {
    let m = VibrationalModeSet {
        modes: vec![],
        broadening_mev: 0.3,
    };
    let a = spectral_function(&m, &m.default_grid(), &TransformOptions::default()).unwrap();
    let s = ElectronicCrossSection::default();
    let e: Vec<f64> = (0..30).map(|i| 1.33 + 0.01 * i as f64).collect();
    let r = convolve_cross_section(&s, &a, &e).unwrap();
    for (x, v) in e.iter().zip(&r) {
        assert!((v / s.eval(*x) - 1.0).abs() < 0.01, "{x}: {v}");
    }
}

#[test]
fn step_cross_section_matches_riemann_sum() {
    let modes = vec![(30.0, 1.0)];
    let g = 0.003;
    let m = VibrationalModeSet {
        modes: modes.clone(),
        broadening_mev: 3.0,
    };
    let a = spectral_function(&m, &m.default_grid(), &TransformOptions::default()).unwrap();
    let s =
        parse_cross_section_csv("energy_eV,sigma_cm2\n1.0,0\n1.31,0\n1.3100001,1e-16\n3.0,1e-16\n")
            .unwrap();
    let bands = sidebands(&modes);
    let e: Vec<f64> = (0..50).map(|i| 1.30 + 0.005 * i as f64).collect();
    let r = convolve_cross_section(&s, &a, &e).unwrap();
    let h = 1e-5;
    for (x, v) in e.iter().zip(&r) {
        let mut acc = 0.0;
        let mut ep = x - 0.3 + 0.5 * h;
        while ep < x + 0.03 {
            acc += s.eval(ep) / ep * sideband_oracle(&bands, g, x - ep) * h;
            ep += h;
        }
        let oracle = x * acc;
        if oracle > 1e-18 {
            assert!((v / oracle - 1.0).abs() < 0.01, "{x}: {v} vs {oracle}");
        } else {
            assert!(*v < 2e-18);
        }
    }
    // Staircase: a rise near each replica onset.
    let at = |x: f64| convolve_cross_section(&s, &a, &[x]).unwrap()[0];
    assert!(at(1.325) > 0.3e-16 && at(1.325) < 0.45e-16);
    assert!(at(1.355) > 0.6e-16);
}

#[test]
fn rate_curve_is_normalized_and_vanishes_below_threshold() {
    let p = IonizationPipeline::new(&IonizationSettings::default()).unwrap();
    let l: Vec<f64> = (0..=64).map(|i| 880.0 + 5.0 * i as f64).collect();
    let c = p.rate_curve(&l).unwrap();
    let max = c.normalized.iter().cloned().fold(0.0, f64::max);
    assert_eq!(max, 1.0);
    assert!(c.normalized.iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert!(p.gamma_per_uw(1100.0).unwrap() < 1e-6 * c.max_gamma_per_uw);
    // Order of magnitude of the published maximum (absolute σ_el unknown).
    assert!(c.max_gamma_per_uw > 1e3 && c.max_gamma_per_uw < 1e6);
}

#[test]
fn fermi_fit_on_noisy_curves() {
    let x: Vec<f64> = (0..20).map(|i| 880.0 + 7.0 * i as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut errs = Vec::new();
    for _ in 0..30 {
        let y: Vec<f64> = x
            .iter()
            .map(|&l| {
                (0.05 + 1.0 / (1.0 + ((l - 948.0) / 8.0).exp())) * (1.0 + noise.sample(&mut rng))
            })
            .collect();
        errs.push((fit_fermi_threshold(&x, &y).unwrap().threshold_nm - 948.0).abs());
    }
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(errs[15] < 2.0, "{errs:?}");
}

#[test]
fn two_photon_rate_properties() {
    let p = IonizationPipeline::new(&IonizationSettings::default()).unwrap();
    let m = TwoPhotonModel::default();
    assert_eq!(two_photon_rate(0.0, 0.0, 900.0, &m, &p).unwrap(), 0.0);
    let a = two_photon_rate(1.0, 0.0, 900.0, &m, &p).unwrap();
    let b = two_photon_rate(2.0, 0.0, 900.0, &m, &p).unwrap();
    assert!((b / a - 2.0).abs() < 1e-12);
    let base = two_photon_rate(5.0, 0.0, 900.0, &m, &p).unwrap();
    let one = two_photon_rate(5.0, 1.0, 900.0, &m, &p).unwrap() - base;
    let two = two_photon_rate(5.0, 2.0, 900.0, &m, &p).unwrap() - base;
    assert!(one > 0.0 && (two / one - 2.0).abs() < 1e-12);
    let far = two_photon_rate(5.0, 10.0, 1100.0, &m, &p).unwrap();
    assert!((far - base).abs() < 1e-6 * base);
    assert!(two_photon_rate(-1.0, 0.0, 900.0, &m, &p).is_err());
}
