use proptest::prelude::*;

use v2sim::physics::*;
use v2sim::units::Kelvin;

const KB_EV: f64 = 8.617_333_262e-5;

/// Plain bisection on log10(n) for n = N_D / (1 + g (n/Nc) e^{E_d/kT}), holes neglected.
fn bisection_density_cm3(stack: &MaterialStack, t: f64) -> f64 {
    let nc = stack.nc_m3 * (t / 15.0_f64).powf(1.5) * 1e-6;
    let nd = stack.doping_epi_cm3;
    let k = stack.donor_degeneracy * (stack.donor_ionization_energy_ev / (KB_EV * t)).exp() / nc;
    let f = |log_n: f64| {
        let n = 10f64.powf(log_n);
        n - nd / (1.0 + k * n)
    };
    let (mut lo, mut hi) = (-30.0, nd.log10());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    10f64.powf(0.5 * (lo + hi))
}

#[test]
fn epi_density_matches_bisection_oracle() {
    let stack = MaterialStack::default();
    for t in [15.0, 30.0, 100.0, 300.0] {
        let n = equilibrium_bulk_density(&stack, Layer::Epi, Kelvin(t))
            .unwrap()
            .electron_density
            .value();
        let oracle = bisection_density_cm3(&stack, t);
        assert!((n / oracle - 1.0).abs() < 5e-7, "T = {t}: {n} vs {oracle}");
    }
    // Freeze-out at 15 K, near-full ionization at 300 K.
    let cold = equilibrium_bulk_density(&stack, Layer::Epi, Kelvin(15.0)).unwrap();
    assert!(cold.electron_density.value() < 1e-3 * stack.doping_epi_cm3);
    let hot = equilibrium_bulk_density(&stack, Layer::Epi, Kelvin(300.0)).unwrap();
    assert!(hot.electron_density.value() > 0.95 * stack.doping_epi_cm3);
}

proptest! {
    #[test]
    fn density_is_monotone_in_temperature(t in 4.0f64..600.0, dt in 0.5f64..50.0) {
        let stack = MaterialStack::default();
        let a = equilibrium_bulk_density(&stack, Layer::Epi, Kelvin(t)).unwrap();
        let b = equilibrium_bulk_density(&stack, Layer::Epi, Kelvin(t + dt)).unwrap();
        prop_assert!(b.electron_density.value() >= a.electron_density.value());
    }

    #[test]
    fn full_ionization_bounds_incomplete(t in 4.0f64..600.0) {
        let stack = MaterialStack::default();
        let inc = equilibrium_bulk_density(&stack, Layer::Epi, Kelvin(t)).unwrap();
        let full = equilibrium_bulk_density_with(
            &stack,
            Layer::Epi,
            Kelvin(t),
            DonorIonization::Full,
            CarrierStatistics::Boltzmann,
        )
        .unwrap();
        prop_assert!(inc.electron_density.value() <= full.electron_density.value() * (1.0 + 1e-12));
    }
}
