use std::sync::Arc;

use v2sim::junction::*;
use v2sim::optics::*;
use v2sim::physics::MaterialStack;

fn device() -> (MaterialStack, Arc<Mesh2D>) {
    let stack = MaterialStack::default();
    let spec = MeshSpec {
        nx: 100,
        nz: 50,
        ..MeshSpec::default()
    };
    let mesh = Arc::new(Mesh2D::stripe_device(&stack, &spec).unwrap());
    (stack, mesh)
}

#[test]
fn voigt_fwhm_monotone_in_both_widths() {
    let ls = [1.0, 5.0, 14.0, 26.1, 60.0];
    let gs = [0.0, 3.0, 20.0, 80.0, 165.0];
    let w = |l: f64, g: f64| symmetric_fwhm(|d| voigt(d, l, g), l + g);
    for i in 0..5 {
        for j in 0..5 {
            if i > 0 {
                assert!(w(ls[i], gs[j]) > w(ls[i - 1], gs[j]));
            }
            if j > 0 {
                assert!(w(ls[i], gs[j]) > w(ls[i], gs[j - 1]));
            }
        }
    }
}

#[test]
fn scan_at_strong_reverse_bias_is_centred_on_stark_prediction() {
    let (stack, mesh) = device();
    let site = DefectSite::new(11.2, 2.0);
    let sol = solve_poisson(&stack, &mesh, -150.0, 15.0, &SolverOptions::default()).unwrap();
    let (par, perp) = sol.field_at(site).unwrap();
    let n = sol.density_at(site).unwrap();
    let model = DefectOpticalModel::default();
    let predicted = 1e3 * stark_detuning(par, perp, &model);
    let grid = ScanGrid::around(predicted, 300.0, 301);
    let scan = synthesize_ple_scan(
        &model,
        (par, perp),
        n,
        &grid,
        &PleScanSettings::default(),
        3,
    )
    .unwrap();
    assert!(scan.reliable);
    let fit = scan.fit.unwrap();
    assert!(((fit.center_mhz - predicted) / predicted).abs() < 0.02);
}

#[test]
fn voltage_sweep_recovers_quadratic_coefficient() {
    let (stack, mesh) = device();
    let site = DefectSite::new(11.2, 2.0);
    let model = DefectOpticalModel::default();
    let settings = PleScanSettings::default();
    let mut points = Vec::new();
    let mut warm: Option<FieldSolution> = None;
    for (i, v) in (0..=15).map(|i| -10.0 * i as f64).enumerate() {
        let sol = solve_poisson_from(
            &stack,
            &mesh,
            v,
            15.0,
            &SolverOptions::default(),
            warm.as_ref(),
        )
        .unwrap();
        let (par, perp) = sol.field_at(site).unwrap();
        let n = sol.density_at(site).unwrap();
        let predicted = 1e3 * stark_detuning(par, perp, &model);
        let grid = ScanGrid::around(predicted, 600.0, 401);
        let scan =
            synthesize_ple_scan(&model, (par, perp), n, &grid, &settings, 100 + i as u64).unwrap();
        let fit = scan.fit.expect("fit");
        points.push((par, perp, fit.center_mhz / 1e3));
        warm = Some(sol);
    }
    let f = fit_stark_coefficients(&points).unwrap();
    assert!(
        (f.perp_quadratic / model.stark_perp_quadratic - 1.0).abs() < 0.05,
        "{f:?}"
    );
}
