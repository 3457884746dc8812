use std::sync::Arc;

use v2sim::error::ErrorCategory;
use v2sim::junction::*;
use v2sim::physics::{CarrierStatistics, MaterialStack};
use v2sim::Error;

const Q: f64 = 1.602_176_634e-19;
const EPS0: f64 = 8.854_187_812_8e-12;
const KB_EV: f64 = 8.617_333_262e-5;

fn thick_column_stack() -> MaterialStack {
    MaterialStack {
        epi_thickness_um: 100.0,
        substrate_thickness_um: 0.0,
        ..MaterialStack::default()
    }
}

fn column_mesh(depth_um: f64, n: usize) -> Arc<Mesh2D> {
    Arc::new(Mesh2D::column(graded_axis(0.0, depth_um, n, 0.0, 2.0)).unwrap())
}

fn coarse_device_mesh(stack: &MaterialStack) -> Arc<Mesh2D> {
    let spec = MeshSpec {
        nx: 100,
        nz: 50,
        ..MeshSpec::default()
    };
    Arc::new(Mesh2D::stripe_device(stack, &spec).unwrap())
}

#[test]
fn one_dimensional_width_matches_depletion_approximation() {
    let stack = thick_column_stack();
    let mesh = column_mesh(100.0, 1500);
    let t = 300.0;
    let vt = KB_EV * t;
    let nd = stack.doping_epi_cm3 * 1e6;
    let nc = stack.nc_m3 * (t / 15.0_f64).powf(1.5);
    let vbi = stack.barrier_height_ev() - vt * (nc / nd).ln();
    let eps = stack.static_relative_permittivity * EPS0;
    for vr in [0.0, 10.0, 50.0, 150.0] {
        let sol = solve_poisson(&stack, &mesh, -vr, t, &SolverOptions::default()).unwrap();
        let w_num = sol.depleted_charge_width_um(0);
        let w_ref = (2.0 * eps * (vbi + vr) / (Q * nd)).sqrt() * 1e6;
        let rel = (w_num / w_ref - 1.0).abs();
        assert!(rel < 0.02, "V_R = {vr}: {w_num} vs {w_ref} µm");
        assert!(sol.report().gauss_law_error < 1e-3);
    }
}

#[test]
fn undoped_stack_is_laplace_limit() {
    let stack = thick_column_stack().undoped();
    let mesh = Arc::new(Mesh2D::column((0..51).map(|i| i as f64 * 2.0).collect()).unwrap());
    let sol = solve_poisson(&stack, &mesh, -10.0, 300.0, &SolverOptions::default()).unwrap();
    let phi = sol.potential_v();
    let top = phi[0];
    for (k, &z) in mesh.z().iter().enumerate() {
        let expected = top * (1.0 - z / 100.0);
        assert!(
            (phi[k] - expected).abs() < 1e-9 * (1.0 + top.abs()),
            "z = {z}"
        );
        assert!(sol.electron_density_cm3()[k] < 1e-3);
    }
    // Parallel plate: E_par = V / d.
    let (par, perp) = sol.field_at(DefectSite::new(0.0, 37.0)).unwrap();
    assert!((par - top / 100.0).abs() < 1e-9);
    assert_eq!(perp, 0.0);
}

#[test]
fn table_stack_is_depleted_under_contact_at_zero_bias() {
    let stack = MaterialStack::default();
    let mesh = coarse_device_mesh(&stack);
    let sol = solve_poisson(&stack, &mesh, 0.0, 15.0, &SolverOptions::default()).unwrap();
    let centre = DefectSite::new(-stack.contact.half_width_um, 2.0);
    assert!(sol.density_at(centre).unwrap() < 1e12);
    assert!(sol.depleted_area_um2(1e12) > 0.0);
    assert!(!sol.depletion_boundary(1e12).is_empty());
    assert!(sol.report().gauss_law_error < 1e-3);
    for (&n, &d) in sol
        .electron_density_cm3()
        .iter()
        .zip(sol.ionized_donors_cm3())
    {
        assert!(n >= 0.0);
        assert!(d >= 0.0 && d <= stack.doping_substrate_cm3 * (1.0 + 1e-12));
    }
}

#[test]
fn perpendicular_field_dominates_at_strong_reverse_bias() {
    let stack = MaterialStack::default();
    let mesh = coarse_device_mesh(&stack);
    let sol = solve_poisson(&stack, &mesh, -150.0, 15.0, &SolverOptions::default()).unwrap();
    let (par, perp) = sol.field_at(DefectSite::new(11.2, 2.0)).unwrap();
    assert!(perp.abs() > par.abs(), "par {par} perp {perp}");
}

#[test]
fn depleted_area_monotone_in_bias_and_temperature() {
    let stack = MaterialStack::default();
    let mesh = coarse_device_mesh(&stack);
    let opts = SolverOptions::default();
    let biases = [0.0, -10.0, -50.0];
    let temps = [300.0, 100.0, 15.0];
    let mut area = [[0.0; 3]; 3];
    for (ti, &t) in temps.iter().enumerate() {
        let mut warm: Option<FieldSolution> = None;
        for (bi, &b) in biases.iter().enumerate() {
            let sol = solve_poisson_from(&stack, &mesh, b, t, &opts, warm.as_ref()).unwrap();
            area[ti][bi] = sol.depleted_area_um2(1e12);
            warm = Some(sol);
        }
    }
    for ti in 0..3 {
        for bi in 0..3 {
            if bi > 0 {
                assert!(area[ti][bi] >= area[ti][bi - 1], "{area:?}");
            }
            if ti > 0 {
                assert!(area[ti][bi] >= area[ti - 1][bi], "{area:?}");
            }
        }
    }
}

#[test]
fn depletion_voltage_regimes_and_distance_trend() {
    let stack = MaterialStack::default();
    let mesh = coarse_device_mesh(&stack);
    let opts = SolverOptions::default();
    let search = DepletionSearch::default();
    let under = depletion_voltage(
        &stack,
        &mesh,
        DefectSite::new(-25.0, 2.0),
        15.0,
        &search,
        &opts,
    )
    .unwrap();
    assert!(
        matches!(under, DepletionVoltage::AtOrAbove { .. }),
        "{under:?}"
    );

    let mut last = 0.0;
    for d in [5.0, 11.2, 20.0] {
        let v = depletion_voltage(&stack, &mesh, DefectSite::new(d, 2.0), 15.0, &search, &opts)
            .unwrap()
            .voltage()
            .expect("depleted within range");
        assert!(v <= last, "U_d({d}) = {v} above {last}");
        last = v;
    }

    let far = depletion_voltage(
        &stack,
        &mesh,
        DefectSite::new(45.0, 2.0),
        15.0,
        &search,
        &opts,
    )
    .unwrap();
    match far {
        DepletionVoltage::NotDepletedInRange { .. } => {}
        other => {
            let v = other.voltage().unwrap();
            assert!(v <= -100.0 || v <= last, "far site {v}");
        }
    }
}

#[test]
fn grid_refinement_changes_depletion_voltage_by_under_five_percent() {
    let stack = MaterialStack::default();
    let spec = MeshSpec {
        nx: 100,
        nz: 50,
        ..MeshSpec::default()
    };
    let site = DefectSite::new(11.2, 2.0);
    let opts = SolverOptions::default();
    let search = DepletionSearch::default();
    let coarse = Arc::new(Mesh2D::stripe_device(&stack, &spec).unwrap());
    let fine = Arc::new(Mesh2D::stripe_device(&stack, &spec.refined()).unwrap());
    let a = depletion_voltage(&stack, &coarse, site, 15.0, &search, &opts)
        .unwrap()
        .voltage()
        .unwrap();
    let b = depletion_voltage(&stack, &fine, site, 15.0, &search, &opts)
        .unwrap()
        .voltage()
        .unwrap();
    assert!(((a - b) / b).abs() < 0.05, "coarse {a} fine {b}");
}

#[test]
fn fermi_dirac_matches_boltzmann_when_non_degenerate() {
    let stack = thick_column_stack();
    let mesh = column_mesh(100.0, 400);
    let mb = solve_poisson(&stack, &mesh, -10.0, 300.0, &SolverOptions::default()).unwrap();
    let fd_opts = SolverOptions {
        statistics: CarrierStatistics::FermiDirac,
        ..SolverOptions::default()
    };
    let fd = solve_poisson(&stack, &mesh, -10.0, 300.0, &fd_opts).unwrap();
    let (a, b) = (
        mb.depleted_charge_width_um(0),
        fd.depleted_charge_width_um(0),
    );
    assert!((a / b - 1.0).abs() < 1e-3);
}

#[test]
fn coarse_mesh_is_flagged_under_resolved() {
    let stack = MaterialStack::default();
    let mesh = Arc::new(
        Mesh2D::new(
            vec![-25.0, -10.0, 0.0, 20.0, 50.0],
            vec![0.0, 4.0, 8.0, 10.0, 13.0],
            (-25.0, 0.0),
        )
        .unwrap(),
    );
    let sol = solve_poisson(&stack, &mesh, -5.0, 15.0, &SolverOptions::default()).unwrap();
    assert!(sol.report().under_resolved);
    assert!(!sol.report().warnings.is_empty());
}

#[test]
fn iteration_cap_is_numerical_error() {
    let stack = MaterialStack::default();
    let mesh = coarse_device_mesh(&stack);
    let opts = SolverOptions {
        max_iterations: 1,
        ..SolverOptions::default()
    };
    let err = solve_poisson(&stack, &mesh, -50.0, 15.0, &opts).unwrap_err();
    assert!(matches!(err, Error::NoConvergence { .. }));
    assert_eq!(err.category(), ErrorCategory::Numerical);
}

#[test]
fn preconditions_are_enforced() {
    let stack = MaterialStack::default();
    let mesh = column_mesh(13.0, 50);
    let opts = SolverOptions::default();
    assert!(solve_poisson(&stack, &mesh, -600.0, 15.0, &opts).is_err());
    assert!(solve_poisson(&stack, &mesh, 0.0, 0.0, &opts).is_err());
    let err = depletion_voltage(
        &stack,
        &mesh,
        DefectSite::new(0.0, 12.0),
        15.0,
        &DepletionSearch::default(),
        &opts,
    )
    .unwrap_err();
    assert_eq!(err.category(), ErrorCategory::Validation);
}

#[test]
fn forward_voltage_rises_on_cooling() {
    let stack = MaterialStack::default();
    let hot = forward_voltage(&stack, 300.0, 1.0, 10e-3).unwrap();
    let cold = forward_voltage(&stack, 15.0, 1.0, 10e-3).unwrap();
    assert!(cold > hot);
}

#[test]
fn calibrated_ideality_reaches_tens_of_milliamps_near_19_volts() {
    let stack = MaterialStack::default();
    // Ideality that puts 30 mA at 19 V, found from the unit-ideality voltage.
    let v1 = forward_voltage(&stack, 10.0, 1.0, 30e-3).unwrap();
    let ideality = 19.0 / v1;
    assert!(ideality > 1.0);
    let i = iv_curve(&stack, 10.0, ideality, &[19.0]).unwrap()[0];
    assert!((10e-3..100e-3).contains(&i), "I = {i}");
    let below = iv_curve(&stack, 10.0, ideality, &[18.5]).unwrap()[0];
    assert!(below < 1e-3);
}
