use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{rebase, Command, Scenario};
use super::output::{num, opt, CsvTable};
use crate::error::{Error, Result};
use crate::junction::{
    depletion_voltage, forward_voltage, iv_curve, solve_poisson, solve_poisson_from, DefectSite,
    FieldSolution, Mesh2D,
};
use crate::optics::{
    composite_voigt, excess_broadening, homogeneous_lines, stark_detuning, symmetric_fwhm,
    synthesize_ple_scan, ScanGrid,
};
use crate::photoion::{
    fit_fermi_threshold, parse_cross_section_csv, parse_mode_csv, two_photon_rate,
    IonizationPipeline,
};
use crate::readout::{
    calibrate_ou_sigma, coherence_decay, count_moments, crc_success_rate, dd_scaling_fit,
    fit_stretched_exponential, histogram_csv, hwhm_reference_threshold, simulate_crc, simulate_ssr,
    CoherenceDataset, DiffusionMode,
};
use crate::trap::{ple_with_trap, transient_recovery};

/// Tables produced by one run plus a one-row summary for sweeps.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub tables: Vec<(String, CsvTable)>,
    pub summary: Vec<(String, String)>,
}

impl Outcome {
    fn table(&mut self, name: &str, t: CsvTable) {
        self.tables.push((name.to_string(), t));
    }

    fn text(&mut self, name: &str, csv: &str) -> Result<()> {
        self.table(name, CsvTable::from_text(csv)?);
        Ok(())
    }

    fn stat(&mut self, key: &str, value: String) {
        self.summary.push((key.to_string(), value));
    }
}

pub fn execute(s: &Scenario, base: &Path, seed: u64) -> Result<Outcome> {
    match s.command {
        Command::SolveJunction => solve_junction(s),
        Command::DepletionMap => depletion_map(s),
        Command::IvCurve => iv(s),
        Command::PleSweep => ple_sweep(s, seed),
        Command::TrapSim => trap_sim(s, seed),
        Command::Ionization => ionization(s, base),
        Command::Crc => crc(s, seed),
        Command::Ssr => ssr(s, seed),
        Command::Coherence => coherence(s, seed),
    }
}

fn mesh(s: &Scenario) -> Result<Arc<Mesh2D>> {
    Ok(Arc::new(Mesh2D::stripe_device(&s.material, &s.mesh)?))
}

/// Solves every bias at one temperature, warm-starting along the list.
fn bias_series(
    s: &Scenario,
    m: &Arc<Mesh2D>,
    t: f64,
    biases: &[f64],
) -> Result<Vec<FieldSolution>> {
    let mut out: Vec<FieldSolution> = Vec::with_capacity(biases.len());
    for &b in biases {
        let sol = solve_poisson_from(&s.material, m, b, t, &s.solver, out.last())?;
        out.push(sol);
    }
    Ok(out)
}

fn solve_junction(s: &Scenario) -> Result<Outcome> {
    let m = mesh(s)?;
    let j = &s.junction;
    let biases = j.biases();
    let per_t: Vec<Result<Vec<FieldSolution>>> = j
        .temperatures()
        .par_iter()
        .map(|&t| bias_series(s, &m, t, &biases))
        .collect();
    let mut summary = CsvTable::new(&[
        "temperature_K",
        "bias_V",
        "depleted_area_um2",
        "iterations",
        "scaled_residual",
        "site_E_par_MV_m",
        "site_E_perp_MV_m",
        "site_n_cm3",
    ]);
    let mut contours = CsvTable::new(&["temperature_K", "bias_V", "polyline", "x_um", "z_um"]);
    let mut density = CsvTable::new(&[
        "temperature_K",
        "bias_V",
        "x_um",
        "z_um",
        "n_cm3",
        "potential_V",
    ]);
    let mut out = Outcome::default();
    for (t, sols) in j.temperatures().into_iter().zip(per_t) {
        for sol in sols? {
            let (ep, en) = sol.field_at(j.site)?;
            let area = sol.depleted_area_um2(j.threshold_cm3);
            summary.push(vec![
                num(t),
                num(sol.bias_v()),
                num(area),
                sol.report().iterations.to_string(),
                num(sol.report().final_residual),
                num(ep),
                num(en),
                num(sol.density_at(j.site)?),
            ]);
            for (k, line) in sol.depletion_boundary(j.threshold_cm3).iter().enumerate() {
                for &(x, z) in &line.points {
                    contours.push(vec![
                        num(t),
                        num(sol.bias_v()),
                        k.to_string(),
                        num(x),
                        num(z),
                    ]);
                }
            }
            if j.write_density {
                let mm = sol.mesh();
                for i in 0..mm.nx() {
                    for k in 0..mm.nz() {
                        let idx = mm.index(i, k);
                        density.push(vec![
                            num(t),
                            num(sol.bias_v()),
                            num(mm.x()[i]),
                            num(mm.z()[k]),
                            num(sol.electron_density_cm3()[idx]),
                            num(sol.potential_v()[idx]),
                        ]);
                    }
                }
            }
            out.stat("depleted_area_um2", num(area));
            out.stat("site_n_cm3", num(sol.density_at(j.site)?));
        }
    }
    // Single-solve statistics only make sense without a grid.
    if summary.rows.len() != 1 {
        out.summary.clear();
    }
    out.table("junction_summary.csv", summary);
    out.table("depletion_contours.csv", contours);
    if j.write_density {
        out.table("density_map.csv", density);
    }
    Ok(out)
}

/// Noiseless FWHM (MHz) of the PLE line for a local electron density.
fn model_fwhm(s: &Scenario, n_cm3: f64) -> Result<f64> {
    let lines = homogeneous_lines(&s.optics, s.ple.settings.power_nw)?;
    let g = excess_broadening(n_cm3, &s.optics)?;
    let hint = lines.iter().map(|l| l.1).fold(g, f64::max);
    Ok(symmetric_fwhm(composite_voigt(&lines, g), hint))
}

fn depletion_map(s: &Scenario) -> Result<Outcome> {
    let m = mesh(s)?;
    let j = &s.junction;
    let t = j.temperature_k;
    let sols = bias_series(s, &m, t, &j.biases())?;
    let mut grid = CsvTable::new(&["distance_um", "bias_V", "fwhm_MHz", "depleted_flag"]);
    for &d in &j.distances_um {
        let site = DefectSite::new(d, j.site.depth_um);
        for sol in &sols {
            let n = sol.density_at(site)?;
            grid.push(vec![
                num(d),
                num(sol.bias_v()),
                num(model_fwhm(s, n)?),
                u8::from(n < j.threshold_cm3).to_string(),
            ]);
        }
    }
    let mut out = Outcome::default();
    out.table("depletion_grid.csv", grid);
    let mut boundary = CsvTable::new(&["bias_V", "polyline", "x_um", "z_um"]);
    for sol in &sols {
        for (k, line) in sol.depletion_boundary(j.threshold_cm3).iter().enumerate() {
            for &(x, z) in &line.points {
                boundary.push(vec![num(sol.bias_v()), k.to_string(), num(x), num(z)]);
            }
        }
    }
    out.table("depletion_contours.csv", boundary);
    if j.depletion_voltages {
        let mut search = j.search.clone();
        search.threshold_cm3 = j.threshold_cm3;
        let rows: Vec<Result<Vec<String>>> = j
            .distances_um
            .par_iter()
            .map(|&d| {
                let site = DefectSite::new(d, j.site.depth_um);
                let v = depletion_voltage(&s.material, &m, site, t, &search, &s.solver)?;
                let status = serde_json::to_value(v)
                    .ok()
                    .and_then(|x| x.get("kind").and_then(|k| k.as_str()).map(String::from))
                    .unwrap_or_default();
                Ok(vec![num(d), num(site.depth_um), opt(v.voltage()), status])
            })
            .collect();
        let mut table =
            CsvTable::new(&["distance_um", "depth_um", "depletion_voltage_V", "status"]);
        for r in rows {
            table.push(r?);
        }
        out.table("depletion_voltages.csv", table);
    }
    Ok(out)
}

fn iv(s: &Scenario) -> Result<Outcome> {
    let b = &s.iv;
    let v = b.voltages.values();
    let mut curve = CsvTable::new(&["temperature_K", "voltage_V", "current_A"]);
    let mut fwd = CsvTable::new(&["temperature_K", "forward_voltage_V"]);
    for &t in &b.temperatures_k {
        let i = iv_curve(&s.material, t, b.ideality, &v)?;
        for (vv, ii) in v.iter().zip(i) {
            curve.push(vec![num(t), num(*vv), num(ii)]);
        }
        fwd.push(vec![
            num(t),
            num(forward_voltage(
                &s.material,
                t,
                b.ideality,
                b.forward_current_a,
            )?),
        ]);
    }
    let mut out = Outcome::default();
    out.table("iv_curve.csv", curve);
    out.table("forward_voltage.csv", fwd);
    Ok(out)
}

fn ple_sweep(s: &Scenario, seed: u64) -> Result<Outcome> {
    let m = mesh(s)?;
    let j = &s.junction;
    let sol = solve_poisson(&s.material, &m, j.bias_v, j.temperature_k, &s.solver)?;
    let (ep, en) = sol.field_at(j.site)?;
    let n = sol.density_at(j.site)?;
    let centre = 1e3 * stark_detuning(ep, en, &s.optics);
    let grid = ScanGrid::around(centre, s.ple.half_span_mhz, s.ple.points);
    let sp = synthesize_ple_scan(&s.optics, (ep, en), n, &grid, &s.ple.settings, seed)
        .map_err(|e| rebase(e, "ple.settings"))?;
    let mut spectrum = CsvTable::new(&["detuning_MHz", "counts"]);
    for (d, c) in sp.detuning_mhz.iter().zip(&sp.counts) {
        spectrum.push(vec![num(*d), num(*c)]);
    }
    let mut out = Outcome::default();
    out.stat("bias_V", num(j.bias_v));
    out.stat("E_par_MV_m", num(ep));
    out.stat("E_perp_MV_m", num(en));
    out.stat("n_local_cm3", num(n));
    out.stat("model_center_GHz", num(1e-3 * sp.model_center_mhz));
    out.stat("center_GHz", opt(sp.fit.map(|f| 1e-3 * f.center_mhz)));
    out.stat(
        "center_err_GHz",
        opt(sp.fit.map(|f| 1e-3 * f.center_err_mhz)),
    );
    out.stat("fwhm_MHz", opt(sp.fit.map(|f| f.fwhm_mhz)));
    out.stat("fwhm_err_MHz", opt(sp.fit.map(|f| f.fwhm_err_mhz)));
    out.stat("model_fwhm_MHz", num(model_fwhm(s, n)?));
    out.stat("reliable", u8::from(sp.reliable).to_string());
    let mut fit = CsvTable::new(&out.summary.iter().map(|p| p.0.as_str()).collect::<Vec<_>>());
    fit.push(out.summary.iter().map(|p| p.1.clone()).collect());
    out.table("ple_spectrum.csv", spectrum);
    out.table("ple_fit.csv", fit);
    Ok(out)
}

fn trap_sim(s: &Scenario, seed: u64) -> Result<Outcome> {
    let t = &s.trap;
    let mut out = Outcome::default();
    let mut summary =
        CsvTable::new(&["condition", "regime", "state", "line_MHz", "mean_occupancy"]);
    for (k, &c) in t.scan_conditions.iter().enumerate() {
        let stack = ple_with_trap(&s.optics, &t.model, c, &t.scan, seed.wrapping_add(k as u64))
            .map_err(|e| rebase(e, "trap.scan"))?;
        let regime = serde_json::to_value(stack.regime)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        let scans = stack.occupancy_per_scan.len().max(1) as f64;
        for (i, &line) in stack.line_centers_mhz.iter().enumerate() {
            let occ = stack.occupancy_per_scan.iter().map(|o| o[i]).sum::<f64>() / scans;
            summary.push(vec![
                c.to_string(),
                regime.clone(),
                i.to_string(),
                num(line),
                num(occ),
            ]);
        }
        out.text(&format!("ple_scans_{c}.csv"), &stack.to_csv())?;
        if t.write_trajectories {
            if let Some(tr) = &stack.trajectory {
                out.text(&format!("trajectory_{c}.csv"), &tr.to_csv())?;
            }
        }
    }
    out.table("trap_lines.csv", summary);
    let mut fits = CsvTable::new(&[
        "transient",
        "pump",
        "probe_state",
        "fit_rate_per_ms",
        "fit_rate_err_per_ms",
        "eigen_rate_per_ms",
        "status",
    ]);
    for (k, p) in t.transients.iter().enumerate() {
        let r = transient_recovery(&t.model, p, seed.wrapping_add(1000 + k as u64))?;
        let mut table = CsvTable::new(&["duration_ms", "occupancy", "expected"]);
        for i in 0..r.durations_ms.len() {
            table.push(vec![
                num(r.durations_ms[i]),
                num(r.occupancy[i]),
                num(r.expected[i]),
            ]);
        }
        out.table(&format!("transient_{k}.csv"), table);
        fits.push(vec![
            k.to_string(),
            p.pump.to_string(),
            p.probe_state.to_string(),
            opt(r.fit.as_ref().map(|f| f.rate_per_ms)),
            opt(r.fit.as_ref().map(|f| f.rate_err_per_ms)),
            opt(r.matched_rate_per_ms),
            r.fit_error.clone().unwrap_or_else(|| "ok".into()),
        ]);
    }
    if !t.transients.is_empty() {
        out.table("transient_fits.csv", fits);
    }
    Ok(out)
}

fn ionization(s: &Scenario, base: &Path) -> Result<Outcome> {
    let b = &s.ionization;
    let mut settings = b.settings.clone();
    if let Some(f) = &b.modes_csv {
        let path = s.resolve(base, f);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        settings.modes = parse_mode_csv(&text, settings.modes.broadening_mev)?;
    }
    if let Some(f) = &b.cross_section_csv {
        let path = s.resolve(base, f);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        settings.sigma_el = parse_cross_section_csv(&text)?;
    }
    let pipe = IonizationPipeline::new(&settings)?;
    let mut out = Outcome::default();
    out.text("spectral_function.csv", &pipe.spectral.to_csv())?;
    let lambdas = b.wavelengths_nm.values();
    let curve = pipe.rate_curve(&lambdas)?;
    out.text("ionization_rate.csv", &curve.to_csv())?;
    let hc = crate::physics::CONSTANTS.hc_ev_nm();
    let energies: Vec<f64> = lambdas.iter().map(|l| hc / l).collect();
    let sig = pipe.sigma_pi_cm2(&energies)?;
    let mut xs = CsvTable::new(&["lambda_nm", "energy_eV", "sigma_el_cm2", "sigma_pi_cm2"]);
    for i in 0..lambdas.len() {
        xs.push(vec![
            num(lambdas[i]),
            num(energies[i]),
            num(pipe.sigma_el.eval(energies[i])),
            num(sig[i]),
        ]);
    }
    out.table("cross_section.csv", xs);
    out.stat("max_gamma_per_uW", num(curve.max_gamma_per_uw));
    if b.fit_threshold {
        let f = fit_fermi_threshold(&curve.wavelengths_nm, &curve.normalized)?;
        let mut t = CsvTable::new(&[
            "threshold_nm",
            "threshold_err_nm",
            "width_nm",
            "rms_residual",
        ]);
        t.push(vec![
            num(f.threshold_nm),
            num(f.threshold_err_nm),
            num(f.width_nm),
            num(f.rms_residual),
        ]);
        out.table("fermi_fit.csv", t);
        out.stat("threshold_nm", num(f.threshold_nm));
    }
    if let Some(tp) = &b.two_photon {
        let mut t = CsvTable::new(&[
            "resonant_power_nW",
            "second_power_uW",
            "second_wavelength_nm",
            "rate_Hz",
        ]);
        for &pr in &tp.resonant_powers_nw {
            for &p2 in &tp.second_powers_uw {
                let g = two_photon_rate(pr, p2, tp.second_wavelength_nm, &tp.model, &pipe)?;
                t.push(vec![num(pr), num(p2), num(tp.second_wavelength_nm), num(g)]);
            }
        }
        out.table("two_photon_rate.csv", t);
        out.stat("second_wavelength_nm", num(tp.second_wavelength_nm));
        out.stat(
            "gamma_pi_per_uW",
            num(pipe.gamma_per_uw(tp.second_wavelength_nm)?),
        );
    }
    Ok(out)
}

fn crc(s: &Scenario, seed: u64) -> Result<Outcome> {
    let b = &s.crc;
    let fwhm = b.settings.linewidth(&s.optics)?;
    let threshold = hwhm_reference_threshold(&s.optics, &b.settings, seed ^ 0x5eed)?;
    let mut out = Outcome::default();
    let mut hist = CsvTable::new(&["counts", "frequency", "scenario_label"]);
    let mut scan = CsvTable::new(&[
        "threshold",
        "scenario_label",
        "success",
        "false_accept",
        "false_accept_given_pass",
    ]);
    let mut summary = CsvTable::new(&[
        "scenario_label",
        "ou_sigma_MHz",
        "mean_counts",
        "dispersion",
        "threshold",
        "success",
        "false_accept",
    ]);
    for c in &b.cases {
        let mut diffusion = c.diffusion.clone();
        if let Some(target) = c.calibrate_success {
            diffusion.mode = DiffusionMode::OuPlusJumps;
            // Calibrated on an independent stream, so the reported success is out of sample.
            diffusion.ou_sigma_mhz = calibrate_ou_sigma(
                &s.optics,
                &b.settings,
                diffusion.ou_tau_ms,
                target,
                seed ^ 0xca1b,
            )?;
        }
        // Common random numbers across cases.
        let recs = simulate_crc(&s.optics, &diffusion, &b.settings, seed)?;
        let counts: Vec<u64> = recs.iter().map(|r| r.counts).collect();
        let h = CsvTable::from_text(&histogram_csv(&counts, &c.label))?;
        hist.rows.extend(h.rows);
        for t in 0..=b.threshold_max {
            let o = crc_success_rate(&recs, t, 0.5 * fwhm);
            scan.push(vec![
                t.to_string(),
                c.label.clone(),
                num(o.success),
                num(o.false_accept),
                num(o.false_accept_given_pass),
            ]);
        }
        let cf: Vec<f64> = counts.iter().map(|&k| k as f64).collect();
        let (mu, sd) = count_moments(&cf)?;
        let o = crc_success_rate(&recs, threshold, 0.5 * fwhm);
        summary.push(vec![
            c.label.clone(),
            num(diffusion.effective_sigma_mhz()),
            num(mu),
            num(sd * sd / mu),
            threshold.to_string(),
            num(o.success),
            num(o.false_accept),
        ]);
        out.stat(&format!("success_{}", c.label), num(o.success));
    }
    out.stat("threshold", threshold.to_string());
    out.table("crc_histogram.csv", hist);
    out.table("crc_threshold_scan.csv", scan);
    out.table("crc_summary.csv", summary);
    Ok(out)
}

fn ssr(s: &Scenario, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut hist = CsvTable::new(&["counts", "frequency", "scenario_label"]);
    let mut summary = CsvTable::new(&[
        "scenario_label",
        "mean_low",
        "mean_high",
        "weight_high",
        "cut",
        "fidelity",
        "labelled_fidelity",
        "status",
    ]);
    for c in &s.ssr.cases {
        let r = simulate_ssr(&c.settings, seed)?;
        for (state, v) in [("bright", &r.bright), ("dark", &r.dark)] {
            let h = CsvTable::from_text(&histogram_csv(v, &format!("{}-{state}", c.label)))?;
            hist.rows.extend(h.rows);
        }
        summary.push(vec![
            c.label.clone(),
            opt(r.mixture.map(|m| m.mean_low)),
            opt(r.mixture.map(|m| m.mean_high)),
            opt(r.mixture.map(|m| m.weight_high)),
            r.cut.map(|c| c.to_string()).unwrap_or_default(),
            opt(r.fidelity),
            opt(r.labelled_fidelity),
            r.fit_error.clone().unwrap_or_else(|| "ok".into()),
        ]);
        out.stat(&format!("fidelity_{}", c.label), opt(r.fidelity));
    }
    out.table("ssr_histogram.csv", hist);
    out.table("ssr_summary.csv", summary);
    Ok(out)
}

fn coherence(s: &Scenario, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut fits = CsvTable::new(&[
        "label",
        "N",
        "t2_true_ms",
        "t2_ms",
        "t2_err_ms",
        "beta",
        "beta_err",
        "status",
    ]);
    let mut scaling = CsvTable::new(&["label", "exponent", "exponent_err", "t2_single_ms"]);
    for (ci, c) in s.coherence.cases.iter().enumerate() {
        let mut sets = Vec::new();
        let (mut ns, mut t2s) = (Vec::new(), Vec::new());
        for (k, &n) in c.orders.iter().enumerate() {
            let t2 = c.t2_ms * (n as f64).powf(c.dd_exponent);
            let tau: Vec<f64> = (0..c.points)
                .map(|i| c.span_t2 * t2 * i as f64 / (c.points - 1) as f64)
                .collect();
            let point_seed = seed.wrapping_add((ci * 1000 + k) as u64);
            let signal = coherence_decay(t2, c.beta, &tau, c.noise, point_seed)?;
            let fit = fit_stretched_exponential(&tau, &signal);
            match &fit {
                Ok(f) => {
                    fits.push(vec![
                        c.label.clone(),
                        n.to_string(),
                        num(t2),
                        num(f.t2_ms),
                        num(f.t2_err_ms),
                        num(f.beta),
                        num(f.beta_err),
                        "ok".into(),
                    ]);
                    ns.push(n as f64);
                    t2s.push(f.t2_ms);
                }
                Err(e) => fits.push(vec![
                    c.label.clone(),
                    n.to_string(),
                    num(t2),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ]),
            }
            sets.push(CoherenceDataset {
                order: n,
                tau_ms: tau,
                signal,
                fit: fit.ok(),
            });
        }
        out.text(
            &format!("coherence_{}.csv", c.label),
            &crate::readout::coherence_csv(&sets),
        )?;
        if let Ok(d) = dd_scaling_fit(&ns, &t2s) {
            scaling.push(vec![
                c.label.clone(),
                num(d.exponent),
                num(d.exponent_err),
                num(d.t2_single_ms),
            ]);
            out.stat(&format!("dd_exponent_{}", c.label), num(d.exponent));
        }
    }
    out.table("coherence_fits.csv", fits);
    out.table("dd_scaling.csv", scaling);
    Ok(out)
}
