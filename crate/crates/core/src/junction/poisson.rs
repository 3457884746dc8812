use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::banded::BandedSpd;
use super::mesh::{Mesh2D, NodeKind};
use super::solution::{ConvergenceReport, FieldSolution};
use crate::error::{Error, Result};
use crate::physics::{
    electron_occupancy, equilibrium_bulk_density_with, softplus, thermal_voltage,
    CarrierStatistics, DonorIonization, Layer, MaterialStack, CONSTANTS,
};
use crate::units::Kelvin;

pub const MAX_ABS_BIAS_V: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub ionization: DonorIonization,
    pub statistics: CarrierStatistics,
    /// Max-norm of the scaled residual.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            ionization: DonorIonization::Full,
            statistics: CarrierStatistics::Boltzmann,
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::validation("solver.tolerance", "must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("solver.max_iterations", "must be >= 1"));
        }
        Ok(())
    }
}

/// Per-layer donor parameters in SI.
#[derive(Clone, Copy)]
struct Donor {
    nd: f64,
    /// ln g + E_D/kT
    shift: f64,
}

struct Edge {
    a: usize,
    b: usize,
    c: f64,
}

/// Discretized problem: everything that does not depend on φ.
struct System {
    n: usize,
    vt: f64,
    /// E_c − E_F in the reference (bottom) layer, eV.
    reference: f64,
    nc: f64,
    stats: CarrierStatistics,
    ionization: DonorIonization,
    donors: [Donor; 2],
    /// q × control-volume area (m²) per layer, per node.
    q_area: Vec<[f64; 2]>,
    edges: Vec<Edge>,
    dirichlet: Vec<Option<f64>>,
    scale: Vec<f64>,
    /// Permutation from mesh index to banded ordering.
    order: Vec<usize>,
    bandwidth: usize,
    laplacian: BandedSpd,
}

struct Eval {
    residual: Vec<f64>,
    /// −∂ρ/∂φ per node.
    jac_diag: Vec<f64>,
    energy: f64,
    energy_scale: f64,
    scaled_max: f64,
}

/// Solves the nonlinear Poisson equation for the stack under `bias` (V,
/// negative = reverse) at `temperature`.
pub fn solve_poisson(
    stack: &MaterialStack,
    mesh: &Arc<Mesh2D>,
    bias_v: f64,
    temperature_k: f64,
    options: &SolverOptions,
) -> Result<FieldSolution> {
    solve_poisson_from(stack, mesh, bias_v, temperature_k, options, None)
}

/// As [`solve_poisson`], starting Newton from `initial` when it lives on the same mesh.
pub fn solve_poisson_from(
    stack: &MaterialStack,
    mesh: &Arc<Mesh2D>,
    bias_v: f64,
    temperature_k: f64,
    options: &SolverOptions,
    initial: Option<&FieldSolution>,
) -> Result<FieldSolution> {
    validate_inputs(stack, bias_v, temperature_k)?;
    options.validate()?;
    let sys = System::build(stack, mesh, bias_v, temperature_k, options)?;

    let mut phi = match initial {
        Some(s) if s.mesh().len() == mesh.len() && s.mesh().as_ref() == mesh.as_ref() => {
            s.potential_v().to_vec()
        }
        _ => sys.neutral_guess(stack, mesh, temperature_k)?,
    };
    for (p, d) in phi.iter_mut().zip(&sys.dirichlet) {
        if let Some(v) = d {
            *p = *v;
        }
    }

    let mut eval = sys.evaluate(&phi);
    let mut jac = BandedSpd::zeros(sys.n, sys.bandwidth);
    let mut iterations = 0;
    while eval.scaled_max > options.tolerance {
        if iterations >= options.max_iterations {
            return Err(Error::NoConvergence {
                what: "Poisson Newton iteration",
                iterations,
                residual: eval.scaled_max,
            });
        }
        iterations += 1;

        jac.copy_from(&sys.laplacian);
        let mut rhs = vec![0.0; sys.n];
        for idx in 0..sys.n {
            if sys.dirichlet[idx].is_none() {
                let p = sys.order[idx];
                jac.add(p, p, eval.jac_diag[idx]);
                rhs[p] = -eval.residual[idx];
            }
        }
        jac.factorize()?;
        jac.solve(&mut rhs);
        let step: Vec<f64> = (0..sys.n).map(|idx| rhs[sys.order[idx]]).collect();

        let slope: f64 = (0..sys.n)
            .filter(|&i| sys.dirichlet[i].is_none())
            .map(|i| eval.residual[i] * step[i])
            .sum();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = phi.iter().zip(&step).map(|(p, s)| p + alpha * s).collect();
            let e = sys.evaluate(&trial);
            let de = e.energy - eval.energy;
            let armijo = de <= 1e-4 * alpha * slope;
            let roundoff = de <= 1e-13 * eval.energy_scale && e.scaled_max < eval.scaled_max;
            if e.energy.is_finite() && (armijo || roundoff) {
                accepted = Some((trial, e));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((p, e)) => {
                phi = p;
                eval = e;
            }
            None => {
                return Err(Error::NoConvergence {
                    what: "Poisson line search",
                    iterations,
                    residual: eval.scaled_max,
                })
            }
        }
    }

    sys.finish(stack, mesh, bias_v, temperature_k, phi, &eval, iterations)
}

fn validate_inputs(stack: &MaterialStack, bias_v: f64, temperature_k: f64) -> Result<()> {
    if !(bias_v.is_finite() && bias_v.abs() <= MAX_ABS_BIAS_V) {
        return Err(Error::domain(format!(
            "|bias| must be <= {MAX_ABS_BIAS_V} V (got {bias_v})"
        )));
    }
    if !(temperature_k.is_finite() && temperature_k > 0.0) {
        return Err(Error::domain(format!(
            "temperature must be > 0 K (got {temperature_k})"
        )));
    }
    for (path, v) in [
        ("material.doping_epi_cm3", stack.doping_epi_cm3),
        ("material.doping_substrate_cm3", stack.doping_substrate_cm3),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::validation(path, "must be >= 0"));
        }
    }
    // Zero doping is allowed here (pure electrostatics).
    let probe = MaterialStack {
        doping_epi_cm3: stack.doping_epi_cm3.max(1.0),
        doping_substrate_cm3: stack.doping_substrate_cm3.max(1.0),
        ..stack.clone()
    };
    probe.validate()
}

/// E_c − E_F (eV) in a neutral bulk layer.
fn bulk_offset(
    stack: &MaterialStack,
    layer: Layer,
    temperature_k: f64,
    options: &SolverOptions,
) -> Result<f64> {
    let doping = match layer {
        Layer::Epi => stack.doping_epi_cm3,
        Layer::Substrate => stack.doping_substrate_cm3,
    };
    if doping == 0.0 {
        // Intrinsic level.
        let kt = thermal_voltage(Kelvin(temperature_k))?.value();
        let t = temperature_k;
        return Ok(0.5 * stack.band_gap_ev + 0.5 * kt * (stack.nc_at(t) / stack.nv_at(t)).ln());
    }
    let eq = equilibrium_bulk_density_with(
        stack,
        layer,
        Kelvin(temperature_k),
        options.ionization,
        options.statistics,
    )?;
    Ok(-eq.fermi_level.value())
}

impl System {
    fn build(
        stack: &MaterialStack,
        mesh: &Mesh2D,
        bias_v: f64,
        temperature_k: f64,
        options: &SolverOptions,
    ) -> Result<Self> {
        let vt = thermal_voltage(Kelvin(temperature_k))?.value();
        let (nx, nz) = (mesh.nx(), mesh.nz());
        let n = mesh.len();
        let x = mesh.x();
        let z = mesh.z();
        let eps = stack.permittivity();
        let q = CONSTANTS.elementary_charge();
        let t_epi = stack.epi_thickness_um;
        let bottom_layer = if z[nz - 1] > t_epi + 1e-9 {
            Layer::Substrate
        } else {
            Layer::Epi
        };
        let reference = bulk_offset(stack, bottom_layer, temperature_k, options)?;
        let shift = stack.donor_degeneracy.ln() + stack.donor_ionization_energy_ev / vt;
        let donors = [
            Donor {
                nd: stack.doping_epi_cm3 * 1e6,
                shift,
            },
            Donor {
                nd: stack.doping_substrate_cm3 * 1e6,
                shift,
            },
        ];

        let mut q_area = vec![[0.0; 2]; n];
        for i in 0..nx {
            let wx = mesh.dual_width_x(i);
            for k in 0..nz {
                let (lo, hi) = Mesh2D::dual_bounds(z, k);
                let epi = (hi.min(t_epi) - lo).max(0.0);
                let sub = (hi - lo.max(t_epi)).max(0.0);
                q_area[mesh.index(i, k)] = [q * wx * epi * 1e-12, q * wx * sub * 1e-12];
            }
        }

        let mut edges = Vec::with_capacity(2 * n);
        for i in 0..nx {
            for k in 0..nz {
                let a = mesh.index(i, k);
                if k + 1 < nz {
                    let wx = mesh.dual_width_x(i);
                    edges.push(Edge {
                        a,
                        b: mesh.index(i, k + 1),
                        c: eps * wx / (z[k + 1] - z[k]),
                    });
                }
                if i + 1 < nx {
                    let (lo, hi) = Mesh2D::dual_bounds(z, k);
                    edges.push(Edge {
                        a,
                        b: mesh.index(i + 1, k),
                        c: eps * (hi - lo) / (x[i + 1] - x[i]),
                    });
                }
            }
        }

        let phi_schottky = reference - stack.barrier_height_ev() + bias_v;
        let dirichlet: Vec<Option<f64>> = (0..n)
            .map(|idx| match mesh.kind(idx) {
                NodeKind::Free => None,
                NodeKind::Schottky => Some(phi_schottky),
                NodeKind::Ohmic => Some(0.0),
            })
            .collect();

        let mut coupling = vec![0.0; n];
        for e in &edges {
            coupling[e.a] += e.c;
            coupling[e.b] += e.c;
        }
        let scale: Vec<f64> = (0..n)
            .map(|i| {
                let charge = q_area[i][0] * donors[0].nd + q_area[i][1] * donors[1].nd;
                charge + coupling[i] * vt
            })
            .collect();

        let (order, bandwidth) = if nz <= nx {
            ((0..n).collect::<Vec<_>>(), nz)
        } else {
            let mut o = vec![0; n];
            for i in 0..nx {
                for k in 0..nz {
                    o[mesh.index(i, k)] = k * nx + i;
                }
            }
            (o, nx)
        };
        let mut laplacian = BandedSpd::zeros(n, bandwidth);
        for idx in 0..n {
            if dirichlet[idx].is_some() {
                laplacian.add(order[idx], order[idx], 1.0);
            }
        }
        for e in &edges {
            let (pa, pb) = (order[e.a], order[e.b]);
            let (fa, fb) = (dirichlet[e.a].is_none(), dirichlet[e.b].is_none());
            if fa {
                laplacian.add(pa, pa, e.c);
            }
            if fb {
                laplacian.add(pb, pb, e.c);
            }
            if fa && fb {
                laplacian.add(pa.max(pb), pa.min(pb), -e.c);
            }
        }

        Ok(Self {
            n,
            vt,
            reference,
            nc: stack.nc_at(temperature_k),
            stats: options.statistics,
            ionization: options.ionization,
            donors,
            q_area,
            edges,
            dirichlet,
            scale,
            order,
            bandwidth,
            laplacian,
        })
    }

    fn neutral_guess(
        &self,
        stack: &MaterialStack,
        mesh: &Mesh2D,
        temperature_k: f64,
    ) -> Result<Vec<f64>> {
        let opts = SolverOptions {
            ionization: self.ionization,
            statistics: self.stats,
            ..Default::default()
        };
        let epi = self.reference - bulk_offset(stack, Layer::Epi, temperature_k, &opts)?;
        let sub = self.reference - bulk_offset(stack, Layer::Substrate, temperature_k, &opts)?;
        let mut phi = vec![0.0; self.n];
        for i in 0..mesh.nx() {
            for (k, &zk) in mesh.z().iter().enumerate() {
                phi[mesh.index(i, k)] = if zk <= stack.epi_thickness_um {
                    epi
                } else {
                    sub
                };
            }
        }
        Ok(phi)
    }

    /// (N_D⁺, ∂N_D⁺/∂φ, ∫N_D⁺dφ) per m³ for one layer.
    #[inline]
    fn donor_terms(&self, d: Donor, eta: f64, phi: f64) -> (f64, f64, f64) {
        match self.ionization {
            DonorIonization::Full => (d.nd, 0.0, d.nd * phi),
            DonorIonization::Incomplete => {
                let u = (d.shift + eta).clamp(-200.0, 200.0);
                let s = 1.0 / (1.0 + (-u).exp());
                (
                    d.nd * (1.0 - s),
                    -d.nd * s * (1.0 - s) / self.vt,
                    d.nd * (phi - self.vt * softplus(d.shift + eta)),
                )
            }
        }
    }

    /// Space charge ρ/q (m⁻³ × m² per layer summed) and helpers at one node.
    fn node_terms(&self, idx: usize, phi: f64) -> NodeTerms {
        let eta = (phi - self.reference) / self.vt;
        let occ = electron_occupancy(self.stats, eta);
        let n = self.nc * occ.ratio;
        let dn = self.nc * occ.d_ratio / self.vt;
        let pn = self.vt * self.nc * occ.primitive;
        let mut out = NodeTerms {
            n,
            nd_plus: 0.0,
            rho: 0.0,
            drho: 0.0,
            potential: 0.0,
        };
        let mut area_total = 0.0;
        for l in 0..2 {
            let qa = self.q_area[idx][l];
            if qa == 0.0 {
                continue;
            }
            let (ndp, dndp, pd) = self.donor_terms(self.donors[l], eta, phi);
            out.rho += qa * (ndp - n);
            out.drho += qa * (dndp - dn);
            out.potential += qa * (pn - pd);
            out.nd_plus += qa * ndp;
            area_total += qa;
        }
        if area_total > 0.0 {
            out.nd_plus /= area_total;
        }
        out
    }

    fn evaluate(&self, phi: &[f64]) -> Eval {
        let mut residual = vec![0.0; self.n];
        let mut energy = 0.0;
        let mut energy_scale = 0.0;
        for e in &self.edges {
            let d = phi[e.a] - phi[e.b];
            residual[e.a] += e.c * d;
            residual[e.b] -= e.c * d;
            let w = 0.5 * e.c * d * d;
            energy += w;
            energy_scale += w;
        }
        let mut jac_diag = vec![0.0; self.n];
        let mut scaled_max: f64 = 0.0;
        for i in 0..self.n {
            let t = self.node_terms(i, phi[i]);
            residual[i] -= t.rho;
            if self.dirichlet[i].is_none() {
                jac_diag[i] = -t.drho;
                energy += t.potential;
                energy_scale += t.potential.abs();
                let r = (residual[i] / self.scale[i]).abs();
                scaled_max = if r.is_nan() {
                    f64::INFINITY
                } else {
                    scaled_max.max(r)
                };
            }
        }
        Eval {
            residual,
            jac_diag,
            energy,
            energy_scale,
            scaled_max,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        stack: &MaterialStack,
        mesh: &Arc<Mesh2D>,
        bias_v: f64,
        temperature_k: f64,
        phi: Vec<f64>,
        eval: &Eval,
        iterations: usize,
    ) -> Result<FieldSolution> {
        let mut n_cm3 = vec![0.0; self.n];
        let mut ndp_cm3 = vec![0.0; self.n];
        let mut q_int = 0.0;
        let mut q_abs = 0.0;
        let mut flux = 0.0;
        for i in 0..self.n {
            let t = self.node_terms(i, phi[i]);
            n_cm3[i] = t.n * 1e-6;
            ndp_cm3[i] = t.nd_plus * 1e-6;
            if self.dirichlet[i].is_none() {
                q_int += t.rho;
                q_abs += t.rho.abs();
            } else {
                flux += eval.residual[i] + t.rho;
            }
        }
        let denom = q_abs.max(flux.abs());
        let gauss_law_error = if denom > 0.0 {
            (q_int + flux).abs() / denom
        } else {
            0.0
        };
        let under_resolved = depletion_edge_under_resolved(mesh, stack, &n_cm3, &ndp_cm3);
        let mut warnings = Vec::new();
        if under_resolved {
            warnings.push(
                "mesh too coarse to resolve the depletion edge (< 3 nodes across it)".to_string(),
            );
        }
        let report = ConvergenceReport {
            iterations,
            final_residual: eval.scaled_max,
            gauss_law_error,
            under_resolved,
            warnings,
        };
        FieldSolution::from_potential(
            mesh.clone(),
            bias_v,
            temperature_k,
            phi,
            n_cm3,
            ndp_cm3,
            report,
        )
    }
}

struct NodeTerms {
    n: f64,
    nd_plus: f64,
    rho: f64,
    drho: f64,
    potential: f64,
}

/// Counts nodes with 1% < n/N_D⁺ < 99% along every epi row and column that
/// crosses the depletion edge; flags when the median count is below 3.
fn depletion_edge_under_resolved(
    mesh: &Mesh2D,
    stack: &MaterialStack,
    n: &[f64],
    ndp: &[f64],
) -> bool {
    let (nx, nz) = (mesh.nx(), mesh.nz());
    let epi_k: Vec<usize> = (0..nz)
        .filter(|&k| mesh.z()[k] < stack.epi_thickness_um)
        .collect();
    let mut counts = Vec::new();
    let mut line = |idxs: &mut dyn Iterator<Item = usize>| {
        let (mut lo, mut hi, mut mid) = (false, false, 0);
        for idx in idxs {
            if ndp[idx] <= 0.0 {
                continue;
            }
            let u = n[idx] / ndp[idx];
            if u < 0.01 {
                lo = true;
            } else if u > 0.99 {
                hi = true;
            } else {
                mid += 1;
            }
        }
        if lo && hi {
            counts.push(mid);
        }
    };
    for i in 0..nx {
        line(&mut epi_k.iter().map(|&k| mesh.index(i, k)));
    }
    if nx > 1 {
        for &k in &epi_k {
            line(&mut (0..nx).map(|i| mesh.index(i, k)));
        }
    }
    if counts.is_empty() {
        return false;
    }
    counts.sort_unstable();
    counts[counts.len() / 2] < 3
}
