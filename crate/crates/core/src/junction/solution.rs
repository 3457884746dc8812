use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::contour::{marching_squares, Polyline};
use super::mesh::Mesh2D;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD_CM3: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceReport {
    pub iterations: usize,
    /// Max-norm of the scaled Newton residual.
    pub final_residual: f64,
    /// |space charge + boundary flux| / total |charge|.
    pub gauss_law_error: f64,
    pub under_resolved: bool,
    pub warnings: Vec<String>,
}

/// Defect position relative to the contact stripe edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectSite {
    /// Positive away from the contact, negative underneath it.
    pub lateral_distance_um: f64,
    pub depth_um: f64,
}

impl DefectSite {
    pub fn new(lateral_distance_um: f64, depth_um: f64) -> Self {
        Self {
            lateral_distance_um,
            depth_um,
        }
    }

    pub fn validate(&self, epi_thickness_um: f64) -> Result<()> {
        if !self.lateral_distance_um.is_finite() {
            return Err(Error::validation(
                "site.lateral_distance_um",
                "must be finite",
            ));
        }
        if !(self.depth_um > 0.0 && self.depth_um < epi_thickness_um) {
            return Err(Error::validation(
                "site.depth_um",
                format!("must lie inside the epi layer (0, {epi_thickness_um}) µm"),
            ));
        }
        Ok(())
    }
}

/// Converged electrostatics on a mesh. Densities are in cm⁻³, fields in MV/m
/// (node values, E = −∇φ), potential in V relative to the ohmic contact.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    mesh: Arc<Mesh2D>,
    bias_v: f64,
    temperature_k: f64,
    potential_v: Vec<f64>,
    electron_density_cm3: Vec<f64>,
    ionized_donors_cm3: Vec<f64>,
    ex_mv_per_m: Vec<f64>,
    ez_mv_per_m: Vec<f64>,
    report: ConvergenceReport,
}

impl FieldSolution {
    pub(crate) fn from_potential(
        mesh: Arc<Mesh2D>,
        bias_v: f64,
        temperature_k: f64,
        potential_v: Vec<f64>,
        electron_density_cm3: Vec<f64>,
        ionized_donors_cm3: Vec<f64>,
        report: ConvergenceReport,
    ) -> Result<Self> {
        let (ex, ez) = gradient_field(&mesh, &potential_v);
        Self::from_fields(
            mesh,
            bias_v,
            temperature_k,
            potential_v,
            electron_density_cm3,
            ionized_donors_cm3,
            ex,
            ez,
            report,
        )
    }

    /// Assembles a solution from precomputed node arrays (synthetic fields, reloaded snapshots).
    #[allow(clippy::too_many_arguments)]
    pub fn from_fields(
        mesh: Arc<Mesh2D>,
        bias_v: f64,
        temperature_k: f64,
        potential_v: Vec<f64>,
        electron_density_cm3: Vec<f64>,
        ionized_donors_cm3: Vec<f64>,
        ex_mv_per_m: Vec<f64>,
        ez_mv_per_m: Vec<f64>,
        report: ConvergenceReport,
    ) -> Result<Self> {
        let n = mesh.len();
        for (name, v) in [
            ("potential", &potential_v),
            ("electron density", &electron_density_cm3),
            ("ionized donors", &ionized_donors_cm3),
            ("E_x", &ex_mv_per_m),
            ("E_z", &ez_mv_per_m),
        ] {
            if v.len() != n {
                return Err(Error::domain(format!(
                    "{name} has {} values for a mesh of {n} nodes",
                    v.len()
                )));
            }
        }
        if electron_density_cm3.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::domain("electron density must be >= 0"));
        }
        Ok(Self {
            mesh,
            bias_v,
            temperature_k,
            potential_v,
            electron_density_cm3,
            ionized_donors_cm3,
            ex_mv_per_m,
            ez_mv_per_m,
            report,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh2D> {
        &self.mesh
    }
    pub fn bias_v(&self) -> f64 {
        self.bias_v
    }
    pub fn temperature_k(&self) -> f64 {
        self.temperature_k
    }
    pub fn potential_v(&self) -> &[f64] {
        &self.potential_v
    }
    pub fn electron_density_cm3(&self) -> &[f64] {
        &self.electron_density_cm3
    }
    pub fn ionized_donors_cm3(&self) -> &[f64] {
        &self.ionized_donors_cm3
    }
    pub fn ex_mv_per_m(&self) -> &[f64] {
        &self.ex_mv_per_m
    }
    pub fn ez_mv_per_m(&self) -> &[f64] {
        &self.ez_mv_per_m
    }
    pub fn report(&self) -> &ConvergenceReport {
        &self.report
    }

    fn bilinear(&self, values: impl Fn(usize) -> f64, x: f64, z: f64) -> Result<f64> {
        let m = &self.mesh;
        let (i, tx) = Mesh2D::locate(m.x(), x)
            .ok_or_else(|| Error::domain(format!("site x = {x} µm is outside the mesh")))?;
        let (k, tz) = Mesh2D::locate(m.z(), z)
            .ok_or_else(|| Error::domain(format!("site depth {z} µm is outside the mesh")))?;
        let i1 = if m.nx() == 1 { i } else { i + 1 };
        let v00 = values(m.index(i, k));
        let v01 = values(m.index(i, k + 1));
        let v10 = values(m.index(i1, k));
        let v11 = values(m.index(i1, k + 1));
        Ok((1.0 - tx) * ((1.0 - tz) * v00 + tz * v01) + tx * ((1.0 - tz) * v10 + tz * v11))
    }

    /// (E_parallel to c, E_perpendicular to c) in MV/m. The c axis is the depth direction.
    pub fn field_at(&self, site: DefectSite) -> Result<(f64, f64)> {
        let (x, z) = (site.lateral_distance_um, site.depth_um);
        let ez = self.bilinear(|i| self.ez_mv_per_m[i], x, z)?;
        let ex = self.bilinear(|i| self.ex_mv_per_m[i], x, z)?;
        Ok((ez, ex))
    }

    /// Electron density at a site, interpolated in log10.
    pub fn density_at(&self, site: DefectSite) -> Result<f64> {
        let lg = self.bilinear(
            |i| self.electron_density_cm3[i].max(1e-300).log10(),
            site.lateral_distance_um,
            site.depth_um,
        )?;
        Ok(10f64.powf(lg))
    }

    pub fn potential_at(&self, site: DefectSite) -> Result<f64> {
        self.bilinear(
            |i| self.potential_v[i],
            site.lateral_distance_um,
            site.depth_um,
        )
    }

    /// Contour polylines of n = threshold in (x, z) µm.
    pub fn depletion_boundary(&self, threshold_cm3: f64) -> Vec<Polyline> {
        let lt = threshold_cm3.log10();
        let f: Vec<f64> = self
            .electron_density_cm3
            .iter()
            .map(|&n| n.max(1e-300).log10() - lt)
            .collect();
        marching_squares(&self.mesh, &f)
    }

    /// Cross-section area (µm²) of control volumes whose density is below threshold.
    pub fn depleted_area_um2(&self, threshold_cm3: f64) -> f64 {
        let m = &self.mesh;
        let mut area = 0.0;
        for i in 0..m.nx() {
            let wx = m.dual_width_x(i);
            for k in 0..m.nz() {
                if self.electron_density_cm3[m.index(i, k)] < threshold_cm3 {
                    let (lo, hi) = Mesh2D::dual_bounds(m.z(), k);
                    area += wx * (hi - lo);
                }
            }
        }
        area
    }

    /// Charge-equivalent depletion depth ∫(N_D⁺ − n)/N_D⁺ dz (µm) of lateral column `i`.
    pub fn depleted_charge_width_um(&self, i: usize) -> f64 {
        let m = &self.mesh;
        let mut w = 0.0;
        for k in 0..m.nz() {
            let idx = m.index(i, k);
            let ndp = self.ionized_donors_cm3[idx];
            if ndp > 0.0 {
                let (lo, hi) = Mesh2D::dual_bounds(m.z(), k);
                w += (ndp - self.electron_density_cm3[idx]) / ndp * (hi - lo);
            }
        }
        w
    }
}

/// Node-centred E = −∇φ in MV/m (= V/µm), second-order on non-uniform axes.
fn gradient_field(mesh: &Mesh2D, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (nx, nz) = (mesh.nx(), mesh.nz());
    let mut ex = vec![0.0; mesh.len()];
    let mut ez = vec![0.0; mesh.len()];
    for i in 0..nx {
        for k in 0..nz {
            let idx = mesh.index(i, k);
            if nx > 1 {
                ex[idx] = -derivative(mesh.x(), i, |j| phi[mesh.index(j, k)]);
            }
            ez[idx] = -derivative(mesh.z(), k, |j| phi[mesh.index(i, j)]);
        }
    }
    (ex, ez)
}

fn derivative(axis: &[f64], i: usize, f: impl Fn(usize) -> f64) -> f64 {
    let n = axis.len();
    if i == 0 {
        (f(1) - f(0)) / (axis[1] - axis[0])
    } else if i + 1 == n {
        (f(n - 1) - f(n - 2)) / (axis[n - 1] - axis[n - 2])
    } else {
        let hl = axis[i] - axis[i - 1];
        let hr = axis[i + 1] - axis[i];
        let dl = (f(i) - f(i - 1)) / hl;
        let dr = (f(i + 1) - f(i)) / hr;
        (hr * dl + hl * dr) / (hl + hr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n_of: impl Fn(f64, f64) -> f64, ex: f64, ez: f64) -> FieldSolution {
        let x: Vec<f64> = (0..21).map(|i| i as f64).collect();
        let z: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let mesh = Arc::new(Mesh2D::new(x.clone(), z.clone(), (0.0, 3.0)).unwrap());
        let mut n = vec![0.0; mesh.len()];
        for (i, &xi) in x.iter().enumerate() {
            for (k, &zk) in z.iter().enumerate() {
                n[mesh.index(i, k)] = n_of(xi, zk);
            }
        }
        let len = mesh.len();
        FieldSolution::from_fields(
            mesh,
            0.0,
            15.0,
            vec![0.0; len],
            n,
            vec![7e13; len],
            vec![ex; len],
            vec![ez; len],
            ConvergenceReport::default(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_field_maps_to_perpendicular() {
        let s = synthetic(|_, _| 7e13, 3.0, 0.0);
        let (par, perp) = s.field_at(DefectSite::new(4.3, 2.2)).unwrap();
        assert!(par.abs() < 1e-12);
        assert!((perp - 3.0).abs() < 1e-12);
    }

    #[test]
    fn outside_site_is_domain_error() {
        let s = synthetic(|_, _| 7e13, 0.0, 0.0);
        let err = s.field_at(DefectSite::new(40.0, 2.0)).unwrap_err();
        assert_eq!(err.category(), crate::error::ErrorCategory::Validation);
    }

    #[test]
    fn uniform_density_has_no_contour() {
        let s = synthetic(|_, _| 7e13, 0.0, 0.0);
        assert!(s.depletion_boundary(1e12).is_empty());
        assert_eq!(s.depleted_area_um2(1e12), 0.0);
    }

    #[test]
    fn step_density_gives_vertical_contour() {
        let s = synthetic(|x, _| if x < 5.0 { 1e10 } else { 1e14 }, 0.0, 0.0);
        let lines = s.depletion_boundary(1e12);
        assert_eq!(lines.len(), 1);
        let pts = &lines[0].points;
        assert!(pts.len() >= 2);
        for &(x, _) in pts {
            assert!((x - 4.5).abs() <= 1.0, "x = {x}");
        }
        let zs: Vec<f64> = pts.iter().map(|p| p.1).collect();
        assert!(zs.iter().cloned().fold(f64::MAX, f64::min) <= 0.0 + 1e-12);
        assert!(zs.iter().cloned().fold(f64::MIN, f64::max) >= 10.0 - 1e-12);
    }

    #[test]
    fn density_interpolates_geometrically() {
        let s = synthetic(|x, _| 10f64.powf(10.0 + x), 0.0, 0.0);
        let n = s.density_at(DefectSite::new(2.5, 3.0)).unwrap();
        assert!((n.log10() - 12.5).abs() < 1e-9);
    }
}
