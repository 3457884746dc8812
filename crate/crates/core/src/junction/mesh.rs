use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::MaterialStack;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Free node; boundary nodes of this kind carry a zero-flux condition.
    Free,
    /// Dirichlet node on the metal stripe.
    Schottky,
    /// Dirichlet node on the back contact.
    Ohmic,
}

/// Tensor-product mesh of a 2-D cross-section. Lateral `x` and depth `z` are
/// in µm; the surface is at z = 0 and depth increases downward.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    x: Vec<f64>,
    z: Vec<f64>,
    kinds: Vec<NodeKind>,
}

/// Mesh resolution/extent for the stripe-contact device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSpec {
    pub nx: usize,
    pub nz: usize,
    /// Lateral extent beyond the contact edge.
    pub x_max_um: f64,
    /// sinh clustering strength towards the contact edge (0 = uniform).
    pub x_grading: f64,
    /// sinh clustering strength towards the surface (0 = uniform).
    pub z_grading: f64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            nx: 200,
            nz: 100,
            x_max_um: 80.0,
            x_grading: 3.0,
            z_grading: 2.0,
        }
    }
}

impl MeshSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 {
            return Err(Error::validation(
                "mesh.nx",
                "need at least 3 lateral nodes",
            ));
        }
        if self.nz < 3 {
            return Err(Error::validation("mesh.nz", "need at least 3 depth nodes"));
        }
        if !(self.x_max_um.is_finite() && self.x_max_um > 0.0) {
            return Err(Error::validation("mesh.x_max_um", "must be > 0"));
        }
        for (path, g) in [
            ("mesh.x_grading", self.x_grading),
            ("mesh.z_grading", self.z_grading),
        ] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::validation(path, "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Same extent with spacing halved in both directions.
    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * self.nx - 1,
            nz: 2 * self.nz - 1,
            ..self.clone()
        }
    }
}

/// `n` points from `start` to `end`, clustered around `focus` by a sinh map
/// x(s) = focus + c·sinh(β(s − s₀)).
pub fn graded_axis(start: f64, end: f64, n: usize, focus: f64, strength: f64) -> Vec<f64> {
    assert!(n >= 2 && end > start);
    let focus = focus.clamp(start, end);
    let uniform = |i: usize| start + (end - start) * i as f64 / (n - 1) as f64;
    if strength < 1e-6 {
        return (0..n).map(uniform).collect();
    }
    let a = focus - start;
    let b = end - focus;
    let beta = strength;
    // Solve a/b = sinh(β s₀)/sinh(β(1 − s₀)) for s₀ ∈ [0, 1].
    let g = |s0: f64| a * (beta * (1.0 - s0)).sinh() - b * (beta * s0).sinh();
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s0 = 0.5 * (lo + hi);
    let c = if b > 0.0 {
        b / (beta * (1.0 - s0)).sinh()
    } else {
        a / (beta * s0).sinh()
    };
    let mut pts: Vec<f64> = (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            focus + c * (beta * (s - s0)).sinh()
        })
        .collect();
    pts[0] = start;
    pts[n - 1] = end;
    pts
}

impl Mesh2D {
    /// Nodes on the top row with `contact.0 ≤ x ≤ contact.1` become Schottky
    /// nodes; the whole bottom row is ohmic; everything else is free.
    pub fn new(x: Vec<f64>, z: Vec<f64>, contact: (f64, f64)) -> Result<Self> {
        check_axis("x", &x, 1)?;
        check_axis("z", &z, 3)?;
        let (nx, nz) = (x.len(), z.len());
        let tol = 1e-9;
        let mut kinds = vec![NodeKind::Free; nx * nz];
        let mut n_contact = 0;
        for (i, &xi) in x.iter().enumerate() {
            if xi >= contact.0 - tol && xi <= contact.1 + tol {
                kinds[i * nz] = NodeKind::Schottky;
                n_contact += 1;
            }
            kinds[i * nz + nz - 1] = NodeKind::Ohmic;
        }
        if n_contact == 0 {
            return Err(Error::domain(
                "no mesh node lies under the Schottky contact stripe",
            ));
        }
        Ok(Self { x, z, kinds })
    }

    /// One-column mesh: Schottky contact on top, ohmic contact at the bottom.
    pub fn column(z: Vec<f64>) -> Result<Self> {
        Self::new(vec![0.0], z, (0.0, 0.0))
    }

    /// Graded mesh for the stripe-contact device of `stack`: the stripe spans
    /// [−half_width, 0] and the domain extends to `spec.x_max_um`.
    pub fn stripe_device(stack: &MaterialStack, spec: &MeshSpec) -> Result<Self> {
        spec.validate()?;
        let x0 = -stack.contact.half_width_um;
        let x = graded_axis(x0, spec.x_max_um, spec.nx, 0.0, spec.x_grading);
        let z = graded_axis(
            0.0,
            stack.total_thickness_um(),
            spec.nz,
            0.0,
            spec.z_grading,
        );
        Self::new(x, z, (x0, 0.0))
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }
    pub fn nz(&self) -> usize {
        self.z.len()
    }
    pub fn len(&self) -> usize {
        self.kinds.len()
    }
    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
    pub fn x(&self) -> &[f64] {
        &self.x
    }
    pub fn z(&self) -> &[f64] {
        &self.z
    }
    #[inline]
    pub fn index(&self, i: usize, k: usize) -> usize {
        i * self.z.len() + k
    }
    #[inline]
    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }
    pub fn is_dirichlet(&self, idx: usize) -> bool {
        self.kinds[idx] != NodeKind::Free
    }

    /// Control-volume extent [lo, hi] of node `i` along an axis.
    pub(crate) fn dual_bounds(axis: &[f64], i: usize) -> (f64, f64) {
        let lo = if i == 0 {
            axis[0]
        } else {
            0.5 * (axis[i - 1] + axis[i])
        };
        let hi = if i + 1 == axis.len() {
            axis[i]
        } else {
            0.5 * (axis[i] + axis[i + 1])
        };
        (lo, hi)
    }

    /// Lateral control-volume width, 1 µm for a single-column mesh.
    pub(crate) fn dual_width_x(&self, i: usize) -> f64 {
        if self.x.len() == 1 {
            1.0
        } else {
            let (lo, hi) = Self::dual_bounds(&self.x, i);
            hi - lo
        }
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        let in_x = self.x.len() == 1 || (x >= self.x[0] && x <= *self.x.last().unwrap());
        in_x && z >= self.z[0] && z <= *self.z.last().unwrap()
    }

    /// Cell index and fractional offset for bilinear interpolation.
    pub(crate) fn locate(axis: &[f64], v: f64) -> Option<(usize, f64)> {
        if axis.len() == 1 {
            return Some((0, 0.0));
        }
        if !(v >= axis[0] && v <= *axis.last().unwrap()) {
            return None;
        }
        let j = match axis.binary_search_by(|a| a.partial_cmp(&v).unwrap()) {
            Ok(j) => j.min(axis.len() - 2),
            Err(j) => j - 1,
        };
        let t = (v - axis[j]) / (axis[j + 1] - axis[j]);
        Some((j, t))
    }
}

fn check_axis(name: &str, axis: &[f64], min_len: usize) -> Result<()> {
    if axis.len() < min_len {
        return Err(Error::domain(format!(
            "mesh axis {name} needs at least {min_len} nodes (got {})",
            axis.len()
        )));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!(
            "mesh axis {name} has non-finite coordinates"
        )));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(format!(
            "mesh axis {name} coordinates must be strictly increasing"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_axis_hits_endpoints_and_clusters() {
        let x = graded_axis(-25.0, 80.0, 101, 0.0, 3.0);
        assert_eq!(x[0], -25.0);
        assert_eq!(x[100], 80.0);
        assert!(x.windows(2).all(|w| w[1] > w[0]));
        let near = x
            .windows(2)
            .filter(|w| w[0].abs() < 2.0)
            .map(|w| w[1] - w[0])
            .fold(f64::MAX, f64::min);
        let far = x[100] - x[99];
        assert!(far > 3.0 * near);
    }

    #[test]
    fn graded_axis_uniform_when_no_strength() {
        let z = graded_axis(0.0, 10.0, 11, 0.0, 0.0);
        for (i, v) in z.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn node_classification() {
        let m = Mesh2D::new(vec![-2.0, -1.0, 0.0, 1.0], vec![0.0, 1.0, 2.0], (-2.0, 0.0)).unwrap();
        assert_eq!(m.kind(m.index(0, 0)), NodeKind::Schottky);
        assert_eq!(m.kind(m.index(2, 0)), NodeKind::Schottky);
        assert_eq!(m.kind(m.index(3, 0)), NodeKind::Free);
        assert_eq!(m.kind(m.index(3, 2)), NodeKind::Ohmic);
        assert_eq!(m.kind(m.index(1, 1)), NodeKind::Free);
    }

    #[test]
    fn rejects_bad_meshes() {
        assert!(Mesh2D::new(vec![0.0, 0.0], vec![0.0, 1.0, 2.0], (0.0, 0.0)).is_err());
        assert!(Mesh2D::new(vec![0.0, 1.0], vec![0.0, 1.0], (0.0, 0.0)).is_err());
        assert!(Mesh2D::new(vec![0.0, 1.0], vec![0.0, 1.0, 2.0], (5.0, 6.0)).is_err());
        assert!(Mesh2D::new(vec![0.0, f64::NAN], vec![0.0, 1.0, 2.0], (0.0, 0.0)).is_err());
    }

    #[test]
    fn locate_in_axis() {
        let axis = [0.0, 1.0, 3.0];
        assert_eq!(Mesh2D::locate(&axis, 2.0), Some((1, 0.5)));
        assert_eq!(Mesh2D::locate(&axis, 3.0), Some((1, 1.0)));
        assert_eq!(Mesh2D::locate(&axis, 0.0), Some((0, 0.0)));
        assert_eq!(Mesh2D::locate(&axis, 3.5), None);
    }
}
