use std::sync::Arc;

use serde::Serialize;

use super::mesh::Mesh2D;
use super::poisson::{solve_poisson_from, SolverOptions};
use super::solution::{DefectSite, FieldSolution};
use crate::error::{Error, Result};
use crate::physics::MaterialStack;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DepletionVoltage {
    /// Least-magnitude bias in the search range at which the site is depleted.
    Depleted {
        voltage: f64,
    },
    /// Already depleted at the upper end of the range.
    AtOrAbove {
        voltage: f64,
    },
    NotDepletedInRange {
        lowest_bias: f64,
    },
}

impl DepletionVoltage {
    /// Voltage for plotting; `None` when not depleted in range.
    pub fn voltage(&self) -> Option<f64> {
        match *self {
            Self::Depleted { voltage } | Self::AtOrAbove { voltage } => Some(voltage),
            Self::NotDepletedInRange { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DepletionSearch {
    /// Most negative bias probed.
    pub v_lo: f64,
    pub v_hi: f64,
    /// Bracket width at which bisection stops.
    pub resolution_v: f64,
    pub threshold_cm3: f64,
}

impl Default for DepletionSearch {
    fn default() -> Self {
        Self {
            v_lo: -150.0,
            v_hi: 0.0,
            resolution_v: 0.1,
            threshold_cm3: super::DEFAULT_THRESHOLD_CM3,
        }
    }
}

impl DepletionSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_lo.is_finite() && self.v_hi.is_finite() && self.v_lo < self.v_hi) {
            return Err(Error::validation("search.v_lo", "need v_lo < v_hi"));
        }
        if !(self.resolution_v > 0.0) {
            return Err(Error::validation("search.resolution_v", "must be > 0"));
        }
        if !(self.threshold_cm3 > 0.0) {
            return Err(Error::validation("search.threshold_cm3", "must be > 0"));
        }
        Ok(())
    }
}

/// Bisection over bias for the onset of depletion at `site`. Each probe is a
/// full (warm-started) Poisson solve.
pub fn depletion_voltage(
    stack: &MaterialStack,
    mesh: &Arc<Mesh2D>,
    site: DefectSite,
    temperature_k: f64,
    search: &DepletionSearch,
    options: &SolverOptions,
) -> Result<DepletionVoltage> {
    search.validate()?;
    site.validate(stack.epi_thickness_um)?;
    if !mesh.contains(site.lateral_distance_um, site.depth_um) {
        return Err(Error::domain(format!(
            "site ({}, {}) µm is outside the mesh",
            site.lateral_distance_um, site.depth_um
        )));
    }
    let lthr = search.threshold_cm3.log10();
    let mut probes: Vec<(f64, f64)> = Vec::new();
    let mut probe = |bias: f64, warm: Option<&FieldSolution>| -> Result<(f64, FieldSolution)> {
        let sol = solve_poisson_from(stack, mesh, bias, temperature_k, options, warm)?;
        let g = sol.density_at(site)?.log10() - lthr;
        probes.push((bias, g));
        check_monotone(&probes)?;
        Ok((g, sol))
    };

    let (g_hi, sol_hi) = probe(search.v_hi, None)?;
    if g_hi < 0.0 {
        return Ok(DepletionVoltage::AtOrAbove {
            voltage: search.v_hi,
        });
    }
    let (g_lo, sol_lo) = probe(search.v_lo, Some(&sol_hi))?;
    if g_lo >= 0.0 {
        return Ok(DepletionVoltage::NotDepletedInRange {
            lowest_bias: search.v_lo,
        });
    }

    // g(hi) ≥ 0 (undepleted), g(lo) < 0 (depleted).
    let (mut lo, mut hi) = (search.v_lo, search.v_hi);
    let (mut glo, mut ghi) = (g_lo, g_hi);
    let (mut s_lo, mut s_hi) = (sol_lo, sol_hi);
    while hi - lo > search.resolution_v {
        let mid = 0.5 * (lo + hi);
        let warm = if mid - lo < hi - mid { &s_lo } else { &s_hi };
        let (g, sol) = probe(mid, Some(warm))?;
        if g < 0.0 {
            lo = mid;
            glo = g;
            s_lo = sol;
        } else {
            hi = mid;
            ghi = g;
            s_hi = sol;
        }
    }
    // Linear crossing of log n inside the final bracket.
    let t = ghi / (ghi - glo);
    Ok(DepletionVoltage::Depleted {
        voltage: hi + t * (lo - hi),
    })
}

fn check_monotone(probes: &[(f64, f64)]) -> Result<()> {
    let mut sorted = probes.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in sorted.windows(2) {
        if w[1].1 < w[0].1 - 1e-6 * (1.0 + w[0].1.abs()) {
            return Err(Error::Numerical(format!(
                "site density is not monotone in bias: log n drops from {:.6} at {} V to {:.6} at {} V",
                w[0].1, w[0].0, w[1].1, w[1].0
            )));
        }
    }
    Ok(())
}
