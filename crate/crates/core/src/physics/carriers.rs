use serde::{Deserialize, Serialize};

use super::{MaterialStack, CONSTANTS};
use crate::error::{Error, Result};
use crate::units::{ElectronVolts, Kelvin, PerCubicCm};

/// Reduced Fermi levels are clamped to ±this value before exponentiation.
pub const EXPONENT_CLAMP: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layer {
    Epi,
    Substrate,
}

/// How donors populate: all ionized, or Fermi-occupied with a single shallow level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DonorIonization {
    #[default]
    Full,
    Incomplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CarrierStatistics {
    #[default]
    Boltzmann,
    FermiDirac,
}

/// k_B·T in eV.
pub fn thermal_voltage(temperature: Kelvin) -> Result<ElectronVolts> {
    let t = temperature.value();
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::domain(format!(
            "temperature must be > 0 K (got {t})"
        )));
    }
    Ok(ElectronVolts(CONSTANTS.boltzmann() * t))
}

/// Richardson constant A* = 4π·q·m·k_B²/h³ in A·m⁻²·K⁻².
pub fn richardson_constant(m_eff_kg: f64) -> Result<f64> {
    if !(m_eff_kg.is_finite() && m_eff_kg > 0.0) {
        return Err(Error::domain(format!(
            "effective mass must be > 0 (got {m_eff_kg})"
        )));
    }
    let k = CONSTANTS.boltzmann_si();
    let h = CONSTANTS.planck_si();
    Ok(4.0 * std::f64::consts::PI * CONSTANTS.elementary_charge() * m_eff_kg * k * k / (h * h * h))
}

/// Electron occupancy n/Nc as a function of the reduced Fermi level η = (E_F − E_c)/kT,
/// its η-derivative and its η-primitive (used by the Poisson energy functional).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occupancy {
    pub ratio: f64,
    pub d_ratio: f64,
    pub primitive: f64,
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Normalized Fermi-Dirac integral F_{1/2} (Bednarczyk & Bednarczyk closed form, < 0.4 % error).
fn fermi_half(eta: f64) -> f64 {
    let nu = eta.powi(4) + 50.0 + 33.6 * eta * (1.0 - 0.68 * (-0.17 * (eta + 1.0).powi(2)).exp());
    let c = 3.0 * std::f64::consts::PI.sqrt() / 4.0;
    1.0 / ((-eta).exp() + c * nu.powf(-0.375))
}

const FD_TAIL: f64 = -30.0;

// 8-point Gauss-Legendre on [-1, 1].
const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn fermi_half_primitive(eta: f64) -> f64 {
    if eta <= FD_TAIL {
        return fermi_half(eta);
    }
    // Below the tail F ≈ e^η, whose primitive is itself.
    let mut total = fermi_half(FD_TAIL);
    let panels = ((eta - FD_TAIL) / 2.0).ceil().max(1.0) as usize;
    let h = (eta - FD_TAIL) / panels as f64;
    for p in 0..panels {
        let mid = FD_TAIL + (p as f64 + 0.5) * h;
        for (x, w) in GL_X.iter().zip(GL_W.iter()) {
            total += 0.5 * h * w * fermi_half(mid + 0.5 * h * x);
        }
    }
    total
}

/// Occupancy with the exponent clamp applied: below −200 the density is
/// frozen, above +200 it continues linearly so the energy stays convex.
pub fn electron_occupancy(stats: CarrierStatistics, eta: f64) -> Occupancy {
    match stats {
        CarrierStatistics::Boltzmann => {
            if eta < -EXPONENT_CLAMP {
                let e = (-EXPONENT_CLAMP).exp();
                Occupancy {
                    ratio: e,
                    d_ratio: 0.0,
                    primitive: e * (1.0 + eta + EXPONENT_CLAMP),
                }
            } else if eta > EXPONENT_CLAMP {
                let e = EXPONENT_CLAMP.exp();
                let d = eta - EXPONENT_CLAMP;
                Occupancy {
                    ratio: e * (1.0 + d),
                    d_ratio: e,
                    primitive: e * (1.0 + d + 0.5 * d * d),
                }
            } else {
                let e = eta.exp();
                Occupancy {
                    ratio: e,
                    d_ratio: e,
                    primitive: e,
                }
            }
        }
        CarrierStatistics::FermiDirac => {
            let eta_c = eta.clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP);
            if eta_c <= FD_TAIL {
                return electron_occupancy(CarrierStatistics::Boltzmann, eta);
            }
            let h = 1e-5 * (1.0 + eta_c.abs());
            let ratio = fermi_half(eta_c);
            let d_ratio = (fermi_half(eta_c + h) - fermi_half(eta_c - h)) / (2.0 * h);
            let mut primitive = fermi_half_primitive(eta_c);
            let mut ratio_out = ratio;
            let mut d_out = d_ratio;
            if eta > EXPONENT_CLAMP {
                let d = eta - EXPONENT_CLAMP;
                ratio_out = ratio + d_ratio * d;
                primitive += ratio * d + 0.5 * d_ratio * d * d;
            } else if eta < -EXPONENT_CLAMP {
                d_out = 0.0;
            }
            Occupancy {
                ratio: ratio_out,
                d_ratio: d_out,
                primitive,
            }
        }
    }
}

/// ln(n/Nc) without clamping, for root finding on the bulk equilibrium.
pub fn ln_electron_occupancy(stats: CarrierStatistics, eta: f64) -> f64 {
    match stats {
        CarrierStatistics::Boltzmann => eta,
        CarrierStatistics::FermiDirac => {
            if eta < FD_TAIL {
                eta
            } else {
                fermi_half(eta).ln()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulkEquilibrium {
    pub electron_density: PerCubicCm,
    pub ionized_donors: PerCubicCm,
    /// E_F − E_c; negative for a non-degenerate semiconductor.
    pub fermi_level: ElectronVolts,
    pub iterations: usize,
}

/// Charge-neutral bulk carrier density with incomplete donor ionization
/// (g = `donor_degeneracy`, level `donor_ionization_energy_ev` below E_c).
pub fn equilibrium_bulk_density(
    stack: &MaterialStack,
    layer: Layer,
    temperature: Kelvin,
) -> Result<BulkEquilibrium> {
    equilibrium_bulk_density_with(
        stack,
        layer,
        temperature,
        DonorIonization::Incomplete,
        CarrierStatistics::Boltzmann,
    )
}

/// Solves n = N_D⁺(E_F) + p(E_F) in the log domain for the reduced Fermi level.
pub fn equilibrium_bulk_density_with(
    stack: &MaterialStack,
    layer: Layer,
    temperature: Kelvin,
    ionization: DonorIonization,
    stats: CarrierStatistics,
) -> Result<BulkEquilibrium> {
    let kt = thermal_voltage(temperature)?.value();
    let t = temperature.value();
    let doping_m3 = match layer {
        Layer::Epi => stack.doping_epi_cm3,
        Layer::Substrate => stack.doping_substrate_cm3,
    } * 1e6;
    if !(doping_m3.is_finite() && doping_m3 >= 0.0) {
        return Err(Error::domain(format!(
            "doping must be >= 0 (got {doping_m3} m^-3)"
        )));
    }
    let ln_nc = stack.nc_at(t).ln();
    let ln_nv = stack.nv_at(t).ln();
    let ln_nd = doping_m3.ln();
    let ln_g = stack.donor_degeneracy.ln();
    let ed = stack.donor_ionization_energy_ev / kt;
    let eg = stack.band_gap_ev / kt;

    let ln_donors = |eta: f64| match ionization {
        DonorIonization::Full => ln_nd,
        DonorIonization::Incomplete => ln_nd - softplus(ln_g + eta + ed),
    };
    let ln_holes = |eta: f64| ln_nv - eta - eg;
    // Monotone increasing in η.
    let h = |eta: f64| {
        ln_nc + ln_electron_occupancy(stats, eta) - log_add_exp(ln_donors(eta), ln_holes(eta))
    };

    let mut lo = -eg - 60.0;
    let mut hi = 60.0;
    let (f_lo, f_hi) = (h(lo), h(hi));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::Bracket {
            what: "bulk charge neutrality",
            lo: lo * kt,
            hi: hi * kt,
            f_lo,
            f_hi,
        });
    }

    // Safeguarded Newton: secant-free, derivative by central difference on a smooth h.
    let mut eta = 0.5 * (lo + hi);
    let mut iterations = 0;
    let max_iter = 200;
    loop {
        iterations += 1;
        let f = h(eta);
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = eta;
        } else {
            hi = eta;
        }
        let step = 1e-6;
        let df = (h(eta + step) - h(eta - step)) / (2.0 * step);
        let mut next = eta - f / df;
        if !(next.is_finite() && next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let converged = (next - eta).abs() < 1e-13 * (1.0 + eta.abs()) || (hi - lo) < 1e-13;
        eta = next;
        if converged {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::Bracket {
                what: "bulk charge neutrality (no convergence)",
                lo: lo * kt,
                hi: hi * kt,
                f_lo: h(lo),
                f_hi: h(hi),
            });
        }
    }

    let n = (ln_nc + ln_electron_occupancy(stats, eta)).exp();
    let nd_plus = ln_donors(eta).exp();
    Ok(BulkEquilibrium {
        electron_density: PerCubicCm::from_per_cubic_m(n),
        ionized_donors: PerCubicCm::from_per_cubic_m(nd_plus),
        fermi_level: ElectronVolts(eta * kt),
        iterations,
    })
}
