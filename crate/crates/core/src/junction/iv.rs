use crate::error::{Error, Result};
use crate::physics::{richardson_constant, softplus, thermal_voltage, MaterialStack};
use crate::units::Kelvin;

fn ln_saturation_current(stack: &MaterialStack, temperature_k: f64) -> Result<(f64, f64)> {
    let kt = thermal_voltage(Kelvin(temperature_k))?.value();
    let area = stack.contact.area_m2();
    if !(area > 0.0) {
        return Err(Error::domain("contact area must be > 0"));
    }
    let a_star = richardson_constant(stack.m_eff_e_kg)?;
    let ln_is =
        (area * a_star * temperature_k * temperature_k).ln() - stack.barrier_height_ev() / kt;
    Ok((ln_is, kt))
}

fn check_ideality(ideality: f64) -> Result<()> {
    if !(ideality.is_finite() && ideality >= 1.0) {
        return Err(Error::domain(format!(
            "ideality must be >= 1 (got {ideality})"
        )));
    }
    Ok(())
}

/// Thermionic-emission diode current (A) through the stripe contact.
/// Evaluated in the log domain; saturates at `f64::MAX` instead of overflowing.
pub fn iv_curve(
    stack: &MaterialStack,
    temperature_k: f64,
    ideality: f64,
    voltages: &[f64],
) -> Result<Vec<f64>> {
    check_ideality(ideality)?;
    let (ln_is, kt) = ln_saturation_current(stack, temperature_k)?;
    voltages
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                return Err(Error::domain(format!("voltage must be finite (got {v})")));
            }
            let x = v / (ideality * kt);
            let i = if x > 0.0 {
                // I_s·e^x·(1 − e^−x)
                let ln_i = ln_is + x + (-(-x).exp_m1()).ln();
                if ln_i > f64::MAX.ln() {
                    f64::MAX
                } else {
                    ln_i.exp()
                }
            } else {
                ln_is.exp() * x.exp_m1()
            };
            Ok(i)
        })
        .collect()
}

/// Forward voltage needed to drive `current_a` (> 0).
pub fn forward_voltage(
    stack: &MaterialStack,
    temperature_k: f64,
    ideality: f64,
    current_a: f64,
) -> Result<f64> {
    check_ideality(ideality)?;
    if !(current_a.is_finite() && current_a > 0.0) {
        return Err(Error::domain(format!(
            "current must be > 0 (got {current_a})"
        )));
    }
    let (ln_is, kt) = ln_saturation_current(stack, temperature_k)?;
    Ok(ideality * kt * softplus(current_a.ln() - ln_is))
}
