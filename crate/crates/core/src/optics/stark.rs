use super::model::DefectOpticalModel;
use crate::error::{Error, Result};
use crate::fit::linear_least_squares;

/// Stark detuning in GHz: quadratic in the field perpendicular to c, linear along c.
pub fn stark_detuning(e_par_mv_m: f64, e_perp_mv_m: f64, model: &DefectOpticalModel) -> f64 {
    model.stark_perp_quadratic * e_perp_mv_m * e_perp_mv_m + model.stark_par_linear * e_par_mv_m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarkFit {
    pub perp_quadratic: f64,
    pub perp_quadratic_err: f64,
    pub par_linear: f64,
    pub par_linear_err: f64,
}

/// Regresses detunings (GHz) on (E_perp², E_par) without intercept.
pub fn fit_stark_coefficients(points: &[(f64, f64, f64)]) -> Result<StarkFit> {
    if points.len() < 2 {
        return Err(Error::domain(
            "need at least two (E_par, E_perp, detuning) points",
        ));
    }
    let x: Vec<Vec<f64>> = points
        .iter()
        .map(|&(par, perp, _)| vec![perp * perp, par])
        .collect();
    let y: Vec<f64> = points.iter().map(|p| p.2).collect();
    let (b, se) = linear_least_squares(&x, &y)?;
    Ok(StarkFit {
        perp_quadratic: b[0],
        perp_quadratic_err: se[0],
        par_linear: b[1],
        par_linear_err: se[1],
    })
}
