//! Least-squares helpers shared by the fitting operations.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// 1σ parameter uncertainties from s²·(JᵀJ)⁻¹; NaN when singular.
    pub std_errors: Vec<f64>,
    /// s²·(JᵀJ)⁻¹; NaN entries when singular.
    pub covariance: Vec<Vec<f64>>,
    pub sum_squares: f64,
    pub evaluations: usize,
}

struct Problem<'a, F> {
    residual: &'a F,
    p: DVector<f64>,
    m: usize,
}

impl<F> Problem<'_, F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    fn eval(&self, p: &[f64]) -> Option<DVector<f64>> {
        let r = (self.residual)(p);
        if r.len() != self.m || r.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(DVector::from_vec(r))
    }
}

fn numeric_jacobian<F>(residual: &F, p: &[f64], r0: &DVector<f64>) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = r0.len();
    let mut jac = DMatrix::zeros(m, p.len());
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = 1e-7 * p[j].abs().max(1e-7);
        q[j] = p[j] + h;
        let rp = residual(&q);
        q[j] = p[j] - h;
        let rm = residual(&q);
        q[j] = p[j];
        if rp.len() != m || rm.len() != m {
            return None;
        }
        for i in 0..m {
            let d = (rp[i] - rm[i]) / (2.0 * h);
            if !d.is_finite() {
                return None;
            }
            jac[(i, j)] = d;
        }
    }
    Some(jac)
}

impl<F> LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_, F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.p.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.p.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        self.eval(self.p.as_slice())
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let r0 = self.eval(self.p.as_slice())?;
        numeric_jacobian(self.residual, self.p.as_slice(), &r0)
    }
}

/// Minimizes Σ rᵢ(p)² from `p0` with Levenberg–Marquardt and a central-difference Jacobian.
pub fn levenberg_marquardt<F>(what: &'static str, residual: F, p0: &[f64]) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let r0 = residual(p0);
    let m = r0.len();
    if m < p0.len() {
        return Err(Error::FitFailed {
            what,
            reason: format!("{m} data points for {} parameters", p0.len()),
        });
    }
    if r0.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailed {
            what,
            reason: "non-finite residual at the initial guess".into(),
        });
    }
    let problem = Problem {
        residual: &residual,
        p: DVector::from_column_slice(p0),
        m,
    };
    let (problem, report) = LevenbergMarquardt::new()
        .with_patience(400)
        .minimize(problem);
    if !report.termination.was_successful() {
        return Err(Error::FitFailed {
            what,
            reason: format!("{:?}", report.termination),
        });
    }
    let params: Vec<f64> = problem.p.iter().copied().collect();
    let r = problem.eval(&params).ok_or_else(|| Error::FitFailed {
        what,
        reason: "non-finite residual at the optimum".into(),
    })?;
    let sum_squares = r.norm_squared();
    let n = params.len();
    let covariance = numeric_jacobian(&residual, &params, &r)
        .and_then(|j| covariance(&j, sum_squares))
        .map(|c| {
            (0..n)
                .map(|i| (0..n).map(|k| c[(i, k)]).collect())
                .collect()
        })
        .unwrap_or_else(|| vec![vec![f64::NAN; n]; n]);
    let std_errors = (0..n).map(|i| covariance[i][i].max(0.0).sqrt()).collect();
    Ok(FitResult {
        params,
        std_errors,
        covariance,
        sum_squares,
        evaluations: report.number_of_evaluations,
    })
}

fn covariance(jac: &DMatrix<f64>, sum_squares: f64) -> Option<DMatrix<f64>> {
    let (m, n) = jac.shape();
    let dof = m.saturating_sub(n).max(1) as f64;
    (jac.transpose() * jac)
        .try_inverse()
        .map(|inv| inv * (sum_squares / dof))
}

fn covariance_std_errors(jac: &DMatrix<f64>, sum_squares: f64) -> Vec<f64> {
    match covariance(jac, sum_squares) {
        Some(c) => (0..jac.ncols())
            .map(|i| c[(i, i)].max(0.0).sqrt())
            .collect(),
        None => vec![f64::NAN; jac.ncols()],
    }
}

/// Ordinary least squares y ≈ X·β for design rows `x`. Returns (β, 1σ errors).
pub fn linear_least_squares(x: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = x.len();
    if m == 0 || m != y.len() {
        return Err(Error::domain(
            "linear least squares needs matching, non-empty data",
        ));
    }
    let n = x[0].len();
    if m < n || x.iter().any(|r| r.len() != n) {
        return Err(Error::domain(
            "linear least squares: ragged or under-determined design",
        ));
    }
    let a = DMatrix::from_fn(m, n, |i, j| x[i][j]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let beta = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Numerical(format!("linear least squares: {e}")))?;
    let r = &a * &beta - &b;
    let se = covariance_std_errors(&a, r.norm_squared());
    Ok((beta.iter().copied().collect(), se))
}
