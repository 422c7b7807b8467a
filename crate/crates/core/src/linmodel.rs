//! Ordinary least squares without intercept (optionally with one), plus
//! classical t-statistics.
//!
//! The solver forms `X^T X` and factors it by Cholesky. When the eigenvalue
//! condition estimate of `X^T X` exceeds [`QR_FALLBACK_CONDITION`] the fit is
//! recomputed from a Householder QR of `X` itself, which squares the
//! condition number only implicitly. Beyond `1 / f64::EPSILON` the design is
//! reported as rank deficient.

use nalgebra::{DMatrix, DVector};

use crate::datagen::Dataset;
use crate::error::{Result, VimpError};
use crate::importance::{Model, Predictor};

pub const QR_FALLBACK_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitOptions {
    /// Fit an intercept. It never enters importance accounting.
    pub intercept: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Cholesky,
    Qr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coef: DVector<f64>,
    pub intercept: Option<f64>,
    /// `SSE / (n - k)` with `k` the number of fitted parameters.
    pub resid_var: f64,
    /// Diagonal of `(X^T X)^{-1}` restricted to the `p` predictors.
    pub xtx_inv_diag: DVector<f64>,
    pub n: usize,
    pub p: usize,
    pub condition: f64,
    pub solver: Solver,
}

pub fn fit(data: &Dataset) -> Result<LinearFit> {
    fit_with(data, FitOptions::default())
}

pub fn fit_with(data: &Dataset, opts: FitOptions) -> Result<LinearFit> {
    let (n, p) = (data.n(), data.p());
    let design = if opts.intercept {
        data.x.clone().insert_column(p, 1.0)
    } else {
        data.x.clone()
    };
    let k = design.ncols();
    if n <= k {
        return Err(VimpError::InsufficientData(format!(
            "least squares needs more observations ({n}) than parameters ({k})"
        )));
    }

    let gram = design.tr_mul(&design);
    let condition = condition_estimate(&gram);
    if !(condition.is_finite() && condition < 1.0 / f64::EPSILON) {
        return Err(VimpError::RankDeficient { condition });
    }

    let (beta, inv_diag, solver) = if condition <= QR_FALLBACK_CONDITION {
        let chol = gram
            .clone()
            .cholesky()
            .ok_or(VimpError::RankDeficient { condition })?;
        let beta = chol.solve(&design.tr_mul(&data.y));
        let inv_diag = chol.inverse().diagonal();
        (beta, inv_diag, Solver::Cholesky)
    } else {
        let (beta, inv_diag) = solve_qr(&design, &data.y, condition)?;
        (beta, inv_diag, Solver::Qr)
    };

    let resid = &data.y - &design * &beta;
    let resid_var = resid.norm_squared() / (n - k) as f64;

    Ok(LinearFit {
        coef: beta.rows(0, p).into_owned(),
        intercept: opts.intercept.then(|| beta[p]),
        resid_var,
        xtx_inv_diag: inv_diag.rows(0, p).into_owned(),
        n,
        p,
        condition,
        solver,
    })
}

/// `lambda_max / lambda_min` of a symmetric positive semi-definite matrix.
fn condition_estimate(gram: &DMatrix<f64>) -> f64 {
    let eig = gram.clone().symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn solve_qr(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    condition: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let k = design.ncols();
    let qr = design.clone().qr();
    let r = qr.r();
    let qty = qr.q().tr_mul(y);
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(VimpError::RankDeficient { condition })?;
    // (X^T X)^{-1} = R^{-1} R^{-T}; its diagonal is the squared row norms of R^{-1}.
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(VimpError::RankDeficient { condition })?;
    let inv_diag = DVector::from_fn(k, |i, _| r_inv.row(i).norm_squared());
    Ok((beta, inv_diag))
}

pub fn predict(fit: &LinearFit, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x.ncols() != fit.p {
        return Err(VimpError::DimensionMismatch { expected: fit.p, actual: x.ncols() });
    }
    let mut out = x * &fit.coef;
    if let Some(b0) = fit.intercept {
        out.add_scalar_mut(b0);
    }
    Ok(out)
}

/// Mean squared error.
pub fn mse(pred: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    if pred.len() != y.len() {
        return Err(VimpError::DimensionMismatch { expected: y.len(), actual: pred.len() });
    }
    if y.is_empty() {
        return Err(VimpError::EmptyInput("mse of zero observations"));
    }
    Ok((pred - y).norm_squared() / y.len() as f64)
}

/// `t_i = coef_i / sqrt(resid_var * (X^T X)^{-1}_ii)`.
pub fn t_statistics(fit: &LinearFit) -> Result<DVector<f64>> {
    if fit.resid_var <= 0.0 {
        return Err(VimpError::DegenerateFit("residual variance is zero"));
    }
    Ok(fit
        .coef
        .zip_map(&fit.xtx_inv_diag, |b, d| b / (fit.resid_var * d).sqrt()))
}

/// Ordinary least squares as an importance [`Predictor`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Ols {
    pub options: FitOptions,
}

impl Predictor for Ols {
    type Model = LinearFit;

    fn train(&self, data: &Dataset, _seed: u64) -> Result<LinearFit> {
        fit_with(data, self.options)
    }
}

impl Model for LinearFit {
    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        predict(self, x)
    }

    fn linear_fit(&self) -> Option<&LinearFit> {
        Some(self)
    }
}
