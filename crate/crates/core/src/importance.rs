//! Model-agnostic permute-and-predict (PaP) and leave-one-covariate-out
//! (LOCO) importance, and the empirical absorption coefficient.
//!
//! Both measures are the square root of a validation-loss increase. A
//! negative increase (possible by chance when the true importance is near
//! zero) is clamped to zero and flagged.

use nalgebra::{DMatrix, DVector};

use crate::datagen::{shuffle_column_in_place, Dataset};
use crate::error::{Result, VimpError};
use crate::linmodel::{mse, t_statistics, LinearFit};
use crate::rng::{derive, Token};

/// A trained regression model.
pub trait Model: Send + Sync {
    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>>;

    /// Linear coefficients, when the model has them.
    fn linear_fit(&self) -> Option<&LinearFit> {
        None
    }
}

/// A learning algorithm. `train` must be deterministic in `seed` and
/// re-entrant: concurrent calls may not share mutable state.
pub trait Predictor: Sync {
    type Model: Model;

    fn train(&self, data: &Dataset, seed: u64) -> Result<Self::Model>;
}

/// Square root of a clamped loss difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Importance {
    pub value: f64,
    pub clamped: bool,
    /// Loss difference before clamping.
    pub loss_diff: f64,
}

impl Importance {
    pub fn from_loss_diff(loss_diff: f64) -> Self {
        let clamped = loss_diff < 0.0;
        Self { value: loss_diff.max(0.0).sqrt(), clamped, loss_diff }
    }
}

fn perm_seed(seed: u64, i: usize, rep: usize) -> u64 {
    derive(seed, &[Token::Label("perm"), i.into(), rep.into()])
}

pub fn model_mse<M: Model + ?Sized>(model: &M, data: &Dataset) -> Result<f64> {
    mse(&model.predict(&data.x)?, &data.y)
}

/// PaP for variable `i`: permute column `i` of the validation set `reps`
/// times, average the permuted MSE, and compare with the unpermuted MSE.
pub fn pap_empirical<M: Model + ?Sized>(
    model: &M,
    valid: &Dataset,
    i: usize,
    seed: u64,
    reps: usize,
) -> Result<Importance> {
    let base = model_mse(model, valid)?;
    pap_against(model, base, valid, i, seed, reps)
}

/// As [`pap_empirical`] with a precomputed baseline MSE.
pub fn pap_against<M: Model + ?Sized>(
    model: &M,
    baseline_mse: f64,
    valid: &Dataset,
    i: usize,
    seed: u64,
    reps: usize,
) -> Result<Importance> {
    valid.check_index(i)?;
    if reps == 0 {
        return Err(VimpError::InvalidParameter("reps must be at least 1".into()));
    }
    let mut x = valid.x.clone();
    let original = valid.x.column(i).into_owned();
    let mut total = 0.0;
    for rep in 0..reps {
        x.set_column(i, &original);
        shuffle_column_in_place(&mut x, i, perm_seed(seed, i, rep));
        total += mse(&model.predict(&x)?, &valid.y)?;
    }
    Ok(Importance::from_loss_diff(total / reps as f64 - baseline_mse))
}

/// How LOCO removes a variable from the training data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LocoMode {
    /// Permute the training column and retrain on all `p` columns.
    #[default]
    Permute,
    /// Drop the column and retrain on `p - 1` columns.
    Drop,
}

#[derive(Debug, Clone)]
pub struct LocoOutcome<M> {
    pub importance: Importance,
    pub retrained: M,
}

/// Seed used to train the reference model in [`loco_empirical`] and [`report`].
pub fn fit_seed(seed: u64) -> u64 {
    derive(seed, &[Token::Label("fit")])
}

/// LOCO for variable `i`, training the reference model itself.
pub fn loco_empirical<P: Predictor>(
    predictor: &P,
    train: &Dataset,
    valid: &Dataset,
    i: usize,
    seed: u64,
) -> Result<LocoOutcome<P::Model>> {
    let original = predictor.train(train, fit_seed(seed))?;
    let base = model_mse(&original, valid)?;
    loco_against(predictor, base, train, valid, i, seed, LocoMode::Permute)
}

/// LOCO for variable `i` against a precomputed baseline validation MSE.
pub fn loco_against<P: Predictor>(
    predictor: &P,
    baseline_mse: f64,
    train: &Dataset,
    valid: &Dataset,
    i: usize,
    seed: u64,
    mode: LocoMode,
) -> Result<LocoOutcome<P::Model>> {
    train.check_index(i)?;
    valid.check_index(i)?;
    let refit_seed = derive(seed, &[Token::Label("refit"), i.into()]);
    let (retrained, loss) = match mode {
        LocoMode::Permute => {
            let mut reduced = train.clone();
            shuffle_column_in_place(&mut reduced.x, i, derive(seed, &[Token::Label("loco-perm"), i.into()]));
            let m = predictor.train(&reduced, refit_seed)?;
            let loss = model_mse(&m, valid)?;
            (m, loss)
        }
        LocoMode::Drop => {
            let m = predictor.train(&train.without_column(i)?, refit_seed)?;
            let loss = model_mse(&m, &valid.without_column(i)?)?;
            (m, loss)
        }
    };
    Ok(LocoOutcome { importance: Importance::from_loss_diff(loss - baseline_mse), retrained })
}

const ZERO_COEF_TOL: f64 = 1e-10;

/// Per-coefficient absorption `(b'_j - b_j) / b_i` for every `j != i`, in index order.
pub fn absorption_profile(original: &LinearFit, retrained: &LinearFit, i: usize) -> Result<Vec<f64>> {
    if original.p != retrained.p {
        return Err(VimpError::DimensionMismatch { expected: original.p, actual: retrained.p });
    }
    if i >= original.p {
        return Err(VimpError::IndexOutOfRange { index: i, p: original.p });
    }
    let bi = original.coef[i];
    if bi.abs() < ZERO_COEF_TOL {
        return Err(VimpError::ZeroCoefficient { index: i });
    }
    Ok((0..original.p)
        .filter(|&j| j != i)
        .map(|j| (retrained.coef[j] - original.coef[j]) / bi)
        .collect())
}

/// Empirical absorption coefficient: the mean of [`absorption_profile`].
pub fn estimate_c(original: &LinearFit, retrained: &LinearFit, i: usize) -> Result<f64> {
    let profile = absorption_profile(original, retrained, i)?;
    Ok(profile.iter().sum::<f64>() / profile.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub variable: usize,
    pub pap: f64,
    pub loco: f64,
    pub clamped_pap: bool,
    pub clamped_loco: bool,
    /// Absorption coefficient; linear models only, and absent when `b_i = 0`.
    pub c_hat: Option<f64>,
    pub absorption: Option<Vec<f64>>,
    /// t-statistic of the reference fit; linear models only.
    pub t: Option<f64>,
    pub pap_loss_diff: f64,
    pub loco_loss_diff: f64,
}

/// Reports for every variable plus the reference model's diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSet {
    pub rows: Vec<ImportanceReport>,
    /// Validation MSE of the reference model.
    pub baseline_mse: f64,
    /// Residual variance of the reference fit; linear models only.
    pub resid_var: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub pap_reps: usize,
    pub loco_mode: LocoMode,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { pap_reps: 1, loco_mode: LocoMode::Permute }
    }
}

pub fn report<P: Predictor>(
    predictor: &P,
    train: &Dataset,
    valid: &Dataset,
    seed: u64,
) -> Result<Vec<ImportanceReport>> {
    report_with(predictor, train, valid, seed, ReportOptions::default())
}

pub fn report_with<P: Predictor>(
    predictor: &P,
    train: &Dataset,
    valid: &Dataset,
    seed: u64,
    opts: ReportOptions,
) -> Result<Vec<ImportanceReport>> {
    Ok(report_set(predictor, train, valid, seed, opts)?.rows)
}

/// One [`ImportanceReport`] per variable, sharing a single reference model.
pub fn report_set<P: Predictor>(
    predictor: &P,
    train: &Dataset,
    valid: &Dataset,
    seed: u64,
    opts: ReportOptions,
) -> Result<ReportSet> {
    if train.p() != valid.p() {
        return Err(VimpError::DimensionMismatch { expected: train.p(), actual: valid.p() });
    }
    let original = predictor.train(train, fit_seed(seed))?;
    let base = model_mse(&original, valid)?;
    let linear = original.linear_fit();
    let t = match linear {
        Some(f) => Some(t_statistics(f)?),
        None => None,
    };

    let rows = (0..train.p())
        .map(|i| {
            let pap = pap_against(&original, base, valid, i, seed, opts.pap_reps)?;
            let loco = loco_against(predictor, base, train, valid, i, seed, opts.loco_mode)?;
            let absorption = match (linear, loco.retrained.linear_fit()) {
                (Some(orig), Some(re)) => {
                    let re = match opts.loco_mode {
                        LocoMode::Permute => re.clone(),
                        LocoMode::Drop => with_zero_inserted(re, i),
                    };
                    absorption_profile(orig, &re, i).ok()
                }
                _ => None,
            };
            Ok(ImportanceReport {
                variable: i,
                pap: pap.value,
                loco: loco.importance.value,
                clamped_pap: pap.clamped,
                clamped_loco: loco.importance.clamped,
                c_hat: absorption.as_ref().map(|a| a.iter().sum::<f64>() / a.len() as f64),
                absorption,
                t: t.as_ref().map(|t| t[i]),
                pap_loss_diff: pap.loss_diff,
                loco_loss_diff: loco.importance.loss_diff,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReportSet { rows, baseline_mse: base, resid_var: linear.map(|f| f.resid_var) })
}

fn with_zero_inserted(fit: &LinearFit, i: usize) -> LinearFit {
    LinearFit {
        coef: fit.coef.clone().insert_row(i, 0.0),
        xtx_inv_diag: fit.xtx_inv_diag.clone().insert_row(i, f64::NAN),
        p: fit.p + 1,
        ..fit.clone()
    }
}
