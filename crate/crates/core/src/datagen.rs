//! Synthetic regression data with uniform latent collinearity.
//!
//! Predictors are `X = Z A` where `Z` is i.i.d. standard normal and
//! `A = delta J + (1 - delta) I`, giving `cov(X) = A A^T`. The response is the
//! intercept-free `y = X beta + eps`, `eps ~ N(0, noise_var)`.
//!
//! Normal variates come from `rand_distr::StandardNormal` (ziggurat method)
//! driven by ChaCha8 streams; `Z` is filled column by column.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, VimpError};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec {
    pub n: usize,
    pub p: usize,
    pub delta: f64,
    pub beta: Vec<f64>,
    pub noise_var: f64,
    pub seed: u64,
}

impl DataSpec {
    /// Spec with the same coefficient on every predictor.
    pub fn uniform(n: usize, p: usize, delta: f64, beta: f64, noise_var: f64, seed: u64) -> Self {
        Self { n, p, delta, beta: vec![beta; p], noise_var, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(VimpError::InvalidParameter("n must be positive".into()));
        }
        check_transform_params(self.p, self.delta)?;
        if self.beta.len() != self.p {
            return Err(VimpError::DimensionMismatch { expected: self.p, actual: self.beta.len() });
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(VimpError::InvalidParameter(format!(
                "noise_var must be positive and finite, got {}",
                self.noise_var
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(VimpError::InvalidParameter("beta must be finite".into()));
        }
        Ok(())
    }
}

/// Paired predictors and response. `spec` is `None` for externally loaded data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub spec: Option<DataSpec>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(VimpError::DimensionMismatch { expected: x.nrows(), actual: y.len() });
        }
        if x.nrows() == 0 {
            return Err(VimpError::EmptyInput("dataset has no rows"));
        }
        Ok(Self { x, y, spec: None })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Copy with column `i` removed.
    pub fn without_column(&self, i: usize) -> Result<Self> {
        self.check_index(i)?;
        Ok(Self { x: self.x.clone().remove_column(i), y: self.y.clone(), spec: None })
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.p() {
            return Err(VimpError::IndexOutOfRange { index: i, p: self.p() });
        }
        Ok(())
    }
}

fn check_transform_params(p: usize, delta: f64) -> Result<()> {
    if p < 2 {
        return Err(VimpError::InvalidParameter(format!("p must be at least 2, got {p}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(VimpError::InvalidParameter(format!("delta must lie in [0, 1), got {delta}")));
    }
    Ok(())
}

/// `A = delta J + (1 - delta) I`.
pub fn make_transform(p: usize, delta: f64) -> Result<DMatrix<f64>> {
    check_transform_params(p, delta)?;
    Ok(DMatrix::from_fn(p, p, |r, c| if r == c { 1.0 } else { delta }))
}

fn draw(spec: &DataSpec, stream: &str) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, &[stream.into()]);
    let z = DMatrix::from_fn(spec.n, spec.p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = make_transform(spec.p, spec.delta)?;
    let x = z * a;
    let beta = DVector::from_column_slice(&spec.beta);
    let sd = spec.noise_var.sqrt();
    let noise = DVector::from_fn(spec.n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
    let y = &x * beta + noise;
    Ok(Dataset { x, y, spec: Some(spec.clone()) })
}

/// Draws one dataset. Identical to the training half of [`generate_pair`].
pub fn generate(spec: &DataSpec) -> Result<Dataset> {
    draw(spec, "train")
}

/// Independent training and validation sets from the same scenario.
pub fn generate_pair(spec: &DataSpec) -> Result<(Dataset, Dataset)> {
    Ok((draw(spec, "train")?, draw(spec, "valid")?))
}

/// Copy of `data` with column `i` uniformly shuffled by a generator seeded with `seed`.
pub fn permute_column(data: &Dataset, i: usize, seed: u64) -> Result<Dataset> {
    data.check_index(i)?;
    let mut out = data.clone();
    shuffle_column_in_place(&mut out.x, i, seed);
    Ok(out)
}

pub(crate) fn shuffle_column_in_place(x: &mut DMatrix<f64>, i: usize, seed: u64) {
    let mut rng = rng::stream(seed, &[]);
    let mut col = x.column_mut(i);
    // DMatrix is column-major, so a column is one contiguous slice.
    col.as_mut_slice().shuffle(&mut rng);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_matches_direct_substitution() {
        assert_eq!(make_transform(3, 0.0).unwrap(), DMatrix::identity(3, 3));
        let a = make_transform(2, 0.5).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
        let a = make_transform(3, 0.99).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(a[(r, c)], if r == c { 1.0 } else { 0.99 });
            }
        }
    }

    #[test]
    fn transform_rejects_bad_parameters() {
        assert!(matches!(make_transform(1, 0.2), Err(VimpError::InvalidParameter(_))));
        assert!(matches!(make_transform(3, 1.0), Err(VimpError::InvalidParameter(_))));
        assert!(matches!(make_transform(3, -0.1), Err(VimpError::InvalidParameter(_))));
    }

    #[test]
    fn data_spec_validation() {
        let mut s = DataSpec::uniform(10, 3, 0.2, 1.0, 0.1, 0);
        assert!(s.validate().is_ok());
        s.beta.pop();
        assert!(matches!(s.validate(), Err(VimpError::DimensionMismatch { .. })));
        let s = DataSpec::uniform(10, 3, 0.2, 1.0, 0.0, 0);
        assert!(s.validate().is_err());
        let s = DataSpec::uniform(0, 3, 0.2, 1.0, 0.1, 0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn zero_coefficients_and_negligible_noise_give_zero_response() {
        let spec = DataSpec::uniform(4, 2, 0.0, 0.0, 1e-12, 3);
        let d = generate(&spec).unwrap();
        assert_eq!((d.n(), d.p()), (4, 2));
        assert!(d.y.iter().all(|v| v.abs() < 1e-5));
    }

    #[test]
    fn pair_is_deterministic_and_halves_differ() {
        let spec = DataSpec::uniform(5, 3, 0.3, 1.0, 0.1, 7);
        let (a, b) = generate_pair(&spec).unwrap();
        let (a2, b2) = generate_pair(&spec).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        assert_ne!(a.x, b.x);
        assert_eq!(generate(&spec).unwrap(), a);
        let one = DataSpec::uniform(1, 2, 0.0, 1.0, 0.1, 7);
        let (a, b) = generate_pair(&one).unwrap();
        assert_ne!(a.x, b.x);
    }

    #[test]
    fn permute_column_contract() {
        let spec = DataSpec::uniform(50, 4, 0.4, 1.0, 0.1, 11);
        let d = generate(&spec).unwrap();
        let q = permute_column(&d, 2, 99).unwrap();
        assert_eq!(q.y, d.y);
        for j in [0, 1, 3] {
            assert_eq!(q.x.column(j), d.x.column(j));
        }
        assert_ne!(q.x.column(2), d.x.column(2));
        let mut before: Vec<f64> = d.x.column(2).iter().copied().collect();
        let mut after: Vec<f64> = q.x.column(2).iter().copied().collect();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        assert_eq!(before, after);
        assert!(matches!(permute_column(&d, 4, 0), Err(VimpError::IndexOutOfRange { .. })));
    }

    #[test]
    fn singleton_permutation_is_identity() {
        let d = generate(&DataSpec::uniform(1, 3, 0.1, 1.0, 0.1, 1)).unwrap();
        assert_eq!(permute_column(&d, 0, 5).unwrap(), d);
    }
}
