//! Parity between empirical t-statistics and empirical LOCO.
//!
//! The t-statistic is mapped onto the LOCO scale by `t * sqrt(s^2 / (n - 1))`
//! (`s^2` the fitted residual variance); LOCO is mapped back to the
//! uncorrected scale by `sqrt((n - p) / n)`. If the two are the same
//! quantity the through-origin slope is one.

use std::collections::BTreeMap;

use super::{run_grid, GridSpec, ModelKind, Record};
use crate::error::{Result, VimpError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityPoint {
    pub delta: f64,
    pub p: usize,
    pub n: usize,
    pub replicate: usize,
    pub variable: usize,
    pub t_transformed: f64,
    pub loco_corrected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityResult {
    pub points: Vec<ParityPoint>,
    /// Through-origin slope of `loco_corrected` on `t_transformed`, all points.
    pub slope: f64,
}

/// Parity points for every linear record that has a t-statistic.
pub fn parity_points(records: &[Record]) -> Vec<ParityPoint> {
    records
        .iter()
        .filter_map(|r| {
            let (t, s2) = (r.t_emp?, r.resid_var?);
            let n = r.n as f64;
            Some(ParityPoint {
                delta: r.delta,
                p: r.p,
                n: r.n,
                replicate: r.replicate,
                variable: r.variable,
                t_transformed: t * (s2 / (n - 1.0)).sqrt(),
                loco_corrected: r.loco_emp * ((n - r.p as f64) / n).sqrt(),
            })
        })
        .collect()
}

/// Least-squares slope of `y = b x` through the origin.
pub fn through_origin_slope(points: &[ParityPoint]) -> f64 {
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), q| {
        (sxy + q.t_transformed * q.loco_corrected, sxx + q.t_transformed * q.t_transformed)
    });
    sxy / sxx
}

/// Slopes per `(p, n)` facet.
pub fn facet_slopes(points: &[ParityPoint]) -> BTreeMap<(usize, usize), f64> {
    let mut groups: BTreeMap<(usize, usize), Vec<ParityPoint>> = BTreeMap::new();
    for q in points {
        groups.entry((q.p, q.n)).or_default().push(*q);
    }
    groups.into_iter().map(|(k, v)| (k, through_origin_slope(&v))).collect()
}

pub fn parity_experiment(grid: &GridSpec) -> Result<ParityResult> {
    if grid.model != ModelKind::Linear {
        return Err(VimpError::InvalidParameter("parity experiment needs the linear model".into()));
    }
    let outcome = run_grid(grid)?;
    if let Some(f) = outcome.failures.first() {
        return Err(f.error.clone());
    }
    let points = parity_points(&outcome.records);
    let slope = through_origin_slope(&points);
    Ok(ParityResult { points, slope })
}
