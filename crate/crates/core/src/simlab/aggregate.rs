use std::collections::BTreeMap;

use super::{ModelKind, Record};
use crate::error::{Result, VimpError};
use crate::theory::{self, TheoryPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Pap,
    Loco,
    CHat,
    T,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Pap, Metric::Loco, Metric::CHat, Metric::T];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Pap => "pap",
            Metric::Loco => "loco",
            Metric::CHat => "c_hat",
            Metric::T => "t",
        }
    }

    fn value(self, r: &Record) -> Option<f64> {
        match self {
            Metric::Pap => Some(r.pap_emp),
            Metric::Loco => Some(r.loco_emp),
            Metric::CHat => r.c_hat,
            Metric::T => r.t_emp,
        }
    }

    fn clamped(self, r: &Record) -> Option<bool> {
        match self {
            Metric::Pap => Some(r.pap_clamped),
            Metric::Loco => Some(r.loco_clamped),
            _ => None,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = VimpError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| VimpError::InvalidParameter(format!("unknown metric '{s}'")))
    }
}

/// Scenario constants the closed forms need beyond the cell key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    pub beta: f64,
    pub noise_var: f64,
    /// Report differences against the finite-sample corrected theory.
    pub apply_correction: bool,
}

/// Aggregate statistics for one metric in one cell.
///
/// All coefficients are equal, so the cell pools every variable of every
/// replicate: `emp_mean` and `emp_sd` are taken over all `p * reps` values
/// and `emp_2se = 2 * emp_sd / sqrt(reps)`. Variables within a replicate
/// share data, so the band uses the replicate count rather than the value
/// count. `rep_sd` is the spread of the per-replicate variable means.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub model: ModelKind,
    pub delta: f64,
    pub p: usize,
    pub n: usize,
    pub metric: Metric,
    pub reps: usize,
    pub emp_mean: f64,
    pub emp_sd: f64,
    pub emp_2se: f64,
    pub rep_sd: f64,
    pub theory_raw: f64,
    /// NaN when the correction is undefined (`n <= p`).
    pub theory_corrected: f64,
    pub rel_diff_raw: Option<f64>,
    pub rel_diff_corrected: Option<f64>,
    pub abs_diff_raw: f64,
    pub abs_diff_corrected: f64,
    pub clamp_rate: Option<f64>,
    pub apply_correction: bool,
}

impl SimResult {
    pub fn se(&self) -> f64 {
        self.emp_2se / 2.0
    }

    /// The theory value differences are reported against.
    pub fn theory(&self) -> f64 {
        if self.apply_correction {
            self.theory_corrected
        } else {
            self.theory_raw
        }
    }

    pub fn rel_diff(&self) -> Option<f64> {
        if self.apply_correction {
            self.rel_diff_corrected
        } else {
            self.rel_diff_raw
        }
    }

    pub fn abs_diff(&self) -> f64 {
        if self.apply_correction {
            self.abs_diff_corrected
        } else {
            self.abs_diff_raw
        }
    }
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (k - 1.0)).sqrt())
}

fn theory_values(metric: Metric, pt: &TheoryPoint) -> Result<(f64, f64)> {
    Ok(match metric {
        Metric::Pap => (theory::pap_theoretical(pt), theory::pap_corrected(pt)),
        Metric::Loco => (
            theory::loco_simplified(pt),
            theory::loco_corrected(pt).unwrap_or(f64::NAN),
        ),
        Metric::CHat => {
            let c = theory::c_theoretical(pt)?;
            (c, c)
        }
        Metric::T => {
            let t = theory::t_theoretical(pt);
            (t, t)
        }
    })
}

type CellKey = (ModelKind, u64, usize, usize);

/// Per-cell, per-metric summaries ordered by `(model, delta, p, n, metric)`.
pub fn aggregate(records: &[Record], params: TheoryParams) -> Result<Vec<SimResult>> {
    if records.is_empty() {
        return Err(VimpError::EmptyInput("no records to aggregate"));
    }
    // delta is non-negative, so its bit pattern orders like the value
    let mut cells: BTreeMap<CellKey, BTreeMap<usize, Vec<&Record>>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.model, r.delta.to_bits(), r.p, r.n))
            .or_default()
            .entry(r.replicate)
            .or_default()
            .push(r);
    }

    let mut out = Vec::new();
    for ((model, delta_bits, p, n), reps) in cells {
        let delta = f64::from_bits(delta_bits);
        let pt = TheoryPoint::new(delta, p, n, params.beta, params.noise_var)?;
        for metric in Metric::ALL {
            let per_rep: Vec<f64> = reps
                .values()
                .filter_map(|rows| {
                    let vals: Vec<f64> = rows.iter().filter_map(|r| metric.value(r)).collect();
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                })
                .collect();
            if per_rep.is_empty() {
                continue;
            }
            let all: Vec<f64> = reps.values().flatten().filter_map(|r| metric.value(r)).collect();
            let (mean, sd) = mean_sd(&all);
            let (_, rep_sd) = mean_sd(&per_rep);
            let (raw, corrected) = theory_values(metric, &pt)?;
            let relative_ok = !(model == ModelKind::Forest && metric == Metric::Loco);
            let rel = |theory: f64| (relative_ok && theory != 0.0 && theory.is_finite()).then(|| (mean - theory) / theory);
            let clamp_rate = {
                let flags: Vec<bool> = reps.values().flatten().filter_map(|r| metric.clamped(r)).collect();
                (!flags.is_empty()).then(|| flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64)
            };
            out.push(SimResult {
                model,
                delta,
                p,
                n,
                metric,
                reps: per_rep.len(),
                emp_mean: mean,
                emp_sd: sd,
                emp_2se: 2.0 * sd / (per_rep.len() as f64).sqrt(),
                rep_sd,
                theory_raw: raw,
                theory_corrected: corrected,
                rel_diff_raw: rel(raw),
                rel_diff_corrected: rel(corrected),
                abs_diff_raw: mean - raw,
                abs_diff_corrected: mean - corrected,
                clamp_rate,
                apply_correction: params.apply_correction,
            });
        }
    }
    Ok(out)
}
