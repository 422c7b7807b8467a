//! Closed-form PaP, LOCO, absorption and t-statistic values under the
//! uniform-collinearity latent model, plus finite-sample corrections and
//! numerical cross-checks of the algebra that links them.
//!
//! Notation used below: `a = 2 delta + (p - 2) delta^2` is the off-diagonal of
//! `cov(X) = A A^T` and `b = (1 - delta)^2` the extra diagonal term, so
//! `cov(X) = a J + b I` and `Var(x_i) = a + b = 1 + (p - 1) delta^2`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::datagen::make_transform;
use crate::error::{Result, VimpError};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPoint {
    pub delta: f64,
    pub p: usize,
    pub n: usize,
    pub beta_i: f64,
    pub noise_var: f64,
}

impl TheoryPoint {
    pub fn new(delta: f64, p: usize, n: usize, beta_i: f64, noise_var: f64) -> Result<Self> {
        let pt = Self { delta, p, n, beta_i, noise_var };
        pt.validate()?;
        Ok(pt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(VimpError::InvalidParameter(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        if self.p < 2 {
            return Err(VimpError::InvalidParameter(format!("p must be at least 2, got {}", self.p)));
        }
        if self.n == 0 {
            return Err(VimpError::InvalidParameter("n must be positive".into()));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(VimpError::InvalidParameter("noise_var must be positive".into()));
        }
        if !self.beta_i.is_finite() {
            return Err(VimpError::InvalidParameter("beta_i must be finite".into()));
        }
        Ok(())
    }

    fn pm1(&self) -> f64 {
        (self.p - 1) as f64
    }

    fn pm2(&self) -> f64 {
        self.p as f64 - 2.0
    }
}

/// `Var(x_i) = 1 + (p - 1) delta^2`.
pub fn var_x(pt: &TheoryPoint) -> f64 {
    1.0 + pt.pm1() * pt.delta * pt.delta
}

/// `Cov(x_i, x_j) = 2 delta + (p - 2) delta^2` for `i != j`.
pub fn cov_x_offdiag(pt: &TheoryPoint) -> f64 {
    let d = pt.delta;
    2.0 * d + pt.pm2() * d * d
}

/// `beta_i sqrt(2 Var(x_i))`.
pub fn pap_theoretical(pt: &TheoryPoint) -> f64 {
    pt.beta_i * (2.0 * var_x(pt)).sqrt()
}

/// Absorption coefficient `a / (1 - 4d + 2pd + p^2 d^2 - 3p d^2 + 3 d^2)`.
///
/// The denominator equals `b + (p - 1) a`, so the value coincides with the
/// population coefficient of any other predictor when `x_i` is regressed
/// on the remaining `p - 1`.
pub fn c_theoretical(pt: &TheoryPoint) -> Result<f64> {
    let d = pt.delta;
    let p = pt.p as f64;
    let denom = 1.0 - 4.0 * d + 2.0 * p * d + p * p * d * d - 3.0 * p * d * d + 3.0 * d * d;
    if denom.abs() < 1e-12 {
        return Err(VimpError::NearZeroDenominator(denom));
    }
    Ok(cov_x_offdiag(pt) / denom)
}

/// LOCO for an arbitrary absorption coefficient `c`:
/// `beta_i sqrt(b (1 + (p-1) c^2) + a ((p-1) c - 1)^2)`.
pub fn loco_exact(pt: &TheoryPoint, c: f64) -> f64 {
    let one_minus = 1.0 - pt.delta;
    let s1 = one_minus * one_minus * (1.0 + pt.pm1() * c * c);
    let k = pt.pm1() * c - 1.0;
    let s2 = cov_x_offdiag(pt) * k * k;
    pt.beta_i * (s1 + s2).sqrt()
}

/// `(1 + (p-1) d)^2 / ((1 + (p-2) d)^2 + (p-1) d^2)`, which equals `1 + c`.
fn one_plus_c_ratio(pt: &TheoryPoint) -> f64 {
    let d = pt.delta;
    let top = 1.0 + pt.pm1() * d;
    let bottom = 1.0 + pt.pm2() * d;
    (top * top) / (bottom * bottom + pt.pm1() * d * d)
}

/// LOCO with the absorption coefficient substituted: `beta_i (1 - delta) sqrt(1 + c)`.
/// Evaluated through the ratio form, independently of [`c_theoretical`].
pub fn loco_simplified(pt: &TheoryPoint) -> f64 {
    pt.beta_i * (1.0 - pt.delta) * one_plus_c_ratio(pt).sqrt()
}

/// First-order approximation `beta_i (1 - delta)`. Only a guide; never exact for `delta > 0`.
pub fn loco_approx(pt: &TheoryPoint) -> f64 {
    pt.beta_i * (1.0 - pt.delta)
}

/// Diagonal of `(X^T X)^{-1}` when `X^T X = (n - 1) A A^T`, via the
/// Sherman-Morrison inverse of `I + alpha J`.
pub fn xtx_inv_diag_theoretical(pt: &TheoryPoint) -> f64 {
    let d = pt.delta;
    let bottom = 1.0 + pt.pm2() * d;
    let top = 1.0 + pt.pm1() * d;
    let one_minus = 1.0 - d;
    (bottom * bottom + pt.pm1() * d * d)
        / ((pt.n as f64 - 1.0) * one_minus * one_minus * top * top)
}

/// `beta_i (1 - delta) sqrt((n - 1) (1 + (p-1) d)^2 / (Var(eps) [(1 + (p-2) d)^2 + (p-1) d^2]))`.
pub fn t_theoretical(pt: &TheoryPoint) -> f64 {
    let d = pt.delta;
    let top = 1.0 + pt.pm1() * d;
    let bottom = 1.0 + pt.pm2() * d;
    let ratio = ((pt.n as f64 - 1.0) * (top * top))
        / (pt.noise_var * (bottom * bottom + pt.pm1() * d * d));
    pt.beta_i * (1.0 - d) * ratio.sqrt()
}

/// Bessel-corrected PaP, `pap_theoretical * (n - 1) / n`.
pub fn pap_corrected(pt: &TheoryPoint) -> f64 {
    let n = pt.n as f64;
    pap_theoretical(pt) * (n - 1.0) / n
}

/// Degrees-of-freedom corrected LOCO, `loco_simplified * sqrt(n / (n - p))`.
pub fn loco_corrected(pt: &TheoryPoint) -> Result<f64> {
    if pt.n <= pt.p {
        return Err(VimpError::InvalidParameter(format!(
            "degrees-of-freedom correction needs n > p (n = {}, p = {})",
            pt.n, pt.p
        )));
    }
    let n = pt.n as f64;
    Ok(loco_simplified(pt) * (n / (n - pt.p as f64)).sqrt())
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
/// Returns `None` for a numerically singular matrix.
pub fn brute_force_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let k = m.nrows();
    assert_eq!(k, m.ncols(), "square matrix required");
    let mut a = m.clone();
    let mut inv = DMatrix::<f64>::identity(k, k);
    for col in 0..k {
        let pivot = (col..k).max_by(|&r, &s| a[(r, col)].abs().total_cmp(&a[(s, col)].abs()))?;
        if a[(pivot, col)] == 0.0 {
            return None;
        }
        a.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let scale = 1.0 / a[(col, col)];
        for c in 0..k {
            a[(col, c)] *= scale;
            inv[(col, c)] *= scale;
        }
        for r in 0..k {
            if r == col {
                continue;
            }
            let factor = a[(r, col)];
            if factor == 0.0 {
                continue;
            }
            for c in 0..k {
                a[(r, c)] -= factor * a[(col, c)];
                inv[(r, c)] -= factor * inv[(col, c)];
            }
        }
    }
    Some(inv)
}

/// `(X^T X)^{-1}_{ii}` read from a brute-force inverse of `(n - 1) A A^T`.
pub fn xtx_inv_diag_brute(pt: &TheoryPoint) -> Result<f64> {
    let a = make_transform(pt.p, pt.delta)?;
    let gram = (&a * a.transpose()) * (pt.n as f64 - 1.0);
    let inv = brute_force_inverse(&gram).ok_or(VimpError::RankDeficient { condition: f64::INFINITY })?;
    Ok(inv[(0, 0)])
}

/// `(X^T X)^{-1}_{00}` from the inverse of `A` alone, using
/// `((n-1) A A^T)^{-1} = A^{-T} A^{-1} / (n-1)`. Forming `A A^T` in floating
/// point rounds away the `(1 - delta)^2` part of its smallest eigenvalue, so
/// [`xtx_inv_diag_brute`] loses accuracy as `delta -> 1`; `A` is far better
/// conditioned and this stays accurate to about `1e-12` for `delta < 0.999`.
pub fn xtx_inv_diag_factored(pt: &TheoryPoint) -> Result<f64> {
    let a = make_transform(pt.p, pt.delta)?;
    let inv = brute_force_inverse(&a).ok_or(VimpError::RankDeficient { condition: f64::INFINITY })?;
    Ok(inv.column(0).norm_squared() / (pt.n as f64 - 1.0))
}

/// Largest relative discrepancies found by [`consistency_check`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConsistencyReport {
    pub points: usize,
    /// `loco_exact(c_theoretical)` vs `loco_simplified`.
    pub loco_identity: f64,
    /// `t_theoretical` vs `loco_simplified * sqrt((n - 1) / Var(eps))`.
    pub t_bridge: f64,
    /// Closed-form `(X^T X)^{-1}_{ii}` vs [`xtx_inv_diag_factored`].
    pub xtx_inverse: f64,
}

pub const LOCO_IDENTITY_TOL: f64 = 1e-12;
pub const T_BRIDGE_TOL: f64 = 1e-12;
pub const XTX_INVERSE_TOL: f64 = 1e-10;

impl ConsistencyReport {
    pub fn within_tolerance(&self) -> bool {
        self.loco_identity <= LOCO_IDENTITY_TOL
            && self.t_bridge <= T_BRIDGE_TOL
            && self.xtx_inverse <= XTX_INVERSE_TOL
    }
}

pub fn relative_discrepancy(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn consistency_check(grid: &[TheoryPoint]) -> Result<ConsistencyReport> {
    consistency_check_perturbed(grid, 0.0)
}

/// As [`consistency_check`], with `c_shift` added to the absorption
/// coefficient before it enters the LOCO identity. Used to confirm that the
/// check detects a wrong coefficient.
pub fn consistency_check_perturbed(grid: &[TheoryPoint], c_shift: f64) -> Result<ConsistencyReport> {
    if grid.is_empty() {
        return Err(VimpError::EmptyInput("consistency grid"));
    }
    let mut rep = ConsistencyReport { points: grid.len(), ..Default::default() };
    for pt in grid {
        pt.validate()?;
        let simplified = loco_simplified(pt);
        let exact = loco_exact(pt, c_theoretical(pt)? + c_shift);
        rep.loco_identity = rep.loco_identity.max(relative_discrepancy(exact, simplified));

        let bridged = simplified * ((pt.n as f64 - 1.0) / pt.noise_var).sqrt();
        rep.t_bridge = rep.t_bridge.max(relative_discrepancy(t_theoretical(pt), bridged));

        if pt.n > 1 {
            let brute = xtx_inv_diag_factored(pt)?;
            rep.xtx_inverse = rep.xtx_inverse.max(relative_discrepancy(xtx_inv_diag_theoretical(pt), brute));
        }
    }
    Ok(rep)
}

/// Default collinearity levels `0, 0.11, ..., 0.99`.
pub fn default_deltas() -> Vec<f64> {
    (0..10).map(|k| (11 * k) as f64 / 100.0).collect()
}

pub const DEFAULT_PS: [usize; 4] = [3, 6, 9, 12];
pub const DEFAULT_NS: [usize; 5] = [20, 63, 200, 632, 2000];

/// The 10 x 4 x 5 simulation grid with `beta_i = 1`, `Var(eps) = 0.1`.
pub fn default_grid() -> Vec<TheoryPoint> {
    let mut out = Vec::new();
    for delta in default_deltas() {
        for p in DEFAULT_PS {
            for n in DEFAULT_NS {
                out.push(TheoryPoint { delta, p, n, beta_i: 1.0, noise_var: 0.1 });
            }
        }
    }
    out
}

/// `count` points with `delta` uniform on `[0, 0.999)`, `p` uniform on
/// `2..=20` and `n` uniform on `p+1..=5000`, for sweeping the identities.
pub fn random_points(count: usize, seed: u64) -> Vec<TheoryPoint> {
    let mut r = rng::stream(seed, &["theory-sweep".into()]);
    (0..count)
        .map(|_| {
            let delta = r.gen_range(0.0..0.999);
            let p = r.gen_range(2..=20);
            let n = r.gen_range(p + 1..=5000);
            TheoryPoint { delta, p, n, beta_i: 1.0, noise_var: 0.1 }
        })
        .collect()
}
