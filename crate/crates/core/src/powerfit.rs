//! Four-parameter exponential-power (Subbotin) fit of acceptance curves
//!
//! `f(x) = A * b / (2 s Gamma(1/b)) * exp(-(|x - m| / s)^b)`
//!
//! by damped Gauss-Newton, with delta-method bands and calibration
//! inversion of the level at which acceptance drops to a target.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

/// Fewest curve points accepted by the fit.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubbotinParams {
    pub amplitude: f64,
    pub shape: f64,
    pub scale: f64,
    pub location: f64,
    /// Parameter covariance in the order amplitude, shape, scale, location.
    pub covariance: [[f64; 4]; 4],
    pub converged: bool,
    /// Residual sum of squares and degrees of freedom of the fit.
    pub sse: f64,
    pub dof: usize,
}

impl SubbotinParams {
    pub fn new(amplitude: f64, shape: f64, scale: f64, location: f64) -> Self {
        Self {
            amplitude,
            shape,
            scale,
            location,
            covariance: [[0.0; 4]; 4],
            converged: false,
            sse: 0.0,
            dof: 0,
        }
    }

    fn theta(&self) -> [f64; 4] {
        [self.amplitude, self.shape, self.scale, self.location]
    }

    fn with_theta(&self, t: [f64; 4]) -> Self {
        Self {
            amplitude: t[0],
            shape: t[1],
            scale: t[2],
            location: t[3],
            ..self.clone()
        }
    }

    fn valid(&self) -> bool {
        self.amplitude > 0.0 && self.shape > 0.0 && self.scale > 0.0 && self.location.is_finite()
    }

    /// Value at the peak, `x = location`.
    pub fn peak(&self) -> f64 {
        subbotin_density(self.location, self)
    }
}

fn norm_const(shape: f64, scale: f64) -> f64 {
    (shape.ln() - (2.0 * scale).ln() - ln_gamma(1.0 / shape)).exp()
}

pub fn subbotin_density(x: f64, p: &SubbotinParams) -> f64 {
    let z = (x - p.location).abs() / p.scale;
    p.amplitude * norm_const(p.shape, p.scale) * (-z.powf(p.shape)).exp()
}

/// Gradient with respect to (amplitude, shape, scale, location). At
/// `x = location` the location component is the limit from above.
pub fn subbotin_gradient(x: f64, p: &SubbotinParams) -> [f64; 4] {
    let (a, b, s, m) = (p.amplitude, p.shape, p.scale, p.location);
    let n = norm_const(b, s);
    let z = (x - m).abs() / s;
    let zb = z.powf(b);
    let e = (-zb).exp();
    let f = a * n * e;
    let zb_ln_z = if z > 0.0 { zb * z.ln() } else { 0.0 };
    let d_shape = f * (1.0 / b + digamma(1.0 / b) / (b * b) - zb_ln_z);
    let d_scale = f * (b * zb - 1.0) / s;
    let d_loc = if x >= m {
        // d/dm of -z^b for x >= m; at x = m the one-sided limit
        if z > 0.0 {
            f * b * z.powf(b - 1.0) / s
        } else if b > 1.0 {
            0.0
        } else if b == 1.0 {
            f / s
        } else {
            f64::INFINITY
        }
    } else {
        -f * b * z.powf(b - 1.0) / s
    };
    [n * e, d_shape, d_scale, d_loc]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Parameters held at their start value (amplitude, shape, scale, location).
    pub fixed: [bool; 4],
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            fixed: [false; 4],
        }
    }
}

fn sse(x: &[f64], y: &[f64], p: &SubbotinParams) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - subbotin_density(xi, p)).powi(2))
        .sum()
}

/// Data-driven start: peak of the 3-point smoothed curve, shape 2, scale
/// from the half width at half maximum.
pub fn start_values(x: &[f64], y: &[f64]) -> SubbotinParams {
    let n = x.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            y[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let k = (0..n).fold(0, |k, i| if smooth[i] > smooth[k] { i } else { k });
    let peak = y[k].max(smooth[k]).max(1e-6);
    let half = peak / 2.0;
    let mut widths = Vec::new();
    for dir in [-1i64, 1] {
        let mut i = k as i64;
        while i + dir >= 0 && i + dir < n as i64 {
            let (j0, j1) = (i as usize, (i + dir) as usize);
            if y[j1] < half && y[j0] >= half {
                let t = (y[j0] - half) / (y[j0] - y[j1]);
                widths.push((x[j0] + t * (x[j1] - x[j0]) - x[k]).abs());
                break;
            }
            i += dir;
        }
    }
    let span = x[n - 1] - x[0];
    let hwhm = if widths.is_empty() {
        span / 4.0
    } else {
        widths.iter().sum::<f64>() / widths.len() as f64
    };
    let scale = (hwhm / std::f64::consts::LN_2.sqrt()).max(span * 1e-3);
    let shape = 2.0;
    let amplitude = peak / norm_const(shape, scale);
    SubbotinParams::new(amplitude, shape, scale, x[k])
}

/// Levenberg-Marquardt least squares of `y` on the Subbotin form.
pub fn fit_curve(x: &[f64], y: &[f64], start: Option<SubbotinParams>, opts: &FitOptions) -> Result<SubbotinParams> {
    if x.len() != y.len() {
        return Err(Error::Invalid("curve x and y lengths differ".into()));
    }
    if x.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "curve has {} points, the fit needs at least {MIN_POINTS}",
            x.len()
        )));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(
            "curve grid must be strictly increasing with finite values".into(),
        ));
    }
    let mut p = start.unwrap_or_else(|| start_values(x, y));
    if !p.valid() {
        return Err(Error::Invalid(format!("invalid start {:?}", p.theta())));
    }
    let free: Vec<usize> = (0..4).filter(|&j| !opts.fixed[j]).collect();
    let mut lambda = 1e-3;
    let mut cur = sse(x, y, &p);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&xi, &yi) in x.iter().zip(y) {
            let g = subbotin_gradient(xi, &p);
            let r = yi - subbotin_density(xi, &p);
            for &a in &free {
                jtr[a] += g[a] * r;
                for &b in &free {
                    jtj[(a, b)] += g[a] * g[b];
                }
            }
        }
        for j in 0..4 {
            if opts.fixed[j] {
                jtj[(j, j)] = 1.0;
            }
        }
        let grad_norm = free.iter().map(|&j| jtr[j].abs()).fold(0.0, f64::max);
        if grad_norm < 1e-15 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for &j in &free {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut t = p.theta();
            for &j in &free {
                t[j] += step[j];
            }
            let cand = p.with_theta(t);
            let new = if cand.valid() { sse(x, y, &cand) } else { f64::INFINITY };
            if new.is_finite() && new <= cur {
                let rel_step = free
                    .iter()
                    .map(|&j| step[j].abs() / (p.theta()[j].abs() + 1e-12))
                    .fold(0.0, f64::max);
                let rel_drop = (cur - new) / cur.max(1e-300);
                p = cand;
                cur = new;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel_step < 1e-10 || rel_drop < 1e-15 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // no descent direction left at any damping: a stationary point
            converged = cur.is_finite();
            break;
        }
    }
    if !converged {
        return Err(Error::FitNotConverged {
            iterations,
            last: p.theta(),
        });
    }
    let dof = x.len().saturating_sub(free.len());
    let mut jtj = Matrix4::<f64>::zeros();
    for &xi in x {
        let g = subbotin_gradient(xi, &p);
        for &a in &free {
            for &b in &free {
                jtj[(a, b)] += g[a] * g[b];
            }
        }
    }
    let mut cov = [[0.0; 4]; 4];
    if dof > 0 {
        let s2 = cur / dof as f64;
        let k = free.len();
        let sub = nalgebra::DMatrix::from_fn(k, k, |i, j| jtj[(free[i], free[j])]);
        if let Some(inv) = sub.try_inverse() {
            for i in 0..k {
                for j in 0..k {
                    cov[free[i]][free[j]] = s2 * inv[(i, j)];
                }
            }
        }
    }
    Ok(SubbotinParams {
        covariance: cov,
        converged: true,
        sse: cur,
        dof,
        ..p
    })
}

/// Delta-method standard error of the fitted curve at `x`.
pub fn fitted_se(x: f64, p: &SubbotinParams) -> f64 {
    let g = subbotin_gradient(x, p);
    let mut v = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            v += g[i] * p.covariance[i][j] * g[j];
        }
    }
    v.max(0.0).sqrt()
}

fn t_quantile(p: &SubbotinParams, level: f64) -> f64 {
    if p.dof == 0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, p.dof as f64)
        .map(|t| t.inverse_cdf(0.5 + level / 2.0))
        .unwrap_or(f64::INFINITY)
}

/// Pointwise band `(lower, fit, upper)` at confidence `level`.
pub fn band(x: f64, p: &SubbotinParams, level: f64) -> (f64, f64, f64) {
    let f = subbotin_density(x, p);
    let h = t_quantile(p, level) * fitted_se(x, p);
    (f - h, f, f + h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Above,
    Below,
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "above" => Ok(Side::Above),
            "below" => Ok(Side::Below),
            other => Err(Error::Invalid(format!("unknown side {other:?} (above, below)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLevel {
    pub lci: f64,
    pub estimate: f64,
    pub uci: f64,
    pub side: Side,
}

/// First crossing of `g` below `target` moving away from `from` in `dir`,
/// refined by bisection to 1e-10 (relative to the scale).
fn crossing(g: &dyn Fn(f64) -> f64, from: f64, dir: f64, scale: f64, target: f64) -> Option<f64> {
    if !(g(from) > target) {
        return None;
    }
    let step = scale / 8.0;
    let mut lo = from;
    let mut hi = None;
    for k in 1..=4000 {
        let x = from + dir * step * k as f64;
        if g(x) <= target {
            hi = Some(x);
            break;
        }
        lo = x;
    }
    let mut hi = hi?;
    while (hi - lo).abs() > 1e-10 * scale.max(1e-300) && (hi - lo).abs() > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Grid value where the fitted acceptance falls to `target_acceptance` on
/// the requested side of the peak, with the interval obtained by inverting
/// the 95% pointwise band.
pub fn invert_for_power(p: &SubbotinParams, target_acceptance: f64, side: Side) -> Result<PowerLevel> {
    let dir = match side {
        Side::Above => 1.0,
        Side::Below => -1.0,
    };
    let m = p.location;
    let f = |x: f64| subbotin_density(x, p);
    let estimate = crossing(&f, m, dir, p.scale, target_acceptance).ok_or_else(|| {
        Error::NoSolution(format!(
            "fitted acceptance peaks at {:.5}, never reaching {target_acceptance}",
            p.peak()
        ))
    })?;
    let lower = |x: f64| band(x, p, 0.95).0;
    let upper = |x: f64| band(x, p, 0.95).2;
    let a = crossing(&lower, m, dir, p.scale, target_acceptance).unwrap_or(m);
    let b = crossing(&upper, m, dir, p.scale, target_acceptance).unwrap_or(f64::INFINITY * dir);
    let (lci, uci) = if a <= b { (a, b) } else { (b, a) };
    Ok(PowerLevel {
        lci: lci.min(estimate),
        estimate,
        uci: uci.max(estimate),
        side,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeOne {
    pub lci: f64,
    pub estimate: f64,
    pub uci: f64,
}

/// Fitted acceptance and its 95% band at the null value; the upper bound
/// may exceed 1.
pub fn type1_at_null(p: &SubbotinParams, null: f64) -> TypeOne {
    let (lci, estimate, uci) = band(null, p, 0.95);
    TypeOne { lci, estimate, uci }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunsTest {
    pub runs: usize,
    pub expected: f64,
    pub z: f64,
    /// Passes at the 5% level.
    pub pass: bool,
}

/// Wald-Wolfowitz runs test on residual signs (zeros skipped).
pub fn runs_test(residuals: &[f64]) -> RunsTest {
    let signs: Vec<bool> = residuals.iter().filter(|r| **r != 0.0).map(|r| *r > 0.0).collect();
    let n1 = signs.iter().filter(|s| **s).count() as f64;
    let n2 = signs.len() as f64 - n1;
    let runs = if signs.is_empty() {
        0
    } else {
        1 + signs.windows(2).filter(|w| w[0] != w[1]).count()
    };
    let n = n1 + n2;
    if n1 == 0.0 || n2 == 0.0 {
        return RunsTest {
            runs,
            expected: runs as f64,
            z: 0.0,
            pass: n < 6.0,
        };
    }
    let expected = 2.0 * n1 * n2 / n + 1.0;
    let var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0));
    let z = if var > 0.0 {
        (runs as f64 - expected) / var.sqrt()
    } else {
        0.0
    };
    RunsTest {
        runs,
        expected,
        z,
        pass: z.abs() < 1.959_963_984_540_054,
    }
}

/// One row of the power table: p80 level and type-I acceptance at the null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub p80: PowerLevel,
    pub type1: TypeOne,
}

/// Fits an acceptance curve and derives the 80%-power level on `side`
/// together with the acceptance at `null`.
/// Acceptance rate at 80% power.
pub const TARGET_ACCEPTANCE: f64 = 0.2;

/// Fits a curve and reads off the 80%-power level and the type-I row.
pub fn power_row(x: &[f64], acceptance: &[f64], null: f64, side: Side) -> Result<(SubbotinParams, PowerRow)> {
    power_row_at(x, acceptance, null, side, TARGET_ACCEPTANCE)
}

/// As [`power_row`] with another target acceptance rate.
pub fn power_row_at(
    x: &[f64],
    acceptance: &[f64],
    null: f64,
    side: Side,
    target_acceptance: f64,
) -> Result<(SubbotinParams, PowerRow)> {
    let p = fit_curve(x, acceptance, None, &FitOptions::default())?;
    let p80 = invert_for_power(&p, target_acceptance, side)?;
    let type1 = type1_at_null(&p, null);
    Ok((p, PowerRow { p80, type1 }))
}
