//! Pairs bootstrap and jackknife of any estimator, with percentile, BCa and
//! bootstrap-t intervals for intercept and slope.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::PairedSample;
use crate::error::{Error, Result};
use crate::estimators::{fit, DemingConfig, Method, RegressionFit};
use crate::rng::stream;
use crate::stats::{mean, norm_cdf, norm_quantile, quantile_sorted, sorted};

/// Smallest accepted number of replicates.
pub const MIN_REPLICATES: usize = 199;
/// Largest accepted share of failed refits.
pub const MAX_FAILED_SHARE: f64 = 0.05;
/// Refits per replicate for the inner jackknife of the bootstrap-t.
pub const INNER_GROUPS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub b: usize,
    pub seed: u64,
    /// Run the inner jackknife needed by [`studentized_ci`].
    pub studentized: bool,
    /// Leave-one-out fits for the BCa acceleration.
    pub jackknife: bool,
}

impl BootstrapOptions {
    pub fn new(b: usize, seed: u64) -> Self {
        Self {
            b,
            seed,
            studentized: false,
            jackknife: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEnsemble {
    /// Replicate `(intercept, slope)` pairs in replicate order.
    pub pairs: Vec<[f64; 2]>,
    pub b: usize,
    /// Leave-one-out `(intercept, slope)` estimates that converged.
    pub jack: Vec<[f64; 2]>,
    pub point: RegressionFit,
    /// Failed refits that were redrawn.
    pub failed: usize,
    /// Inner jackknife SEs per replicate (NaN where unavailable).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_se: Option<Vec<[f64; 2]>>,
    /// Grouped-jackknife SE of the full-sample estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point_se: Option<[f64; 2]>,
}

impl BootstrapEnsemble {
    pub fn slopes(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p[1]).collect()
    }

    pub fn intercepts(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p[0]).collect()
    }
}

fn converged(method: Method, s: &PairedSample, cfg: &DemingConfig) -> Option<RegressionFit> {
    fit(method, s, cfg).ok().filter(|f| f.converged)
}

/// Delete-a-group jackknife SE with at most [`INNER_GROUPS`] refits. Groups
/// whose refit fails are skipped; `None` once fewer than half remain.
fn grouped_jackknife_se(s: &PairedSample, method: Method, cfg: &DemingConfig) -> Option<[f64; 2]> {
    let n = s.n();
    let g = n.min(INNER_GROUPS);
    let mut est = Vec::with_capacity(g);
    for k in 0..g {
        let (lo, hi) = (k * n / g, (k + 1) * n / g);
        let keep: Vec<usize> = (0..n).filter(|&i| i < lo || i >= hi).collect();
        if let Some(f) = converged(method, &s.select(&keep), cfg) {
            est.push(f.coefficients());
        }
    }
    if est.len() < 2 || 2 * est.len() < g {
        return None;
    }
    let gf = est.len() as f64;
    let mut out = [0.0; 2];
    for j in 0..2 {
        let m = est.iter().map(|e| e[j]).sum::<f64>() / gf;
        let ss: f64 = est.iter().map(|e| (e[j] - m).powi(2)).sum();
        out[j] = ((gf - 1.0) / gf * ss).sqrt();
    }
    Some(out)
}

struct Replicate {
    coef: [f64; 2],
    failed: usize,
    inner: [f64; 2],
}

fn replicate(
    s: &PairedSample,
    method: Method,
    cfg: &DemingConfig,
    opts: &BootstrapOptions,
    i: usize,
    max_failures: usize,
) -> Result<Replicate> {
    let n = s.n();
    let mut rng = stream(opts.seed, &[i as u64]);
    let mut failed = 0;
    let mut idx = vec![0usize; n];
    loop {
        for v in idx.iter_mut() {
            *v = rng.random_range(0..n);
        }
        let r = s.select(&idx);
        if let Some(f) = converged(method, &r, cfg) {
            let inner = if opts.studentized {
                grouped_jackknife_se(&r, method, cfg).unwrap_or([f64::NAN; 2])
            } else {
                [f64::NAN; 2]
            };
            return Ok(Replicate {
                coef: f.coefficients(),
                failed,
                inner,
            });
        }
        failed += 1;
        if failed > max_failures {
            return Err(Error::EnsembleQuality {
                failed,
                replicates: opts.b,
            });
        }
    }
}

/// Pairs bootstrap of `method` on `s`. Replicate `i` draws from its own
/// stream, so the result does not depend on thread scheduling.
pub fn bootstrap(
    s: &PairedSample,
    method: Method,
    cfg: &DemingConfig,
    opts: &BootstrapOptions,
) -> Result<BootstrapEnsemble> {
    if opts.b < MIN_REPLICATES {
        return Err(Error::Invalid(format!(
            "need at least {MIN_REPLICATES} bootstrap replicates, got {}",
            opts.b
        )));
    }
    let point = fit(method, s, cfg)?;
    if !point.converged {
        return Err(Error::Degenerate(format!(
            "{method} did not converge on the full sample after {} iterations",
            point.iterations
        )));
    }
    let max_failed = (MAX_FAILED_SHARE * opts.b as f64).floor() as usize;
    let reps: Vec<Replicate> = (0..opts.b)
        .into_par_iter()
        .map(|i| replicate(s, method, cfg, opts, i, max_failed))
        .collect::<Result<_>>()?;
    let failed: usize = reps.iter().map(|r| r.failed).sum();
    if failed > max_failed {
        return Err(Error::EnsembleQuality {
            failed,
            replicates: opts.b,
        });
    }
    let jack = if opts.jackknife {
        (0..s.n())
            .into_par_iter()
            .filter_map(|i| converged(method, &s.without(i), cfg).map(|f| f.coefficients()))
            .collect()
    } else {
        Vec::new()
    };
    let (inner_se, point_se) = if opts.studentized {
        (
            Some(reps.iter().map(|r| r.inner).collect()),
            grouped_jackknife_se(s, method, cfg),
        )
    } else {
        (None, None)
    };
    Ok(BootstrapEnsemble {
        pairs: reps.iter().map(|r| r.coef).collect(),
        b: opts.b,
        jack,
        point,
        failed,
        inner_se,
        point_se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    Percentile,
    Bca,
    Studentized,
    Analytic,
}

impl IntervalKind {
    pub fn name(self) -> &'static str {
        match self {
            IntervalKind::Percentile => "percentile",
            IntervalKind::Bca => "bca",
            IntervalKind::Studentized => "studentized",
            IntervalKind::Analytic => "analytic",
        }
    }
}

impl std::str::FromStr for IntervalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "percentile" | "pct" => Ok(Self::Percentile),
            "bca" => Ok(Self::Bca),
            "studentized" | "stud" => Ok(Self::Studentized),
            "analytic" => Ok(Self::Analytic),
            other => Err(Error::Invalid(format!(
                "unknown interval kind {other:?} (percentile, bca, studentized, analytic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalPair {
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub int_lo: f64,
    pub int_hi: f64,
    /// Confidence level `1 - alpha`.
    pub level: f64,
    pub kind: IntervalKind,
    /// Set when BCa fell back to percentile bounds for a parameter.
    pub fallback: bool,
}

impl IntervalPair {
    pub fn contains_null(&self) -> (bool, bool) {
        (
            self.int_lo <= 0.0 && 0.0 <= self.int_hi,
            self.slope_lo <= 1.0 && 1.0 <= self.slope_hi,
        )
    }
}

fn column(e: &BootstrapEnsemble, j: usize) -> Vec<f64> {
    sorted(&e.pairs.iter().map(|p| p[j]).collect::<Vec<_>>())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn pair(bounds: [[f64; 2]; 2], alpha: f64, kind: IntervalKind, fallback: bool) -> IntervalPair {
    IntervalPair {
        int_lo: bounds[0][0],
        int_hi: bounds[0][1],
        slope_lo: bounds[1][0],
        slope_hi: bounds[1][1],
        level: 1.0 - alpha,
        kind,
        fallback,
    }
}

/// Type-7 percentile interval.
pub fn percentile_ci(e: &BootstrapEnsemble, alpha: f64) -> Result<IntervalPair> {
    check_alpha(alpha)?;
    let mut b = [[0.0; 2]; 2];
    for (j, bj) in b.iter_mut().enumerate() {
        let v = column(e, j);
        *bj = [quantile_sorted(&v, alpha / 2.0), quantile_sorted(&v, 1.0 - alpha / 2.0)];
    }
    Ok(pair(b, alpha, IntervalKind::Percentile, false))
}

/// Bias correction `z0 = Phi^-1(#{t* < t} / B)`; `None` when infinite.
pub fn bca_bias(replicates: &[f64], estimate: f64) -> Option<f64> {
    let below = replicates.iter().filter(|&&t| t < estimate).count();
    if below == 0 || below == replicates.len() {
        return None;
    }
    Some(norm_quantile(below as f64 / replicates.len() as f64))
}

/// Acceleration from jackknife skewness.
pub fn bca_acceleration(jack: &[f64]) -> f64 {
    if jack.len() < 2 {
        return 0.0;
    }
    let m = mean(jack);
    let (mut s2, mut s3) = (0.0, 0.0);
    for &t in jack {
        let d = m - t;
        s2 += d * d;
        s3 += d * d * d;
    }
    if s2 > 0.0 {
        s3 / (6.0 * s2.powf(1.5))
    } else {
        0.0
    }
}

/// BCa bounds from sorted replicates and given `z0`, `a`.
pub fn bca_bounds(sorted_reps: &[f64], z0: f64, a: f64, alpha: f64) -> [f64; 2] {
    if z0 == 0.0 && a == 0.0 {
        return [
            quantile_sorted(sorted_reps, alpha / 2.0),
            quantile_sorted(sorted_reps, 1.0 - alpha / 2.0),
        ];
    }
    let adj = |z: f64| {
        let t = z0 + z;
        norm_cdf(z0 + t / (1.0 - a * t))
    };
    let lo = adj(norm_quantile(alpha / 2.0));
    let hi = adj(norm_quantile(1.0 - alpha / 2.0));
    [quantile_sorted(sorted_reps, lo), quantile_sorted(sorted_reps, hi)]
}

/// Bias-corrected and accelerated interval. A parameter whose replicates
/// all fall on one side of the estimate gets percentile bounds and sets
/// `fallback`.
pub fn bca_ci(e: &BootstrapEnsemble, alpha: f64) -> Result<IntervalPair> {
    check_alpha(alpha)?;
    let point = e.point.coefficients();
    let mut b = [[0.0; 2]; 2];
    let mut fallback = false;
    for j in 0..2 {
        let v = column(e, j);
        let jack: Vec<f64> = e.jack.iter().map(|p| p[j]).collect();
        match bca_bias(&v, point[j]) {
            Some(z0) => b[j] = bca_bounds(&v, z0, bca_acceleration(&jack), alpha),
            None => {
                fallback = true;
                b[j] = [quantile_sorted(&v, alpha / 2.0), quantile_sorted(&v, 1.0 - alpha / 2.0)];
            }
        }
    }
    Ok(pair(b, alpha, IntervalKind::Bca, fallback))
}

/// Bootstrap-t interval; needs an ensemble built with `studentized`.
/// Replicates with zero or missing inner SE are dropped.
pub fn studentized_ci(e: &BootstrapEnsemble, alpha: f64) -> Result<IntervalPair> {
    check_alpha(alpha)?;
    let (inner, se_hat) = match (&e.inner_se, e.point_se) {
        (Some(i), Some(p)) => (i, p),
        _ => {
            return Err(Error::Invalid(
                "studentized interval needs an ensemble built with inner jackknife SEs".into(),
            ))
        }
    };
    let point = e.point.coefficients();
    let mut b = [[0.0; 2]; 2];
    for j in 0..2 {
        let t: Vec<f64> = e
            .pairs
            .iter()
            .zip(inner)
            .filter(|(_, s)| s[j] > 0.0)
            .map(|(p, s)| (p[j] - point[j]) / s[j])
            .collect();
        if t.is_empty() || !(se_hat[j] > 0.0) {
            b[j] = [point[j], point[j]];
            continue;
        }
        let t = sorted(&t);
        b[j] = [
            point[j] - quantile_sorted(&t, 1.0 - alpha / 2.0) * se_hat[j],
            point[j] - quantile_sorted(&t, alpha / 2.0) * se_hat[j],
        ];
    }
    Ok(pair(b, alpha, IntervalKind::Studentized, false))
}

/// Replicates dropped by [`studentized_ci`] for each parameter.
pub fn studentized_dropped(e: &BootstrapEnsemble) -> [usize; 2] {
    let mut out = [0; 2];
    if let Some(inner) = &e.inner_se {
        for s in inner {
            for j in 0..2 {
                if !(s[j] > 0.0) {
                    out[j] += 1;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ensemble(pairs: Vec<[f64; 2]>, point: [f64; 2]) -> BootstrapEnsemble {
        BootstrapEnsemble {
            b: pairs.len(),
            pairs,
            jack: Vec::new(),
            point: RegressionFit {
                intercept: point[0],
                slope: point[1],
                method: Method::Dem,
                iterations: 1,
                converged: true,
                weights: None,
            },
            failed: 0,
            inner_se: None,
            point_se: None,
        }
    }

    #[test]
    fn percentile_hand_values() {
        let e = ensemble((1..=999).map(|i| [0.0, i as f64]).collect(), [0.0, 500.0]);
        let ci = percentile_ci(&e, 0.05).unwrap();
        assert!((ci.slope_lo - 25.95).abs() < 1e-9 && (ci.slope_hi - 974.05).abs() < 1e-9);
    }

    #[test]
    fn bca_with_zero_corrections_is_percentile() {
        let v: Vec<f64> = (0..500).map(|i| ((i * 37) % 500) as f64 * 0.01).collect();
        let s = sorted(&v);
        let b = bca_bounds(&s, 0.0, 0.0, 0.1);
        assert_eq!(b, [quantile_sorted(&s, 0.05), quantile_sorted(&s, 0.95)]);
    }

    #[test]
    fn degenerate_ensemble_is_zero_width() {
        let e = ensemble(vec![[0.5, 1.5]; 300], [0.5, 1.5]);
        let p = percentile_ci(&e, 0.05).unwrap();
        assert_eq!((p.slope_lo, p.slope_hi, p.int_lo, p.int_hi), (1.5, 1.5, 0.5, 0.5));
        let b = bca_ci(&e, 0.05).unwrap();
        assert!(b.fallback);
        assert_eq!((b.slope_lo, b.slope_hi), (1.5, 1.5));
    }
}
