use serde::{Deserialize, Serialize};

use super::{check_line, Method, RegressionFit};
use crate::dataset::PairedSample;
use crate::error::{Error, Result};
use crate::stats::{median_mut, norm_quantile};

/// Pairwise slopes of a sample, with slopes of exactly -1 removed.
#[derive(Debug, Clone)]
pub struct PairwiseSlopes {
    pub slopes: Vec<f64>,
    /// Number of slopes below -1, the median offset.
    pub offset: usize,
}

/// Pairs with equal x contribute an infinite slope signed like dy;
/// identical pairs are skipped.
pub fn pairwise_slopes(x: &[f64], y: &[f64]) -> PairwiseSlopes {
    let n = x.len();
    let mut slopes = Vec::with_capacity(n * (n - 1) / 2);
    let mut offset = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[j] - x[i];
            let dy = y[j] - y[i];
            let s = if dx == 0.0 {
                if dy == 0.0 {
                    continue;
                }
                f64::INFINITY.copysign(dy)
            } else {
                dy / dx
            };
            if s == -1.0 {
                continue;
            }
            if s < -1.0 {
                offset += 1;
            }
            slopes.push(s);
        }
    }
    PairwiseSlopes { slopes, offset }
}

fn shifted_median(mut ps: PairwiseSlopes) -> Result<f64> {
    let n = ps.slopes.len();
    if n == 0 {
        return Err(Error::Degenerate("no valid pairwise slope".into()));
    }
    let k = ps.offset;
    let hi = n / 2 + k;
    if hi >= n {
        return Err(Error::Degenerate(format!(
            "{k} of {n} pairwise slopes are below -1; the offset median is undefined"
        )));
    }
    let s = &mut ps.slopes;
    let (left, &mut upper, _) = s.select_nth_unstable_by(hi, f64::total_cmp);
    if n % 2 == 1 {
        Ok(upper)
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(0.5 * (lower + upper))
    }
}

fn intercept_for(s: &PairedSample, slope: f64) -> f64 {
    let mut r: Vec<f64> = s.x.iter().zip(&s.y).map(|(x, y)| y - slope * x).collect();
    median_mut(&mut r)
}

/// Passing-Bablok regression.
pub fn fit_paba(s: &PairedSample) -> Result<RegressionFit> {
    if s.n() < 3 {
        return Err(Error::InsufficientData("need at least 3 pairs".into()));
    }
    if s.x.iter().all(|&v| v == s.x[0]) {
        return Err(Error::Degenerate("all x values are identical".into()));
    }
    let slope = shifted_median(pairwise_slopes(&s.x, &s.y))?;
    if !slope.is_finite() {
        return Err(Error::Degenerate("median pairwise slope is infinite".into()));
    }
    let intercept = intercept_for(s, slope);
    check_line(intercept, slope)?;
    Ok(RegressionFit {
        intercept,
        slope,
        method: Method::PaBa,
        iterations: 1,
        converged: true,
        weights: None,
    })
}

/// Distribution-free confidence bounds of a Passing-Bablok fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PabaInterval {
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub int_lo: f64,
    pub int_hi: f64,
}

/// Rank-based slope interval from the ordered pairwise slopes; the intercept
/// bounds are the residual medians at the slope bounds.
pub fn paba_analytic_ci(s: &PairedSample, alpha: f64) -> Result<PabaInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Invalid(format!("alpha must be in (0, 1), got {alpha}")));
    }
    fit_paba(s)?;
    let PairwiseSlopes { mut slopes, offset } = pairwise_slopes(&s.x, &s.y);
    slopes.sort_by(f64::total_cmp);
    let big_n = slopes.len() as f64;
    let n = s.n() as f64;
    let w = norm_quantile(1.0 - alpha / 2.0) * (n * (n - 1.0) * (2.0 * n + 5.0) / 18.0).sqrt();
    let m1 = ((big_n - w) / 2.0).round();
    if m1 < 1.0 {
        return Err(Error::InsufficientData(format!(
            "{} pairs are too few for a {}% interval",
            s.n(),
            100.0 * (1.0 - alpha)
        )));
    }
    let m1 = m1 as usize;
    let m2 = slopes.len() - m1 + 1;
    if m2 + offset > slopes.len() {
        return Err(Error::InsufficientData(
            "offset pushes the upper bound past the last slope".into(),
        ));
    }
    let slope_lo = slopes[m1 + offset - 1];
    let slope_hi = slopes[m2 + offset - 1];
    if !(slope_lo.is_finite() && slope_hi.is_finite()) {
        return Err(Error::Degenerate("slope bound is infinite".into()));
    }
    Ok(PabaInterval {
        slope_lo,
        slope_hi,
        int_lo: intercept_for(s, slope_hi),
        int_hi: intercept_for(s, slope_lo),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::hemoglobin;

    #[test]
    fn hemoglobin_point_estimate() {
        let f = fit_paba(&hemoglobin()).unwrap();
        assert!((f.slope - 0.90625).abs() < 1e-12);
        assert!((f.intercept - 0.2484375).abs() < 1e-12);
    }

    #[test]
    fn hemoglobin_analytic_upper_bound() {
        let ci = paba_analytic_ci(&hemoglobin(), 0.05).unwrap();
        assert!((ci.slope_hi - 1.0).abs() < 5e-6);
        assert!(ci.slope_lo < 0.90625);
        assert!(ci.int_lo <= ci.int_hi);
    }

    #[test]
    fn identity_data() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let s = PairedSample::new(x.clone(), x, "id").unwrap();
        let f = fit_paba(&s).unwrap();
        assert_eq!((f.intercept, f.slope), (0.0, 1.0));
        let ci = paba_analytic_ci(&s, 0.05).unwrap();
        assert_eq!((ci.slope_lo, ci.slope_hi), (1.0, 1.0));
    }

    #[test]
    fn too_small_for_interval() {
        let s = PairedSample::new(vec![1.0, 2.0, 3.0], vec![1.1, 2.0, 2.9], "t").unwrap();
        assert!(matches!(paba_analytic_ci(&s, 0.05), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn constant_x_is_degenerate() {
        let s = PairedSample::new(vec![2.0; 4], vec![1.0, 2.0, 3.0, 4.0], "t").unwrap();
        assert!(matches!(fit_paba(&s), Err(Error::Degenerate(_))));
    }
}
