//! Robust Deming: M-Deming with Huber weights and MM-Deming with a robust
//! covariance start and Tukey bisquare weights. A weight is computed from
//! each standardized residual component and applied to the moments of that
//! coordinate; the reported per-point weight is their geometric mean.

use super::deming::{deming_residuals, weighted_deming_line, weighted_deming_line_xy};
use super::{DemingConfig, Method, RegressionFit};
use crate::dataset::PairedSample;
use crate::error::{Error, Result};
use crate::robustcov::{rocke_cov, s_cov, CovarianceModel, Point};
use crate::stats::{mad, mean_abs_dev};

pub fn huber_weight(u: f64, k: f64) -> f64 {
    let a = u.abs();
    if a <= k {
        1.0
    } else {
        k / a
    }
}

pub fn bisquare_weight(u: f64, c: f64) -> f64 {
    let t = u / c;
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - t * t).powi(2)
    }
}

/// MAD scale, falling back to the mean absolute deviation (rescaled to
/// the normal SD) when more than half the residuals coincide.
fn robust_scale(r: &[f64]) -> Result<f64> {
    let s = mad(r);
    if s > 0.0 {
        return Ok(s);
    }
    let s = mean_abs_dev(r) * (std::f64::consts::PI / 2.0).sqrt();
    if s > 0.0 {
        Ok(s)
    } else {
        Err(Error::Degenerate("residual scale is zero".into()))
    }
}

/// Returns the Deming line when every point lies on it.
fn exact_line(s: &PairedSample, cfg: &DemingConfig) -> Result<Option<(f64, f64)>> {
    let (a, b) = weighted_deming_line(&s.x, &s.y, None, cfg.lambda)?;
    let ymax = s.y.iter().fold(0f64, |m, v| m.max(v.abs()));
    let exact =
        s.x.iter()
            .zip(&s.y)
            .all(|(&x, &y)| (y - a - b * x).abs() <= 1e-12 * (1.0 + ymax));
    Ok(exact.then_some((a, b)))
}

fn exact_fit(method: Method, a: f64, b: f64, n: usize) -> RegressionFit {
    RegressionFit {
        intercept: a,
        slope: b,
        method,
        iterations: 1,
        converged: true,
        weights: Some(vec![1.0; n]),
    }
}

fn combined(wx: &[f64], wy: &[f64]) -> Vec<f64> {
    wx.iter().zip(wy).map(|(a, b)| (a * b).sqrt()).collect()
}

fn slope_from_scatter(cov: &CovarianceModel) -> Option<(f64, f64)> {
    let s = cov.scatter;
    if s.xx <= 0.0 || s.xy == 0.0 {
        return None;
    }
    let b = 0.5 * (s.xy / s.xx + s.yy / s.xy);
    let a = cov.center[1] - b * cov.center[0];
    (a.is_finite() && b.is_finite() && b != 0.0).then_some((a, b))
}

/// Starting line for MM-Deming from the S-estimate of the (x, y) scatter,
/// or from the Rocke estimate when the S start fails.
pub fn mm_start(s: &PairedSample, seed: u64) -> Result<(f64, f64, CovarianceModel)> {
    let points: Vec<Point> = s.x.iter().zip(&s.y).map(|(&x, &y)| [x, y]).collect();
    let mut reasons = Vec::new();
    for (name, est) in [
        ("S", s_cov as fn(&[Point], u64) -> Result<CovarianceModel>),
        ("Rocke", rocke_cov),
    ] {
        match est(&points, seed) {
            Ok(cov) => match slope_from_scatter(&cov) {
                Some((a, b)) => return Ok((a, b, cov)),
                None => reasons.push(format!("{name}: scatter gives no slope")),
            },
            Err(e) => reasons.push(format!("{name}: {e}")),
        }
    }
    Err(Error::StartFailure(reasons.join("; ")))
}

type Step<'a> = dyn FnMut(f64, f64) -> Result<(f64, f64, Vec<f64>)> + 'a;

/// Fixed-point iteration of a reweighting step. Every third step the
/// linearly converging slope sequence is extrapolated (Aitken); convergence
/// is only declared on a plain step.
fn iterate(method: Method, start: (f64, f64), max_iter: usize, tol: f64, step: &mut Step<'_>) -> Result<RegressionFit> {
    let (mut a, mut b) = start;
    let mut hist: Vec<(f64, f64)> = vec![(a, b)];
    let mut w = Vec::new();
    for iter in 1..=max_iter {
        let (na, nb, nw) = step(a, b)?;
        let delta = (nb - b).abs();
        a = na;
        b = nb;
        w = nw;
        if delta < tol {
            return Ok(RegressionFit {
                intercept: a,
                slope: b,
                method,
                iterations: iter,
                converged: true,
                weights: Some(w),
            });
        }
        hist.push((a, b));
        if hist.len() == 3 {
            let (d1, d2) = (hist[1].1 - hist[0].1, hist[2].1 - hist[1].1);
            let rho = d2 / d1;
            if rho.is_finite() && rho > 0.0 && rho < 0.99 {
                let f = rho / (1.0 - rho);
                let (ea, eb) = (a + f * (a - hist[1].0), b + f * d2);
                if ea.is_finite() && eb.is_finite() && eb != 0.0 {
                    a = ea;
                    b = eb;
                }
            }
            hist.clear();
            hist.push((a, b));
        }
    }
    Ok(RegressionFit {
        intercept: a,
        slope: b,
        method,
        iterations: max_iter,
        converged: false,
        weights: Some(w),
    })
}

/// M-Deming: Huber-weighted IRWLS Deming started from the plain Deming fit.
pub fn fit_mdeming(s: &PairedSample, cfg: &DemingConfig) -> Result<RegressionFit> {
    cfg.validate()?;
    if let Some((a, b)) = exact_line(s, cfg)? {
        return Ok(exact_fit(Method::MDem, a, b, s.n()));
    }
    let start = weighted_deming_line(&s.x, &s.y, None, cfg.lambda)?;
    let (mut wx, mut wy) = (vec![1.0; s.n()], vec![1.0; s.n()]);
    iterate(Method::MDem, start, cfg.max_iter, cfg.tol, &mut |a, b| {
        let (d, e) = deming_residuals(&s.x, &s.y, a, b, cfg.lambda);
        let (sd, se) = (robust_scale(&d)?, robust_scale(&e)?);
        for i in 0..s.n() {
            wx[i] = huber_weight(d[i] / sd, cfg.huber_k);
            wy[i] = huber_weight(e[i] / se, cfg.huber_k);
        }
        let (na, nb) = weighted_deming_line_xy(&s.x, &s.y, Some(&wx), Some(&wy), cfg.lambda)?;
        Ok((na, nb, combined(&wx, &wy)))
    })
}

/// MM-Deming: robust start, fixed scale from the mean absolute euclidean
/// residual of the start line, then bisquare IRWLS.
pub fn fit_mmdeming(s: &PairedSample, cfg: &DemingConfig) -> Result<RegressionFit> {
    cfg.validate()?;
    if let Some((a, b)) = exact_line(s, cfg)? {
        return Ok(exact_fit(Method::MMDem, a, b, s.n()));
    }
    let (a, b, _) = mm_start(s, cfg.start_seed)?;
    let euclid = |a: f64, b: f64| -> Vec<f64> {
        let (d, e) = deming_residuals(&s.x, &s.y, a, b, cfg.lambda);
        d.iter().zip(&e).map(|(d, e)| d.hypot(*e)).collect()
    };
    let sigma = crate::stats::mean(&euclid(a, b));
    if !(sigma > 0.0) {
        return Err(Error::Degenerate("zero residual scale at the MM start".into()));
    }
    let mut w = vec![1.0; s.n()];
    iterate(Method::MMDem, (a, b), cfg.mm_max_iter, cfg.tol, &mut |a, b| {
        for (wi, r) in w.iter_mut().zip(euclid(a, b)) {
            *wi = bisquare_weight(r / sigma, cfg.bisquare_c);
        }
        if w.iter().filter(|&&v| v > 0.0).count() < 3 {
            return Err(Error::Degenerate(
                "fewer than 3 points keep a positive bisquare weight".into(),
            ));
        }
        // the same weight enters the x and the y moments
        let (na, nb) = weighted_deming_line_xy(&s.x, &s.y, Some(&w), Some(&w), cfg.lambda)?;
        Ok((na, nb, w.clone()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::hemoglobin;

    #[test]
    fn weight_functions() {
        assert_eq!(huber_weight(1.0, 1.345), 1.0);
        assert!((huber_weight(-2.69, 1.345) - 0.5).abs() < 1e-12);
        assert_eq!(bisquare_weight(0.0, 4.685), 1.0);
        assert_eq!(bisquare_weight(5.0, 4.685), 0.0);
    }

    #[test]
    fn exact_data_keeps_unit_weights() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let s = PairedSample::new(x, y, "exact").unwrap();
        let cfg = DemingConfig::default();
        for f in [fit_mdeming(&s, &cfg).unwrap(), fit_mmdeming(&s, &cfg).unwrap()] {
            assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-10);
            assert!(f.weights.unwrap().iter().all(|&w| w == 1.0));
        }
    }

    #[test]
    fn hemoglobin_mdem_converges() {
        let f = fit_mdeming(&hemoglobin(), &DemingConfig::default()).unwrap();
        assert!(f.converged);
        assert!(f.weights.unwrap().iter().all(|&w| (0.0..=1.0).contains(&w)));
    }
}
