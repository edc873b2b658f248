use super::{check_line, DemingConfig, Method, RegressionFit};
use crate::dataset::PairedSample;
use crate::error::{Error, Result};

/// Weighted errors-in-variables line. `weights = None` is ordinary Deming.
pub fn weighted_deming_line(x: &[f64], y: &[f64], weights: Option<&[f64]>, lambda: f64) -> Result<(f64, f64)> {
    weighted_deming_line_xy(x, y, weights, weights, lambda)
}

/// Errors-in-variables line with separate weights for the x and the y
/// moments; the cross moment uses their geometric mean.
pub fn weighted_deming_line_xy(
    x: &[f64],
    y: &[f64],
    wx: Option<&[f64]>,
    wy: Option<&[f64]>,
    lambda: f64,
) -> Result<(f64, f64)> {
    let wx = |i: usize| wx.map_or(1.0, |w| w[i]);
    let wy = |i: usize| wy.map_or(1.0, |w| w[i]);
    let (mut swx, mut swy, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        swx += wx(i);
        swy += wy(i);
        sx += wx(i) * x[i];
        sy += wy(i) * y[i];
    }
    if !(swx > 0.0 && swy > 0.0) {
        return Err(Error::Degenerate("all weights are zero".into()));
    }
    let (mx, my) = (sx / swx, sy / swy);
    let (mut p, mut q, mut r, mut swxy) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        let wxy = (wx(i) * wy(i)).sqrt();
        p += wx(i) * dx * dx;
        q += wy(i) * dy * dy;
        r += wxy * dx * dy;
        swxy += wxy;
    }
    if !(swxy > 0.0) {
        return Err(Error::Degenerate("x and y weights do not overlap".into()));
    }
    let (p, q, r) = (p / swx, q / swy, r / swxy);
    if r == 0.0 || !(p > 0.0 || q > 0.0) {
        return Err(Error::Degenerate(
            "zero covariance between x and y, slope is indeterminate".into(),
        ));
    }
    // b = (l q - p + sqrt((l q - p)^2 + 4 l r^2)) / (2 l r), rewritten to
    // avoid cancellation when l q < p.
    let d = lambda * q - p;
    let root = (d * d + 4.0 * lambda * r * r).sqrt();
    let slope = if d >= 0.0 {
        (d + root) / (2.0 * lambda * r)
    } else {
        2.0 * r / (root - d)
    };
    let intercept = my - slope * mx;
    check_line(intercept, slope)?;
    Ok((intercept, slope))
}

/// Per-point (x, y) residual components of the optimal projection of each
/// point onto the line, for error-variance ratio `lambda`.
pub fn deming_residuals(x: &[f64], y: &[f64], intercept: f64, slope: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let denom = 1.0 + lambda * slope * slope;
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - intercept - slope * xi;
            (-lambda * slope * r / denom, r / denom)
        })
        .unzip()
}

/// Closed-form Deming regression.
pub fn fit_deming(s: &PairedSample, cfg: &DemingConfig) -> Result<RegressionFit> {
    cfg.validate()?;
    let (intercept, slope) = weighted_deming_line(&s.x, &s.y, None, cfg.lambda)?;
    Ok(RegressionFit {
        intercept,
        slope,
        method: Method::Dem,
        iterations: 1,
        converged: true,
        weights: None,
    })
}

/// Weighted Deming for constant-CV errors: weights are inverse squared
/// levels, re-estimated from the current line until the slope settles.
pub fn fit_wdeming(s: &PairedSample, cfg: &DemingConfig) -> Result<RegressionFit> {
    cfg.validate()?;
    let lambda = cfg.lambda;
    let (mut a, mut b) = weighted_deming_line(&s.x, &s.y, None, lambda)?;
    let mut weights = vec![1.0; s.n()];
    for iter in 1..=cfg.max_iter {
        let (dx, dy) = deming_residuals(&s.x, &s.y, a, b, lambda);
        for i in 0..s.n() {
            let xhat = s.x[i] - dx[i];
            let yhat = s.y[i] - dy[i];
            let level = 0.5 * (xhat + yhat);
            if !(level > 0.0) {
                return Err(Error::Degenerate(format!(
                    "non-positive estimated level {level} at point {i}"
                )));
            }
            weights[i] = 1.0 / (level * level);
        }
        let (na, nb) = weighted_deming_line(&s.x, &s.y, Some(&weights), lambda)?;
        let delta = (nb - b).abs();
        a = na;
        b = nb;
        if delta < cfg.tol {
            return Ok(RegressionFit {
                intercept: a,
                slope: b,
                method: Method::WDem,
                iterations: iter,
                converged: true,
                weights: Some(weights),
            });
        }
    }
    Ok(RegressionFit {
        intercept: a,
        slope: b,
        method: Method::WDem,
        iterations: cfg.max_iter,
        converged: false,
        weights: Some(weights),
    })
}
