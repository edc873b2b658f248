//! Stahel-Donoho estimator from projection outlyingness.

use rand::Rng;

use super::{sq_distances, weighted_moments, CovEstimator, CovarianceModel, Point};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{chi2_2_quantile, median_mut, MAD_SCALE};

#[derive(Debug, Clone, PartialEq)]
pub struct SdeOptions {
    /// Random directions.
    pub n_dirs: usize,
    /// Also use the normals of all point pairs when B is at most this.
    pub pairwise_limit: usize,
    pub seed: u64,
}

impl Default for SdeOptions {
    fn default() -> Self {
        Self {
            n_dirs: 1000,
            pairwise_limit: 200,
            seed: 0,
        }
    }
}

fn directions(points: &[Point], opts: &SdeOptions) -> Vec<Point> {
    let mut rng = rng::stream(opts.seed, &[0x53_44_45]);
    let mut dirs: Vec<Point> = (0..opts.n_dirs)
        .map(|_| {
            let t = std::f64::consts::PI * rng.random::<f64>();
            [t.cos(), t.sin()]
        })
        .collect();
    let n = points.len();
    if n <= opts.pairwise_limit {
        for i in 0..n {
            for j in (i + 1)..n {
                let (dx, dy) = (points[j][0] - points[i][0], points[j][1] - points[i][1]);
                let norm = dx.hypot(dy);
                if norm > 0.0 {
                    dirs.push([-dy / norm, dx / norm]);
                }
            }
        }
    }
    dirs
}

/// Maximal standardized projection distance of every point.
pub fn outlyingness(points: &[Point], dirs: &[Point]) -> Result<Vec<f64>> {
    let n = points.len();
    let mut out = vec![0.0f64; n];
    let mut proj = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut used = 0usize;
    for d in dirs {
        for (p, q) in proj.iter_mut().zip(points) {
            *p = d[0] * q[0] + d[1] * q[1];
        }
        scratch.copy_from_slice(&proj);
        let med = median_mut(&mut scratch);
        for (s, p) in scratch.iter_mut().zip(&proj) {
            *s = (p - med).abs();
        }
        let mad = MAD_SCALE * median_mut(&mut scratch);
        if !(mad > 1e-12 * (1.0 + med.abs())) {
            continue;
        }
        used += 1;
        for (o, p) in out.iter_mut().zip(&proj) {
            *o = o.max((p - med).abs() / mad);
        }
    }
    if used == 0 {
        return Err(Error::Singular("every projection direction has zero MAD".into()));
    }
    Ok(out)
}

/// Huber-type Stahel-Donoho location/scatter, rescaled so the median
/// squared distance matches chi-square(2).
pub fn stahel_donoho(points: &[Point], opts: &SdeOptions) -> Result<CovarianceModel> {
    let n = points.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "SDe needs at least 10 points, got {n}"
        )));
    }
    let dirs = directions(points, opts);
    let r = outlyingness(points, &dirs)?;
    let c2 = chi2_2_quantile(0.95);
    let w: Vec<f64> = r
        .iter()
        .map(|&ri| if ri * ri <= c2 { 1.0 } else { c2 / (ri * ri) })
        .collect();
    let (center, s, _) = weighted_moments(points, &w);
    if s.is_singular() {
        return Err(Error::Singular("SDe weighted scatter is singular".into()));
    }
    let mut d = Vec::with_capacity(n);
    sq_distances(points, center, &s.inverse(), &mut d);
    let f = median_mut(&mut d) / chi2_2_quantile(0.5);
    CovarianceModel::checked(center, s.scale(f), CovEstimator::Sde, f)
}
