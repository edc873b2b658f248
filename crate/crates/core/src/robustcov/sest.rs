//! Bisquare S-estimator and Rocke's translated-biweight estimator of
//! bivariate location/scatter, by iterative reweighting.

use std::sync::OnceLock;

use super::{fast_mcd, sq_distances, weighted_moments, CovEstimator, CovarianceModel, McdOptions, Point, Sym2};
use crate::error::{Error, Result};
use crate::stats::{chi2_2_quantile, median, median_mut, MAD_SCALE};

const MAX_ITER: usize = 200;
const TOL: f64 = 1e-9;

/// E[min(T, a)^k]-type pieces: integral of t^k * chi2_2 density over [0, a].
fn chi2_2_partial_moment(k: u32, a: f64) -> f64 {
    // 2^k * gamma_lower(k + 1, a / 2), closed form for integer k
    let x = a / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut fact = 1.0;
    for j in 1..=k {
        term *= x / j as f64;
        sum += term;
        fact *= j as f64;
    }
    2f64.powi(k as i32) * fact * (1.0 - (-x).exp() * sum)
}

fn bisquare_expected_rho(c: f64) -> f64 {
    let a = c * c;
    let m1 = chi2_2_partial_moment(1, a);
    let m2 = chi2_2_partial_moment(2, a);
    let m3 = chi2_2_partial_moment(3, a);
    let tail = (-a / 2.0).exp();
    m1 / 2.0 - m2 / (2.0 * a) + m3 / (6.0 * a * a) + a / 6.0 * tail
}

/// Bisquare tuning constant giving a 50% breakdown S-estimator that is
/// consistent at the bivariate normal.
pub fn bisquare_s_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let (mut lo, mut hi) = (0.5f64, 10.0f64);
        for _ in 0..200 {
            let c = 0.5 * (lo + hi);
            // E[rho] / rho(inf) decreases in c
            if bisquare_expected_rho(c) / (c * c / 6.0) > 0.5 {
                lo = c;
            } else {
                hi = c;
            }
        }
        0.5 * (lo + hi)
    })
}

fn bisquare_rho(u: f64, c: f64) -> f64 {
    if u.abs() >= c {
        c * c / 6.0
    } else {
        let v = (u / c).powi(2);
        c * c / 6.0 * (1.0 - (1.0 - v).powi(3))
    }
}

fn bisquare_w(u: f64, c: f64) -> f64 {
    if u.abs() >= c {
        0.0
    } else {
        (1.0 - (u / c).powi(2)).powi(2)
    }
}

/// M-scale: s with mean rho(d / s) = b.
fn m_scale(d: &[f64], c: f64, b: f64, start: f64) -> Option<f64> {
    let mut s = start;
    if !(s > 0.0) {
        return None;
    }
    for _ in 0..500 {
        let m = d.iter().map(|&v| bisquare_rho(v / s, c)).sum::<f64>() / d.len() as f64;
        let next = s * (m / b).sqrt();
        if !(next > 0.0) || !next.is_finite() {
            return None;
        }
        if (next - s).abs() <= 1e-12 * s {
            return Some(next);
        }
        s = next;
    }
    Some(s)
}

fn shape(s: &Sym2) -> Option<Sym2> {
    let det = s.det();
    if s.is_singular() || !(det > 0.0) {
        return None;
    }
    Some(s.scale(1.0 / det.sqrt()))
}

fn changed(c0: Point, v0: &Sym2, c1: Point, v1: &Sym2) -> f64 {
    let dc = (c1[0] - c0[0]).abs().max((c1[1] - c0[1]).abs());
    let dv = (v1.xx - v0.xx)
        .abs()
        .max((v1.xy - v0.xy).abs())
        .max((v1.yy - v0.yy).abs());
    let scale = 1.0 + v0.xx.abs().max(v0.yy.abs());
    dc / scale.sqrt() + dv / scale
}

fn start_failure(what: &str) -> Error {
    Error::StartFailure(what.to_string())
}

/// Bisquare S-estimate (50% breakdown), started from FAST-MCD.
pub fn s_cov(points: &[Point], seed: u64) -> Result<CovarianceModel> {
    let n = points.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "S-estimator needs at least 5 points, got {n}"
        )));
    }
    let opts = McdOptions {
        seed,
        ..McdOptions::default()
    };
    let start = if n >= 10 {
        fast_mcd(points, &opts)
    } else {
        super::classic_cov(points)
    }
    .map_err(|e| start_failure(&format!("S-estimator start: {e}")))?;

    let c = bisquare_s_constant();
    let b = c * c / 12.0;
    let mut center = start.center;
    let mut v = shape(&start.scatter).ok_or_else(|| start_failure("singular start"))?;
    let mut d2 = Vec::with_capacity(n);
    let mut scale = f64::NAN;
    for _ in 0..MAX_ITER {
        sq_distances(points, center, &v.inverse(), &mut d2);
        let d: Vec<f64> = d2.iter().map(|x| x.max(0.0).sqrt()).collect();
        let s0 = if scale.is_finite() { scale } else { median(&d) / 1.1774 };
        scale = m_scale(&d, c, b, s0).ok_or_else(|| start_failure("S scale collapsed to zero"))?;
        let w: Vec<f64> = d.iter().map(|&di| bisquare_w(di / scale, c)).collect();
        if w.iter().filter(|&&x| x > 0.0).count() < 3 {
            return Err(start_failure("too few points with positive S weight"));
        }
        let (nc, ns, _) = weighted_moments(points, &w);
        let nv = shape(&ns).ok_or_else(|| start_failure("S scatter became singular"))?;
        let delta = changed(center, &v, nc, &nv);
        center = nc;
        v = nv;
        if delta < TOL {
            sq_distances(points, center, &v.inverse(), &mut d2);
            let d: Vec<f64> = d2.iter().map(|x| x.max(0.0).sqrt()).collect();
            let s = m_scale(&d, c, b, scale).ok_or_else(|| start_failure("S scale collapsed"))?;
            let scatter = v.scale(s * s);
            return CovarianceModel::checked(center, scatter, CovEstimator::Sest, 1.0)
                .map_err(|e| start_failure(&e.to_string()));
        }
    }
    Err(start_failure("S-estimator did not converge"))
}

// Rocke's translated biweight for p = 2: gamma = min(chi2_2(0.995)/2 - 1, 1) = 1.
const ROCKE_GAMMA: f64 = 1.0;

fn rocke_rho(t: f64) -> f64 {
    let g = ROCKE_GAMMA;
    if t < 1.0 - g {
        0.0
    } else if t > 1.0 + g {
        1.0
    } else {
        let u = (t - 1.0) / g;
        0.25 * u * (3.0 - u * u) + 0.5
    }
}

fn rocke_w(t: f64) -> f64 {
    let u = (t - 1.0) / ROCKE_GAMMA;
    if u.abs() > 1.0 {
        0.0
    } else {
        0.75 / ROCKE_GAMMA * (1.0 - u * u)
    }
}

/// sigma with mean rho(d2 / sigma) = delta, by bisection in log space.
fn rocke_scale(d2: &[f64], delta: f64) -> Option<f64> {
    let mean_rho = |s: f64| d2.iter().map(|&t| rocke_rho(t / s)).sum::<f64>() / d2.len() as f64;
    let med = median(d2);
    if !(med > 0.0) {
        return None;
    }
    let (mut lo, mut hi) = ((med * 1e-6).ln(), (med * 1e6).ln());
    if mean_rho(lo.exp()) < delta || mean_rho(hi.exp()) > delta {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_rho(mid.exp()) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((0.5 * (lo + hi)).exp())
}

/// Rocke-type S-estimate from a coordinatewise median/MAD start. Used as
/// the fallback when the bisquare S start fails.
pub fn rocke_cov(points: &[Point], _seed: u64) -> Result<CovarianceModel> {
    let n = points.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "Rocke estimator needs at least 5 points, got {n}"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
    let mx = median(&xs);
    let my = median(&ys);
    let sx = MAD_SCALE * median(&xs.iter().map(|v| (v - mx).abs()).collect::<Vec<_>>());
    let sy = MAD_SCALE * median(&ys.iter().map(|v| (v - my).abs()).collect::<Vec<_>>());
    let mut center = [mx, my];
    let mut v = shape(&Sym2::new(sx * sx, 0.0, sy * sy)).ok_or_else(|| start_failure("Rocke start has zero MAD"))?;
    let delta = 0.5 * (1.0 - 2.0 / n as f64);
    let mut d2 = Vec::with_capacity(n);
    for _ in 0..MAX_ITER {
        sq_distances(points, center, &v.inverse(), &mut d2);
        let sigma = rocke_scale(&d2, delta).ok_or_else(|| start_failure("Rocke scale failed"))?;
        let w: Vec<f64> = d2.iter().map(|&t| rocke_w(t / sigma)).collect();
        if w.iter().filter(|&&x| x > 0.0).count() < 3 {
            return Err(start_failure("too few points with positive Rocke weight"));
        }
        let (nc, ns, _) = weighted_moments(points, &w);
        let nv = shape(&ns).ok_or_else(|| start_failure("Rocke scatter became singular"))?;
        let delta_change = changed(center, &v, nc, &nv);
        center = nc;
        v = nv;
        if delta_change < TOL {
            sq_distances(points, center, &v.inverse(), &mut d2);
            let f = median_mut(&mut d2) / chi2_2_quantile(0.5);
            return CovarianceModel::checked(center, v.scale(f), CovEstimator::Rocke, f)
                .map_err(|e| start_failure(&e.to_string()));
        }
    }
    Err(start_failure("Rocke estimator did not converge"))
}
