//! FAST-MCD for bivariate data (Rousseeuw & Van Driessen).

use rand::seq::index::sample;
use rand::Rng;

use super::{sq_distances, subset_moments, weighted_moments, CovEstimator, CovarianceModel, Point, Sym2};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{chi2_2_quantile, chi2_4_cdf};

#[derive(Debug, Clone, PartialEq)]
pub struct McdOptions {
    /// Fraction of points covered; 0.5 gives h = floor((B + 3) / 2).
    pub h_fraction: f64,
    pub n_starts: usize,
    pub initial_csteps: usize,
    pub n_finalists: usize,
    /// One-step reweighting at the 0.975 chi-square quantile.
    pub reweight: bool,
    pub seed: u64,
}

impl Default for McdOptions {
    fn default() -> Self {
        Self {
            h_fraction: 0.5,
            n_starts: 500,
            initial_csteps: 2,
            n_finalists: 10,
            reweight: true,
            seed: 0,
        }
    }
}

/// Optimal h-subset found by the C-step search.
#[derive(Debug, Clone)]
pub struct McdRaw {
    /// Sorted indices of the h-subset.
    pub subset: Vec<usize>,
    pub center: Point,
    /// Covariance of the subset, divisor h.
    pub cov: Sym2,
    pub det: f64,
}

pub(crate) fn subset_size(n: usize, fraction: f64) -> usize {
    let n2 = (n + 3) / 2;
    let h = (2.0 * n2 as f64 - n as f64 + 2.0 * (n - n2) as f64 * fraction).floor() as usize;
    h.clamp(n2, n)
}

struct Search<'a> {
    points: &'a [Point],
    h: usize,
    dist: Vec<f64>,
    order: Vec<usize>,
}

enum Step {
    Regular(McdRaw),
    Exact(McdRaw),
}

impl<'a> Search<'a> {
    fn new(points: &'a [Point], h: usize) -> Self {
        Self {
            points,
            h,
            dist: Vec::with_capacity(points.len()),
            order: (0..points.len()).collect(),
        }
    }

    fn raw(&self, mut subset: Vec<usize>) -> Step {
        subset.sort_unstable();
        let (center, cov) = subset_moments(self.points, &subset);
        let det = cov.det().max(0.0);
        let raw = McdRaw {
            subset,
            center,
            cov,
            det,
        };
        if cov.is_singular() {
            Step::Exact(raw)
        } else {
            Step::Regular(raw)
        }
    }

    /// h points closest to the current fit.
    fn c_step(&mut self, center: Point, cov: &Sym2) -> Step {
        sq_distances(self.points, center, &cov.inverse(), &mut self.dist);
        let dist = &self.dist;
        self.order.clear();
        self.order.extend(0..self.points.len());
        let h = self.h;
        if h < self.order.len() {
            self.order
                .select_nth_unstable_by(h - 1, |&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        }
        let subset = self.order[..h].to_vec();
        self.raw(subset)
    }

    fn converge(&mut self, mut cur: McdRaw, max_steps: usize) -> Step {
        for _ in 0..max_steps {
            match self.c_step(cur.center, &cur.cov) {
                Step::Exact(r) => return Step::Exact(r),
                Step::Regular(next) => {
                    let done = next.subset == cur.subset || next.det >= cur.det;
                    if next.det <= cur.det {
                        cur = next;
                    }
                    if done {
                        break;
                    }
                }
            }
        }
        Step::Regular(cur)
    }

    /// Grows an elemental start until its covariance is non-singular.
    fn start<R: Rng>(&mut self, mut idx: Vec<usize>, rng: &mut R) -> Step {
        let n = self.points.len();
        loop {
            let (center, cov) = subset_moments(self.points, &idx);
            if !cov.is_singular() {
                return self.c_step(center, &cov);
            }
            if idx.len() >= self.h {
                return self.raw(idx);
            }
            // add a random point not yet in the subset
            let mut j = rng.random_range(0..n);
            while idx.contains(&j) {
                j = (j + 1) % n;
            }
            idx.push(j);
        }
    }
}

fn exact_fit_error(points: &[Point], raw: &McdRaw) -> Error {
    let normal = if raw.cov.eigenvalues()[0] > 0.0 {
        raw.cov.minor_axis()
    } else {
        [0.0, 1.0]
    };
    let tol = 1e-9 * (1.0 + raw.center[0].abs().max(raw.center[1].abs()));
    let count = points
        .iter()
        .filter(|p| {
            let d = (p[0] - raw.center[0]) * normal[0] + (p[1] - raw.center[1]) * normal[1];
            d.abs() <= tol
        })
        .count();
    Error::ExactFit {
        center: raw.center,
        normal,
        count,
    }
}

fn binomial3(n: usize) -> usize {
    n * n.saturating_sub(1) * n.saturating_sub(2) / 6
}

/// Searches the h-subset with minimal covariance determinant.
pub fn mcd_raw(points: &[Point], opts: &McdOptions) -> Result<McdRaw> {
    let n = points.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!("MCD needs at least 5 points, got {n}")));
    }
    if !(opts.h_fraction >= 0.5 && opts.h_fraction <= 1.0) {
        return Err(Error::Invalid(format!(
            "h fraction must lie in [0.5, 1], got {}",
            opts.h_fraction
        )));
    }
    let h = subset_size(n, opts.h_fraction);
    let mut search = Search::new(points, h);
    let mut rng = rng::stream(opts.seed, &[0x4D43_44]);

    // Small clouds: every elemental triple, each refined to convergence.
    let exhaustive = binomial3(n) <= 10 * opts.n_starts;
    let mut candidates: Vec<McdRaw> = Vec::new();
    let mut take = |step: Step, steps: usize, search: &mut Search| -> Option<McdRaw> {
        match step {
            Step::Exact(r) => Some(r),
            Step::Regular(r) => match search.converge(r, steps) {
                Step::Exact(e) => Some(e),
                Step::Regular(r) => {
                    candidates.push(r);
                    None
                }
            },
        }
    };
    if exhaustive {
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let s = search.start(vec![i, j, k], &mut rng);
                    if let Some(e) = take(s, usize::MAX, &mut search) {
                        return Err(exact_fit_error(points, &e));
                    }
                }
            }
        }
    } else {
        for _ in 0..opts.n_starts {
            let idx = sample(&mut rng, n, 3).into_vec();
            let s = search.start(idx, &mut rng);
            let steps = opts.initial_csteps.saturating_sub(1);
            if let Some(e) = take(s, steps, &mut search) {
                return Err(exact_fit_error(points, &e));
            }
        }
    }
    candidates.sort_by(|a, b| a.det.total_cmp(&b.det).then_with(|| a.subset.cmp(&b.subset)));
    candidates.dedup_by(|a, b| a.subset == b.subset);
    let mut best: Option<McdRaw> = None;
    let finalists = if exhaustive {
        candidates.len().min(1)
    } else {
        opts.n_finalists
    };
    for cand in candidates.into_iter().take(finalists.max(1)) {
        match search.converge(cand, usize::MAX) {
            Step::Exact(e) => return Err(exact_fit_error(points, &e)),
            Step::Regular(r) => {
                if best.as_ref().is_none_or(|b| r.det < b.det) {
                    best = Some(r);
                }
            }
        }
    }
    best.ok_or_else(|| Error::Singular("MCD search produced no candidate".into()))
}

/// Small-sample correction factors for p = 2 (Pison, Van Aelst & Willems
/// 2002), raw and reweighted.
fn small_sample_factor(n: usize, alpha: f64, reweighted: bool) -> f64 {
    let n = n as f64;
    let (c500, e500, c875, e875): (f64, f64, f64, f64) = if reweighted {
        (
            3.111_017_129_090_49,
            1.914_010_567_218_63,
            0.794_735_505_810_58,
            1.100_819_303_500_91,
        )
    } else {
        (
            0.673_292_623_522_027,
            0.691_365_864_961_895,
            0.446_537_815_635_445,
            1.066_907_829_959_19,
        )
    };
    let fp500 = 1.0 - c500.exp() / n.powf(e500);
    let fp875 = 1.0 - c875.exp() / n.powf(e875);
    let fp = if alpha <= 0.875 {
        fp500 + (fp875 - fp500) / 0.375 * (alpha - 0.5)
    } else {
        fp875 + (1.0 - fp875) / 0.125 * (alpha - 0.875)
    };
    if fp > 0.0 {
        1.0 / fp
    } else {
        1.0
    }
}

/// Asymptotic consistency factor of a covariance computed from the fraction
/// `alpha` of a bivariate normal cloud closest to its center.
fn consistency_factor(alpha: f64) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    alpha / chi2_4_cdf(chi2_2_quantile(alpha))
}

/// FAST-MCD location and scatter, consistency-corrected so that squared
/// distances of clean normal data are approximately chi-square(2).
pub fn fast_mcd(points: &[Point], opts: &McdOptions) -> Result<CovarianceModel> {
    let n = points.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "MCD needs at least 10 points, got {n}"
        )));
    }
    let raw = mcd_raw(points, opts)?;
    let h = raw.subset.len();
    let alpha = h as f64 / n as f64;
    let raw_factor = consistency_factor(alpha) * small_sample_factor(n, alpha, false);
    let raw_scatter = raw.cov.scale(raw_factor);

    let (center, scatter, correction) = if opts.reweight {
        let cut = chi2_2_quantile(0.975);
        let mut d = Vec::with_capacity(n);
        sq_distances(points, raw.center, &raw_scatter.inverse(), &mut d);
        let w: Vec<f64> = d.iter().map(|&v| if v <= cut { 1.0 } else { 0.0 }).collect();
        let (c, s, sw) = weighted_moments(points, &w);
        let f = consistency_factor(0.975) * small_sample_factor(n, sw / n as f64, true);
        let s = s.scale(sw / (sw - 1.0));
        if s.is_singular() {
            (raw.center, raw_scatter, raw_factor)
        } else {
            (c, s.scale(f), f)
        }
    } else {
        (raw.center, raw_scatter, raw_factor)
    };
    let mut model = CovarianceModel::checked(center, scatter, CovEstimator::Mcd, correction)?;
    model.h = Some(h);
    model.objective = Some(raw.det);
    Ok(model)
}
