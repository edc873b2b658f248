//! Location/scatter estimation for bivariate clouds: classical, FAST-MCD,
//! Stahel-Donoho, bisquare S and Rocke, plus ellipse geometry.

mod classic;
mod mcd;
mod sde;
mod sest;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{chi2_2_quantile, chi2_2_sf};

pub use classic::classic_cov;
pub use mcd::{fast_mcd, mcd_raw, McdOptions, McdRaw};
pub use sde::{stahel_donoho, SdeOptions};
pub use sest::{bisquare_s_constant, rocke_cov, s_cov};

pub type Point = [f64; 2];

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn scale(&self, f: f64) -> Sym2 {
        Sym2::new(self.xx * f, self.xy * f, self.yy * f)
    }

    /// Inverse; callers check non-singularity first.
    pub fn inverse(&self) -> Sym2 {
        let d = self.det();
        Sym2::new(self.yy / d, -self.xy / d, self.xx / d)
    }

    /// Eigenvalues, largest first.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = 0.5 * (self.xx + self.yy);
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        [m + r, m - r]
    }

    /// Angle of the leading eigenvector, in [-pi/2, pi/2).
    pub fn leading_angle(&self) -> f64 {
        let t = 0.5 * (2.0 * self.xy).atan2(self.xx - self.yy);
        if t >= std::f64::consts::FRAC_PI_2 {
            t - std::f64::consts::PI
        } else {
            t
        }
    }

    pub fn quad(&self, v: Point) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }

    /// True when the smallest eigenvalue is negligible against the largest.
    pub fn is_singular(&self) -> bool {
        let [hi, lo] = self.eigenvalues();
        !(hi > 0.0) || !(lo > hi * 1e-12) || !self.det().is_finite()
    }

    /// Unit vector along the smallest eigenvalue.
    pub fn minor_axis(&self) -> Point {
        let t = self.leading_angle() + std::f64::consts::FRAC_PI_2;
        [t.cos(), t.sin()]
    }
}

/// Weighted mean and (divisor `sum w`) scatter.
pub(crate) fn weighted_moments(points: &[Point], w: &[f64]) -> (Point, Sym2, f64) {
    let sw: f64 = w.iter().sum();
    let mut c = [0.0, 0.0];
    for (p, &wi) in points.iter().zip(w) {
        c[0] += wi * p[0];
        c[1] += wi * p[1];
    }
    c[0] /= sw;
    c[1] /= sw;
    let mut s = Sym2::new(0.0, 0.0, 0.0);
    for (p, &wi) in points.iter().zip(w) {
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        s.xx += wi * dx * dx;
        s.xy += wi * dx * dy;
        s.yy += wi * dy * dy;
    }
    (c, s.scale(1.0 / sw), sw)
}

/// Unweighted mean and scatter of a subset, divisor `idx.len()`.
pub(crate) fn subset_moments(points: &[Point], idx: &[usize]) -> (Point, Sym2) {
    let h = idx.len() as f64;
    let mut c = [0.0, 0.0];
    for &i in idx {
        c[0] += points[i][0];
        c[1] += points[i][1];
    }
    c[0] /= h;
    c[1] /= h;
    let mut s = Sym2::new(0.0, 0.0, 0.0);
    for &i in idx {
        let (dx, dy) = (points[i][0] - c[0], points[i][1] - c[1]);
        s.xx += dx * dx;
        s.xy += dx * dy;
        s.yy += dy * dy;
    }
    (c, s.scale(1.0 / h))
}

pub(crate) fn sq_distances(points: &[Point], center: Point, inv: &Sym2, out: &mut Vec<f64>) {
    out.clear();
    out.extend(points.iter().map(|p| inv.quad([p[0] - center[0], p[1] - center[1]])));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovEstimator {
    Classic,
    Mcd,
    Sde,
    Sest,
    Rocke,
}

impl CovEstimator {
    pub fn name(self) -> &'static str {
        match self {
            CovEstimator::Classic => "classic",
            CovEstimator::Mcd => "mcd",
            CovEstimator::Sde => "sde",
            CovEstimator::Sest => "sest",
            CovEstimator::Rocke => "rocke",
        }
    }

    /// Column label used in the result tables.
    pub fn short_label(self) -> &'static str {
        match self {
            CovEstimator::Classic => "Clas",
            CovEstimator::Mcd => "MCD",
            CovEstimator::Sde => "SDe",
            CovEstimator::Sest => "Sest",
            CovEstimator::Rocke => "Rocke",
        }
    }
}

impl std::fmt::Display for CovEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CovEstimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classic" | "clas" => Ok(Self::Classic),
            "mcd" => Ok(Self::Mcd),
            "sde" => Ok(Self::Sde),
            "sest" | "s" => Ok(Self::Sest),
            "rocke" => Ok(Self::Rocke),
            other => Err(Error::Invalid(format!(
                "unknown covariance method {other:?} (classic, mcd, sde, sest, rocke)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub center: Point,
    pub scatter: Sym2,
    pub estimator: CovEstimator,
    /// Subset size (MCD only).
    pub h: Option<usize>,
    /// Multiplicative consistency factor applied to the scatter.
    pub correction: f64,
    /// Determinant of the optimal h-subset covariance (MCD only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
}

impl CovarianceModel {
    pub(crate) fn checked(center: Point, scatter: Sym2, estimator: CovEstimator, correction: f64) -> Result<Self> {
        if scatter.is_singular() || !center.iter().all(|v| v.is_finite()) {
            return Err(Error::Singular(format!(
                "{} scatter is singular (eigenvalues {:?})",
                estimator.name(),
                scatter.eigenvalues()
            )));
        }
        Ok(Self {
            center,
            scatter,
            estimator,
            h: None,
            correction,
            objective: None,
        })
    }

    /// Squared Mahalanobis distance of `p` from the center.
    pub fn mahalanobis_sq(&self, p: Point) -> f64 {
        self.scatter
            .inverse()
            .quad([p[0] - self.center[0], p[1] - self.center[1]])
    }

    /// Chi-square(2) upper-tail probability of `p`.
    pub fn p_value(&self, p: Point) -> f64 {
        chi2_2_sf(self.mahalanobis_sq(p))
    }
}

/// Estimates location and scatter with the chosen method.
pub fn estimate(points: &[Point], method: CovEstimator, seed: u64) -> Result<CovarianceModel> {
    match method {
        CovEstimator::Classic => classic_cov(points),
        CovEstimator::Mcd => fast_mcd(
            points,
            &McdOptions {
                seed,
                ..McdOptions::default()
            },
        ),
        CovEstimator::Sde => stahel_donoho(
            points,
            &SdeOptions {
                seed,
                ..SdeOptions::default()
            },
        ),
        CovEstimator::Sest => s_cov(points, seed),
        CovEstimator::Rocke => rocke_cov(points, seed),
    }
}

/// Confidence ellipse `{p : d^2(p) <= level}` of a scatter model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseGeometry {
    pub center: Point,
    /// Major then minor semi-axis.
    pub semi_axes: [f64; 2],
    /// Angle of the major axis, radians in [-pi/2, pi/2).
    pub rotation: f64,
    /// Chi-square(2) quantile defining the contour.
    pub level: f64,
}

impl EllipseGeometry {
    /// Point on the boundary at parameter angle `t`.
    pub fn boundary_point(&self, t: f64) -> Point {
        let (s, c) = self.rotation.sin_cos();
        let (u, v) = (self.semi_axes[0] * t.cos(), self.semi_axes[1] * t.sin());
        [self.center[0] + c * u - s * v, self.center[1] + s * u + c * v]
    }
}

/// Ellipse at the (1 - alpha) chi-square(2) quantile.
pub fn ellipse_from(model: &CovarianceModel, alpha: f64) -> EllipseGeometry {
    ellipse_at_level(model, chi2_2_quantile(1.0 - alpha))
}

pub fn ellipse_at_level(model: &CovarianceModel, level: f64) -> EllipseGeometry {
    let [l1, l2] = model.scatter.eigenvalues();
    EllipseGeometry {
        center: model.center,
        semi_axes: [(l1 * level).sqrt(), (l2.max(0.0) * level).sqrt()],
        rotation: model.scatter.leading_angle(),
        level,
    }
}
