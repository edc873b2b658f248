//! Method-comparison regressions: Deming, weighted Deming, M-Deming,
//! MM-Deming and Passing-Bablok.
//!
//! All estimators return a [`RegressionFit`] for the line `y = intercept +
//! slope * x`. The Deming family treats both coordinates as error-prone;
//! `lambda` is the ratio of the x to the y error variances.

mod deming;
mod paba;
mod robust;

use serde::{Deserialize, Serialize};

use crate::dataset::PairedSample;
use crate::error::{Error, Result};

pub use deming::{deming_residuals, fit_deming, fit_wdeming, weighted_deming_line, weighted_deming_line_xy};
pub use paba::{fit_paba, paba_analytic_ci, pairwise_slopes, PabaInterval, PairwiseSlopes};
pub use robust::{bisquare_weight, fit_mdeming, fit_mmdeming, huber_weight, mm_start};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dem,
    WDem,
    MDem,
    MMDem,
    PaBa,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Dem, Method::WDem, Method::MDem, Method::MMDem, Method::PaBa];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dem => "dem",
            Method::WDem => "wdem",
            Method::MDem => "mdem",
            Method::MMDem => "mmdem",
            Method::PaBa => "paba",
        }
    }

    pub fn is_deming_family(self) -> bool {
        self != Method::PaBa
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Invalid(format!("unknown method {s:?} (dem, wdem, mdem, mmdem, paba)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub intercept: f64,
    pub slope: f64,
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
    /// Final per-point weights of the iterative estimators.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl RegressionFit {
    pub fn coefficients(&self) -> [f64; 2] {
        [self.intercept, self.slope]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemingConfig {
    /// Ratio of x to y error variances.
    pub lambda: f64,
    /// Iteration cap for WDem and MDem.
    pub max_iter: usize,
    /// Iteration cap for MMDem.
    pub mm_max_iter: usize,
    /// Convergence threshold on the slope change.
    pub tol: f64,
    pub huber_k: f64,
    pub bisquare_c: f64,
    /// Seed for the randomized robust covariance used to start MMDem.
    pub start_seed: u64,
}

impl Default for DemingConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_iter: 100,
            mm_max_iter: 500,
            tol: 1e-10,
            huber_k: 1.345,
            bisquare_c: 4.685,
            start_seed: 0,
        }
    }
}

impl DemingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.huber_k > 0.0 && self.bisquare_c > 0.0) {
            return Err(Error::Invalid("tuning constants must be positive".into()));
        }
        Ok(())
    }
}

/// Fits the sample with the named estimator.
pub fn fit(method: Method, s: &PairedSample, cfg: &DemingConfig) -> Result<RegressionFit> {
    match method {
        Method::Dem => fit_deming(s, cfg),
        Method::WDem => fit_wdeming(s, cfg),
        Method::MDem => fit_mdeming(s, cfg),
        Method::MMDem => fit_mmdeming(s, cfg),
        Method::PaBa => fit_paba(s),
    }
}

pub(crate) fn check_line(intercept: f64, slope: f64) -> Result<()> {
    if !intercept.is_finite() || !slope.is_finite() || slope == 0.0 {
        return Err(Error::Degenerate(format!(
            "fitted line is not usable (intercept {intercept}, slope {slope})"
        )));
    }
    Ok(())
}
