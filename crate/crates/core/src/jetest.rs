//! The joint-ellipse (JE) test of `(intercept, slope) = (0, 1)` on the
//! bootstrapped coefficient pairs, the classical two-interval verdict, and
//! the validation pipeline that combines them.

use serde::{Deserialize, Serialize};

use crate::dataset::{round_significant, PairedSample};
use crate::error::{Error, Result};
use crate::estimators::{paba_analytic_ci, DemingConfig, Method, RegressionFit};
use crate::resampling::{
    bca_ci, bootstrap, percentile_ci, studentized_ci, BootstrapEnsemble, BootstrapOptions, IntervalKind, IntervalPair,
};
use crate::rng::derive_seed;
use crate::robustcov::{ellipse_from, estimate, CovEstimator, CovarianceModel, EllipseGeometry, Point, Sym2};
use crate::stats::chi2_2_sf;

/// The null hypothesis `(intercept, slope)` of method equivalence.
pub const H0: Point = [0.0, 1.0];

/// Stream index reserved for the covariance estimator, disjoint from the
/// bootstrap replicate streams.
const COV_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Validated,
    Rejected,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Validated => "validated",
            Verdict::Rejected => "rejected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JeOutcome {
    pub mahalanobis_sq: f64,
    pub p_value: f64,
    pub verdict: Verdict,
    pub cov: CovarianceModel,
}

/// JE verdict for a given covariance model of the ensemble.
pub fn je_from_model(cov: CovarianceModel, alpha: f64) -> JeOutcome {
    let d2 = cov.mahalanobis_sq(H0);
    let p = chi2_2_sf(d2);
    JeOutcome {
        mahalanobis_sq: d2,
        p_value: p,
        verdict: if p > alpha {
            Verdict::Validated
        } else {
            Verdict::Rejected
        },
        cov,
    }
}

/// All pairs identical: a point mass has no scatter, the test reduces to
/// whether the mass sits on `H0`.
fn point_mass(e: &BootstrapEnsemble, method: CovEstimator, alpha: f64) -> Option<JeOutcome> {
    let first = *e.pairs.first()?;
    if e.pairs.iter().any(|p| *p != first) {
        return None;
    }
    let at_null = (first[0] - H0[0]).abs() <= 1e-12 && (first[1] - H0[1]).abs() <= 1e-12;
    let (d2, p) = if at_null { (0.0, 1.0) } else { (f64::INFINITY, 0.0) };
    Some(JeOutcome {
        mahalanobis_sq: d2,
        p_value: p,
        verdict: if p > alpha {
            Verdict::Validated
        } else {
            Verdict::Rejected
        },
        cov: CovarianceModel {
            center: first,
            scatter: Sym2::new(0.0, 0.0, 0.0),
            estimator: method,
            h: None,
            correction: 1.0,
            objective: None,
        },
    })
}

/// Mahalanobis distance of `H0` from the robust center of the ensemble and
/// its chi-square(2) p-value.
pub fn je_test(e: &BootstrapEnsemble, method: CovEstimator, alpha: f64, seed: u64) -> Result<JeOutcome> {
    if let Some(o) = point_mass(e, method, alpha) {
        return Ok(o);
    }
    let cov = estimate(&e.pairs, method, seed).map_err(|err| {
        if err.is_singularity() {
            Error::Singular(format!(
                "{err}; the bootstrapped pairs are degenerate, typically from ties in limited-precision data"
            ))
        } else {
            err
        }
    })?;
    Ok(je_from_model(cov, alpha))
}

/// Classical verdict: validated iff the intercept interval contains 0 and
/// the slope interval contains 1, endpoints included.
pub fn ci_verdict(iv: &IntervalPair) -> Verdict {
    match iv.contains_null() {
        (true, true) => Verdict::Validated,
        _ => Verdict::Rejected,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub method: Method,
    pub deming: DemingConfig,
    pub cov: CovEstimator,
    pub b: usize,
    pub seed: u64,
    pub je_alpha: f64,
    pub ci_alpha: f64,
    /// Interval used for the classical verdict.
    pub ci_kind: IntervalKind,
}

impl ValidationConfig {
    pub fn new(method: Method, cov: CovEstimator, b: usize, seed: u64) -> Self {
        Self {
            method,
            deming: DemingConfig::default(),
            cov,
            b,
            seed,
            je_alpha: 0.01,
            ci_alpha: 0.05,
            ci_kind: IntervalKind::Bca,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub label: String,
    pub n: usize,
    pub fit: RegressionFit,
    /// Interval behind `verdict_ci`.
    pub intervals: IntervalPair,
    /// Further interval kinds, for comparison only.
    pub other_intervals: Vec<IntervalPair>,
    pub je_pvalue: f64,
    pub je_alpha: f64,
    pub mahalanobis_sq: f64,
    pub cov: CovarianceModel,
    pub verdict_ci: Verdict,
    pub verdict_je: Verdict,
    pub ellipse05: EllipseGeometry,
    pub ellipse01: EllipseGeometry,
    pub h0: Point,
    pub b: usize,
    pub failed: usize,
    pub seed: u64,
}

fn interval(e: &BootstrapEnsemble, s: &PairedSample, kind: IntervalKind, alpha: f64) -> Result<IntervalPair> {
    match kind {
        IntervalKind::Percentile => percentile_ci(e, alpha),
        IntervalKind::Bca => bca_ci(e, alpha),
        IntervalKind::Studentized => studentized_ci(e, alpha),
        IntervalKind::Analytic => {
            if e.point.method != Method::PaBa {
                return Err(Error::Invalid("analytic intervals exist for paba only".into()));
            }
            let c = paba_analytic_ci(s, alpha)?;
            Ok(IntervalPair {
                slope_lo: c.slope_lo,
                slope_hi: c.slope_hi,
                int_lo: c.int_lo,
                int_hi: c.int_hi,
                level: 1.0 - alpha,
                kind: IntervalKind::Analytic,
                fallback: false,
            })
        }
    }
}

fn degenerate_ellipse(center: Point, alpha: f64) -> EllipseGeometry {
    EllipseGeometry {
        center,
        semi_axes: [0.0, 0.0],
        rotation: 0.0,
        level: crate::stats::chi2_2_quantile(1.0 - alpha),
    }
}

/// Fit, bootstrap, interval, covariance and JE test in one pass.
pub fn validate(s: &PairedSample, cfg: &ValidationConfig) -> Result<(ValidationReport, BootstrapEnsemble)> {
    let mut opts = BootstrapOptions::new(cfg.b, cfg.seed);
    opts.studentized = cfg.ci_kind == IntervalKind::Studentized;
    let e = bootstrap(s, cfg.method, &cfg.deming, &opts).map_err(|err| err.at("bootstrap"))?;
    let intervals = interval(&e, s, cfg.ci_kind, cfg.ci_alpha).map_err(|err| err.at("interval"))?;
    let mut other_intervals = Vec::new();
    for kind in [IntervalKind::Percentile, IntervalKind::Bca, IntervalKind::Analytic] {
        if kind == cfg.ci_kind || (kind == IntervalKind::Analytic && cfg.method != Method::PaBa) {
            continue;
        }
        if let Ok(iv) = interval(&e, s, kind, cfg.ci_alpha) {
            other_intervals.push(iv);
        }
    }
    let je =
        je_test(&e, cfg.cov, cfg.je_alpha, derive_seed(cfg.seed, &[COV_STREAM])).map_err(|err| err.at("covariance"))?;
    let (ellipse05, ellipse01) = if je.cov.scatter.is_singular() {
        (
            degenerate_ellipse(je.cov.center, 0.05),
            degenerate_ellipse(je.cov.center, 0.01),
        )
    } else {
        (ellipse_from(&je.cov, 0.05), ellipse_from(&je.cov, 0.01))
    };
    let report = ValidationReport {
        label: s.label.clone(),
        n: s.n(),
        fit: e.point.clone(),
        verdict_ci: ci_verdict(&intervals),
        intervals,
        other_intervals,
        je_pvalue: je.p_value,
        je_alpha: cfg.je_alpha,
        mahalanobis_sq: je.mahalanobis_sq,
        verdict_je: je.verdict,
        cov: je.cov,
        ellipse05,
        ellipse01,
        h0: H0,
        b: e.b,
        failed: e.failed,
        seed: cfg.seed,
    };
    Ok((report, e))
}

/// Rounds every float in a JSON tree to 6 significant digits.
pub fn round_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round_significant(x, 6)) {
                        *n = r;
                    }
                }
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_json),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Report as pretty JSON with 6 significant digits.
pub fn report_json(r: &ValidationReport) -> String {
    let mut v = serde_json::to_value(r).expect("report serializes");
    round_json(&mut v);
    serde_json::to_string_pretty(&v).expect("json value serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(center: Point, s: Sym2) -> CovarianceModel {
        CovarianceModel {
            center,
            scatter: s,
            estimator: CovEstimator::Classic,
            h: None,
            correction: 1.0,
            objective: None,
        }
    }

    #[test]
    fn centered_at_null() {
        let o = je_from_model(model(H0, Sym2::new(2.0, 0.3, 1.0)), 0.01);
        assert_eq!(o.mahalanobis_sq, 0.0);
        assert_eq!(o.p_value, 1.0);
        assert_eq!(o.verdict, Verdict::Validated);
    }

    #[test]
    fn five_percent_contour() {
        let q = crate::stats::chi2_2_quantile(0.95);
        let o = je_from_model(model([0.0, 1.0 + q.sqrt()], Sym2::IDENTITY), 0.01);
        assert!((o.p_value - 0.05).abs() < 1e-12);
    }

    #[test]
    fn boundary_counts_as_containment() {
        let iv = IntervalPair {
            slope_lo: 0.82,
            slope_hi: 1.0,
            int_lo: -0.3,
            int_hi: 0.8,
            level: 0.95,
            kind: IntervalKind::Analytic,
            fallback: false,
        };
        assert_eq!(ci_verdict(&iv), Verdict::Validated);
        let iv = IntervalPair {
            slope_hi: 0.98283,
            ..iv
        };
        assert_eq!(ci_verdict(&iv), Verdict::Rejected);
    }

    #[test]
    fn json_rounding() {
        let mut v = serde_json::json!({"a": 0.123456789, "b": [1234567.0, 2], "c": "x"});
        round_json(&mut v);
        assert_eq!(v, serde_json::json!({"a": 0.123457, "b": [1234570.0, 2], "c": "x"}));
    }
}
