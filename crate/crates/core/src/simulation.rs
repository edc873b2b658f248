//! Monte Carlo harnesses: type-I (P-P) study, power curves over a slope or
//! intercept grid, precision (ties) and heteroscedasticity experiments.
//!
//! Every replicate draws its data from `(master_seed, grid index,
//! replicate index)` and all methods of a plan see the same data, so the
//! results are independent of scheduling and of which methods are enabled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{generate, ErrorModel, GeneratorSpec};
use crate::error::{Error, Result};
use crate::estimators::{DemingConfig, Method};
use crate::jetest::{je_test, H0};
use crate::resampling::{
    bca_ci, bootstrap, percentile_ci, studentized_ci, BootstrapEnsemble, BootstrapOptions, IntervalKind, IntervalPair,
};
use crate::rng::derive_seed;
use crate::robustcov::CovEstimator;

/// Largest share of replicates whose fit may fail before a study aborts.
pub const MAX_FIT_FAILURE_SHARE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridParam {
    Slope,
    Intercept,
}

impl GridParam {
    pub fn null_value(self) -> f64 {
        match self {
            GridParam::Slope => H0[1],
            GridParam::Intercept => H0[0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GridParam::Slope => "slope",
            GridParam::Intercept => "intercept",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    /// Template; its slope/intercept are replaced by the grid values.
    pub generator: GeneratorSpec,
    pub methods: Vec<Method>,
    pub cov_methods: Vec<CovEstimator>,
    pub grid_param: GridParam,
    pub grid: Vec<f64>,
    pub replicates_per_point: usize,
    pub b: usize,
    /// JE test levels.
    pub alphas: Vec<f64>,
    /// Level of the classical intervals.
    pub ci_alpha: f64,
    pub ci_kinds: Vec<IntervalKind>,
    pub master_seed: u64,
    pub deming: DemingConfig,
}

impl SimulationPlan {
    /// Plan with the desk-scale defaults: BCa intervals at 5%, JE at 5% and
    /// 1%, 200 replicates per point, B = 999.
    pub fn new(generator: GeneratorSpec, methods: Vec<Method>, grid_param: GridParam, grid: Vec<f64>) -> Self {
        Self {
            generator,
            methods,
            cov_methods: vec![CovEstimator::Classic, CovEstimator::Mcd, CovEstimator::Sde],
            grid_param,
            grid,
            replicates_per_point: 200,
            b: 999,
            alphas: vec![0.05, 0.01],
            ci_alpha: 0.05,
            ci_kinds: vec![IntervalKind::Bca],
            master_seed: 1,
            deming: DemingConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.grid.is_empty() {
            return bad("grid is empty".into());
        }
        if self.grid.iter().any(|v| !v.is_finite()) || self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("grid values must be finite and strictly increasing".into());
        }
        if self.replicates_per_point < 50 {
            return bad(format!(
                "replicates_per_point must be at least 50, got {}",
                self.replicates_per_point
            ));
        }
        if self.methods.is_empty() {
            return bad("no regression methods".into());
        }
        if self.ci_kinds.contains(&IntervalKind::Analytic) {
            return bad("analytic intervals are not available in simulations".into());
        }
        for &a in self.alphas.iter().chain([&self.ci_alpha]) {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("alpha {a} outside (0, 1)"));
            }
        }
        self.deming.validate()?;
        self.spec_at(0, 0).validate()
    }

    /// Generator spec of one replicate.
    pub fn spec_at(&self, grid_index: usize, replicate: usize) -> GeneratorSpec {
        let mut spec = self.generator.clone();
        let v = self.grid[grid_index];
        match self.grid_param {
            GridParam::Slope => {
                spec.slope = v;
                spec.intercept = H0[0];
            }
            GridParam::Intercept => {
                spec.intercept = v;
                spec.slope = H0[1];
            }
        }
        spec.seed = derive_seed(self.master_seed, &[grid_index as u64, replicate as u64]);
        spec
    }
}

/// Grid offsets relative to the half-width: dense near the null where the
/// joint-ellipse curves are narrow, sparse in the tails.
const GRID_OFFSETS: [f64; 13] = [
    -1.0,
    -2.0 / 3.0,
    -1.0 / 3.0,
    -0.2,
    -2.0 / 15.0,
    -1.0 / 15.0,
    0.0,
    1.0 / 15.0,
    2.0 / 15.0,
    0.2,
    1.0 / 3.0,
    2.0 / 3.0,
    1.0,
];

/// Default 13-point grid centered on the null value. The half-width scales
/// with the expected standard error of the slope, i.e. with
/// `sigma / (sd(x) sqrt(n))`, and is 0.15 for the short range at n = 40.
pub fn default_grid(param: GridParam, spec: &GeneratorSpec) -> Vec<f64> {
    let sdx = ((spec.xmax - spec.xmin) / 12f64.sqrt()).max(1e-9);
    let sigma = spec.sigmax.max(spec.sigmay).max(1e-9);
    let reference = crate::dataset::SHORT_RANGE_SIGMA / (5.0 / 12f64.sqrt());
    let mut w = 0.15 * (sigma / sdx) / reference * (40.0 / spec.n.max(3) as f64).sqrt();
    if param == GridParam::Intercept {
        let m2 = (spec.xmin * spec.xmin + spec.xmin * spec.xmax + spec.xmax * spec.xmax) / 3.0;
        w *= m2.sqrt();
    }
    let null = param.null_value();
    GRID_OFFSETS
        .iter()
        .map(|o| crate::dataset::round_significant(null + o * w, 4))
        .collect()
}

fn method_stream(m: Method) -> u64 {
    1 + Method::ALL.iter().position(|&x| x == m).expect("known method") as u64
}

const COV_STREAM: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    /// Fit or bootstrap failure.
    pub error: Option<String>,
    /// Point estimate `(intercept, slope)`.
    pub point: Option<[f64; 2]>,
    /// Per plan CI kind: `(intercept rejected, slope rejected)`.
    pub ci: Vec<Option<[bool; 2]>>,
    /// Per plan covariance: JE p-value, `None` when the covariance failed.
    pub je_p: Vec<Option<f64>>,
    /// Per plan covariance: failure message.
    pub cov_errors: Vec<Option<String>>,
    /// Largest number of replicates sharing one exact slope value.
    pub slope_atom: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub grid_index: usize,
    pub replicate: usize,
    pub generation_error: Option<String>,
    pub results: Vec<MethodResult>,
}

fn largest_atom(e: &BootstrapEnsemble) -> usize {
    let mut s = e.slopes();
    s.sort_by(f64::total_cmp);
    let (mut best, mut run) = (0, 0);
    for i in 0..s.len() {
        run = if i > 0 && s[i] == s[i - 1] { run + 1 } else { 1 };
        best = best.max(run);
    }
    best
}

fn interval(e: &BootstrapEnsemble, kind: IntervalKind, alpha: f64) -> Result<IntervalPair> {
    match kind {
        IntervalKind::Percentile => percentile_ci(e, alpha),
        IntervalKind::Bca => bca_ci(e, alpha),
        IntervalKind::Studentized => studentized_ci(e, alpha),
        IntervalKind::Analytic => Err(Error::Invalid("analytic interval in simulation".into())),
    }
}

fn run_method(plan: &SimulationPlan, s: &crate::dataset::PairedSample, m: Method, g: usize, r: usize) -> MethodResult {
    let path = [g as u64, r as u64, method_stream(m)];
    let mut opts = BootstrapOptions::new(plan.b, derive_seed(plan.master_seed, &path));
    opts.studentized = plan.ci_kinds.contains(&IntervalKind::Studentized);
    opts.jackknife = plan.ci_kinds.contains(&IntervalKind::Bca);
    let e = match bootstrap(s, m, &plan.deming, &opts) {
        Ok(e) => e,
        Err(err) => {
            return MethodResult {
                method: m,
                error: Some(err.to_string()),
                point: None,
                ci: vec![None; plan.ci_kinds.len()],
                je_p: vec![None; plan.cov_methods.len()],
                cov_errors: vec![None; plan.cov_methods.len()],
                slope_atom: 0,
            }
        }
    };
    let ci = plan
        .ci_kinds
        .iter()
        .map(|&k| {
            interval(&e, k, plan.ci_alpha).ok().map(|iv| {
                let (int_ok, slope_ok) = iv.contains_null();
                [!int_ok, !slope_ok]
            })
        })
        .collect();
    let mut je_p = Vec::new();
    let mut cov_errors = Vec::new();
    for (k, &c) in plan.cov_methods.iter().enumerate() {
        let seed = derive_seed(plan.master_seed, &[path[0], path[1], path[2], COV_STREAM + k as u64]);
        match je_test(&e, c, 0.5, seed) {
            Ok(o) => {
                je_p.push(Some(o.p_value));
                cov_errors.push(None);
            }
            Err(err) => {
                je_p.push(None);
                cov_errors.push(Some(err.to_string()));
            }
        }
    }
    MethodResult {
        method: m,
        error: None,
        point: Some(e.point.coefficients()),
        ci,
        je_p,
        cov_errors,
        slope_atom: largest_atom(&e),
    }
}

/// One replicate: generate once, run every method of the plan.
pub fn run_replicate(plan: &SimulationPlan, g: usize, r: usize) -> ReplicateRecord {
    let spec = plan.spec_at(g, r);
    match generate(&spec) {
        Ok(s) => ReplicateRecord {
            grid_index: g,
            replicate: r,
            generation_error: None,
            results: plan.methods.iter().map(|&m| run_method(plan, &s, m, g, r)).collect(),
        },
        Err(e) => ReplicateRecord {
            grid_index: g,
            replicate: r,
            generation_error: Some(e.to_string()),
            results: Vec::new(),
        },
    }
}

/// All replicates of one grid point, in replicate order.
pub fn run_point(plan: &SimulationPlan, g: usize) -> Vec<ReplicateRecord> {
    (0..plan.replicates_per_point)
        .into_par_iter()
        .map(|r| run_replicate(plan, g, r))
        .collect()
}

/// All grid points of the plan.
pub fn run_plan(plan: &SimulationPlan) -> Result<Vec<ReplicateRecord>> {
    plan.validate()?;
    Ok((0..plan.grid.len()).flat_map(|g| run_point(plan, g)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    /// Intercept interval excludes 0.
    CiInt,
    /// Slope interval excludes 1.
    CiSlope,
    /// Either interval excludes its null value.
    CiTotal,
    /// Joint-ellipse test rejects.
    Je,
}

/// Identifies one rejection series of a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesKey {
    pub method: Method,
    pub verdict: VerdictKind,
    pub ci_kind: Option<IntervalKind>,
    pub cov: Option<CovEstimator>,
    pub alpha: f64,
}

fn pct(alpha: f64) -> String {
    format!("{}%", (alpha * 1000.0).round() / 10.0)
}

impl SeriesKey {
    /// Column label in the style of the result tables, e.g. `tot.CI5%` or
    /// `JE.MCD1%`. Non-BCa intervals carry their kind.
    pub fn label(&self) -> String {
        let ci = |prefix: &str| {
            let kind = match self.ci_kind {
                Some(IntervalKind::Percentile) => "pct",
                Some(IntervalKind::Studentized) => "stud",
                _ => "",
            };
            format!("{prefix}CI{kind}{}", pct(self.alpha))
        };
        match self.verdict {
            VerdictKind::CiInt => ci("int."),
            VerdictKind::CiSlope => ci("sl."),
            VerdictKind::CiTotal => ci("tot."),
            VerdictKind::Je => format!("JE.{}{}", self.cov.map_or("?", |c| c.short_label()), pct(self.alpha)),
        }
    }

    fn same(&self, o: &SeriesKey) -> bool {
        self.method == o.method
            && self.verdict == o.verdict
            && self.ci_kind == o.ci_kind
            && self.cov == o.cov
            && (self.alpha - o.alpha).abs() < 1e-12
    }
}

/// Every series a plan produces.
pub fn series_keys(plan: &SimulationPlan) -> Vec<SeriesKey> {
    let mut keys = Vec::new();
    for &method in &plan.methods {
        for &k in &plan.ci_kinds {
            for verdict in [VerdictKind::CiInt, VerdictKind::CiSlope, VerdictKind::CiTotal] {
                keys.push(SeriesKey {
                    method,
                    verdict,
                    ci_kind: Some(k),
                    cov: None,
                    alpha: plan.ci_alpha,
                });
            }
        }
        for &c in &plan.cov_methods {
            for &alpha in &plan.alphas {
                keys.push(SeriesKey {
                    method,
                    verdict: VerdictKind::Je,
                    ci_kind: None,
                    cov: Some(c),
                    alpha,
                });
            }
        }
    }
    keys
}

/// Rejection verdict of one replicate for a series; `None` if unavailable.
fn rejected(plan: &SimulationPlan, key: &SeriesKey, r: &MethodResult) -> Option<bool> {
    r.error.as_ref().map_or(Some(()), |_| None)?;
    match key.verdict {
        VerdictKind::Je => {
            let k = plan.cov_methods.iter().position(|&c| Some(c) == key.cov)?;
            r.je_p[k].map(|p| p <= key.alpha)
        }
        v => {
            let k = plan.ci_kinds.iter().position(|&c| Some(c) == key.ci_kind)?;
            let [int, slope] = r.ci[k]?;
            Some(match v {
                VerdictKind::CiInt => int,
                VerdictKind::CiSlope => slope,
                _ => int || slope,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub method: Method,
    pub series: String,
    pub verdict: VerdictKind,
    pub ci_kind: Option<IntervalKind>,
    pub cov: Option<CovEstimator>,
    pub alpha: f64,
    pub grid_param: GridParam,
    pub grid_value: f64,
    pub replicates: usize,
    /// Replicates where the verdict was available.
    pub valid: usize,
    pub rejections: usize,
    pub rate: f64,
    /// Binomial standard error `sqrt(r (1 - r) / valid)`.
    pub se: f64,
    /// Replicates without a verdict (fit or covariance failure).
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionCurve {
    pub grid_param: GridParam,
    pub grid_values: Vec<f64>,
    pub replicates: usize,
    pub rows: Vec<CurveRow>,
}

impl RejectionCurve {
    /// Rows of one series in grid order.
    pub fn series(&self, key: &SeriesKey) -> Vec<&CurveRow> {
        self.rows
            .iter()
            .filter(|r| {
                key.same(&SeriesKey {
                    method: r.method,
                    verdict: r.verdict,
                    ci_kind: r.ci_kind,
                    cov: r.cov,
                    alpha: r.alpha,
                })
            })
            .collect()
    }

    /// `(grid values, acceptance rates)` of a series, skipping grid points
    /// without any valid verdict.
    pub fn acceptance(&self, key: &SeriesKey) -> (Vec<f64>, Vec<f64>) {
        self.series(key)
            .into_iter()
            .filter(|r| r.valid > 0)
            .map(|r| (r.grid_value, 1.0 - r.rate))
            .unzip()
    }
}

/// Aggregates replicate records into rejection rates per series and grid
/// value.
pub fn curves(plan: &SimulationPlan, records: &[ReplicateRecord]) -> RejectionCurve {
    let mut rows = Vec::new();
    for key in series_keys(plan) {
        let mi = plan.methods.iter().position(|&m| m == key.method).expect("plan method");
        for (g, &v) in plan.grid.iter().enumerate() {
            let mut reps = 0;
            let (mut valid, mut rej) = (0, 0);
            for rec in records.iter().filter(|r| r.grid_index == g) {
                reps += 1;
                if let Some(res) = rec.results.get(mi) {
                    if let Some(x) = rejected(plan, &key, res) {
                        valid += 1;
                        rej += x as usize;
                    }
                }
            }
            let rate = if valid > 0 { rej as f64 / valid as f64 } else { f64::NAN };
            let se = if valid > 0 {
                (rate * (1.0 - rate) / valid as f64).sqrt()
            } else {
                f64::NAN
            };
            rows.push(CurveRow {
                method: key.method,
                series: key.label(),
                verdict: key.verdict,
                ci_kind: key.ci_kind,
                cov: key.cov,
                alpha: key.alpha,
                grid_param: plan.grid_param,
                grid_value: v,
                replicates: reps,
                valid,
                rejections: rej,
                rate,
                se,
                failures: reps - valid,
            });
        }
    }
    RejectionCurve {
        grid_param: plan.grid_param,
        grid_values: plan.grid.clone(),
        replicates: plan.replicates_per_point,
        rows,
    }
}

/// Fails when any method lost more than [`MAX_FIT_FAILURE_SHARE`] of its
/// replicates to fit or bootstrap failures.
pub fn check_fit_failures(plan: &SimulationPlan, records: &[ReplicateRecord]) -> Result<()> {
    let total = records.len();
    for (mi, m) in plan.methods.iter().enumerate() {
        let failed = records
            .iter()
            .filter(|r| r.generation_error.is_some() || r.results.get(mi).is_none_or(|x| x.error.is_some()))
            .count();
        if failed as f64 > MAX_FIT_FAILURE_SHARE * total as f64 {
            return Err(Error::EnsembleQuality {
                failed,
                replicates: total,
            }
            .at(match m {
                Method::Dem => "simulation dem",
                Method::WDem => "simulation wdem",
                Method::MDem => "simulation mdem",
                Method::MMDem => "simulation mmdem",
                Method::PaBa => "simulation paba",
            }));
        }
    }
    Ok(())
}

/// Nominal levels of the P-P plot.
pub fn pp_levels() -> Vec<f64> {
    let mut v = vec![0.001, 0.005];
    v.extend((1..=20).map(|i| i as f64 * 0.01));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpPoint {
    pub method: Method,
    pub cov: CovEstimator,
    pub nominal: f64,
    pub empirical: f64,
    pub valid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Type1Row {
    pub method: Method,
    pub series: String,
    pub acceptance: f64,
    pub se: f64,
    pub valid: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Type1Table {
    pub replicates: usize,
    pub rows: Vec<Type1Row>,
    pub pp: Vec<PpPoint>,
}

impl Type1Table {
    pub fn acceptance(&self, method: Method, series: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.series == series)
            .map(|r| r.acceptance)
    }
}

/// Empirical acceptance at the null `(0, 1)` for every series, plus P-P
/// data of the JE p-values.
pub fn type1_study(plan: &SimulationPlan) -> Result<Type1Table> {
    if plan.grid.len() != 1 || plan.grid[0] != plan.grid_param.null_value() {
        return Err(Error::Invalid(
            "a type-I study needs a single grid value at the null".into(),
        ));
    }
    let records = run_plan(plan)?;
    check_fit_failures(plan, &records)?;
    Ok(type1_table(plan, &records))
}

pub fn type1_table(plan: &SimulationPlan, records: &[ReplicateRecord]) -> Type1Table {
    let curve = curves(plan, records);
    let rows = curve
        .rows
        .iter()
        .map(|r| Type1Row {
            method: r.method,
            series: r.series.clone(),
            acceptance: 1.0 - r.rate,
            se: r.se,
            valid: r.valid,
            failures: r.failures,
        })
        .collect();
    let mut pp = Vec::new();
    for (mi, &method) in plan.methods.iter().enumerate() {
        for (ci, &cov) in plan.cov_methods.iter().enumerate() {
            let ps: Vec<f64> = records
                .iter()
                .filter_map(|r| r.results.get(mi))
                .filter(|x| x.error.is_none())
                .filter_map(|x| x.je_p[ci])
                .collect();
            for nominal in pp_levels() {
                let rej = ps.iter().filter(|&&p| p <= nominal).count();
                pp.push(PpPoint {
                    method,
                    cov,
                    nominal,
                    empirical: if ps.is_empty() {
                        f64::NAN
                    } else {
                        rej as f64 / ps.len() as f64
                    },
                    valid: ps.len(),
                });
            }
        }
    }
    Type1Table {
        replicates: records.len(),
        rows,
        pp,
    }
}

/// Rejection curve over the plan grid.
pub fn power_study(plan: &SimulationPlan) -> Result<RejectionCurve> {
    let records = run_plan(plan)?;
    check_fit_failures(plan, &records)?;
    Ok(curves(plan, &records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionDiagnostics {
    pub method: Method,
    pub grid_value: f64,
    /// Mean and maximum share of the bootstrapped slopes on the largest atom.
    pub mean_atom_share: f64,
    pub max_atom_share: f64,
    /// Per plan covariance: replicates where the JE test was unavailable.
    pub cov_failures: Vec<usize>,
    pub replicates: usize,
}

pub fn precision_diagnostics(plan: &SimulationPlan, records: &[ReplicateRecord]) -> Vec<PrecisionDiagnostics> {
    let mut out = Vec::new();
    for (mi, &method) in plan.methods.iter().enumerate() {
        for (g, &v) in plan.grid.iter().enumerate() {
            let res: Vec<&MethodResult> = records
                .iter()
                .filter(|r| r.grid_index == g)
                .filter_map(|r| r.results.get(mi))
                .filter(|x| x.error.is_none())
                .collect();
            let shares: Vec<f64> = res.iter().map(|x| x.slope_atom as f64 / plan.b as f64).collect();
            out.push(PrecisionDiagnostics {
                method,
                grid_value: v,
                mean_atom_share: if shares.is_empty() {
                    f64::NAN
                } else {
                    crate::stats::mean(&shares)
                },
                max_atom_share: shares.iter().copied().fold(0.0, f64::max),
                cov_failures: (0..plan.cov_methods.len())
                    .map(|k| res.iter().filter(|x| x.je_p[k].is_none()).count())
                    .collect(),
                replicates: res.len(),
            });
        }
    }
    out
}

/// Power curves for limited-precision data, with atom sizes of the
/// bootstrapped slopes and covariance failures per grid point.
/// Covariance failures are recorded, not fatal.
pub fn precision_study(plan: &SimulationPlan) -> Result<(RejectionCurve, Vec<PrecisionDiagnostics>)> {
    if plan.generator.precision_x.is_none() && plan.generator.precision_y.is_none() {
        return Err(Error::Invalid("a precision study needs finite precision digits".into()));
    }
    let records = run_plan(plan)?;
    check_fit_failures(plan, &records)?;
    Ok((curves(plan, &records), precision_diagnostics(plan, &records)))
}

/// Power curves of the same plan under each error model.
pub fn heteroscedastic_study(
    plan: &SimulationPlan,
    models: &[ErrorModel],
) -> Result<Vec<(ErrorModel, RejectionCurve)>> {
    models
        .iter()
        .map(|&m| {
            let mut p = plan.clone();
            p.generator.error_model = m;
            power_study(&p).map(|c| (m, c))
        })
        .collect()
}

/// Writes curve rows as CSV.
pub fn write_curve_csv<W: std::io::Write>(curve: &RejectionCurve, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "method",
        "series",
        "verdict",
        "ci_kind",
        "cov",
        "alpha",
        "grid_param",
        "grid_value",
        "replicates",
        "valid",
        "rejections",
        "rate",
        "se",
        "failures",
    ])
    .map_err(|e| Error::Csv(e.to_string()))?;
    let opt = |s: Option<String>| s.unwrap_or_default();
    for r in &curve.rows {
        wtr.write_record([
            r.method.name().to_string(),
            r.series.clone(),
            format!("{:?}", r.verdict).to_ascii_lowercase(),
            opt(r.ci_kind.map(|k| k.name().to_string())),
            opt(r.cov.map(|c| c.name().to_string())),
            r.alpha.to_string(),
            r.grid_param.name().to_string(),
            r.grid_value.to_string(),
            r.replicates.to_string(),
            r.valid.to_string(),
            r.rejections.to_string(),
            r.rate.to_string(),
            r.se.to_string(),
            r.failures.to_string(),
        ])
        .map_err(|e| Error::Csv(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
