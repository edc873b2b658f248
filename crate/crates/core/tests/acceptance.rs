//! Acceptance criteria. Each test prints one PASS/FAIL line with the measured
//! values; tolerances are pinned below.
//!
//! The Monte Carlo criteria (5 to 8) run at desk scale and take several
//! minutes each on one core.

use std::io::Write;
use std::time::Instant;

use mcjoint::dataset::{hemoglobin, ErrorModel, GeneratorSpec, PairedSample};
use mcjoint::estimators::{fit, fit_paba, paba_analytic_ci, weighted_deming_line, DemingConfig, Method};
use mcjoint::jetest::{validate, ValidationConfig, Verdict};
use mcjoint::powerfit::{power_row, subbotin_density, subbotin_gradient, PowerRow, Side, SubbotinParams};
use mcjoint::resampling::{bootstrap, BootstrapOptions, IntervalKind};
use mcjoint::rng::stream;
use mcjoint::robustcov::{estimate, mcd_raw, CovEstimator, McdOptions, Point};
use mcjoint::simulation::{
    default_grid, heteroscedastic_study, power_study, precision_study, run_replicate, type1_study, GridParam,
    RejectionCurve, SeriesKey, SimulationPlan, VerdictKind,
};
use mcjoint::stats::chi2_2_quantile;
use rand::Rng;
use rand_distr::StandardNormal;

// Criterion 1
const PABA_SLOPE: f64 = 0.90625;
const PABA_INTERCEPT: f64 = 0.24844;
const DECIMALS_5: f64 = 5e-6;
const C1_MAX_SECONDS: f64 = 1.0;
// Criterion 3
const MDEM_INTERCEPT: f64 = 0.10586;
const MDEM_SLOPE: f64 = 0.92743;
const MDEM_TOL: f64 = 0.02;
// Criterion 4
const C4_B: usize = 2000;
const C4_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
// Criterion 5
const TYPE1_REPLICATES: usize = 1000;
const DEM_TOT_CI_RANGE: (f64, f64) = (0.89, 0.95);
const MDEM_JE_MCD1_RANGE: (f64, f64) = (0.94, 0.985);
// Criteria 5 to 8
const MC_B: usize = 999;
const POWER_REPLICATES: usize = 200;
const MASTER_SEED: u64 = 20240611;
// Criterion 7
const JE_UNAVAILABLE_SHARE: f64 = 0.5;
// Criterion 8
const DEM_JE_REFERENCE: [f64; 3] = [1.0166, 1.0203, 1.0210];
const DEM_JE_TOL: f64 = 0.005;
const PABA_HETERO_MAX_GAP: f64 = 0.002;
// Criterion 9
const PABA_INSTANCES: usize = 1000;
const MCD_INSTANCES: usize = 200;
const DEMING_TOL: f64 = 1e-3;
// Criterion 10
const GRADIENT_REL_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-6;
const NORMALIZATION_TOL: f64 = 1e-6;
const AFFINE_TOL: f64 = 1e-8;
const CHI2_95: f64 = 5.991;
const CHI2_TOL: f64 = 1e-3;

/// Written to the stdout handle directly so the line shows up even when the
/// test harness captures output.
fn line(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{verdict}] criterion {id}: {name}: {detail}");
    let _ = out.flush();
}

fn finish(id: u32, name: &str, checks: &[(bool, String)]) {
    let pass = checks.iter().all(|c| c.0);
    let detail: Vec<String> = checks
        .iter()
        .map(|(ok, d)| if *ok { d.clone() } else { format!("{d} <- failed") })
        .collect();
    line(id, name, pass, &detail.join("; "));
    assert!(pass, "criterion {id} failed: {}", detail.join("; "));
}

#[test]
fn criterion_01_paba_point_estimate() {
    let t = Instant::now();
    let s = hemoglobin();
    let f = fit_paba(&s).unwrap();
    let secs = t.elapsed().as_secs_f64();
    finish(
        1,
        "hemoglobin PaBa point estimate",
        &[
            (
                (f.slope - PABA_SLOPE).abs() < DECIMALS_5,
                format!("slope {:.5}", f.slope),
            ),
            (
                (f.intercept - PABA_INTERCEPT).abs() < DECIMALS_5,
                format!("intercept {:.5}", f.intercept),
            ),
            (secs < C1_MAX_SECONDS, format!("{secs:.4} s")),
        ],
    );
}

#[test]
fn criterion_02_paba_analytic_ci() {
    let ci = paba_analytic_ci(&hemoglobin(), 0.05).unwrap();
    finish(
        2,
        "hemoglobin PaBa analytic slope UCI",
        &[(
            (ci.slope_hi - 1.0).abs() < DECIMALS_5,
            format!("slope CI [{:.5}, {:.5}]", ci.slope_lo, ci.slope_hi),
        )],
    );
}

#[test]
fn criterion_03_mdem_anchor() {
    let f = fit(Method::MDem, &hemoglobin(), &DemingConfig::default()).unwrap();
    finish(
        3,
        "hemoglobin MDem anchor",
        &[
            (
                (f.intercept - MDEM_INTERCEPT).abs() <= MDEM_TOL,
                format!("intercept {:.5} (reference {MDEM_INTERCEPT})", f.intercept),
            ),
            (
                (f.slope - MDEM_SLOPE).abs() <= MDEM_TOL,
                format!("slope {:.5} (reference {MDEM_SLOPE})", f.slope),
            ),
            (f.converged, format!("{} iterations", f.iterations)),
        ],
    );
}

#[test]
fn criterion_04_headline_discordance() {
    let s = hemoglobin();
    let mut checks = Vec::new();
    for cov in [CovEstimator::Classic, CovEstimator::Mcd, CovEstimator::Sde] {
        for seed in C4_SEEDS {
            let cfg = ValidationConfig::new(Method::PaBa, cov, C4_B, seed);
            let (r, _) = validate(&s, &cfg).unwrap();
            let ok = r.verdict_ci == Verdict::Validated && r.verdict_je == Verdict::Rejected && r.je_pvalue < 0.01;
            checks.push((
                ok,
                format!(
                    "{}/{seed}: CI {} (slope UCI {:.5}), JE {} p={:.2e}",
                    cov.name(),
                    r.verdict_ci,
                    r.intervals.slope_hi,
                    r.verdict_je,
                    r.je_pvalue
                ),
            ));
        }
    }
    finish(4, "hemoglobin PaBa CI validates, JE rejects", &checks);
}

fn plan(spec: GeneratorSpec, methods: Vec<Method>, grid: Vec<f64>, replicates: usize) -> SimulationPlan {
    let mut p = SimulationPlan::new(spec, methods, GridParam::Slope, grid);
    p.cov_methods = vec![CovEstimator::Mcd];
    p.alphas = vec![0.01];
    p.ci_alpha = 0.05;
    p.ci_kinds = vec![IntervalKind::Bca];
    p.b = MC_B;
    p.replicates_per_point = replicates;
    p.master_seed = MASTER_SEED;
    p
}

fn tot_ci(method: Method) -> SeriesKey {
    SeriesKey {
        method,
        verdict: VerdictKind::CiTotal,
        ci_kind: Some(IntervalKind::Bca),
        cov: None,
        alpha: 0.05,
    }
}

fn je_mcd1(method: Method) -> SeriesKey {
    SeriesKey {
        method,
        verdict: VerdictKind::Je,
        ci_kind: None,
        cov: Some(CovEstimator::Mcd),
        alpha: 0.01,
    }
}

#[test]
fn criterion_05_type1_table() {
    let t = Instant::now();
    let p = plan(
        GeneratorSpec::short_range(40),
        vec![Method::Dem, Method::MDem],
        vec![1.0],
        TYPE1_REPLICATES,
    );
    let table = type1_study(&p).unwrap();
    let dem = table.acceptance(Method::Dem, "tot.CI5%").unwrap();
    let mdem = table.acceptance(Method::MDem, "JE.MCD1%").unwrap();
    let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
    finish(
        5,
        "type-I acceptance at desk scale",
        &[
            (
                within(dem, DEM_TOT_CI_RANGE),
                format!("Dem tot.CI5% {dem:.4} in {DEM_TOT_CI_RANGE:?} (reference 0.9232)"),
            ),
            (
                within(mdem, MDEM_JE_MCD1_RANGE),
                format!("MDem JE.MCD1% {mdem:.4} in {MDEM_JE_MCD1_RANGE:?} (reference 0.9708)"),
            ),
            (
                true,
                format!("{} replicates, {:.0} s", table.replicates, t.elapsed().as_secs_f64()),
            ),
        ],
    );
}

fn fitted(curve: &RejectionCurve, key: &SeriesKey) -> Result<PowerRow, String> {
    let (x, acc) = curve.acceptance(key);
    power_row(&x, &acc, 1.0, Side::Above)
        .map(|(_, r)| r)
        .map_err(|e| format!("{} {}: {e}", key.method.name(), key.label()))
}

#[test]
fn criterion_06_power_ordering() {
    let methods = [Method::Dem, Method::MDem, Method::PaBa];
    let mut checks = Vec::new();
    for n in [40, 100] {
        let spec = GeneratorSpec::short_range(n);
        let grid = default_grid(GridParam::Slope, &spec);
        let curve = power_study(&plan(spec, methods.to_vec(), grid, POWER_REPLICATES)).unwrap();
        for m in methods {
            match (fitted(&curve, &je_mcd1(m)), fitted(&curve, &tot_ci(m))) {
                (Ok(je), Ok(ci)) => checks.push((
                    je.p80.estimate < ci.p80.estimate && je.p80.uci < ci.p80.lci,
                    format!(
                        "short-{n} {}: JE.MCD1% {:.4} [{:.4}, {:.4}] < CI5% {:.4} [{:.4}, {:.4}]",
                        m.name(),
                        je.p80.estimate,
                        je.p80.lci,
                        je.p80.uci,
                        ci.p80.estimate,
                        ci.p80.lci,
                        ci.p80.uci
                    ),
                )),
                (a, b) => checks.push((false, format!("short-{n} {}: {:?} {:?}", m.name(), a.err(), b.err()))),
            }
        }
    }
    finish(6, "JE.MCD1% beats CI5% in power", &checks);
}

/// Grid index of the highest acceptance (lowest rejection); the first one on
/// ties.
fn argmax_acceptance(curve: &RejectionCurve, key: &SeriesKey) -> usize {
    let rows = curve.series(key);
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.rate < rows[best].rate {
            best = i;
        }
    }
    best
}

#[test]
fn criterion_07_ties_bias() {
    let mut spec = GeneratorSpec::short_range(100);
    spec.precision_x = Some(2);
    spec.precision_y = Some(2);
    let grid = default_grid(GridParam::Slope, &spec);
    let null = grid.iter().position(|&g| g == 1.0).unwrap();
    let p = plan(
        spec,
        vec![Method::Dem, Method::MDem, Method::PaBa],
        grid.clone(),
        POWER_REPLICATES,
    );
    let (curve, diag) = precision_study(&p).unwrap();
    let mut checks = Vec::new();

    let key = tot_ci(Method::PaBa);
    let k = argmax_acceptance(&curve, &key);
    let rows = curve.series(&key);
    checks.push((
        grid[k] > 1.0,
        format!(
            "PaBa BCa tot.CI5% curve minimum at slope {} (rejection {:.3} vs {:.3} at 1)",
            grid[k], rows[k].rate, rows[null].rate
        ),
    ));
    for m in [Method::Dem, Method::MDem] {
        for key in [tot_ci(m), je_mcd1(m)] {
            let k = argmax_acceptance(&curve, &key);
            checks.push((
                k.abs_diff(null) <= 1,
                format!("{} {} minimum at slope {}", m.name(), key.label(), grid[k]),
            ));
        }
    }
    let paba: Vec<_> = diag.iter().filter(|d| d.method == Method::PaBa).collect();
    let at_null = paba.iter().find(|d| d.grid_value == 1.0).unwrap();
    let share = at_null.cov_failures[0] as f64 / at_null.replicates as f64;
    let total: usize = paba.iter().map(|d| d.cov_failures[0]).sum();
    let reps: usize = paba.iter().map(|d| d.replicates).sum();
    checks.push((
        share > JE_UNAVAILABLE_SHARE,
        format!(
            "PaBa MCD unavailable at slope 1: {share:.3} (whole grid {:.3})",
            total as f64 / reps as f64
        ),
    ));
    finish(7, "ties: PaBa bias direction and covariance failures", &checks);
}

#[test]
fn criterion_08_heteroscedastic_summary() {
    let spec = GeneratorSpec::long_range(100);
    let grid = default_grid(GridParam::Slope, &spec);
    let p = plan(spec, vec![Method::Dem, Method::PaBa], grid, POWER_REPLICATES);
    let models = [ErrorModel::Additive, ErrorModel::Mixed, ErrorModel::Multiplicative];
    let curves = heteroscedastic_study(&p, &models).unwrap();
    let mut checks = Vec::new();
    let mut dem = Vec::new();
    for ((model, curve), reference) in curves.iter().zip(DEM_JE_REFERENCE) {
        match fitted(curve, &je_mcd1(Method::Dem)) {
            Ok(r) => {
                checks.push((
                    (r.p80.estimate - reference).abs() <= DEM_JE_TOL,
                    format!("Dem JE.MCD1% {model}: {:.4} (reference {reference})", r.p80.estimate),
                ));
                dem.push(r.p80.estimate);
            }
            Err(e) => checks.push((false, e)),
        }
    }
    checks.push((
        dem.len() == 3 && dem[0] < dem[1] && dem[1] < dem[2],
        "Dem JE.MCD1% increases with heteroscedasticity".to_string(),
    ));
    let (_, hetero) = &curves[2];
    match (fitted(hetero, &je_mcd1(Method::PaBa)), fitted(hetero, &tot_ci(Method::PaBa))) {
        (Ok(je), Ok(ci)) => checks.push((
            (je.p80.estimate - ci.p80.estimate).abs() < PABA_HETERO_MAX_GAP,
            format!(
                "PaBa multiplicative: CI5% {:.4} [{:.4}, {:.4}] vs JE.MCD1% {:.4} [{:.4}, {:.4}] (reference 1.0278 vs 1.0289)",
                ci.p80.estimate, ci.p80.lci, ci.p80.uci, je.p80.estimate, je.p80.lci, je.p80.uci
            ),
        )),
        (a, b) => checks.push((false, format!("PaBa: {:?} {:?}", a.err(), b.err()))),
    }
    finish(8, "heteroscedasticity summary", &checks);
}

/// Passing-Bablok by definition: all pairwise slopes (vertical pairs signed
/// infinities, identical pairs and slopes of -1 dropped), fully sorted,
/// median shifted by the count below -1.
fn paba_oracle(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let mut s = Vec::new();
    for i in 0..x.len() {
        for j in 0..x.len() {
            if j <= i {
                continue;
            }
            let (dx, dy) = (x[j] - x[i], y[j] - y[i]);
            let v = match (dx == 0.0, dy == 0.0) {
                (true, true) => continue,
                (true, false) => dy.signum() * f64::INFINITY,
                _ => dy / dx,
            };
            if v != -1.0 {
                s.push(v);
            }
        }
    }
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = s.iter().filter(|&&v| v < -1.0).count();
    let n = s.len();
    let b = if n % 2 == 1 {
        *s.get((n + 1) / 2 + k - 1)?
    } else {
        0.5 * (s.get(n / 2 + k - 1)? + s.get(n / 2 + k)?)
    };
    // a usable line has a finite, nonzero slope
    if !b.is_finite() || b == 0.0 {
        return None;
    }
    let mut r: Vec<f64> = x.iter().zip(y).map(|(a, c)| c - b * a).collect();
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = r.len();
    let a = if m % 2 == 1 {
        r[m / 2]
    } else {
        0.5 * (r[m / 2 - 1] + r[m / 2])
    };
    Some((a, b))
}

fn det_of_subset(p: &[Point], idx: &[usize]) -> f64 {
    let h = idx.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &i in idx {
        sx += p[i][0];
        sy += p[i][1];
    }
    let (mx, my) = (sx / h, sy / h);
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for &i in idx {
        let (dx, dy) = (p[i][0] - mx, p[i][1] - my);
        xx += dx * dx;
        xy += dx * dy;
        yy += dy * dy;
    }
    (xx * yy - xy * xy) / (h * h)
}

/// Minimum covariance determinant over every h-subset.
fn mcd_oracle(p: &[Point], h: usize) -> f64 {
    fn rec(p: &[Point], h: usize, start: usize, cur: &mut Vec<usize>, best: &mut f64) {
        if cur.len() == h {
            *best = best.min(det_of_subset(p, cur));
            return;
        }
        for i in start..=(p.len() - (h - cur.len())) {
            cur.push(i);
            rec(p, h, i + 1, cur, best);
            cur.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(p, h, 0, &mut Vec::with_capacity(h), &mut best);
    best
}

/// Deming objective sum r^2 / (1 + l b^2), minimized over a 1-D grid in the
/// slope angle with the intercept profiled out, then refined.
fn deming_oracle(x: &[f64], y: &[f64], lambda: f64) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let obj = |b: f64| {
        let a = my - b * mx;
        x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum::<f64>() / (1.0 + lambda * b * b)
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let (mut lo, mut hi) = (-half_pi + 1e-6, half_pi - 1e-6);
    let mut best = 0.0;
    for _ in 0..6 {
        let steps = 2000;
        let mut best_v = f64::INFINITY;
        for k in 0..=steps {
            let t = lo + (hi - lo) * k as f64 / steps as f64;
            let v = obj(t.tan());
            if v < best_v {
                best_v = v;
                best = t;
            }
        }
        let w = (hi - lo) / steps as f64 * 2.0;
        lo = best - w;
        hi = best + w;
    }
    best.tan()
}

#[test]
fn criterion_09_oracle_equivalences() {
    let mut rng = stream(909, &[]);
    let mut checks = Vec::new();

    let mut mismatches = 0;
    let mut compared = 0;
    for case in 0..PABA_INSTANCES {
        let n = rng.random_range(3..=15);
        let slope = rng.random_range(0.5..1.5);
        let coarse = case % 3 == 0;
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let mut y: Vec<f64> = x
            .iter()
            .map(|v| slope * v + rng.sample::<f64, _>(StandardNormal))
            .collect();
        if coarse {
            // ties and vertical pairs
            x.iter_mut().for_each(|v| *v = v.round());
            y.iter_mut().for_each(|v| *v = v.round());
        }
        let s = PairedSample::new(x.clone(), y.clone(), "oracle").unwrap();
        let got = fit_paba(&s).ok().map(|f| (f.intercept, f.slope));
        let want = paba_oracle(&x, &y);
        match (got, want) {
            (Some(g), Some(w)) => {
                compared += 1;
                if (g.0 - w.0).abs() > 1e-12 * (1.0 + w.0.abs()) || (g.1 - w.1).abs() > 1e-12 * (1.0 + w.1.abs()) {
                    mismatches += 1;
                    println!("paba mismatch: x={x:?} y={y:?} got {g:?} want {w:?}");
                }
            }
            (None, None) => {}
            (g, w) => {
                mismatches += 1;
                println!("paba mismatch: x={x:?} y={y:?} got {g:?} want {w:?}");
            }
        }
    }
    checks.push((
        mismatches == 0,
        format!("PaBa vs brute force: {mismatches} mismatches in {PABA_INSTANCES} ({compared} fitted)"),
    ));

    let mut worst: f64 = 0.0;
    for case in 0..MCD_INSTANCES {
        let n = 10 + case % 11;
        let mut p: Vec<Point> = (0..n)
            .map(|_| {
                let u: f64 = rng.sample(StandardNormal);
                let v: f64 = rng.sample(StandardNormal);
                [u, 0.6 * u + 0.8 * v]
            })
            .collect();
        for q in p.iter_mut().take(n / 5) {
            q[0] += 6.0;
            q[1] -= 4.0;
        }
        let raw = mcd_raw(
            &p,
            &McdOptions {
                seed: case as u64,
                ..McdOptions::default()
            },
        )
        .unwrap();
        let oracle = mcd_oracle(&p, raw.subset.len());
        worst = worst.max((raw.det - oracle) / oracle);
    }
    checks.push((
        worst < 1e-9,
        format!("FAST-MCD vs exhaustive ({MCD_INSTANCES} clouds of 10..20): worst rel. excess {worst:.1e}"),
    ));

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(5..40);
        let lambda = [0.25, 1.0, 4.0][rng.random_range(0..3)];
        let slope = rng.random_range(-2.0..3.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 1.0 + slope * v + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let Ok((_, b)) = weighted_deming_line(&x, &y, None, lambda) else {
            continue;
        };
        worst = worst.max((b - deming_oracle(&x, &y, lambda)).abs());
    }
    checks.push((
        worst < DEMING_TOL,
        format!("Deming closed form vs grid search: worst |db| {worst:.1e}"),
    ));
    finish(9, "oracle equivalences", &checks);
}

#[test]
fn criterion_10_numerical_properties() {
    let mut rng = stream(1010, &[]);
    let mut checks = Vec::new();

    // gradient against central differences, away from the location
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = SubbotinParams::new(
            rng.random_range(0.01..0.2),
            rng.random_range(1.2..5.0),
            rng.random_range(0.01..0.2),
            rng.random_range(0.9..1.1),
        );
        let mut x = p.location + rng.random_range(-2.5..2.5) * p.scale;
        if (x - p.location).abs() < 1e-3 * p.scale {
            x += 1e-2 * p.scale;
        }
        let g = subbotin_gradient(x, &p);
        let theta = [p.amplitude, p.shape, p.scale, p.location];
        for k in 0..4 {
            let h = FD_STEP * theta[k].abs().max(1e-3);
            let at = |d: f64| {
                let mut t = theta;
                t[k] += d;
                subbotin_density(x, &SubbotinParams::new(t[0], t[1], t[2], t[3]))
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let scale = g[k].abs().max(fd.abs()).max(1e-8);
            worst = worst.max((g[k] - fd).abs() / scale);
        }
    }
    checks.push((
        worst < GRADIENT_REL_TOL,
        format!("Subbotin gradient vs FD: worst rel. error {worst:.1e}"),
    ));

    // limit at x = mu matches the one-sided difference from above
    let p = SubbotinParams::new(0.05, 2.5, 0.04, 1.0);
    let g = subbotin_gradient(p.location, &p)[3];
    let h = 1e-7;
    let mut above = p.clone();
    above.location -= h;
    let fd = (subbotin_density(p.location, &above) - subbotin_density(p.location, &p)) / h;
    checks.push((
        (g - fd).abs() < 1e-4 * (1.0 + fd.abs()),
        format!("location derivative at mu {g:.2e} vs {fd:.2e}"),
    ));

    // normalization: integrates to the amplitude
    let mut worst: f64 = 0.0;
    for &(a, b, s) in &[(1.0, 2.0, 1.0), (0.3, 1.0, 0.05), (2.0, 4.0, 3.0), (0.7, 1.5, 0.2)] {
        let p = SubbotinParams::new(a, b, s, 0.5);
        // Simpson on [mu - 40 s, mu + 40 s] split at mu (kink for beta = 1)
        let simpson = |lo: f64, hi: f64| {
            let m = 200_000;
            let hh = (hi - lo) / m as f64;
            let mut acc = subbotin_density(lo, &p) + subbotin_density(hi, &p);
            for k in 1..m {
                acc += subbotin_density(lo + k as f64 * hh, &p) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * hh / 3.0
        };
        let total = simpson(p.location - 40.0 * s, p.location) + simpson(p.location, p.location + 40.0 * s);
        worst = worst.max((total - a).abs());
    }
    checks.push((
        worst < NORMALIZATION_TOL,
        format!("density integral - amplitude: worst {worst:.1e}"),
    ));

    // Mahalanobis distance of H0 is affine invariant
    let s = hemoglobin();
    let e = bootstrap(
        &s,
        Method::Dem,
        &DemingConfig::default(),
        &BootstrapOptions::new(1000, 7),
    )
    .unwrap();
    let a = [[2.0, 0.5], [-0.3, 1.5]];
    let c = [3.0, -1.0];
    let map = |q: Point| {
        [
            a[0][0] * q[0] + a[0][1] * q[1] + c[0],
            a[1][0] * q[0] + a[1][1] * q[1] + c[1],
        ]
    };
    let moved: Vec<Point> = e.pairs.iter().map(|&q| map(q)).collect();
    let mut worst: f64 = 0.0;
    for cov in [CovEstimator::Classic, CovEstimator::Mcd] {
        let m0 = estimate(&e.pairs, cov, 11).unwrap();
        let m1 = estimate(&moved, cov, 11).unwrap();
        let (d0, d1) = (m0.mahalanobis_sq([0.0, 1.0]), m1.mahalanobis_sq(map([0.0, 1.0])));
        worst = worst.max((d0 - d1).abs() / d0.max(1.0));
    }
    checks.push((
        worst < AFFINE_TOL,
        format!("Mahalanobis affine invariance: worst rel. {worst:.1e}"),
    ));

    let q = chi2_2_quantile(0.95);
    checks.push(((q - CHI2_95).abs() <= CHI2_TOL, format!("chi2_2 0.95 quantile {q:.5}")));

    // seeded pipelines give identical bits on one thread and on four
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let parallel = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let run = || {
        let mut cfg = ValidationConfig::new(Method::MDem, CovEstimator::Mcd, 500, 3);
        cfg.ci_kind = IntervalKind::Studentized;
        let (r, e) = validate(&s, &cfg).unwrap();
        let mut sim = SimulationPlan::new(
            GeneratorSpec::short_range(30),
            vec![Method::Dem, Method::PaBa, Method::MMDem],
            GridParam::Slope,
            vec![1.05],
        );
        sim.b = 199;
        sim.replicates_per_point = 50;
        let rec = run_replicate(&sim, 0, 7);
        (
            serde_json::to_string(&r).unwrap(),
            e.pairs,
            serde_json::to_string(&rec).unwrap(),
        )
    };
    let a1 = serial.install(run);
    let a2 = parallel.install(run);
    checks.push((a1 == a2, "serial and parallel runs are bit-identical".to_string()));
    finish(10, "numerical property suite", &checks);
}
