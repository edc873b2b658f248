//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mcjoint::dataset::{hemoglobin, read_csv, PairedSample};
use mcjoint::estimators::Method;
use mcjoint::jetest::{report_json, validate, ValidationConfig, Verdict};
use mcjoint::powerfit::{power_row_at, runs_test, subbotin_density, Side, MIN_POINTS};
use mcjoint::resampling::IntervalKind;
use mcjoint::robustcov::CovEstimator;
use mcjoint::simulation::{
    check_fit_failures, curves, precision_diagnostics, run_point, type1_table, write_curve_csv, ReplicateRecord,
    SimulationPlan,
};
use serde::{Deserialize, Serialize};

use crate::config::{parse_plan, Scale, StudyKind, StudyPlan};
use crate::fsio::{write_atomic, write_string};
use crate::plot::{render_box_ellipse, PlotPayload};
use crate::{exit, CliError, CliResult};

pub struct ValidateArgs {
    pub input: Option<PathBuf>,
    pub builtin: Option<String>,
    pub swap: bool,
    pub method: Method,
    pub cov: CovEstimator,
    pub b: usize,
    pub seed: u64,
    pub je_alpha: f64,
    pub ci_alpha: f64,
    pub ci: IntervalKind,
    pub out: PathBuf,
}

fn load_sample(a: &ValidateArgs) -> CliResult<PairedSample> {
    let s = match (&a.input, a.builtin.as_deref()) {
        (Some(path), _) => {
            if !path.is_file() {
                return Err(CliError::Usage(format!("input file {} does not exist", path.display())));
            }
            read_csv(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        (None, Some("hemoglobin")) => hemoglobin(),
        (None, Some(other)) => {
            return Err(CliError::Usage(format!(
                "unknown builtin dataset {other:?} (hemoglobin)"
            )))
        }
        (None, None) => return Err(CliError::Usage("either --input or --builtin is required".into())),
    };
    Ok(if a.swap { s.swapped() } else { s })
}

/// Runs one validation, writes report.json, plot.svg and ensemble.csv and
/// returns the verdict-coded exit code.
pub fn cmd_validate(a: &ValidateArgs) -> CliResult<i32> {
    let s = load_sample(a)?;
    let mut cfg = ValidationConfig::new(a.method, a.cov, a.b, a.seed);
    cfg.je_alpha = a.je_alpha;
    cfg.ci_alpha = a.ci_alpha;
    cfg.ci_kind = a.ci;
    let (report, ensemble) = validate(&s, &cfg)?;

    std::fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    write_string(&a.out.join("report.json"), &(report_json(&report) + "\n"))?;
    let svg = render_box_ellipse(&PlotPayload::from_report(&report, &ensemble.pairs));
    write_string(&a.out.join("plot.svg"), &svg)?;
    write_atomic(&a.out.join("ensemble.csv"), |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["intercept", "slope"])?;
        for p in &ensemble.pairs {
            wtr.write_record([p[0].to_string(), p[1].to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    })?;

    let iv = &report.intervals;
    println!(
        "{}: {} n={} B={}",
        report.label,
        report.fit.method.name(),
        report.n,
        report.b
    );
    println!(
        "  intercept {:.5}  [{:.5}, {:.5}]",
        report.fit.intercept, iv.int_lo, iv.int_hi
    );
    println!(
        "  slope     {:.5}  [{:.5}, {:.5}]",
        report.fit.slope, iv.slope_lo, iv.slope_hi
    );
    println!("  CI ({}, alpha {}): {}", iv.kind.name(), a.ci_alpha, report.verdict_ci);
    println!(
        "  JE ({}, alpha {}): {}  p = {:.4e}",
        report.cov.estimator.name(),
        a.je_alpha,
        report.verdict_je,
        report.je_pvalue
    );
    Ok(match report.verdict_je {
        Verdict::Validated => exit::OK,
        Verdict::Rejected => exit::REJECTED,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    version: String,
    kind: StudyKind,
    scale: Scale,
    master_seed: u64,
    parts: Vec<(String, SimulationPlan)>,
    /// Completed grid indices per part tag.
    completed: BTreeMap<String, Vec<usize>>,
}

fn point_file(out: &Path, tag: &str, g: usize) -> PathBuf {
    out.join("points").join(format!("{tag}-{g:03}.json"))
}

fn save_manifest(out: &Path, m: &Manifest) -> anyhow::Result<()> {
    write_string(&out.join("manifest.json"), &(serde_json::to_string_pretty(m)? + "\n"))
}

pub struct SimulateArgs {
    pub plan: PathBuf,
    pub scale: Scale,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

pub fn load_plan(path: &Path, scale: Scale, seed: Option<u64>) -> CliResult<StudyPlan> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read plan {}: {e}", path.display())))?;
    let mut plan = parse_plan(&text, scale).map_err(|problems| {
        CliError::Usage(format!(
            "malformed plan {}:\n  {}",
            path.display(),
            problems.join("\n  ")
        ))
    })?;
    if let Some(s) = seed {
        plan.plan.master_seed = s;
    }
    Ok(plan)
}

/// Runs a simulation plan grid point by grid point. Completed points are
/// stored under `points/` and listed in `manifest.json`; a re-run with the
/// same plan skips them.
pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<i32> {
    let study = load_plan(&a.plan, a.scale, a.seed)?;
    std::fs::create_dir_all(a.out.join("points")).with_context(|| format!("cannot create {}", a.out.display()))?;
    let parts = study.parts();
    let fresh = Manifest {
        version: crate::version_string(),
        kind: study.kind,
        scale: a.scale,
        master_seed: study.plan.master_seed,
        parts: parts.clone(),
        completed: BTreeMap::new(),
    };
    let manifest_path = a.out.join("manifest.json");
    let mut manifest = if manifest_path.is_file() {
        let old: Manifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)
            .with_context(|| format!("cannot parse {}", manifest_path.display()))?;
        if old.parts != fresh.parts || old.kind != fresh.kind {
            return Err(CliError::Failure(anyhow::anyhow!(
                "{} holds results of a different plan; use another --out directory",
                a.out.display()
            )));
        }
        old
    } else {
        fresh
    };
    save_manifest(&a.out, &manifest)?;

    let mut all: Vec<(String, SimulationPlan, Vec<ReplicateRecord>)> = Vec::new();
    for (tag, plan) in &parts {
        let mut records = Vec::new();
        for g in 0..plan.grid.len() {
            let file = point_file(&a.out, tag, g);
            let done = manifest.completed.get(tag).is_some_and(|v| v.contains(&g)) && file.is_file();
            let recs: Vec<ReplicateRecord> = if done {
                serde_json::from_str(&std::fs::read_to_string(&file)?)
                    .with_context(|| format!("cannot parse {}", file.display()))?
            } else {
                let recs = run_point(plan, g);
                write_string(&file, &serde_json::to_string(&recs)?)?;
                let list = manifest.completed.entry(tag.clone()).or_default();
                if !list.contains(&g) {
                    list.push(g);
                    list.sort_unstable();
                }
                save_manifest(&a.out, &manifest)?;
                eprintln!("{tag}: grid point {}/{} done", g + 1, plan.grid.len());
                recs
            };
            records.extend(recs);
        }
        check_fit_failures(plan, &records)?;
        all.push((tag.clone(), plan.clone(), records));
    }

    match study.kind {
        StudyKind::Type1 => {
            let (_, plan, records) = &all[0];
            let t = type1_table(plan, records);
            write_atomic(&a.out.join("type1.csv"), |w| {
                let mut wtr = csv::Writer::from_writer(w);
                wtr.write_record(["method", "series", "acceptance", "se", "valid", "failures"])?;
                for r in &t.rows {
                    wtr.write_record([
                        r.method.name().to_string(),
                        r.series.clone(),
                        r.acceptance.to_string(),
                        r.se.to_string(),
                        r.valid.to_string(),
                        r.failures.to_string(),
                    ])?;
                }
                wtr.flush()?;
                Ok(())
            })?;
            // one row per method, one column per series
            let mut series: Vec<String> = Vec::new();
            for r in &t.rows {
                if !series.contains(&r.series) {
                    series.push(r.series.clone());
                }
            }
            write_atomic(&a.out.join("type1_table.csv"), |w| {
                let mut wtr = csv::Writer::from_writer(w);
                let mut header = vec!["method".to_string()];
                header.extend(series.iter().cloned());
                wtr.write_record(&header)?;
                for m in &plan.methods {
                    let mut row = vec![m.name().to_string()];
                    for s in &series {
                        row.push(t.acceptance(*m, s).map_or(String::new(), |v| format!("{v:.4}")));
                    }
                    wtr.write_record(&row)?;
                }
                wtr.flush()?;
                Ok(())
            })?;
            write_atomic(&a.out.join("pp.csv"), |w| {
                let mut wtr = csv::Writer::from_writer(w);
                wtr.write_record(["method", "cov", "nominal", "empirical", "valid"])?;
                for p in &t.pp {
                    wtr.write_record([
                        p.method.name().to_string(),
                        p.cov.name().to_string(),
                        p.nominal.to_string(),
                        p.empirical.to_string(),
                        p.valid.to_string(),
                    ])?;
                }
                wtr.flush()?;
                Ok(())
            })?;
        }
        _ => {
            for (tag, plan, records) in &all {
                let name = if tag == "main" {
                    "curves.csv".to_string()
                } else {
                    format!("curves_{tag}.csv")
                };
                let c = curves(plan, records);
                write_atomic(&a.out.join(name), |w| Ok(write_curve_csv(&c, w)?))?;
                if study.kind == StudyKind::Precision {
                    let diag = precision_diagnostics(plan, records);
                    write_atomic(&a.out.join("precision.csv"), |w| {
                        let mut wtr = csv::Writer::from_writer(w);
                        let mut header: Vec<String> = [
                            "method",
                            "grid_value",
                            "replicates",
                            "mean_atom_share",
                            "max_atom_share",
                        ]
                        .map(String::from)
                        .to_vec();
                        header.extend(plan.cov_methods.iter().map(|c| format!("je_unavailable_{}", c.name())));
                        wtr.write_record(&header)?;
                        for d in &diag {
                            let mut row = vec![
                                d.method.name().to_string(),
                                d.grid_value.to_string(),
                                d.replicates.to_string(),
                                d.mean_atom_share.to_string(),
                                d.max_atom_share.to_string(),
                            ];
                            row.extend(d.cov_failures.iter().map(|c| c.to_string()));
                            wtr.write_record(&row)?;
                        }
                        wtr.flush()?;
                        Ok(())
                    })?;
                }
            }
        }
    }
    eprintln!("results in {}", a.out.display());
    Ok(exit::OK)
}

pub struct FitPowerArgs {
    pub input: PathBuf,
    pub side: Side,
    pub target: f64,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub method: String,
    pub series: String,
    pub points: usize,
    pub p80_lci: Option<f64>,
    pub p80_est: Option<f64>,
    pub p80_uci: Option<f64>,
    pub ti_lci: Option<f64>,
    pub ti_est: Option<f64>,
    pub ti_uci: Option<f64>,
    pub amplitude: Option<f64>,
    pub shape: Option<f64>,
    pub scale: Option<f64>,
    pub location: Option<f64>,
    pub residual_runs_ok: Option<bool>,
    pub error: Option<String>,
}

struct Curve {
    method: String,
    series: String,
    null: f64,
    x: Vec<f64>,
    acceptance: Vec<f64>,
}

fn read_curves(path: &Path) -> CliResult<Vec<Curve>> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("input file {} does not exist", path.display())));
    }
    let bad = |m: String| CliError::Usage(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column {name:?}")))
    };
    let (cm, cs, cp, cg, cr, cv) = (
        col("method")?,
        col("series")?,
        col("grid_param")?,
        col("grid_value")?,
        col("rate")?,
        col("valid")?,
    );
    let mut out: Vec<Curve> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize| -> CliResult<f64> {
            field(c)
                .parse::<f64>()
                .map_err(|_| bad(format!("row {}: {:?} is not a number", i + 2, field(c))))
        };
        let (method, series) = (field(cm).to_string(), field(cs).to_string());
        let null = match field(cp) {
            "intercept" => 0.0,
            _ => 1.0,
        };
        let (g, rate, valid) = (num(cg)?, num(cr)?, num(cv)?);
        let k = match out.iter().position(|c| c.method == method && c.series == series) {
            Some(k) => k,
            None => {
                out.push(Curve {
                    method,
                    series,
                    null,
                    x: Vec::new(),
                    acceptance: Vec::new(),
                });
                out.len() - 1
            }
        };
        if valid > 0.0 && rate.is_finite() {
            out[k].x.push(g);
            out[k].acceptance.push(1.0 - rate);
        }
    }
    if out.is_empty() {
        return Err(bad("no curve rows".into()));
    }
    for c in &out {
        if c.x.len() < MIN_POINTS {
            return Err(bad(format!(
                "curve {} {} has {} usable grid points; the power fit needs at least {MIN_POINTS}",
                c.method,
                c.series,
                c.x.len()
            )));
        }
    }
    Ok(out)
}

pub fn fit_curves(path: &Path, side: Side, target: f64) -> CliResult<Vec<FitRow>> {
    if !(target > 0.0 && target < 1.0) {
        return Err(CliError::Usage(format!("--power {target} outside (0, 1)")));
    }
    let curves = read_curves(path)?;
    let mut rows = Vec::new();
    for c in curves {
        let mut row = FitRow {
            method: c.method.clone(),
            series: c.series.clone(),
            points: c.x.len(),
            p80_lci: None,
            p80_est: None,
            p80_uci: None,
            ti_lci: None,
            ti_est: None,
            ti_uci: None,
            amplitude: None,
            shape: None,
            scale: None,
            location: None,
            residual_runs_ok: None,
            error: None,
        };
        match power_row_at(&c.x, &c.acceptance, c.null, side, 1.0 - target) {
            Ok((p, r)) => {
                let resid: Vec<f64> =
                    c.x.iter()
                        .zip(&c.acceptance)
                        .map(|(&x, &y)| y - subbotin_density(x, &p))
                        .collect();
                row.p80_lci = Some(r.p80.lci);
                row.p80_est = Some(r.p80.estimate);
                row.p80_uci = Some(r.p80.uci);
                row.ti_lci = Some(r.type1.lci);
                row.ti_est = Some(r.type1.estimate);
                row.ti_uci = Some(r.type1.uci);
                row.amplitude = Some(p.amplitude);
                row.shape = Some(p.shape);
                row.scale = Some(p.scale);
                row.location = Some(p.location);
                row.residual_runs_ok = Some(runs_test(&resid).pass);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Fits every curve of a curve CSV and prints the power table.
pub fn cmd_fit_power(a: &FitPowerArgs) -> CliResult<i32> {
    let rows = fit_curves(&a.input, a.side, a.target)?;
    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.5}"));
    println!(
        "{:<7} {:<14} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "method", "series", "p80 LCI", "p80 est", "p80 UCI", "T-I LCI", "T-I est", "T-I UCI"
    );
    for r in &rows {
        println!(
            "{:<7} {:<14} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}{}",
            r.method,
            r.series,
            f(r.p80_lci),
            f(r.p80_est),
            f(r.p80_uci),
            f(r.ti_lci),
            f(r.ti_est),
            f(r.ti_uci),
            r.error.as_ref().map_or(String::new(), |e| format!("  ({e})"))
        );
    }
    if let Some(out) = &a.out {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        write_atomic(out, |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record([
                "method",
                "series",
                "points",
                "p80_lci",
                "p80_est",
                "p80_uci",
                "ti_lci",
                "ti_est",
                "ti_uci",
                "amplitude",
                "shape",
                "scale",
                "location",
                "residual_runs_ok",
                "error",
            ])?;
            for r in &rows {
                wtr.write_record([
                    r.method.clone(),
                    r.series.clone(),
                    r.points.to_string(),
                    opt(r.p80_lci),
                    opt(r.p80_est),
                    opt(r.p80_uci),
                    opt(r.ti_lci),
                    opt(r.ti_est),
                    opt(r.ti_uci),
                    opt(r.amplitude),
                    opt(r.shape),
                    opt(r.scale),
                    opt(r.location),
                    r.residual_runs_ok.map_or(String::new(), |b| b.to_string()),
                    r.error.clone().unwrap_or_default(),
                ])?;
            }
            wtr.flush()?;
            Ok(())
        })?;
    }
    Ok(exit::OK)
}
