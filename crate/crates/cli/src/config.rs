//! Simulation plans as flat `key = value` files with `[section]` headers.
//!
//! ```text
//! [study]
//! kind = power            # type1 | power | precision | heteroscedastic
//!
//! [generator]
//! range = short           # short | long: sets xmin, xmax and sigma
//! n = 40
//! error_model = additive
//! precision_x = 2         # optional, 2..4 significant digits
//!
//! [simulation]
//! methods = dem, mdem, paba
//! cov = mcd
//! grid_param = slope
//! grid = 0.9, 0.95, 1, 1.05, 1.1   # omitted: 13-point default grid
//! replicates = 200
//! b = 999
//! je_alpha = 0.05, 0.01
//! ci_alpha = 0.05
//! ci = bca
//! seed = 1
//! ```
//!
//! `#` and `;` start comments. Unknown sections or keys are errors.

use std::collections::BTreeMap;
use std::str::FromStr;

use mcjoint::dataset::{ErrorModel, GeneratorSpec};
use mcjoint::estimators::{DemingConfig, Method};
use mcjoint::resampling::IntervalKind;
use mcjoint::simulation::{default_grid, GridParam, SimulationPlan};
use serde::{Deserialize, Serialize};

/// Replicate counts at desk scale.
pub const DESK_TYPE1_REPLICATES: usize = 1000;
pub const DESK_POWER_REPLICATES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Type1,
    Power,
    Precision,
    Heteroscedastic,
}

impl FromStr for StudyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "type1" => Ok(Self::Type1),
            "power" => Ok(Self::Power),
            "precision" => Ok(Self::Precision),
            "heteroscedastic" => Ok(Self::Heteroscedastic),
            _ => Err("expected type1, power, precision or heteroscedastic".into()),
        }
    }
}

/// Replicate multiplier relative to desk scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    /// Paper scale runs 10'000 type-I replicates and 400 per power grid point.
    pub fn factor(self, kind: StudyKind) -> usize {
        match (self, kind) {
            (Scale::Desk, _) => 1,
            (Scale::Paper, StudyKind::Type1) => 10,
            (Scale::Paper, _) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub kind: StudyKind,
    pub plan: SimulationPlan,
    /// Error models compared by a heteroscedastic study.
    pub error_models: Vec<ErrorModel>,
}

impl StudyPlan {
    /// Sub-plans run by the study, tagged for file names.
    pub fn parts(&self) -> Vec<(String, SimulationPlan)> {
        if self.kind != StudyKind::Heteroscedastic {
            return vec![("main".into(), self.plan.clone())];
        }
        self.error_models
            .iter()
            .map(|&m| {
                let mut p = self.plan.clone();
                p.generator.error_model = m;
                (m.to_string(), p)
            })
            .collect()
    }
}

#[derive(Debug, Default)]
struct Entries {
    /// section -> key -> (value, line)
    map: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("study", &["kind"]),
    (
        "generator",
        &[
            "range",
            "n",
            "xmin",
            "xmax",
            "sigma",
            "sigmax",
            "sigmay",
            "error_model",
            "precision_x",
            "precision_y",
            "detmin",
        ],
    ),
    (
        "simulation",
        &[
            "methods",
            "cov",
            "grid_param",
            "grid",
            "replicates",
            "b",
            "je_alpha",
            "ci_alpha",
            "ci",
            "seed",
            "error_models",
        ],
    ),
    (
        "deming",
        &["lambda", "max_iter", "mm_max_iter", "tol", "huber_k", "bisquare_c"],
    ),
];

fn parse_entries(text: &str, problems: &mut Vec<String>) -> Entries {
    let mut e = Entries::default();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_ascii_lowercase();
            if !KNOWN.iter().any(|(s, _)| *s == section) {
                problems.push(format!("line {line_no}: unknown section [{section}]"));
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            problems.push(format!("line {line_no}: expected key = value"));
            continue;
        };
        let key = k.trim().to_ascii_lowercase();
        let known = KNOWN
            .iter()
            .find(|(s, _)| *s == section)
            .is_some_and(|(_, keys)| keys.contains(&key.as_str()));
        if !known {
            let where_ = if section.is_empty() {
                "top level".to_string()
            } else {
                format!("[{section}]")
            };
            problems.push(format!("line {line_no}: unknown key {key:?} in {where_}"));
            continue;
        }
        let slot = e.map.entry(section.clone()).or_default();
        if slot.insert(key.clone(), (v.trim().to_string(), line_no)).is_some() {
            problems.push(format!("line {line_no}: duplicate key {key:?}"));
        }
    }
    e
}

struct Reader<'a> {
    e: &'a Entries,
    problems: &'a mut Vec<String>,
}

impl Reader<'_> {
    fn raw(&self, section: &str, key: &str) -> Option<&(String, usize)> {
        self.e.map.get(section).and_then(|m| m.get(key))
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str) -> Option<T>
    where
        T::Err: std::fmt::Display,
    {
        let (v, line) = self.raw(section, key)?.clone();
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(err) => {
                self.problems
                    .push(format!("line {line}: {section}.{key} = {v:?}: {err}"));
                None
            }
        }
    }

    fn list<T: FromStr>(&mut self, section: &str, key: &str) -> Option<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let (v, line) = self.raw(section, key)?.clone();
        let mut out = Vec::new();
        for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse::<T>() {
                Ok(x) => out.push(x),
                Err(err) => {
                    self.problems
                        .push(format!("line {line}: {section}.{key} item {item:?}: {err}"));
                    return None;
                }
            }
        }
        Some(out)
    }
}

/// Parses a plan; every problem found is listed in the error.
pub fn parse_plan(text: &str, scale: Scale) -> Result<StudyPlan, Vec<String>> {
    let mut problems = Vec::new();
    let entries = parse_entries(text, &mut problems);
    let mut r = Reader {
        e: &entries,
        problems: &mut problems,
    };

    let kind = match r.get::<StudyKind>("study", "kind") {
        Some(k) => k,
        None => {
            if r.raw("study", "kind").is_none() {
                r.problems.push("missing key study.kind".into());
            }
            StudyKind::Power
        }
    };

    let n = r.get::<usize>("generator", "n").unwrap_or(40);
    let range: String = r.get("generator", "range").unwrap_or_else(|| "short".into());
    let mut generator = match range.as_str() {
        "short" => GeneratorSpec::short_range(n),
        "long" => GeneratorSpec::long_range(n),
        other => {
            r.problems
                .push(format!("generator.range = {other:?}: expected short or long"));
            GeneratorSpec::short_range(n)
        }
    };
    if let Some(v) = r.get("generator", "xmin") {
        generator.xmin = v;
    }
    if let Some(v) = r.get("generator", "xmax") {
        generator.xmax = v;
    }
    if let Some(v) = r.get::<f64>("generator", "sigma") {
        generator.sigmax = v;
        generator.sigmay = v;
    }
    if let Some(v) = r.get("generator", "sigmax") {
        generator.sigmax = v;
    }
    if let Some(v) = r.get("generator", "sigmay") {
        generator.sigmay = v;
    }
    if let Some(v) = r.get("generator", "error_model") {
        generator.error_model = v;
    }
    generator.precision_x = r.get("generator", "precision_x");
    generator.precision_y = r.get("generator", "precision_y");
    if let Some(v) = r.get("generator", "detmin") {
        generator.detmin = v;
    }

    let methods = r
        .list::<Method>("simulation", "methods")
        .unwrap_or_else(|| vec![Method::Dem, Method::MDem, Method::PaBa]);
    let grid_param = match r.get::<String>("simulation", "grid_param").as_deref() {
        None | Some("slope") => GridParam::Slope,
        Some("intercept") => GridParam::Intercept,
        Some(other) => {
            r.problems.push(format!(
                "simulation.grid_param = {other:?}: expected slope or intercept"
            ));
            GridParam::Slope
        }
    };
    let grid = match (kind, r.list::<f64>("simulation", "grid")) {
        (_, Some(g)) => g,
        (StudyKind::Type1, None) => vec![grid_param.null_value()],
        (_, None) => default_grid(grid_param, &generator),
    };
    let mut plan = SimulationPlan::new(generator, methods, grid_param, grid);
    if let Some(v) = r.list("simulation", "cov") {
        plan.cov_methods = v;
    }
    let base = r.get::<usize>("simulation", "replicates").unwrap_or(match kind {
        StudyKind::Type1 => DESK_TYPE1_REPLICATES,
        _ => DESK_POWER_REPLICATES,
    });
    plan.replicates_per_point = base * scale.factor(kind);
    if let Some(v) = r.get("simulation", "b") {
        plan.b = v;
    }
    if let Some(v) = r.list("simulation", "je_alpha") {
        plan.alphas = v;
    }
    if let Some(v) = r.get("simulation", "ci_alpha") {
        plan.ci_alpha = v;
    }
    if let Some(v) = r.list::<IntervalKind>("simulation", "ci") {
        plan.ci_kinds = v;
    }
    if let Some(v) = r.get("simulation", "seed") {
        plan.master_seed = v;
    }
    let error_models = r
        .list::<ErrorModel>("simulation", "error_models")
        .unwrap_or_else(|| vec![ErrorModel::Additive, ErrorModel::Mixed, ErrorModel::Multiplicative]);

    let mut deming = DemingConfig::default();
    if let Some(v) = r.get("deming", "lambda") {
        deming.lambda = v;
    }
    if let Some(v) = r.get("deming", "max_iter") {
        deming.max_iter = v;
    }
    if let Some(v) = r.get("deming", "mm_max_iter") {
        deming.mm_max_iter = v;
    }
    if let Some(v) = r.get("deming", "tol") {
        deming.tol = v;
    }
    if let Some(v) = r.get("deming", "huber_k") {
        deming.huber_k = v;
    }
    if let Some(v) = r.get("deming", "bisquare_c") {
        deming.bisquare_c = v;
    }
    plan.deming = deming;

    if problems.is_empty() {
        if let Err(e) = plan.validate() {
            problems.push(e.to_string());
        }
        match kind {
            StudyKind::Type1 if plan.grid != [plan.grid_param.null_value()] => {
                problems.push("a type1 study needs grid = the null value only".into())
            }
            StudyKind::Precision if plan.generator.precision_x.is_none() && plan.generator.precision_y.is_none() => {
                problems.push("a precision study needs generator.precision_x or precision_y".into())
            }
            StudyKind::Heteroscedastic if error_models.is_empty() => {
                problems.push("simulation.error_models is empty".into())
            }
            _ => {}
        }
    }
    if problems.is_empty() {
        Ok(StudyPlan {
            kind,
            plan,
            error_models,
        })
    } else {
        Err(problems)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_power_plan() {
        let p = parse_plan("[study]\nkind = power\n[generator]\nn = 40\n", Scale::Desk).unwrap();
        assert_eq!(p.plan.grid.len(), 13);
        assert_eq!(p.plan.replicates_per_point, 200);
        let p = parse_plan("[study]\nkind = power\n", Scale::Paper).unwrap();
        assert_eq!(p.plan.replicates_per_point, 400);
    }

    #[test]
    fn problems_are_collected() {
        let err = parse_plan(
            "[study]\nkind = power\nfoo = 1\n[generator]\nn = x\n[bogus]\n",
            Scale::Desk,
        )
        .unwrap_err();
        assert_eq!(err.len(), 3, "{err:?}");
        assert!(err[0].contains("foo"));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let err = parse_plan("[study]\nkind = power\n[simulation]\ngrid =\n", Scale::Desk).unwrap_err();
        assert!(err.iter().any(|e| e.contains("grid is empty")), "{err:?}");
    }

    #[test]
    fn type1_defaults_to_the_null() {
        let p = parse_plan("[study]\nkind = type1\n", Scale::Desk).unwrap();
        assert_eq!(p.plan.grid, vec![1.0]);
        assert_eq!(p.plan.replicates_per_point, 1000);
    }
}
