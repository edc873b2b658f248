//! Paired measurement samples: CSV ingestion and the synthetic generators
//! used by the Monte Carlo studies.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Detection limit of the simulated instruments.
pub const DEFAULT_DETMIN: f64 = 0.1;

/// Additive error SD for the short (3..8) range model.
pub const SHORT_RANGE_SIGMA: f64 = 0.2;
/// Additive error SD for the long (0..110) range model; keeps the
/// centre-of-range mean/SD ratio of the short model.
pub const LONG_RANGE_SIGMA: f64 = 2.0;

const HEMOGLOBIN_CSV: &str = include_str!("../data/hemoglobin.csv");

/// n paired measurements of the same specimens by two methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    /// Reference method.
    pub x: Vec<f64>,
    /// Test method.
    pub y: Vec<f64>,
    pub label: String,
}

impl PairedSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Invalid(format!(
                "x has {} values but y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "need at least 3 pairs, got {}",
                x.len()
            )));
        }
        if let Some(i) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite value at index {}", i % x.len())));
        }
        Ok(Self {
            x,
            y,
            label: label.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Resample by index, used by the bootstrap. No validation.
    pub fn select(&self, idx: &[usize]) -> PairedSample {
        PairedSample {
            x: idx.iter().map(|&i| self.x[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            label: self.label.clone(),
        }
    }

    /// The sample with one pair removed.
    pub fn without(&self, skip: usize) -> PairedSample {
        let keep = |v: &[f64]| {
            v.iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, &x)| x)
                .collect()
        };
        PairedSample {
            x: keep(&self.x),
            y: keep(&self.y),
            label: self.label.clone(),
        }
    }

    pub fn swapped(&self) -> PairedSample {
        PairedSample {
            x: self.y.clone(),
            y: self.x.clone(),
            label: self.label.clone(),
        }
    }
}

/// The 20 glycated hemoglobin pairs (x = D10, y = Cobas).
pub fn hemoglobin() -> PairedSample {
    from_reader(HEMOGLOBIN_CSV.as_bytes(), "hemoglobin").expect("bundled dataset parses")
}

/// Reads a two-column CSV with a header row. Column 1 is the reference
/// method (x), column 2 the test method (y).
pub fn read_csv(path: impl AsRef<Path>) -> Result<PairedSample> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Csv(format!("cannot open {}: {e}", path.display())))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    from_reader(file, label)
}

pub fn from_reader<R: Read>(reader: R, label: impl Into<String>) -> Result<PairedSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv(format!("cannot read header: {e}")))?
        .clone();
    if headers.len() < 2 {
        return Err(Error::Parse {
            row: 1,
            column: headers.len() + 1,
            message: "header must name two methods".into(),
        });
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // Header is line 1.
        let row = rec
            .as_ref()
            .ok()
            .and_then(|r| r.position())
            .map(|p| p.line() as usize)
            .unwrap_or(i + 2);
        let rec = rec.map_err(|e| Error::Csv(format!("row {row}: {e}")))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        for column in 0..2 {
            let cell = rec.get(column).ok_or_else(|| Error::Parse {
                row,
                column: column + 1,
                message: "missing column".into(),
            })?;
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: column + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: column + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            if column == 0 {
                x.push(v)
            } else {
                y.push(v)
            }
        }
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 pairs, got {}",
            x.len()
        )));
    }
    let label = format!("{} ({} vs {})", label.into(), &headers[0], &headers[1]);
    PairedSample::new(x, y, label)
}

/// Writes a sample in the same layout `read_csv` accepts.
pub fn write_csv<W: std::io::Write>(s: &PairedSample, names: [&str; 2], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Csv(e.to_string());
    wtr.write_record(names).map_err(io)?;
    for (x, y) in s.x.iter().zip(&s.y) {
        wtr.write_record([x.to_string(), y.to_string()]).map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorModel {
    /// Homoscedastic normal errors.
    Additive,
    /// Half scaled by level / mean level, half constant.
    Mixed,
    /// Errors scaled by level / mean level (pure heteroscedastic).
    Multiplicative,
}

impl ErrorModel {
    pub fn name(self) -> &'static str {
        match self {
            ErrorModel::Additive => "additive",
            ErrorModel::Mixed => "mixed",
            ErrorModel::Multiplicative => "multiplicative",
        }
    }
}

impl std::fmt::Display for ErrorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ErrorModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "additive" | "homoscedastic" => Ok(Self::Additive),
            "mixed" => Ok(Self::Mixed),
            "multiplicative" | "heteroscedastic" => Ok(Self::Multiplicative),
            other => Err(Error::Invalid(format!("unknown error model {other:?}"))),
        }
    }
}

/// Parameters of one synthetic sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
    pub sigmax: f64,
    pub sigmay: f64,
    pub error_model: ErrorModel,
    /// Significant digits, `None` for unlimited.
    pub precision_x: Option<u32>,
    pub precision_y: Option<u32>,
    pub detmin: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Values uniform on 3..8.
    pub fn short_range(n: usize) -> Self {
        Self {
            xmin: 3.0,
            xmax: 8.0,
            n,
            slope: 1.0,
            intercept: 0.0,
            sigmax: SHORT_RANGE_SIGMA,
            sigmay: SHORT_RANGE_SIGMA,
            error_model: ErrorModel::Additive,
            precision_x: None,
            precision_y: None,
            detmin: DEFAULT_DETMIN,
            seed: 0,
        }
    }

    /// Values uniform on 0..110, subject to the detection cutoff.
    pub fn long_range(n: usize) -> Self {
        Self {
            xmin: 0.0,
            xmax: 110.0,
            sigmax: LONG_RANGE_SIGMA,
            sigmay: LONG_RANGE_SIGMA,
            ..Self::short_range(n)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if !(self.xmin.is_finite() && self.xmax.is_finite()) || self.xmin > self.xmax {
            return bad(format!("range [{}, {}] is empty", self.xmin, self.xmax));
        }
        if self.n < 3 {
            return bad(format!("need at least 3 pairs, got n = {}", self.n));
        }
        if !(self.slope.is_finite() && self.intercept.is_finite()) {
            return bad("slope and intercept must be finite".into());
        }
        if !(self.sigmax >= 0.0 && self.sigmay >= 0.0) {
            return bad("error SDs must be non-negative".into());
        }
        if !(self.detmin > 0.0) {
            return bad("detection limit must be positive".into());
        }
        for p in [self.precision_x, self.precision_y].into_iter().flatten() {
            if !(2..=4).contains(&p) {
                return bad(format!("precision must be 2, 3, 4 digits or unlimited, got {p}"));
            }
        }
        Ok(())
    }
}

/// Draws one sample. Deterministic in `spec.seed`.
pub fn generate(spec: &GeneratorSpec) -> Result<PairedSample> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, &[]);
    let n = spec.n;
    let width = spec.xmax - spec.xmin;
    let xr: Vec<f64> = (0..n).map(|_| spec.xmin + width * rng.random::<f64>()).collect();
    let yr: Vec<f64> = xr.iter().map(|x| spec.slope * x + spec.intercept).collect();
    let mut normals = |sd: f64| -> Vec<f64> { (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect() };
    let rx = normals(spec.sigmax);
    let ry = normals(spec.sigmay);

    let errors = |level: &[f64], r: Vec<f64>| -> Vec<f64> {
        let m = crate::stats::mean(level);
        match spec.error_model {
            ErrorModel::Additive => r,
            ErrorModel::Mixed => level.iter().zip(r).map(|(l, e)| l / m * e / 2.0 + e / 2.0).collect(),
            ErrorModel::Multiplicative => level.iter().zip(r).map(|(l, e)| l / m * e).collect(),
        }
    };
    let ex = errors(&xr, rx);
    let ey = errors(&yr, ry);

    let observe = |truth: &[f64], err: &[f64], digits: Option<u32>| -> Vec<f64> {
        truth
            .iter()
            .zip(err)
            .map(|(t, e)| censor(t + e, spec.detmin, digits))
            .collect()
    };
    let x = observe(&xr, &ex, spec.precision_x);
    let y = observe(&yr, &ey, spec.precision_y);
    PairedSample::new(x, y, format!("generated seed={}", spec.seed))
}

/// Applies the instrument model: rounding to the reported precision, then
/// substitution of sub-detection values by `detmin / 2`.
pub fn censor(v: f64, detmin: f64, digits: Option<u32>) -> f64 {
    if v <= detmin {
        return detmin / 2.0;
    }
    let r = match digits {
        Some(d) => round_significant(v, d),
        None => v,
    };
    if r <= detmin {
        detmin / 2.0
    } else {
        r
    }
}

/// Rounds to `digits` significant digits, ties to even on the mantissa.
pub fn round_significant(v: f64, digits: u32) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let exp = v.abs().log10().floor() as i32;
    let shift = digits as i32 - 1 - exp;
    let scaled = scale10(v, shift);
    // log10 can be off by one right at powers of ten
    let (scaled, shift) = if scaled.abs() >= 10f64.powi(digits as i32) {
        (scale10(v, shift - 1), shift - 1)
    } else {
        (scaled, shift)
    };
    scale10(scaled.round_ties_even(), -shift)
}

fn scale10(v: f64, e: i32) -> f64 {
    if e >= 0 {
        v * 10f64.powi(e)
    } else {
        v / 10f64.powi(-e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hemoglobin_bundle() {
        let s = hemoglobin();
        assert_eq!(s.n(), 20);
        assert_eq!(s.x[0], 6.4);
        assert_eq!(s.y[0], 6.0);
        assert!(s.label.contains("D10"));
    }

    #[test]
    fn csv_errors_and_whitespace() {
        let one = "a,b\n1,2\n";
        let err = from_reader(one.as_bytes(), "t").unwrap_err();
        assert!(err.to_string().contains("need at least 3 pairs"), "{err}");

        let blank = "a,b\n1,2\n2,3\n3,4\n\n";
        assert_eq!(from_reader(blank.as_bytes(), "t").unwrap().n(), 3);

        let bad = "a,b\n1,2\n2,x\n3,4\n";
        match from_reader(bad.as_bytes(), "t").unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (3, 2)),
            e => panic!("unexpected {e}"),
        }

        let missing = "a,b\n1,2\n2\n3,4\n";
        match from_reader(missing.as_bytes(), "t").unwrap_err() {
            Error::Parse { row, column, message } => {
                assert_eq!((row, column), (3, 2));
                assert!(message.contains("missing"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn degenerate_range_zero_noise() {
        let spec = GeneratorSpec {
            xmin: 5.0,
            xmax: 5.0,
            n: 4,
            sigmax: 0.0,
            sigmay: 0.0,
            ..GeneratorSpec::short_range(4)
        };
        let s = generate(&spec).unwrap();
        assert!(s.x.iter().chain(&s.y).all(|&v| v == 5.0));
    }

    #[test]
    fn detection_cutoff() {
        assert_eq!(censor(0.04, 0.1, None), 0.05);
        assert_eq!(censor(0.1, 0.1, None), 0.05);
        assert_eq!(censor(-3.0, 0.1, Some(2)), 0.05);
        assert_eq!(censor(0.2, 0.1, None), 0.2);
        // rounds down onto the limit
        assert_eq!(censor(0.1004, 0.1, Some(2)), 0.05);
    }

    #[test]
    fn significant_digits() {
        assert_eq!(round_significant(5.6789, 2), 5.7);
        assert_eq!(round_significant(0.125, 2), 0.12);
        assert_eq!(round_significant(0.135, 2), 0.14);
        assert_eq!(round_significant(99.96, 3), 100.0);
        assert_eq!(round_significant(104.49, 2), 100.0);
        assert_eq!(round_significant(7.0, 4), 7.0);
    }

    #[test]
    fn invalid_specs() {
        let mut s = GeneratorSpec::short_range(40);
        s.xmin = 9.0;
        assert!(generate(&s).is_err());
        let mut s = GeneratorSpec::short_range(40);
        s.precision_x = Some(5);
        assert!(generate(&s).is_err());
        let mut s = GeneratorSpec::short_range(40);
        s.detmin = 0.0;
        assert!(generate(&s).is_err());
        assert!(generate(&GeneratorSpec::short_range(2)).is_err());
    }
}
