use std::fs;
use std::path::Path;
use std::process::Command;

use mcjoint::dataset::{generate, write_csv, GeneratorSpec};
use mcjoint::powerfit::{invert_for_power, subbotin_density, Side, SubbotinParams};
use serde_json::Value;

fn mcjoint(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mcjoint"))
        .args(args)
        .env("MCJOINT_THREADS", "2")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn hemoglobin_paba_is_rejected_by_the_joint_test() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = mcjoint(&[
        "validate",
        "--builtin",
        "hemoglobin",
        "--method",
        "paba",
        "--cov",
        "mcd",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code, 3, "{stdout}");
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict_ci"], "validated");
    assert_eq!(report["verdict_je"], "rejected");
    assert!(dir.path().join("plot.svg").is_file());
    let ensemble = fs::read_to_string(dir.path().join("ensemble.csv")).unwrap();
    assert_eq!(ensemble.lines().count(), 2001);
}

#[test]
fn identity_data_validate() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = GeneratorSpec::short_range(40);
    spec.seed = 3;
    let sample = generate(&spec).unwrap();
    let csv = dir.path().join("pairs.csv");
    write_csv(&sample, ["ref", "test"], fs::File::create(&csv).unwrap()).unwrap();
    let out = dir.path().join("out");
    let (code, stdout, stderr) = mcjoint(&[
        "validate",
        "--input",
        s(&csv),
        "--method",
        "dem",
        "--b",
        "999",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0, "{stdout}{stderr}");
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = mcjoint(&[
        "validate",
        "--input",
        s(&dir.path().join("absent.csv")),
        "--method",
        "dem",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code, 2);
    assert!(stderr.contains("absent.csv"), "{stderr}");
}

#[test]
fn empty_grid_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.cfg");
    fs::write(&plan, "[study]\nkind = power\n\n[simulation]\ngrid =\n").unwrap();
    let (code, _, stderr) = mcjoint(&["simulate", "--plan", s(&plan), "--out", s(&dir.path().join("sim"))]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("grid"), "{stderr}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(mcjoint(&["validate", "--frobnicate"]).0, 2);
}

fn curve_csv(path: &Path, rows: &[(f64, f64)]) {
    let mut text = String::from("method,series,grid_param,grid_value,valid,rate\n");
    for (g, acc) in rows {
        text += &format!("dem,tot.CI5%,slope,{g},200,{}\n", 1.0 - acc);
    }
    fs::write(path, text).unwrap();
}

#[test]
fn three_point_curve_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curves.csv");
    curve_csv(&csv, &[(0.95, 0.3), (1.0, 0.95), (1.05, 0.3)]);
    let (code, _, stderr) = mcjoint(&["fit-power", "--input", s(&csv)]);
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn fit_power_recovers_a_synthetic_curve() {
    let dir = tempfile::tempdir().unwrap();
    let truth = SubbotinParams::new(0.06, 2.6, 0.04, 1.01);
    let rows: Vec<(f64, f64)> = (0..17)
        .map(|k| {
            let g = 0.88 + 0.015 * k as f64;
            (g, subbotin_density(g, &truth))
        })
        .collect();
    let csv = dir.path().join("curves.csv");
    curve_csv(&csv, &rows);
    let out = dir.path().join("fits.csv");
    let (code, stdout, stderr) = mcjoint(&["fit-power", "--input", s(&csv), "--out", s(&out)]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let h = rdr.headers().unwrap().clone();
    let rec = rdr.records().next().unwrap().unwrap();
    let get = |name: &str| rec[h.iter().position(|c| c == name).unwrap()].parse::<f64>().unwrap();
    let want = invert_for_power(&truth, 0.2, Side::Above).unwrap().estimate;
    assert!((get("p80_est") - want).abs() < 1e-6, "{} vs {want}", get("p80_est"));
    assert!((get("shape") - 2.6).abs() < 1e-6 && (get("location") - 1.01).abs() < 1e-8);
}

const SMALL_PLAN: &str = "\
# tiny power study
[study]
kind = power

[generator]
range = short
n = 20

[simulation]
methods = dem, paba
cov = classic, mcd
grid = 0.96, 1.0, 1.04
replicates = 50
b = 199
seed = 11
";

fn outputs(dir: &Path) -> (String, String) {
    (
        fs::read_to_string(dir.join("curves.csv")).unwrap(),
        fs::read_to_string(dir.join("manifest.json")).unwrap(),
    )
}

#[test]
fn interrupted_simulation_resumes_to_the_same_result() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.cfg");
    fs::write(&plan, SMALL_PLAN).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let (code, _, stderr) = mcjoint(&["simulate", "--plan", s(&plan), "--out", s(out)]);
        assert_eq!(code, 0, "{stderr}");
    }
    assert_eq!(outputs(&a), outputs(&b));

    // drop the last grid point as if the run had stopped before it
    fs::remove_file(b.join("points/main-002.json")).unwrap();
    fs::remove_file(b.join("curves.csv")).unwrap();
    let manifest = b.join("manifest.json");
    let mut m: Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    m["completed"]["main"] = serde_json::json!([0, 1]);
    fs::write(&manifest, serde_json::to_string(&m).unwrap()).unwrap();
    let (code, _, stderr) = mcjoint(&["simulate", "--plan", s(&plan), "--out", s(&b)]);
    assert_eq!(code, 0);
    assert!(
        stderr.contains("grid point 3/3 done") && !stderr.contains("grid point 1/3 done"),
        "{stderr}"
    );
    assert_eq!(outputs(&a), outputs(&b));

    // a different plan must not reuse the directory
    fs::write(&plan, SMALL_PLAN.replace("0.96, 1.0, 1.04", "0.9, 1.0, 1.1")).unwrap();
    assert_eq!(mcjoint(&["simulate", "--plan", s(&plan), "--out", s(&b)]).0, 1);
}

fn attr(svg: &str, id: &str, name: &str) -> f64 {
    let tag = &svg[svg.find(&format!("id=\"{id}\"")).unwrap()..];
    let tag = &tag[..tag.find('>').unwrap()];
    let key = format!("{name}=\"");
    let start = tag.find(&key).unwrap() + key.len();
    tag[start..start + tag[start..].find('"').unwrap()].parse().unwrap()
}

#[test]
fn plot_is_deterministic_and_matches_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        mcjoint(&[
            "validate",
            "--builtin",
            "hemoglobin",
            "--method",
            "mdem",
            "--b",
            "500",
            "--seed",
            "9",
            "--out",
            s(out),
        ]);
    }
    let svg = fs::read_to_string(a.join("plot.svg")).unwrap();
    assert_eq!(svg, fs::read_to_string(b.join("plot.svg")).unwrap());
    assert_eq!(
        fs::read(a.join("report.json")).unwrap(),
        fs::read(b.join("report.json")).unwrap()
    );

    let r: Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    let f = |v: &Value| v.as_f64().unwrap();
    let iv = &r["intervals"];
    assert_eq!(attr(&svg, "ci-box", "data-int-lo"), f(&iv["int_lo"]));
    assert_eq!(attr(&svg, "ci-box", "data-int-hi"), f(&iv["int_hi"]));
    assert_eq!(attr(&svg, "ci-box", "data-slope-lo"), f(&iv["slope_lo"]));
    assert_eq!(attr(&svg, "ci-box", "data-slope-hi"), f(&iv["slope_hi"]));
    for id in ["ellipse05", "ellipse01"] {
        let e = &r[id];
        assert_eq!(attr(&svg, id, "data-center-x"), f(&e["center"][0]));
        assert_eq!(attr(&svg, id, "data-center-y"), f(&e["center"][1]));
        assert_eq!(attr(&svg, id, "data-semi-major"), f(&e["semi_axes"][0]));
        assert_eq!(attr(&svg, id, "data-semi-minor"), f(&e["semi_axes"][1]));
        assert_eq!(attr(&svg, id, "data-rotation"), f(&e["rotation"]));
        assert_eq!(attr(&svg, id, "data-level"), f(&e["level"]));
    }
}

#[test]
fn bundled_plans_parse() {
    use mcjoint_cli::config::{parse_plan, Scale};
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("plans");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        for scale in [Scale::Desk, Scale::Paper] {
            if let Err(p) = parse_plan(&text, scale) {
                panic!("{}: {p:?}", path.display());
            }
        }
        seen += 1;
    }
    assert!(seen >= 4);
}
