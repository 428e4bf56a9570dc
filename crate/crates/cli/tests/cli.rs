use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_metalens");

fn metalens(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .arg("--quiet")
        .args(args)
        .output()
        .expect("spawn metalens")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = metalens(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

const SMALL_LENS: &str = r#"
[focus.prescription]
focal_length_m = 3.8604e-5
diameter_m = 4.0e-5
lambda1_m = 8.52e-7
lambda2_m = 7.8e-7
pitch_m = 4.0e-7
"#;

#[test]
fn design_records_na_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["design", "--out", "a"]);
    ok(tmp.path(), &["design", "--out", "b"]);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for file in ["layout.csv", "layout.meta.json", "efficiency.csv", "design.config.toml"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let (ja, jb) = (json(a.join("design.json")), json(b.join("design.json")));
    assert_eq!(ja["payload"], jb["payload"]);
    assert_eq!(ja["config_hash"], jb["config_hash"]);
    assert_eq!(ja["schema"], "metalens.design/v1");
    let s = &ja["payload"]["summary"];
    assert!((f(&s["numerical_aperture"]) - 0.46).abs() < 1e-9);
    assert_eq!(s["class1_count"].as_u64().unwrap() + s["class2_count"].as_u64().unwrap(), s["site_count"].as_u64().unwrap());
    assert!(f(&ja["payload"]["selectivity_lambda1"]) > 3.0);
}

#[test]
fn toy_prescription_gives_four_rows() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("toy.toml"),
        "[design.prescription]\nfocal_length_m = 1e-5\ndiameter_m = 6.4e-7\nlambda1_m = 8.52e-7\nlambda2_m = 7.8e-7\npitch_m = 4e-7\nlattice_origin = \"cell\"\n",
    )
    .unwrap();
    ok(tmp.path(), &["--config", "toy.toml", "design"]);
    let csv = fs::read_to_string(tmp.path().join("layout.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
    assert!(csv.starts_with("x_m,y_m,class,theta_rad,len_m,wid_m\n"));
}

#[test]
fn trap_defaults_and_zero_power() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["trap"]);
    let p = &json(tmp.path().join("trap.json"))["payload"];
    let depth = f(&p["trap"]["depth_mk"]);
    assert!((0.7..=1.0).contains(&depth), "{depth}");
    assert!((f(&p["count_ratio"]) - 0.242).abs() < 0.005);
    assert!((f(&p["gaussian_reference_zr_m"]) - 6.52e-6).abs() < 0.01e-6);

    fs::write(
        tmp.path().join("zero.toml"),
        "[trap.inputs]\npower_w = 0.0\nwavelength_m = 8.52e-7\nwaist_m = 1.33e-6\nrayleigh_length_m = 1.168e-5\nzeta = 0.33\n",
    )
    .unwrap();
    ok(tmp.path(), &["--config", "zero.toml", "trap", "--out", "z"]);
    assert_eq!(f(&json(tmp.path().join("z/trap.json"))["payload"]["trap"]["depth_mk"]), 0.0);
}

#[test]
fn resonant_trap_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("res.toml"),
        "[trap.inputs]\npower_w = 0.0159\nwavelength_m = 7.80241209e-7\nwaist_m = 1.33e-6\nrayleigh_length_m = 1.168e-5\nzeta = 0.33\n",
    )
    .unwrap();
    assert_eq!(metalens(tmp.path(), &["--config", "res.toml", "trap"]).status.code(), Some(3));
}

#[test]
fn mc_is_seeded_and_reproducible_from_its_config_echo() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["mc", "--seed", "11", "--out", "a"]);
    ok(d, &["mc", "--seed", "11", "--out", "b"]);
    ok(d, &["mc", "--seed", "12", "--out", "c"]);
    ok(d, &["--config", "a/mc.config.toml", "mc", "--out", "e"]);
    let trace = |dir: &str| fs::read(d.join(dir).join("trace_000.csv")).unwrap();
    assert_eq!(trace("a"), trace("b"));
    assert_eq!(trace("a"), trace("e"));
    assert_ne!(trace("a"), trace("c"));

    let (a, e) = (json(d.join("a/mc.json")), json(d.join("e/mc.json")));
    assert_eq!(a["payload"], e["payload"]);
    assert_eq!(a["config_hash"], e["config_hash"]);
    assert_eq!(a["seed"], 11);
    let t = &a["payload"]["traces"][0];
    assert!((f(&t["analysis"]["histogram"]["atom_mean"]) - 16.3).abs() < 0.4);
    assert!(f(&t["classification_accuracy"]) > 0.99);
    assert_eq!(t["analysis"]["source"], "simulated");
}

#[test]
fn mc_bias_sweep_trend_increases() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("s.toml"), "[mc]\ncycles = 200\nwrite_traces = false\n[mc.sweep]\n").unwrap();
    ok(tmp.path(), &["--config", "s.toml", "mc"]);
    let sweep = &json(tmp.path().join("mc.json"))["payload"]["sweep"];
    let b: Vec<f64> = sweep["powers"].as_array().unwrap().iter().map(|p| f(&p["b_opt_fit_t"])).collect();
    assert_eq!(b.len(), 3);
    assert!(b[0] < b[1] && b[1] < b[2], "{b:?}");
    assert!(f(&sweep["trend"]["slope"]) > 0.0);
    let table = fs::read_to_string(tmp.path().join("tau_bz.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 3 * 21);
}

#[test]
fn ingest_round_trip_matches_simulated_analysis() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["mc", "--out", "m"]);
    ok(d, &["ingest", "--schema", "trace", "m/trace_000.csv", "--out", "i"]);
    let mut sim = json(d.join("m/mc.json"))["payload"]["traces"][0]["analysis"].clone();
    let mut ing = json(d.join("i/ingest.json"))["payload"]["analysis"].clone();
    assert_eq!(ing["source"], "ingested");
    sim.as_object_mut().unwrap().remove("source");
    ing.as_object_mut().unwrap().remove("source");
    assert_eq!(sim, ing);
}

#[test]
fn ingest_rejects_negative_count_with_line_number() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["mc", "--out", "m"]);
    let csv = fs::read_to_string(d.join("m/trace_000.csv")).unwrap();
    let bad: Vec<String> = csv
        .lines()
        .enumerate()
        .map(|(k, l)| if k == 4 { format!("{},-3", l.rsplit_once(',').unwrap().0) } else { l.to_string() })
        .collect();
    fs::write(d.join("bad.csv"), bad.join("\n")).unwrap();
    fs::copy(d.join("m/trace_000.meta.json"), d.join("bad.meta.json")).unwrap();
    let out = metalens(d, &["ingest", "--schema", "trace", "bad.csv"]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5") && err.contains("negative"), "{err}");
}

#[test]
fn ingest_design_outputs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["design"]);
    ok(d, &["ingest", "--schema", "layout", "layout.csv", "--out", "l"]);
    ok(d, &["ingest", "--schema", "efficiency", "efficiency.csv", "--out", "e"]);
    let design = json(d.join("design.json"));
    assert_eq!(json(d.join("l/ingest.json"))["payload"]["summary"], design["payload"]["summary"]);
    let peak = f(&json(d.join("e/ingest.json"))["payload"]["class2_peak_m"]);
    assert!((peak - 720e-9).abs() < 5e-9);
}

#[test]
fn fit_recovers_exponential() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let mut csv = String::from("t_s,counts\n");
    for k in 0..40 {
        let t = k as f64 * 0.05;
        csv.push_str(&format!("{t},{}\n", 2.0 + 10.0 * (-t / 0.4).exp()));
    }
    fs::write(d.join("decay.csv"), csv).unwrap();
    fs::write(d.join("fit.toml"), "[fit]\nmodel = \"exponential\"\ndata = \"decay.csv\"\ncolumns = [\"t_s\", \"counts\"]\n").unwrap();
    ok(d, &["--config", "fit.toml", "fit"]);
    let p = &json(d.join("fit.json"))["payload"];
    let names: Vec<&str> = p["result"]["names"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let tau = f(&p["result"]["values"][names.iter().position(|n| *n == "tau").unwrap()]);
    assert!((tau - 0.4).abs() < 1e-8, "{tau}");
    assert_eq!(p["result"]["converged"], true);
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("typo.toml"), "[mc]\ncycle = 10\n").unwrap();
    assert_eq!(metalens(d, &["--config", "typo.toml", "mc"]).status.code(), Some(3));
    fs::write(d.join("missing.toml"), "[fit]\ndata = \"nope.csv\"\n").unwrap();
    assert_eq!(metalens(d, &["--config", "missing.toml", "fit"]).status.code(), Some(4));
    assert_eq!(metalens(d, &["--config", "absent.toml", "trap"]).status.code(), Some(3));
    assert_eq!(metalens(d, &["bogus"]).status.code(), Some(2));
    // focus forced outside the scanned range
    fs::write(d.join("far.toml"), format!("[focus]\nscan_center_m = 6e-5\nscan_half_width_m = 2e-6\nplanes = 9\nwavelengths_m = [8.52e-7]\n{SMALL_LENS}")).unwrap();
    assert_eq!(metalens(d, &["--config", "far.toml", "focus"]).status.code(), Some(5));
}

#[test]
fn focus_gaussian_self_test_and_dual_wavelength() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("g.toml"), "[focus]\nsource = \"gaussian-self-test\"\n").unwrap();
    ok(d, &["--config", "g.toml", "focus", "--out", "g"]);
    let st = &json(d.join("g/focus.json"))["payload"]["self_test"];
    assert_eq!(st["pass"], true);
    assert!(f(&st["relative_error"]) < 0.02);

    fs::write(d.join("lens.toml"), format!("[focus]\nplanes = 25\n{SMALL_LENS}")).unwrap();
    ok(d, &["--config", "lens.toml", "focus", "--out", "l"]);
    let bundle = json(d.join("l/focus.json"));
    let p = &bundle["payload"];
    assert_eq!(p["foci"].as_array().unwrap().len(), 2);
    for focus in p["foci"].as_array().unwrap() {
        let w0 = f(&focus["metrics"]["waist_m"]);
        let zero = f(&focus["airy_first_zero_m"]);
        // 1/e² radius of the Airy pattern is 0.674 of the first-zero radius
        assert!((w0 / zero - 0.674).abs() < 0.05, "{w0} {zero}");
        assert!(d.join("l").join(focus["axial_csv"].as_str().unwrap()).is_file());
        assert!(d.join("l").join(focus["radial_csv"].as_str().unwrap()).is_file());
    }
    assert!(f(&p["axial_offset_m"]).abs() < 0.2e-6);
    assert_eq!(bundle["provenance"]["grid_n"], 512);
}
