use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(rel: &str) -> String {
    root().join("fixtures").join(rel).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parabolic"))
        .args(args)
        .env_remove("PARABOLIC_TABLE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn fit_sin_practical_writes_one_paraboloid() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.json");
    let out = dir.path().join("fit.json");
    let o = run(&[
        "fit", "--func", "sin", "--domain", "0", "pi", "--eps", "1", "--side", "below", "--method", "practical",
        "--out", out.to_str().unwrap(), "--table", table.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["k_star"], 1);
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(&table).unwrap()).unwrap();
    assert_eq!(t["entries"].as_array().unwrap().len(), 1);
    assert_eq!(t["entries"][0]["certified"], true);
    assert!(dir.path().join("fit.json.timing.json").is_file());
}

#[test]
fn table_path_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("env_table.json");
    let o = Command::new(env!("CARGO_BIN_EXE_parabolic"))
        .args(["fit", "--func", "exp", "--domain", "-5", "-2", "--eps", "1", "--side", "above"])
        .env("PARABOLIC_TABLE", &table)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(table.is_file());
}

#[test]
fn verify_printed_coefficients() {
    let o = run(&["verify", "--coeffs", &fixture("sin_below_e1.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("\"pass\": true"));
}

#[test]
fn verify_rejects_a_raised_paraboloid() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("sin_below_e1.json")).unwrap();
    let bad = dir.path().join("raised.json");
    fs::write(&bad, text.replace("-0.08222", "0.2")).unwrap();
    let o = run(&["verify", "--coeffs", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("\"pass\": false"));
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(run(&["fit", "--func", "sin", "--domain", "0", "1", "--eps", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["fit", "--func", "tan", "--domain", "0", "1", "--eps", "1"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--coeffs", "/nonexistent/x.json"]).status.code(), Some(2));
    assert_eq!(run(&["report", "--times", "/nonexistent/t.csv"]).status.code(), Some(2));
    assert_eq!(run(&["fit", "--bogus"]).status.code(), Some(2));
}

#[test]
fn size_cap_exits_four() {
    let o = run(&[
        "fit", "--func", "sin", "--domain", "-pi/2", "3pi/2", "--eps", "0.1", "--max-binaries", "2", "--no-greedy",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_fills_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.json");
    fs::write(&cfg, r#"{"func": "sin", "domain": [0, "pi"], "eps": 0.5, "side": "below"}"#).unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["fit", "--config", cfg.to_str().unwrap(), "--eps", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["epsilon"], 1.0);
    assert_eq!(r["func"], "sin");
}

#[test]
fn report_shifted_geometric_mean() {
    let dir = tempfile::tempdir().unwrap();
    let times = dir.path().join("a.csv");
    fs::write(&times, "instance,variant,time\nt1,para,10\nt2,para,1000\nt1,orig,5\nt2,orig,5\n").unwrap();
    let o = run(&["report", "--times", times.to_str().unwrap(), "--shift", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("para,2,132.13,"), "{text}");
    assert!(text.contains("orig,2,5.00,"), "{text}");
}

#[test]
fn census_of_fixture_corpus() {
    let dir = root().join("fixtures/instances");
    let mut files: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path().display().to_string())
        .collect();
    files.sort();
    let mut args = vec!["census", "--instance"];
    args.extend(files.iter().map(String::as_str));
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0));
    // hand tally: sin in four instances, exp in two, the square in exp_tangent excluded
    assert_eq!(stdout(&o), "func,count\nexp,2\nsin,4\n");
}

fn relax_into(out: &Path) -> Output {
    run(&[
        "relax", "--instance", &fixture("instances/sin_cap.json"), &fixture("instances/exp_tangent.json"),
        "--table", &fixture("tables/sin_exp_e01.json"), "--eps", "0.1", "--out-dir", out.to_str().unwrap(),
        "--oracle-grid", "200", "--lp",
    ])
}

#[test]
fn relax_writes_variants_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = relax_into(a.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(relax_into(b.path()).status.code(), Some(0));
    for name in [
        "sin_cap.orig.json", "sin_cap.para.json", "sin_cap.both.json", "sin_cap.plan.json", "sin_cap.para.lp",
        "exp_tangent.para.json", "gaps.csv",
    ] {
        let x = fs::read(a.path().join(name)).unwrap_or_else(|_| panic!("{name} missing"));
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name} differs between runs");
    }
    let gaps = fs::read_to_string(a.path().join("gaps.csv")).unwrap();
    assert!(gaps.starts_with("instance,variant,status,time,c_star,d,absgap,relgap\n"));
    assert_eq!(gaps.lines().count(), 7);
    let para = fs::read_to_string(a.path().join("sin_cap.para.json")).unwrap();
    assert!(!para.contains("\"sin\""));
}

#[test]
fn zigzag_generation_is_seeded() {
    let x = stdout(&run(&["zigzag-gen", "--seed", "7"]));
    assert_eq!(x, stdout(&run(&["zigzag-gen", "--seed", "7"])));
    assert_ne!(x, stdout(&run(&["zigzag-gen", "--seed", "8"])));
    let c: serde_json::Value = serde_json::from_str(&stdout(&run(&["zigzag-gen", "--canonical"]))).unwrap();
    assert_eq!(c["breakpoints"].as_array().unwrap().len(), 26);
}
