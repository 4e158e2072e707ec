use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn xrlayout(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xrlayout"))
        .args(args)
        .env_remove("XRLAYOUT_OUT")
        .output()
        .expect("binary runs")
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn version_is_machine_readable() {
    let o = xrlayout(&["--version"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "xrlayout 0.1.0 schema=1");
}

#[test]
fn validate_bundled_fixture() {
    let f = fixture("dynamic_mobile_env_ref.scn");
    let o = xrlayout(&["validate", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn validate_truncated_file() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("static_mobile_env_ref.scn")).unwrap();
    let path = dir.path().join("cut.scn");
    fs::write(&path, &text[..text.len() / 2]).unwrap();
    let o = xrlayout(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("syntax error"), "{out}");
    assert!(out.starts_with(&format!("{}:", path.display())));
}

#[test]
fn validate_missing_file() {
    let o = xrlayout(&["validate", "/definitely/not/here.scn"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_reports_locations_of_violations() {
    let f = fixture("invalid/stationary_near_trial.scn");
    let o = xrlayout(&["validate", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let text = fs::read_to_string(&f).unwrap();
    let line = text.lines().position(|l| l.contains("\"near\": true")).unwrap() + 1;
    let want = format!("{}:{line}:", f.display());
    assert!(
        out.lines()
            .any(|l| l.starts_with(&want) && l.contains("trials[1].near")),
        "{out}"
    );
}

#[test]
fn run_single_scenario_with_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = xrlayout(&[
        "run",
        "--scenario",
        "dynamic_mobile.scn",
        "--strategy",
        "env-ref",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_lines(&dir.path().join("trials.csv")), 6);
    assert_eq!(data_lines(&dir.path().join("summary.csv")), 1);
    assert!(dir.path().join("sessions/dynamic_mobile_env_ref_env-ref.csv").exists());
}

#[test]
fn run_reads_output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_xrlayout"))
        .args(["run", "--scenario", "static_stationary_body_fixed", "--format", "json"])
        .env("XRLAYOUT_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("trials.json")).unwrap();
    assert_eq!(text.matches("\"trial_index\"").count(), 3);
}

#[test]
fn run_rejects_invalid_scenario() {
    let f = fixture("invalid/mobile_five_trials.scn");
    let dir = tempfile::tempdir().unwrap();
    let o = xrlayout(&[
        "run",
        "--scenario",
        f.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_directions() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let run = |out: &Path, scenarios: &[&str]| {
        let mut args = vec!["run", "--out", out.to_str().unwrap()];
        for s in scenarios {
            args.extend(["--scenario", s]);
        }
        assert!(xrlayout(&args).status.success());
    };
    run(&a, &["dynamic_mobile_env_ref", "dynamic_stationary_env_ref"]);
    run(&b, &["dynamic_mobile_body_fixed", "dynamic_stationary_body_fixed"]);
    let (sa, sb) = (a.to_str().unwrap(), b.to_str().unwrap());

    let same = stdout(&xrlayout(&["compare", sa, sa]));
    assert!(same.lines().skip(1).all(|l| l.ends_with(",tie")), "{same}");

    let ab = stdout(&xrlayout(&["compare", sa, sb]));
    let ba = stdout(&xrlayout(&["compare", sb, sa]));
    for ctx in ["dynamic_mobile", "dynamic_stationary"] {
        let key = format!("{ctx},gaze_switches_mean,");
        let line = ab.lines().find(|l| l.starts_with(&key)).unwrap();
        assert!(line.ends_with(",A<B"), "{line}");
    }
    for (x, y) in ab.lines().skip(1).zip(ba.lines().skip(1)) {
        let flip = |d: &str| {
            match d {
                "A<B" => "A>B",
                "A>B" => "A<B",
                other => other,
            }
            .to_string()
        };
        let dx = x.rsplit(',').next().unwrap();
        let dy = y.rsplit(',').next().unwrap();
        assert_eq!(flip(dx), dy);
    }

    let c = dir.path().join("c");
    run(&c, &["static_mobile_env_ref"]);
    let o = xrlayout(&["compare", sa, c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
