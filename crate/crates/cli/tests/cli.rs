use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use decoupling_core::caps::{cap_family, family_from_json, family_to_json, FamilyJson, FamilyKind};
use decoupling_core::harness::RatioRecord;
use quick_xml::events::Event;
use quick_xml::Reader;
use serde_json::Value;

fn decoup(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decoup"))
        .arg("--results-dir")
        .arg(root)
        .args(args)
        .env_remove("DECOUP_RESULTS_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// The single hash directory under `root`.
fn only_dir(root: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

fn assert_xml(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let mut reader = Reader::from_str(&text);
    let mut depth = 0i32;
    let mut elements = 0;
    loop {
        match reader.read_event() {
            Ok(Event::Start(_)) => {
                depth += 1;
                elements += 1;
            }
            Ok(Event::End(_)) => depth -= 1,
            Ok(Event::Empty(_)) => elements += 1,
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(e) => panic!("{}: {e}", path.display()),
        }
    }
    assert_eq!(depth, 0, "{} is unbalanced", path.display());
    assert!(elements > 2);
}

#[test]
fn caps_writes_216_caps_that_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let o = decoup(tmp.path(), &["caps", "--R", "256", "--m", "2", "--d", "3", "--kind", "f4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = only_dir(tmp.path());
    let text = fs::read_to_string(dir.join("caps.json")).unwrap();
    let json: FamilyJson = serde_json::from_str(&text).unwrap();
    assert_eq!(json.caps.len(), 216);
    let fam = family_from_json(&json).unwrap();
    assert_eq!(fam, cap_family(256, 2, 3, FamilyKind::F4).unwrap());
    assert_eq!(family_to_json(&fam), json);
    let csv_rows = fs::read_to_string(dir.join("caps.csv")).unwrap().lines().count();
    assert_eq!(csv_rows, 217);
    assert_xml(&dir.join("caps.svg"));
    let cfg: Value = serde_json::from_str(&fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["config"]["R"], 256);
    assert_eq!(cfg["hash"].as_str().unwrap(), dir.file_name().unwrap().to_str().unwrap());
}

#[test]
fn caps_d1_has_two_intervals() {
    let tmp = tempfile::tempdir().unwrap();
    let o = decoup(tmp.path(), &["caps", "--R", "16", "--d", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let json: FamilyJson = serde_json::from_str(&fs::read_to_string(only_dir(tmp.path()).join("caps.json")).unwrap()).unwrap();
    assert_eq!(json.caps.len(), 2);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = decoup(tmp.path(), &["caps", "--R", "15", "--m", "2", "--d", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("non-dyadic scale 15"), "{}", stderr(&o));
    for args in [
        &["caps", "--kind", "hexagonal"][..],
        &["caps", "--R", "abc"],
        &["verify", "--K", "8"],
        &["sweep", "--R", "16,256"],
        &["ratio", "--p", "7"],
        &["ratio", "--budget", "10"],
        &["ratio", "--lambda", "0.3"],
        &["caps", "--no-such-flag"],
    ] {
        assert_eq!(decoup(tmp.path(), args).status.code(), Some(2), "{args:?}");
    }
    // nothing was written for rejected configurations
    assert_eq!(fs::read_dir(tmp.path()).map(|d| d.count()).unwrap_or(0), 0);
}

#[test]
fn io_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain");
    fs::write(&file, "x").unwrap();
    let o = decoup(tmp.path(), &["caps", "--R", "16", "--d", "1", "--out", file.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = decoup(tmp.path(), &["plot", tmp.path().join("missing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = decoup(tmp.path(), &["--config", tmp.path().join("none.ini").to_str().unwrap(), "caps"]);
    assert_eq!(o.status.code(), Some(3));
}

fn verify_rows(dir: &Path) -> Vec<(String, bool)> {
    let mut rd = csv::Reader::from_path(dir.join("verify.csv")).unwrap();
    rd.records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), &r[4] == "true")
        })
        .collect()
}

#[test]
fn verify_default_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = decoup(tmp.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let dir = only_dir(tmp.path());
    let rows = verify_rows(&dir);
    assert!(rows.iter().all(|(_, p)| *p));
    for check in ["tiling", "flatness", "omega_tiling", "tau_tiling", "conjugation", "phase_certificate", "theta0_degenerate"] {
        assert!(rows.iter().any(|(c, _)| c == check), "missing {check}");
    }
    assert_eq!(rows.iter().filter(|(c, _)| c == "conjugation").count(), 80);
    let failures: Vec<Value> = serde_json::from_str(&fs::read_to_string(dir.join("failures.json")).unwrap()).unwrap();
    assert!(failures.is_empty());
}

#[test]
fn verify_swapped_map_fails_with_reproducer() {
    let tmp = tempfile::tempdir().unwrap();
    for flag in ["--swapped-map", "--paper-printed-map"] {
        let o = decoup(tmp.path(), &["verify", flag]);
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).contains("swapped space map"), "{}", stderr(&o));
    }
    let dir = only_dir(tmp.path());
    let failures: Vec<Value> = serde_json::from_str(&fs::read_to_string(dir.join("failures.json")).unwrap()).unwrap();
    let conj: Vec<&Value> = failures.iter().filter(|f| f["check"] == "conjugation").collect();
    assert!(!conj.is_empty());
    assert_eq!(conj[0]["map"]["variant"], "swapped_scale");
    assert!(conj[0]["function"]["atoms"].as_array().unwrap().len() == 8);
    assert!(conj[0]["max_rel_error"].as_f64().unwrap() > 1e-3);
    // the partition checks do not depend on the map
    assert!(verify_rows(&dir).iter().filter(|(c, _)| c != "conjugation").all(|(_, p)| *p));
}

#[test]
fn verify_zero_tolerance_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = decoup(tmp.path(), &["verify", "--tolerance", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

const SWEEP: &[&str] = &["sweep", "--R", "16,256,4096", "--p", "2", "--d", "1", "--budget", "1000", "--seeds", "0,1", "--weight", "indicator"];

#[test]
fn sweep_rerun_skips_and_keeps_records() {
    let tmp = tempfile::tempdir().unwrap();
    let first = decoup(tmp.path(), SWEEP);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let dir = only_dir(tmp.path());
    let snapshot = |name: &str| fs::read(dir.join(name)).unwrap();
    let (records, plot, summary) = (snapshot("records.jsonl"), snapshot("ratio_vs_R.svg"), snapshot("summary.json"));

    let second = decoup(tmp.path(), SWEEP);
    assert_eq!(second.status.code(), Some(0));
    assert!(stdout(&second).contains("skipped 6 cells"), "{}", stdout(&second));
    assert_eq!(snapshot("records.jsonl"), records);
    assert_eq!(snapshot("ratio_vs_R.svg"), plot);
    assert_eq!(snapshot("summary.json"), summary);
    assert_xml(&dir.join("ratio_vs_R.svg"));

    // every record line re-serializes to itself
    let text = String::from_utf8(records).unwrap();
    let parsed: Vec<RatioRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed.len(), 6);
    for (line, rec) in text.lines().zip(&parsed) {
        assert_eq!(serde_json::to_string(rec).unwrap(), line);
    }
    let summary: Value = serde_json::from_slice(&summary).unwrap();
    assert_eq!(summary["completed"], 6);
    assert!(summary["fits"][0]["epsilon_hat"].as_f64().unwrap().is_finite());
    let round: Value = serde_json::from_str(&serde_json::to_string(&summary).unwrap()).unwrap();
    assert_eq!(round, summary);

    // --force recomputes the same measurements
    let forced = decoup(tmp.path(), &[SWEEP, &["--force"]].concat());
    assert_eq!(forced.status.code(), Some(0));
    assert!(!stdout(&forced).contains("skipped"));
    let again: Vec<RatioRecord> = fs::read_to_string(dir.join("records.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(parsed.iter().zip(&again).all(|(a, b)| a.same_measurement(b)));

    // plot regenerates the same figure
    fs::remove_file(dir.join("ratio_vs_R.svg")).unwrap();
    assert_eq!(decoup(tmp.path(), &["plot", dir.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(snapshot("ratio_vs_R.svg"), plot);
}

#[test]
fn interrupted_sweep_resumes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(decoup(tmp.path(), SWEEP).status.code(), Some(0));
    let dir = only_dir(tmp.path());
    let full = fs::read_to_string(dir.join("records.jsonl")).unwrap();
    let kept: Vec<&str> = full.lines().take(4).collect();
    fs::write(dir.join("records.jsonl"), kept.join("\n") + "\n").unwrap();
    let o = decoup(tmp.path(), SWEEP);
    assert!(stdout(&o).contains("skipped 4 cells"));
    let resumed = fs::read_to_string(dir.join("records.jsonl")).unwrap();
    // the kept lines stay verbatim, the recomputed ones match up to timing
    assert!(resumed.starts_with(&(kept.join("\n") + "\n")));
    let a: Vec<RatioRecord> = full.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let b: Vec<RatioRecord> = resumed.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(a.iter().zip(&b).all(|(x, y)| x.same_measurement(y)));
}

#[test]
fn sextic_ratio_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = decoup(tmp.path(), &["ratio", "--R", "64", "--m", "3", "--p", "4", "--budget", "1000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = only_dir(tmp.path());
    let rec: RatioRecord = serde_json::from_str(fs::read_to_string(dir.join("records.jsonl")).unwrap().trim()).unwrap();
    assert_eq!((rec.m, rec.r), (3, 64));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["fit_error"].as_str().unwrap().contains("scales"));
}

#[test]
fn curve_ratio_from_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let o = decoup(
        tmp.path(),
        &["ratio", "--R", "16", "--K", "256", "--lambda", "1/2", "--p", "4", "--grid", "64", "--weight", "indicator"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = only_dir(tmp.path());
    let rec: RatioRecord = serde_json::from_str(fs::read_to_string(dir.join("records.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(rec.family, "curve(lambda=1/2^1,K=256)");
    assert_eq!(rec.mc_samples, 64 * 64);
}

#[test]
fn ini_values_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let ini = tmp.path().join("run.ini");
    fs::write(
        &ini,
        "d = 1\nweight = indicator\n\n[sweep]\nR = 16, 256, 4096\np = 2\nbudget = 5000\nseeds = 0\n\n[caps]\nR = 2^4\n",
    )
    .unwrap();
    let root = tmp.path().join("out");
    let o = decoup(&root, &["--config", ini.to_str().unwrap(), "sweep", "--budget", "1000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = only_dir(&root);
    let cfg: Value = serde_json::from_str(&fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["config"]["budget"], 1000);
    assert_eq!(cfg["config"]["r_values"], serde_json::json!([16, 256, 4096]));
    assert_eq!(cfg["config"]["d"], 1);
    assert_eq!(cfg["config"]["rhs_weight"], "indicator");

    // the same values given as flags hash to the same directory
    let o = decoup(&root, &["sweep", "--R", "16,256,4096", "--p", "2", "--budget", "1000", "--seeds", "0", "--d", "1", "--weight", "indicator"]);
    assert!(stdout(&o).contains("skipped 3 cells"), "{}", stdout(&o));

    let o = decoup(&root, &["--config", ini.to_str().unwrap(), "caps", "--d", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("2 caps (R=16"));
}

#[test]
fn results_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_decoup"))
        .args(["caps", "--R", "16", "--d", "2"])
        .env("DECOUP_RESULTS_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(only_dir(tmp.path()).join("caps.json").exists());
}

#[test]
fn svg_is_deterministic_per_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for root in [a.path(), b.path()] {
        assert_eq!(decoup(root, &["caps", "--R", "256", "--d", "2", "--kind", "f4mixed[2]"]).status.code(), Some(0));
    }
    let (da, db) = (only_dir(a.path()), only_dir(b.path()));
    assert_eq!(da.file_name(), db.file_name());
    assert_eq!(fs::read(da.join("caps.svg")).unwrap(), fs::read(db.join("caps.svg")).unwrap());
    assert_xml(&da.join("caps.svg"));
}
