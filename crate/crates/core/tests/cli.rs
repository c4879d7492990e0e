use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hyrelay::config::load_scenario;
use hyrelay::sweep::{emit_csv, CSV_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyrelay"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn hyrelay")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bundled_canonical_scenario() {
    let s = load_scenario(scenarios().join("canonical.json")).unwrap();
    assert_eq!(s.hap_receiver_distance(), 4.0);
    assert_eq!(s.relay_count(), 5);
    assert_eq!(s.antennas, 3);
}

#[test]
fn omitted_eta_defaults_to_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, r#"{"pt_mw": 20, "gamma_max": 0.3}"#).unwrap();
    let s = load_scenario(&path).unwrap();
    assert_eq!(s.eta, 0.5);
    assert_eq!(s.pt_mw, 20.0);
}

#[test]
fn negative_power_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"pt_mw": -5}"#).unwrap();
    let o = run(&["--scenario", path.to_str().unwrap(), "select"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("pt_mw"), "{err}");
}

#[test]
fn unknown_flag_and_key_exit_with_one() {
    assert_eq!(run(&["--bogus"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.json");
    std::fs::write(&path, r#"{"etaa": 0.5}"#).unwrap();
    let o = run(&["--scenario", path.to_str().unwrap(), "gen"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("etaa"));
}

#[test]
fn single_cell_sweep_has_baseline_and_selection_rows() {
    let o = run(&["sweep", "--axis", "p_t", "--values", "50", "--metrics", "max-snr", "--seeds", "0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rows.headers().unwrap().iter().collect::<Vec<_>>().join(","), CSV_HEADER);
    let recs: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    assert_eq!(recs.len(), 2);
    let gamma = |metric: &str| -> f64 {
        recs.iter().find(|r| &r[3] == metric).expect("row")[5].parse().unwrap()
    };
    assert!(gamma("max-snr") >= gamma("all-active"));
    assert!(recs.iter().all(|r| &r[11] == "ok"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = scenarios().join("sweep_pt.json");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&[
            "sweep",
            "--spec",
            spec.to_str().unwrap(),
            "--seed",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert!(!bytes.contains(&b'\r'));
    let select = |_: ()| stdout(&run(&["select", "--metric", "max-dg"]));
    assert_eq!(select(()), select(()));
}

#[test]
fn max_snr_grows_with_transmit_power() {
    let values = "10,20,30,40,50,60,70,80,90";
    for seed in ["0", "2"] {
        let o = run(&["sweep", "--axis", "p_t", "--values", values, "--seeds", seed]);
        assert!(o.status.success());
        let text = stdout(&o);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let gammas: Vec<f64> = rdr
            .records()
            .map(Result::unwrap)
            .filter(|r| &r[3] == "max-snr")
            .map(|r| r[5].parse().unwrap())
            .collect();
        assert_eq!(gammas.len(), 9);
        assert!(gammas.windows(2).all(|w| w[1] >= w[0]), "seed {seed}: {gammas:?}");
    }
}

#[test]
fn empty_table_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    emit_csv(&[], &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{CSV_HEADER}\n"));
    let missing = dir.path().join("no/such/dir/x.csv");
    assert!(emit_csv(&[], &missing).is_err());
}

#[test]
fn select_reports_the_canonical_passive_set() {
    let o = run(&["--scenario", scenarios().join("canonical.json").to_str().unwrap(), "select"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passive"], serde_json::json!([1, 4, 5]));
    assert_eq!(v["bound"], "relay");
    assert!(v["gamma"].as_f64().unwrap() >= v["baseline_gamma"].as_f64().unwrap());
}

#[test]
fn eval_checks_relay_indices() {
    let ok = run(&["--bound", "direct", "eval", "--passive", "2,3", "--theta", "-1.5,0.25"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&ok)).unwrap();
    assert_eq!(v["passive"], serde_json::json!([2, 3]));
    assert_eq!(v["result"]["kind"], "direct");
    let bad = run(&["eval", "--passive", "9"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn gen_dumps_every_link() {
    let o = run(&["--seed", "4", "gen"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["seed"], 4);
    assert_eq!(v["f"].as_array().unwrap().len(), 5);
    assert_eq!(v["f0"].as_array().unwrap().len(), 3);
    assert_eq!(v["z"].as_array().unwrap().len(), 5);
}
