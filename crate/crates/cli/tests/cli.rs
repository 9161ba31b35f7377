use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tidal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tidal"))
        .current_dir(dir)
        .args(["--threads", "1"])
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = tidal(dir, args);
    assert!(out.status.success(), "tidal {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

fn month(dir: &Path) {
    ok(dir, &["tide", "synth", "--months", "1", "--seed", "7", "--out", "tide.csv"]);
}

#[test]
fn synth_month_has_one_row_per_minute() {
    let d = tempfile::tempdir().unwrap();
    month(d.path());
    let rows = data_rows(&d.path().join("tide.csv"));
    assert_eq!(rows[0], "time_s,level_m,flag");
    assert_eq!(rows.len() - 1, 44_640);
    let text = std::fs::read_to_string(d.path().join("tide.csv")).unwrap();
    assert!(text.contains("# seed: 7") && text.contains("# config_hash: ") && text.contains("# tool_version: tidal "));
}

#[test]
fn zero_months_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&tidal(d.path(), &["tide", "synth", "--months", "0", "--out", "t.csv"])), 2);
}

#[test]
fn bad_gauge_row_reports_its_line() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("in.dat"),
        "Port: test\n    1) 2019/01/01 00:00:00     5.100\n    2) 2019/01/01 00:15:00     five\n",
    )
    .unwrap();
    let out = tidal(d.path(), &["tide", "ingest", "--format", "bodc-ascii", "in.dat", "--out", "t.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("in.dat:3"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_contract() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    month(p);
    ok(p, &["simulate", "--tide", "tide.csv", "--scheme", "classic", "--heads", "4,1", "--out", "c.csv", "--summary", "c.json"]);
    ok(p, &["simulate", "--tide", "tide.csv", "--scheme", "variant", "--heads", "4,1,0.5", "--out", "v.csv", "--summary", "v.json"]);
    let (c, v) = (json(&p.join("c.json")), json(&p.join("v.json")));
    assert!(c["total_energy_gwh"].as_f64().unwrap() > 0.0);
    assert_eq!(c["total_energy_gwh"], v["total_energy_gwh"]);
    assert_eq!(data_rows(&p.join("c.csv")), data_rows(&p.join("v.csv")));

    let arity = tidal(p, &["simulate", "--tide", "tide.csv", "--scheme", "classic", "--heads", "4,1,0.5", "--out", "x.csv", "--summary", "x.json"]);
    assert_eq!(code(&arity), 2);
    let missing = tidal(p, &["simulate", "--tide", "nope.csv", "--scheme", "classic", "--heads", "4,1", "--out", "x.csv", "--summary", "x.json"]);
    assert_eq!(code(&missing), 2);
    std::fs::write(p.join("bad.conf"), "lagoon.area_m2 = 11.5e6\nlagoon.colour = blue\n").unwrap();
    let unknown = tidal(p, &["simulate", "--tide", "tide.csv", "--scheme", "classic", "--heads", "4,1", "--config", "bad.conf", "--out", "x.csv", "--summary", "x.json"]);
    assert_eq!(code(&unknown), 2);
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("lagoon.colour"));
}

#[test]
fn optimize_and_compare() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    month(p);
    ok(p, &["optimize", "--baseline", "ch", "--measured", "tide.csv", "--report", "ch_report.json", "--summary", "ch.json", "--label", "m1"]);
    ok(p, &["optimize", "--baseline", "EHT", "--measured", "tide.csv", "--report", "eht_report.json", "--schedule", "eht_schedule.json", "--summary", "eht.json", "--label", "m1"]);
    let ch = json(&p.join("ch_report.json"));
    assert_eq!(ch["predicted_energy_gwh"], ch["applied_energy_gwh"]);
    let eht = json(&p.join("eht_report.json"));
    let triples = eht["schedule"]["schedule"]["per_half_tide"].as_array().unwrap();
    assert_eq!(triples.len() as u64, eht["half_tides_predicted"].as_u64().unwrap());

    // The exported schedule replays to the reported energy.
    ok(p, &["simulate", "--tide", "tide.csv", "--schedule", "eht_schedule.json", "--out", "r.csv", "--summary", "r.json"]);
    let replay = json(&p.join("r.json"))["total_energy_gwh"].as_f64().unwrap();
    assert!((replay - eht["applied_energy_gwh"].as_f64().unwrap()).abs() < 1e-9);

    ok(p, &["compare", "ch.json", "eht.json", "--out", "table.csv"]);
    let rows = data_rows(&p.join("table.csv"));
    assert_eq!(rows[0], "method,m1,mean_gwh,std_gwh");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("CH,") && rows[2].starts_with("EHT,"));

    assert_eq!(code(&tidal(p, &["optimize", "--baseline", "XYZ", "--measured", "tide.csv", "--report", "x.json"])), 2);
}

#[test]
fn train_smoke_then_evaluate() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(
        p.join("smoke.conf"),
        "ppo.env_count = 4\nppo.rollout_horizon = 64\nppo.minibatch_size = 128\nppo.hidden = 16, 16\nppo.max_steps = 1e4\n",
    )
    .unwrap();
    ok(p, &["train", "--config", "smoke.conf", "--out-dir", "run"]);
    let curve = data_rows(&p.join("run/curve.csv"));
    assert_eq!(curve[0], "step,mean_episode_reward,clip_fraction,approx_kl,entropy");
    assert!(curve.len() > 1);

    ok(p, &["evaluate", "--checkpoint", "run/checkpoint.json", "--seed", "5", "--out", "e.csv", "--summary", "e.json"]);
    let e = json(&p.join("e.json"));
    assert_eq!(e["label"], "synth-5");
    assert_eq!(e["steps"], 44_640);

    let mut ckpt = json(&p.join("run/checkpoint.json"));
    ckpt["format_version"] = 99.into();
    std::fs::write(p.join("old.json"), ckpt.to_string()).unwrap();
    let out = tidal(p, &["evaluate", "--checkpoint", "old.json", "--seed", "5", "--out", "e.csv", "--summary", "e.json"]);
    assert_eq!(code(&out), 3);
    assert_eq!(code(&tidal(p, &["evaluate", "--checkpoint", "run/checkpoint.json", "--out", "e.csv", "--summary", "e.json"])), 2);
}
