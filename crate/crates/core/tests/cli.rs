use std::process::{Command, Output};

use mcnoma::cli::{ScheduleRow, SweepRow, VerifyRow};

fn mcnoma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcnoma")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mcnoma(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows<T: serde::de::DeserializeOwned>(text: &str) -> Vec<T> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect::<Result<_, _>>().unwrap()
}

#[test]
fn pair_prints_both_cases_and_gain() {
    let text = ok(&["pair", "--beta-a", "1", "--sinr-a", "1", "--beta-b", "0.5", "--sinr-b", "3"]);
    assert!(text.starts_with("schema_version,row,sic_user,power_a_watts,power_b_watts,total_watts,note\n"));
    let rows: Vec<csv::StringRecord> = csv::Reader::from_reader(text.as_bytes()).records().map(Result::unwrap).collect();
    let num = |r: &csv::StringRecord, i: usize| r[i].parse::<f64>().unwrap();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12 * b.abs().max(1.0);
    let find = |name: &str| rows.iter().find(|r| &r[1] == name).unwrap().clone();
    let (sic_a, sic_b, sel, gain) = (find("sic_a"), find("sic_b"), find("selected"), find("gain"));
    assert!(close(num(&sic_a, 3), 1.0) && close(num(&sic_a, 4), 9.0) && close(num(&sic_a, 5), 10.0));
    assert!(close(num(&sic_b, 5), 14.0));
    assert_eq!(&sel[2], "a");
    assert!(close(num(&sel, 5), 10.0));
    assert!(close(num(&gain, 5), 6.5));
}

#[test]
fn pair_identical_users_gain_zero() {
    let text = ok(&["pair", "--beta-a", "0.3", "--rate-a", "1.5", "--beta-b", "0.3", "--rate-b", "1.5", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_str(&text).unwrap();
    let gain = rows.as_array().unwrap().iter().find(|r| r["row"] == "gain").unwrap();
    assert!(gain["total_watts"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn pair_from_distances() {
    let text = ok(&[
        "pair", "--distance-a", "50", "--outage-a", "0.01", "--rate-a", "2",
        "--distance-b", "180", "--outage-b", "0.001", "--rate-b", "1",
    ]);
    assert!(text.contains("decoding-order rule agrees"));
}

#[test]
fn pair_low_sinr_note_and_usage_error() {
    let text = ok(&["pair", "--beta-a", "1", "--rate-a", "0.5", "--beta-b", "2", "--rate-b", "2"]);
    assert!(text.contains("shortcut disabled"));
    let out = mcnoma(&["pair", "--beta-a", "1"]);
    assert!(!out.status.success());
    let out = mcnoma(&["pair", "--beta-a", "x"]);
    assert!(!out.status.success());
}

#[test]
fn schedule_four_user_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let users = dir.path().join("users.csv");
    std::fs::write(&users, "id,beta,target_sinr\n1,2.0,4.0\n2,5.0,3.0\n3,3.0,2.7\n4,0.2,3.5\n").unwrap();
    let text = ok(&["schedule", "--profiles", users.to_str().unwrap(), "--subcarriers", "2", "--per-user", "1"]);
    let rows: Vec<ScheduleRow> = csv_rows(&text);
    let mut pairs: Vec<(usize, usize)> = rows
        .iter()
        .filter(|r| r.kind == "pair")
        .map(|r| (r.user_a.unwrap(), r.user_b.unwrap()))
        .collect();
    pairs.sort();
    assert_eq!(pairs, vec![(1, 2), (3, 4)]);
    let total = rows.iter().find(|r| r.kind == "total").unwrap().total_watts;
    let sum: f64 = rows.iter().filter(|r| r.kind == "pair").map(|r| r.total_watts).sum();
    assert_eq!(total, sum);
}

#[test]
fn schedule_is_byte_identical_per_seed() {
    for method in ["proposed", "random", "exhaustive", "oma"] {
        let args = ["schedule", "--users", "4", "--subcarriers", "5", "--per-user", "2", "--seed", "42", "--method", method];
        assert_eq!(ok(&args), ok(&args), "{method}");
    }
    let a = ok(&["schedule", "--seed", "1", "--method", "random"]);
    let b = ok(&["schedule", "--seed", "2", "--method", "random"]);
    assert_ne!(a, b);
}

#[test]
fn schedule_methods_order() {
    let run = |m: &str| -> f64 {
        let rows: Vec<ScheduleRow> =
            csv_rows(&ok(&["schedule", "--users", "8", "--subcarriers", "5", "--per-user", "1", "--seed", "5", "--method", m]));
        rows.last().unwrap().total_watts
    };
    let (e, p, r) = (run("exhaustive"), run("proposed"), run("random"));
    assert!(e <= p && e <= r);
}

#[test]
fn exhaustive_refusal_prints_count() {
    let out = mcnoma(&["schedule", "--users", "20", "--subcarriers", "10", "--per-user", "1", "--method", "exhaustive"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("654729075"), "{err}");
}

#[test]
fn schedule_rejects_bad_load() {
    let out = mcnoma(&["schedule", "--users", "3", "--subcarriers", "5", "--per-user", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
}

#[test]
fn verify_default_scenario_has_no_violations() {
    let text = ok(&["verify", "--seed", "3", "--samples", "1000000"]);
    let rows: Vec<VerifyRow> = csv_rows(&text);
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| !r.violation), "{text}");
    for r in &rows {
        assert!((r.required_outage - 1e-2).abs() < 1e-15);
        assert!((r.std_error - 1e-4).abs() < 1e-5, "{}", r.std_error);
    }
}

#[test]
fn verify_flags_halved_power() {
    let text = ok(&["verify", "--seed", "3", "--samples", "200000", "--power-scale", "0.5"]);
    let rows: Vec<VerifyRow> = csv_rows(&text);
    assert!(rows.iter().any(|r| r.violation));
}

#[test]
fn verify_case_two_is_reproducible() {
    let args = ["verify", "--seed", "8", "--case", "2", "--samples", "100000", "--users", "6", "--subcarriers", "4", "--per-user", "1"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let rows: Vec<VerifyRow> = csv_rows(&a);
    assert!(rows.iter().all(|r| r.samples >= 100_000));
}

#[test]
fn sweeps_need_a_seed() {
    let out = mcnoma(&["sweep-cellsize", "--realizations", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn sweep_cellsize_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("cellsize.csv");
    let json_path = dir.path().join("cellsize.json");
    let base = ["sweep-cellsize", "--seed", "11", "--realizations", "20", "--values", "100,200,300"];
    let mut csv_args = base.to_vec();
    csv_args.extend(["--out", csv_path.to_str().unwrap()]);
    ok(&csv_args);
    let mut json_args = base.to_vec();
    json_args.extend(["--format", "json", "--out", json_path.to_str().unwrap()]);
    ok(&json_args);
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("schema_version,axis,outage_case,x,method,mean_watts,mean_dbm,std_error,realizations\n"));
    let from_csv: Vec<SweepRow> = csv_rows(&text);
    let from_json: Vec<SweepRow> = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(from_csv, from_json);
    assert_eq!(from_csv.len(), 12);
    for m in ["proposed", "exhaustive", "random", "oma"] {
        let curve: Vec<f64> = from_csv.iter().filter(|r| r.method == m).map(|r| r.mean_watts.unwrap()).collect();
        assert!(curve.windows(2).all(|w| w[0] < w[1]), "{m}");
    }
}

#[test]
fn sweep_users_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("users.toml");
    std::fs::write(&cfg, "seed = 4\nrealizations = 10\ncase = 2\nvalues = [6.0, 8.0]\nmethod = \"proposed\"\n").unwrap();
    let rows: Vec<SweepRow> = csv_rows(&ok(&["sweep-users", "--config", cfg.to_str().unwrap()]));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.method == "proposed" && r.outage_case == 2 && r.axis == "num_users"));
    let rows: Vec<SweepRow> = csv_rows(&ok(&["sweep-users", "--config", cfg.to_str().unwrap(), "--method", "oma"]));
    assert!(rows.iter().all(|r| r.method == "oma"));
}

#[test]
fn unwritable_output_is_an_error() {
    let out = mcnoma(&["sweep-users", "--seed", "1", "--realizations", "2", "--values", "6", "--out", "/nonexistent/dir/out.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot write"));
}
