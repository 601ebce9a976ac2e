mod common;

use common::flagpass;
use flagpass::montecarlo::read_curve;
use serde_json::{json, Value};

fn stdout(args: &[&str]) -> String {
    let out = flagpass(args, None);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn count_matches_the_location_tally() {
    assert_eq!(stdout(&["count", "--level", "1"]), "level,total_locations\n1,100\n");
    assert_eq!(stdout(&["count", "--level", "2"]), "level,total_locations\n2,3312\n");
    assert_eq!(stdout(&["count", "--level", "3"]), "level,total_locations\n3,108032\n");
}

#[test]
fn level_zero_is_a_usage_error() {
    let out = flagpass(&["count", "--level", "0"], None);
    assert_eq!(out.status.code(), Some(2));
    let out = flagpass(&["rates", "--level", "0", "--trials", "1"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("level"));
}

fn decode(syndrome: &str, flags: &str) -> Value {
    let text = stdout(&["decode-demo", "--syndrome", syndrome, "--flags", flags]);
    serde_json::from_str(&text).unwrap()
}

/// Each actionable row of the match table, with weights picked so the row
/// is the unique cheapest and every confidence is distinct.
#[test]
fn decode_table_rows() {
    let rows = [
        ("0", "AG1=3,AG2=5,A=1", json!({"match": "None", "correction": "none", "c_g1": 4, "c_g2": 6, "c_l": 8})),
        ("1", "AG1=1,AG2=5,A=3", json!({"match": "AG1", "correction": "gauge1", "c_g1": 2, "c_g2": 8, "c_l": 4})),
        ("1", "AG1=6,AG2=1,A=3", json!({"match": "AG2", "correction": "gauge2", "c_g1": 9, "c_g2": 2, "c_l": 5})),
        ("1", "AG1=4,AG2=6,A=2", json!({"match": "A", "correction": "none", "c_g1": 2, "c_g2": 4, "c_l": 10})),
    ];
    for (s, flags, want) in rows {
        assert_eq!(decode(s, flags), want, "syndrome {s}, {flags}");
    }
}

#[test]
fn worked_decode_example() {
    let got = decode("1", "AG1=4,AG2=0,A=2");
    assert_eq!(got, json!({"match": "AG2", "correction": "gauge2", "c_g1": 6, "c_g2": 2, "c_l": 4}));
}

#[test]
fn unmatched_syndrome_is_reported() {
    let out = flagpass(&["decode-demo", "--syndrome", "1"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn single_location_curve_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let rates = dir.path().join("rates.csv");
    std::fs::write(
        &rates,
        "level,weight,trials,failures,r,sigma,seed\n1,0,0,0,0.0,0.0,0\n1,1,10,10,1.0,0.0,0\n",
    )
    .unwrap();
    let curve = dir.path().join("curve.csv");
    stdout(&[
        "curve",
        "--rates",
        rates.to_str().unwrap(),
        "--locations",
        "1",
        "--pmin",
        "1e-6",
        "--pmax",
        "1e-1",
        "--points",
        "6",
        "--out",
        curve.to_str().unwrap(),
    ]);
    let points = read_curve(&curve).unwrap();
    assert_eq!(points.len(), 6);
    for p in points {
        assert!((p.p_logical - p.p).abs() <= 1e-12 * p.p, "{p:?}");
        assert_eq!(p.cap, 1);
    }
    assert!(!dir.path().join("curve.csv.partial").exists());
}

#[test]
fn duplicate_rates_rows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let rates = dir.path().join("rates.csv");
    std::fs::write(&rates, "level,weight,trials,failures,r,sigma,seed\n1,0,0,0,0.0,0.0,0\n1,1,10,10,1.0,0.0,0\n").unwrap();
    let r = rates.to_str().unwrap();
    let out = flagpass(&["curve", "--rates", r, r, "--locations", "1"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("more than one"));
}

#[test]
fn truncation_is_flagged_in_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let rates = dir.path().join("rates.csv");
    let mut text = String::from("level,weight,trials,failures,r,sigma,seed\n");
    for w in 0..=2 {
        text.push_str(&format!("1,{w},10,0,0.0,0.0,0\n"));
    }
    std::fs::write(&rates, text).unwrap();
    let out = stdout(&["curve", "--rates", rates.to_str().unwrap(), "--cap", "2", "--pmax", "1e-1", "--points", "3"]);
    assert!(out.lines().any(|l| l.starts_with("# warning: ")), "{out}");
}

#[test]
fn rates_stay_within_the_cap() {
    let out = flagpass(&["rates", "--level", "1", "--weights", "30..30", "--trials", "10"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap 29"));

    let text = stdout(&["rates", "--level", "1", "--weights", "30..31", "--trials", "10", "--cap", "31"]);
    assert!(text.contains("\"cap\":31"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("1,3")).count(), 2, "{text}");
    let text = stdout(&["rates", "--level", "1", "--weights", "1..1", "--trials", "10"]);
    assert!(!text.contains("\"cap\""), "{text}");
}
