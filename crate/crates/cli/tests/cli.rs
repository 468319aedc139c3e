use std::process::{Command, Output};

use serde_json::Value;

fn diqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diqkd")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

#[test]
fn pironio_csv_has_five_rows_and_unit_endpoints() {
    let o = diqkd(&["curve", "pironio", "--grid", "5", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("param,omega,qber,value"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][3], 1.0);
    assert_eq!(rows[4][3], 0.0);
}

#[test]
fn erasure_channel_curve_matches_min_formula() {
    let o = diqkd(&["curve", "channel", "--kind", "erasure", "--p-max", "1", "--grid", "3", "--format", "csv"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    let expected = |p: f64| {
        let disc: f64 = 1.0 - 4.0 * p + 2.0 * p * p;
        let attack = if disc <= 0.0 { 0.0 } else { 1.0 - h2(0.5 * (1.0 - disc.sqrt())) };
        attack.min(1.0 - p)
    };
    for (row, p) in rows.iter().zip([0.0, 0.5, 1.0]) {
        assert_eq!(row[0], p);
        assert!((row[3] - expected(p)).abs() < 1e-11, "{row:?}");
    }
}

#[test]
fn device_at_zero_noise_reaches_tsirelson() {
    let o = diqkd(&["device", "--nu", "0"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p = |x: usize, y: usize, a: usize, b: usize| v["p"][x][y][a][b].as_f64().unwrap();
    let corr = |x, y| p(x, y, 0, 0) + p(x, y, 1, 1) - p(x, y, 0, 1) - p(x, y, 1, 0);
    let s = corr(1, 0) + corr(1, 1) + corr(2, 0) - corr(2, 1);
    assert!((s.abs() - 2.0 * 2f64.sqrt()).abs() < 1e-10, "{s}");
}

#[test]
fn localweight_of_dumped_device() {
    let dir = std::env::temp_dir().join(format!("diqkd-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("device.json");
    let o = diqkd(&["device", "--nu", "0.1", "--out", file.to_str().unwrap()]);
    assert!(o.status.success());
    let o = diqkd(&["localweight", "--file", file.to_str().unwrap()]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let q = v["local_weight"].as_f64().unwrap();
    assert!(q > 0.0 && q < 1.0, "{q}");
    let total: f64 = v["vertices"].as_array().unwrap().iter().map(|e| e["weight"].as_f64().unwrap()).sum();
    assert!((total - q).abs() < 1e-9);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn er_of_a_bell_state_is_one() {
    let dir = std::env::temp_dir().join(format!("diqkd-er-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("phi.json");
    let mut entries = vec!["[0,0]"; 16];
    for k in [0, 3, 12, 15] {
        entries[k] = "[0.5,0]";
    }
    std::fs::write(&file, format!(r#"{{"dims":[2,2],"entries":[{}]}}"#, entries.join(","))).unwrap();
    let o = diqkd(&["er", "--file", file.to_str().unwrap()]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn simulate_reports_matches() {
    let o = diqkd(&["simulate", "--kind", "depolarizing", "--p", "0.05"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["chsh_match"], Value::Bool(true));
    assert_eq!(v["qber_match"], Value::Bool(true));
}

#[test]
fn output_is_deterministic() {
    let args = ["curve", "fbjl", "--grid", "4", "--seed", "3", "--format", "json"];
    assert_eq!(diqkd(&args).stdout, diqkd(&args).stdout);
}

#[test]
fn hull_json_lists_support() {
    let o = diqkd(&["curve", "hull", "--grid", "6"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["samples"].as_array().unwrap().len(), 6);
    let support = v["support"].as_array().unwrap();
    assert_eq!(support.first().and_then(Value::as_u64), Some(0));
    assert_eq!(support.last().and_then(Value::as_u64), Some(5));
}

#[test]
fn exit_codes() {
    assert_eq!(diqkd(&["curve", "al", "--grid", "1"]).status.code(), Some(2));
    assert_eq!(diqkd(&["curve", "nonsense"]).status.code(), Some(2));
    assert_eq!(diqkd(&["curve", "channel"]).status.code(), Some(2));
    assert_eq!(diqkd(&["device", "--nu", "1.5"]).status.code(), Some(2));
    assert_eq!(diqkd(&["er", "--file", "/definitely/not/here.json"]).status.code(), Some(2));
    assert_eq!(diqkd(&["simulate", "--kind", "erasure", "--p", "0.5"]).status.code(), Some(2));
    let o = diqkd(&["curve", "al", "--grid", "1"]);
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
}
