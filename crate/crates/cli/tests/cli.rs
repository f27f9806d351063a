use std::process::{Command, Output};

fn blup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blup")).args(args).output().expect("run blup")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value_after(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no {key} line in {text}"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn ou_continuous_prediction() {
    let o = blup(&["predict", "--kernel", "ou", "--lambda", "2", "--continuous", "--t0", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("blup "));
    assert!(text.contains("config: {"));
    assert!((value_after(&text, "rmse = ") - 1.164262).abs() < 5e-7);
}

#[test]
fn brownian_continuous_prediction_uses_the_endpoint() {
    let o = blup(&["predict", "--kernel", "bm", "--continuous", "--t0", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("component 0: [1.000000000@1.000000000]"));
    assert!((value_after(&text, "mse = ") - 1.0).abs() < 1e-12);
}

#[test]
fn matern_discrete_prediction() {
    let o = blup(&["predict", "--kernel", "matern32", "--lambda", "2", "--design", "xi_N_N", "--N", "4", "--t0", "2"]);
    assert!(o.status.success());
    assert!((value_after(&stdout(&o), "rmse = ") - 0.9985675343).abs() < 1e-9);
}

#[test]
fn json_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let o = blup(&[
        "predict", "--kernel", "ou", "--lambda", "2", "--sites", "0,0.5,1", "--t0", "0.5", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["result"]["kind"], "discrete");
    assert_eq!(v["result"]["interpolated"], true);
    assert!(v["result"]["mse"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(v["config"]["kernel"]["kind"], "ou");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"kernel": {"kind": "ou", "lambda": 5.0}, "continuous": true, "target": {"point": [2.0]}}"#,
    )
    .unwrap();
    let o = blup(&["--config", path.to_str().unwrap(), "predict", "--lambda", "2"]);
    assert!(o.status.success());
    assert!((value_after(&stdout(&o), "rmse = ") - 1.164262).abs() < 5e-7);
}

#[test]
fn product_prediction() {
    let o = blup(&["predict", "--kernel", "matern32", "--lambda", "2", "--continuous", "--t0", "2", "2"]);
    assert!(o.status.success());
    assert!((value_after(&stdout(&o), "rmse = ") - 1.119510).abs() < 5e-7);
}

#[test]
fn passing_table_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t4.csv");
    let o = blup(&["table", "4", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("row_label,col_label,value,paper_value,abs_dev\n"));
}

#[test]
fn out_of_tolerance_table_exits_four() {
    let o = blup(&["table", "1"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn unknown_table_is_a_config_error() {
    let o = blup(&["table", "9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grid_csv() {
    let o = blup(&["grid", "--kernel", "matern32", "--lambda", "2", "--continuous", "--resolution", "5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "t1,t2,rmse");
    assert_eq!(rows.len(), 26);
    assert!(rows[1].ends_with(",0.000000000"));
}

#[test]
fn verify_passes() {
    let o = blup(&["verify", "--samples", "20000"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("PASS monte carlo ou"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"kernal": {}}"#).unwrap();
    assert_eq!(blup(&["--config", path.to_str().unwrap(), "table", "4"]).status.code(), Some(2));
    assert_eq!(blup(&["predict", "--kernel", "matern32", "--continuous", "--t0", "2"]).status.code(), Some(2));
    assert_eq!(blup(&["predict", "--kernel", "ou", "--lambda", "2", "--t0", "2"]).status.code(), Some(2));
}
