use std::process::{Command, Output};

fn cvqss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvqss")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn keyrate_csv_layout() {
    let out = stdout(&cvqss(&["keyrate", "--distance", "20", "--variance", "2"]));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header[0], "schema_version");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "1");
    let i = &rows[0][column(&header, "i_ud")];
    let digits: String = i.chars().filter(|c| c.is_ascii_digit()).collect();
    assert_eq!(digits.trim_start_matches('0').len(), 12, "{i}");
    for field in &rows[0] {
        assert!(!field.contains('e') || field == "false", "decimal notation only: {field}");
    }
}

#[test]
fn json_carries_resolved_config() {
    let out = stdout(&cvqss(&["keyrate", "--distance", "15", "--variance", "1.5", "--format", "json", "--seed", "4"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "keyrate");
    assert_eq!(v["config"]["distance_km"], 15.0);
    assert_eq!(v["config"]["variance"], 1.5);
    assert_eq!(v["config"]["seed"], 4);
    assert!(v["rows"][0]["report"]["r_rr"].is_number());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"distance_km": 35, "variance": 3, "rounds": 2, "reconciliation": "dr"}"#).unwrap();
    let p = path.to_str().unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&cvqss(&["keyrate", "--config", p, "--format", "json"]))).unwrap();
    assert_eq!(v["config"]["rounds"], 2);
    assert_eq!(v["config"]["reconciliation"], "dr");
    let row = &v["rows"][0];
    assert_eq!(row["rate"], row["report"]["r_dr"]);

    let v: serde_json::Value =
        serde_json::from_str(&stdout(&cvqss(&["keyrate", "--config", p, "--rounds", "3", "--format", "json"])))
            .unwrap();
    assert_eq!(v["config"]["rounds"], 3);

    std::fs::write(&path, r#"{"distanse_km": 35}"#).unwrap();
    let bad = cvqss(&["keyrate", "--config", p]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("distanse_km"));
}

#[test]
fn usage_and_domain_errors_exit_nonzero() {
    assert_eq!(cvqss(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cvqss(&["sweep", "--sweep", "distance:1"]).status.code(), Some(2));
    assert_eq!(cvqss(&["keyrate", "--distance=-3", "--variance", "2"]).status.code(), Some(1));
    assert_eq!(cvqss(&["keyrate", "--variance", "0"]).status.code(), Some(1));
    assert_eq!(cvqss(&["protocol", "--bits", "7", "--variance", "2"]).status.code(), Some(1));
    assert_eq!(
        cvqss(&["sweep", "--sweep", "distance:0:2:1", "--sweep", "ratio:0.2:0.4:0.2", "--sweep", "rounds:1:2:1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn sweep_order_does_not_depend_on_workers() {
    let args = ["sweep", "--sweep", "distance:10:40:10", "--sweep", "ratio:0.3:0.5:0.2", "--variance", "2"];
    let run = |w: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_cvqss"))
            .env("CVQSS_WORKERS", w)
            .args(args)
            .output()
            .unwrap();
        stdout(&o)
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    let (header, rows) = csv_rows(&one);
    assert_eq!(rows.len(), 8);
    let (d, r) = (column(&header, "distance_km"), column(&header, "ratio"));
    let keys: Vec<(f64, f64)> = rows.iter().map(|x| (x[d].parse().unwrap(), x[r].parse().unwrap())).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(keys, sorted);
}

#[test]
fn clamp_zeroes_negative_rates() {
    let args = ["keyrate", "--distance", "40", "--variance", "2"];
    let (header, raw) = csv_rows(&stdout(&cvqss(&args)));
    let dr = column(&header, "r_dr");
    assert!(raw[0][dr].starts_with('-'));
    let mut clamped = args.to_vec();
    clamped.push("--clamp");
    let (_, rows) = csv_rows(&stdout(&cvqss(&clamped)));
    assert_eq!(rows[0][dr], "0");
}

#[test]
fn optimize_reports_profile() {
    let out = stdout(&cvqss(&["optimize", "--distance", "60", "--rounds", "2", "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["profile"].as_array().unwrap().len(), 80);
    let best = v["result"]["rate"].as_f64().unwrap();
    let grid_max = v["profile"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["rate"].as_f64().unwrap())
        .fold(f64::MIN, f64::max);
    assert!(best >= grid_max);
    assert_eq!(v["result"]["optimized"], true);
}

#[test]
fn bounds_csv_columns() {
    let out = stdout(&cvqss(&["bounds", "--n-mean", "1:2:0.5", "--distance", "50"]));
    let (header, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 3);
    for name in ["n_mean", "p_sdd_m1", "p_sdd_m4", "p_phd", "p_sql", "p_helstrom", "delta_sdd_m4", "delta_phd"] {
        column(&header, name);
    }
    let (h, s) = (column(&header, "p_helstrom"), column(&header, "p_sql"));
    for r in &rows {
        assert!(r[h].parse::<f64>().unwrap() <= r[s].parse::<f64>().unwrap());
    }
}

#[test]
fn discriminate_writes_tree_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("tree.json");
    let out = stdout(&cvqss(&[
        "discriminate",
        "--n-mean",
        "2",
        "--rounds",
        "2",
        "--trials",
        "5000",
        "--tree-dump",
        dump.to_str().unwrap(),
        "--format",
        "json",
    ]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["z_score"].as_f64().unwrap().abs() < 4.0);
    let tree: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    let leaves = tree["leaves"].as_array().unwrap();
    assert!(!leaves.is_empty() && leaves.len() <= 10_000);
    assert_eq!(tree["total_leaves"], v["tree_leaves"]);
    assert_eq!(leaves[0]["counts"].as_array().unwrap().len(), 2);
}

#[test]
fn protocol_session_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.json");
    let p = path.to_str().unwrap();
    stdout(&cvqss(&["protocol", "--bits", "200", "--variance", "2", "--detector", "ideal", "--format", "json", "--out", p]));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["ber_u1"], 0.0);
    assert_eq!(v["secret_check"]["reconstructed_with_both"], true);
    assert_eq!(v["secret_check"]["errors_raw_keys"], 0);
    assert!(v["secret_check"]["errors_user1_only"].as_u64().unwrap() > 0);
    assert_eq!(v["session"]["sent_u1"].as_str().unwrap().len(), 200);

    let (header, rows) = csv_rows(&stdout(&cvqss(&["protocol", "--bits", "200", "--variance", "2"])));
    assert!(rows[0][column(&header, "ber_u1")].parse::<f64>().unwrap() > 0.0);
}
