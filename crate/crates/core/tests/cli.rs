use std::process::{Command, Output};

fn tool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tree-spectrum"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn spectrum_csv_rows() {
    let o = tool(&["spectrum", "--d", "2", "--h", "2", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        lines[0],
        "family,index_k_or_j,lambda,x_re,x_im,multiplicity"
    );
    let mut expanded = Vec::new();
    for row in &lines[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 6);
        let lambda: f64 = cols[2].parse().unwrap();
        for _ in 0..cols[5].parse::<usize>().unwrap() {
            expanded.push(lambda);
        }
    }
    expanded.sort_by(f64::total_cmp);
    let r3 = 3f64.sqrt();
    let mut want = vec![
        1.0,
        2f64.sqrt() / 3.0,
        -(2f64.sqrt()) / 3.0,
        2.0 / 3.0,
        2.0 / 3.0,
        (1.0 + r3) / 3.0,
        (1.0 - r3) / 3.0,
    ];
    want.sort_by(f64::total_cmp);
    assert_eq!(expanded.len(), 7);
    for (a, b) in expanded.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn verify_passes() {
    let o = tool(&["verify", "--d", "2", "--h", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(v["spectrum_max_deviation"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["passed"], true);
    assert_eq!(v["n"], 31);
    assert_eq!(v["tool_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn wilson_small_tree_is_vacuous() {
    let o = tool(&["wilson", "--d", "2", "--h", "3", "--epsilon", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["vacuous"], true);
    for key in [
        "d",
        "h",
        "n",
        "epsilon",
        "lambda2",
        "lambda_prime",
        "gamma",
        "f_id",
        "r_closed_form",
        "r_computed",
        "t0_closed_form_r",
        "t0_computed_r",
        "vacuous",
        "real_x_regime",
    ] {
        assert!(!v[key].is_null(), "missing {key}");
    }
    let obj = v.as_object().unwrap();
    assert!(obj.values().all(|x| !x.is_object() && !x.is_array()));
}

#[test]
fn gap_report_fields() {
    let v = json(&tool(&["gap", "--d", "2", "--h", "2"]));
    assert!(
        (v["interchange_gap"].as_f64().unwrap() - 0.25 * v["gap"].as_f64().unwrap()).abs() < 1e-15
    );
    assert!((v["gap"].as_f64().unwrap() - 0.0893163974770).abs() < 1e-10);
}

#[test]
fn output_is_byte_identical() {
    let args = [
        "simulate", "--d", "2", "--h", "2", "--steps", "20", "--trials", "300", "--seed", "9",
    ];
    let a = tool(&args);
    let b = tool(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let a = tool(&["basis", "--d", "3", "--h", "2"]);
    assert_eq!(a.stdout, tool(&["basis", "--d", "3", "--h", "2"]).stdout);
}

#[test]
fn trace_csv_shape() {
    let o = tool(&[
        "simulate", "--d", "2", "--h", "1", "--steps", "4", "--trials", "3", "--trace",
    ]);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "trial,t,F_value");
    assert_eq!(rows.len(), 1 + 3 * 5);
}

#[test]
fn tv_record() {
    let v = json(&tool(&[
        "simulate", "--d", "2", "--h", "2", "--trials", "1000", "--tv", "0",
    ]));
    assert_eq!(v["p_process"], 1.0);
    assert!(v["lower_bound"].as_f64().unwrap() > 0.8);
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spectrum.csv");
    let o = tool(&[
        "spectrum",
        "--d",
        "3",
        "--h",
        "2",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(&path)
        .unwrap()
        .contains("family,index_k_or_j"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(
        tool(&["spectrum", "--d", "1", "--h", "2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        tool(&["spectrum", "--d", "2", "--h", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(tool(&["spectrum", "--d", "2"]).status.code(), Some(2));
    assert_eq!(tool(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        tool(&["wilson", "--d", "2", "--h", "3", "--epsilon", "1.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        tool(&["simulate", "--d", "2", "--h", "2", "--trials", "10", "--tv", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        tool(&["verify", "--d", "2", "--h", "20"]).status.code(),
        Some(2)
    );
    let o = tool(&[
        "spectrum",
        "--d",
        "2",
        "--h",
        "2",
        "--output",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
