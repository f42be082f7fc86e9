use std::process::{Command, Output};

use serde_json::Value;

const LN_1_5: f64 = 0.405_465_108_108_164_4;

fn privmask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privmask"))
        .args(args)
        .output()
        .expect("run privmask")
}

fn ok_stdout(args: &[&str]) -> String {
    let out = privmask(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok_stdout(args)).unwrap()
}

fn num(v: &Value) -> f64 {
    match v {
        Value::Number(n) => n.as_f64().unwrap(),
        Value::String(s) if s == "inf" => f64::INFINITY,
        other => panic!("not a number: {other}"),
    }
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn parse(text: &str) -> Self {
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# schema=1"));
        let header = lines.next().unwrap().split(',').map(String::from).collect::<Vec<_>>();
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        for r in &rows {
            assert_eq!(r.len(), header.len());
        }
        Self { header, rows }
    }

    fn col(&self, name: &str) -> Vec<f64> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name}"));
        self.rows
            .iter()
            .map(|r| {
                if r[i] == "inf" {
                    f64::INFINITY
                } else {
                    r[i].parse().unwrap()
                }
            })
            .collect()
    }
}

fn error_kind(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap();
    let v: Value = serde_json::from_str(line).unwrap();
    assert!(v["message"].is_string());
    v["error"].as_str().unwrap().to_string()
}

const FIG2: [&str; 12] = [
    "--a", "1", "--k", "-1", "--w", "0.05", "--m", "0", "--n", "0.05", "--q", "1",
];

#[test]
fn analyze_reference_point() {
    let mut args = vec!["analyze"];
    args.extend(FIG2);
    args.extend(["--r", "1"]);
    let v = json(&args);
    assert!((num(&v["mi_nats"]) - 0.827_786).abs() < 1e-6);
    assert!((num(&v["cost"]) - 0.25).abs() < 1e-12);
    assert!((num(&v["sigma"]) - 0.080_901_7).abs() < 1e-7);
    assert_eq!(v["diagnostics"]["boundary"], "Ok");
}

#[test]
fn analyze_divergent_uplink_serializes_inf() {
    let out = ok_stdout(&[
        "analyze", "--a", "1", "--k", "-1", "--w", "0.05", "--m", "0", "--n", "0",
    ]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["mi_nats"], "inf");
    assert_eq!(v["diagnostics"]["boundary"], "UplinkUnbounded");
    assert!(!out.contains("NaN") && !out.contains("null"));
}

#[test]
fn validation_errors_exit_2_with_error_object() {
    let out = privmask(&["analyze", "--a", "1", "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "ZeroGain");

    let out = privmask(&["analyze", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "InvalidArgument");

    let out = privmask(&["analyze", "--a", "1", "--k", "-1", "--n", "-0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "NegativeVariance");

    let out = privmask(&["grid", "--a", "1", "--k", "-1", "--m-range", "0.5:0.1:3"]);
    assert_eq!(out.status.code(), Some(2));

    let out = privmask(&["alpha-sweep", "--a", "1", "--k", "-1", "--alpha-range", "0:1:5"]);
    assert_eq!(out.status.code(), Some(2));

    let out = privmask(&["analyze", "--a", "1", "--k", "-1", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "Usage");
}

#[test]
fn grid_rows_minimize_near_the_optimal_ratio_line() {
    let csv = Csv::parse(&ok_stdout(&["grid", "--a", "1", "--k", "-1", "--w", "0.05"]));
    assert_eq!(
        csv.header,
        [
            "m",
            "n",
            "alpha",
            "sigma",
            "uplink_nats",
            "downlink_nats",
            "mi_nats",
            "cost"
        ]
    );
    assert_eq!(csv.rows.len(), 2500);
    let (m, n, mi) = (csv.col("m"), csv.col("n"), csv.col("mi_nats"));
    let alpha_star = 0.884_646_177_119_315_7;
    let step = (0.5 - 0.01) / 49.0;
    for row in 0..50 {
        let cells = row * 50..(row + 1) * 50;
        let best = cells.clone().min_by(|&i, &j| mi[i].total_cmp(&mi[j])).unwrap();
        let target = alpha_star * (m[best] + 0.05);
        // the optimum may sit past the top of the n range
        let expected = target.min(0.5);
        assert!(
            (n[best] - expected).abs() <= step + 1e-12,
            "m={} n={} target={target}",
            m[best],
            n[best]
        );
    }
}

#[test]
fn single_cell_grid_matches_analyze() {
    let csv = Csv::parse(&ok_stdout(&[
        "grid",
        "--a",
        "1",
        "--k",
        "-1",
        "--w",
        "0.05",
        "--m-range",
        "0:0:1",
        "--n-range",
        "0.05:0.05:1",
    ]));
    let v = json(&[
        "analyze", "--a", "1", "--k", "-1", "--w", "0.05", "--m", "0", "--n", "0.05",
    ]);
    assert_eq!(csv.rows.len(), 1);
    for key in ["sigma", "uplink_nats", "downlink_nats", "mi_nats", "cost"] {
        assert_eq!(csv.col(key)[0], num(&v[key]), "{key}");
    }
}

#[test]
fn analyze_along_fixed_ratio_line_is_constant() {
    let alpha = 0.7;
    let mut values = Vec::new();
    for m in [0.0, 0.01, 0.1, 0.3, 1.0] {
        let m_s = m.to_string();
        let a_s = alpha.to_string();
        let v = json(&[
            "analyze", "--a", "1.2", "--k", "-0.9", "--w", "0.05", "--m", &m_s, "--alpha", &a_s,
        ]);
        values.push(num(&v["mi_nats"]));
    }
    let spread = values.iter().cloned().fold(f64::MIN, f64::max) - values.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread <= 1e-12, "{values:?}");
}

#[test]
fn alpha_sweep_minimum() {
    let csv = Csv::parse(&ok_stdout(&["alpha-sweep", "--a", "1", "--k", "-1"]));
    assert_eq!(csv.rows.len(), 601);
    let (alpha, mi) = (csv.col("alpha"), csv.col("mi_nats"));
    let i = (0..mi.len()).min_by(|&i, &j| mi[i].total_cmp(&mi[j])).unwrap();
    let ratio = alpha[1] / alpha[0];
    assert!(alpha[i] / 0.884_646 < ratio && 0.884_646 / alpha[i] < ratio);
    assert!((mi[i] - 0.8262).abs() < 1e-4);
    assert!(mi[0] > mi[1] && mi[600] > mi[599]);

    let csv = Csv::parse(&ok_stdout(&["alpha-sweep", "--a", "0", "--k", "0.5"]));
    let (alpha, mi) = (csv.col("alpha"), csv.col("mi_nats"));
    let i = (0..mi.len()).min_by(|&i, &j| mi[i].total_cmp(&mi[j])).unwrap();
    assert!(alpha[i] / 2.0 < ratio && 2.0 / alpha[i] < ratio);
    assert!((mi[i] - LN_1_5).abs() < 1e-4);
}

#[test]
fn alpha_sweep_root_form_column() {
    let csv = Csv::parse(&ok_stdout(&[
        "alpha-sweep",
        "--a",
        "1",
        "--k",
        "-1",
        "--alpha-range",
        "0.1:10:3",
        "--root-form",
    ]));
    assert_eq!(csv.header.last().unwrap(), "mi_root_form_nats");
    let csv = Csv::parse(&ok_stdout(&[
        "alpha-sweep",
        "--a",
        "1",
        "--k",
        "-1",
        "--alpha-range",
        "0.1:10:3",
        "--root-form",
        "--bits",
    ]));
    assert_eq!(
        csv.header,
        ["alpha", "uplink_bits", "downlink_bits", "mi_bits", "mi_root_form_bits"]
    );
}

#[test]
fn design_examples() {
    let v = json(&["design", "--a", "0", "--k", "0.5", "--w", "0.05"]);
    assert!((num(&v["alpha_star"]) - 2.0).abs() < 1e-9);
    assert!((num(&v["mi_min_nats"]) - LN_1_5).abs() < 1e-9);
    assert!((num(&v["recommended"]["n"]) - 0.1).abs() < 1e-9);
    assert_eq!(num(&v["recommended"]["m"]), 0.0);

    let out = privmask(&["design", "--a", "0", "--k", "0.5", "--w", "0.05"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));

    let v = json(&["design", "--a", "1", "--k", "-1", "--w", "0.05", "--lambda", "0,1"]);
    let t = v["tradeoff"].as_array().unwrap();
    assert_eq!(t.len(), 2);
    assert!((num(&t[0]["alpha"]) - 0.884_65).abs() < 1e-5);
    assert!((num(&t[1]["alpha"]) - 0.59).abs() < 0.01);
    assert!((num(&t[1]["objective"]) - 1.032).abs() < 1e-3);

    let out = privmask(&["design", "--a", "1", "--k", "-1", "--w", "0", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "ZeroProcessNoise");
}

#[test]
fn simulate_small_run_is_deterministic_and_rejects_unstable_loops() {
    let args = [
        "simulate",
        "--a",
        "1",
        "--k",
        "-1",
        "--w",
        "0.05",
        "--m",
        "0",
        "--n",
        "0.05",
        "--T",
        "5000",
        "--trajectories",
        "8",
        "--burn-in",
        "100",
        "--seed",
        "3",
    ];
    let a = ok_stdout(&args);
    assert_eq!(a, ok_stdout(&args));
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(num(&v["closed_form_cost"]), 0.25);
    assert!(v["pass"].is_boolean());

    let out = privmask(&["simulate", "--a", "0.9", "--k", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "UnstableClosedLoop");

    let out = privmask(&["simulate", "--a", "0.5", "--k", "-0.5", "--T", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "HorizonTooShort");
}

#[test]
fn verify_rows_and_exit_codes() {
    let out = privmask(&["verify", "--a", "1", "--k", "-1", "--T", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = Csv::parse(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(csv.header, ["name", "lhs", "rhs", "abs_err", "pass", "informational"]);
    assert_eq!(csv.rows[0][0], "conservation");
    assert!((csv.col("lhs")[0] - std::f64::consts::LN_2).abs() < 1e-12);

    let out = privmask(&["verify", "--a", "1", "--k", "-1", "--T", "50"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "HorizonTooLarge");

    // the estimate sequence drops Y_0 for T >= 2, so the totals row fails
    let out = privmask(&["verify", "--a", "1", "--k", "-1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["all_pass"], false);
    let failing: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false && c["informational"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failing, ["invertibility_totals"]);
}

#[test]
fn config_file_matches_flags_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"a": 1, "k": -1, "w": 0.05, "m": 0.02, "n": 0.07, "lambda": [0, 1], "n-range": "0.01:0.2:4", "m-range": "0:0.1:3"}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let flags = ["--a", "1", "--k", "-1", "--w", "0.05", "--m", "0.02", "--n", "0.07"];
    for cmd in ["analyze", "design", "verify"] {
        let mut by_flags = vec![cmd];
        by_flags.extend(flags);
        if cmd == "design" {
            by_flags.extend(["--lambda", "0,1"]);
        }
        let by_file = privmask(&[cmd, "--config", c]);
        let direct = privmask(&by_flags);
        assert_eq!(by_file.stdout, direct.stdout, "{cmd}");
        assert_eq!(by_file.status.code(), direct.status.code());
    }
    assert_eq!(
        ok_stdout(&["grid", "--config", c]),
        ok_stdout(&[
            "grid",
            "--a",
            "1",
            "--k",
            "-1",
            "--w",
            "0.05",
            "--n-range",
            "0.01:0.2:4",
            "--m-range",
            "0:0.1:3"
        ])
    );

    let overridden = json(&["analyze", "--config", c, "--n", "0.05", "--m", "0"]);
    let direct = json(&[
        "analyze", "--a", "1", "--k", "-1", "--w", "0.05", "--m", "0", "--n", "0.05",
    ]);
    assert_eq!(overridden, direct);

    std::fs::write(&cfg, r#"{"a": 1, "k": -1, "typo": 3}"#).unwrap();
    let out = privmask(&["analyze", "--config", c]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_and_csv_round_trip_at_full_precision() {
    let csv_text = ok_stdout(&[
        "alpha-sweep",
        "--a",
        "1.3",
        "--k",
        "-0.8",
        "--alpha-range",
        "0.001:1000:37",
    ]);
    let json_text = ok_stdout(&[
        "alpha-sweep",
        "--a",
        "1.3",
        "--k",
        "-0.8",
        "--alpha-range",
        "0.001:1000:37",
        "--format",
        "json",
    ]);
    let csv = Csv::parse(&csv_text);
    let rows: Vec<Value> = serde_json::from_str(&json_text).unwrap();
    assert_eq!(rows.len(), csv.rows.len());
    for (i, row) in rows.iter().enumerate() {
        for (j, key) in csv.header.iter().enumerate() {
            let from_csv: f64 = csv.rows[i][j].parse().unwrap();
            assert_eq!(from_csv.to_bits(), num(&row[key]).to_bits());
            // shortest round-trip form re-serializes identically
            assert_eq!(serde_json::to_string(&from_csv).unwrap(), csv.rows[i][j]);
        }
    }
}

#[test]
fn bits_only_rescales_information() {
    let nats = json(&["analyze", "--a", "1", "--k", "-1"]);
    let bits = json(&["analyze", "--a", "1", "--k", "-1", "--bits"]);
    assert_eq!(nats["cost"], bits["cost"]);
    assert_eq!(nats["sigma"], bits["sigma"]);
    assert!((num(&bits["mi_bits"]) - num(&nats["mi_nats"]) / std::f64::consts::LN_2).abs() < 1e-15);
    assert!(bits.get("mi_nats").is_none());
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let p = path.to_str().unwrap();
    let out = privmask(&[
        "alpha-sweep",
        "--a",
        "1",
        "--k",
        "-1",
        "--alpha-range",
        "1:2:2",
        "--output",
        p,
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# schema=1\nalpha,"));
}
