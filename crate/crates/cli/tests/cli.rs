use std::path::Path;
use std::process::{Command, Output};

fn ftmux(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftmux"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows as (header, rows), skipping `#` comments.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn field(header: &[String], row: &[String], name: &str) -> f64 {
    let i = header.iter().position(|h| h == name).unwrap();
    row[i].parse().unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn losses_validate_reports_and_passes() {
    let out = ftmux(&["losses", "validate"]);
    let text = stdout(&out);
    assert!(text.contains("circulator           0.500 dB / 10.9 %"));
    assert!(text.contains("PASS"));
    let text = stdout(&ftmux(&["losses", "validate", "--preset", "lossless"]));
    assert!(!text.contains("PASS") && !text.contains("FAIL"));
}

#[test]
fn losses_validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let base: serde_json::Value = serde_json::from_str(
        &ftmux_core::SetupConfig::preset(ftmux_core::Preset::OneLoopDefault).to_json_string(),
    )
    .unwrap();

    let mut negative = base.clone();
    negative["loss_table"]["circulator_pass"] = serde_json::json!(-0.5);
    let path = dir.path().join("negative.json");
    write(&path, &negative.to_string());
    let out = ftmux(&["losses", "validate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));

    let path = dir.path().join("broken.json");
    write(&path, "{ not json");
    assert_eq!(
        ftmux(&["losses", "validate", "--config", path.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let missing = dir.path().join("absent.json");
    assert_eq!(
        ftmux(&["losses", "validate", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    // A custom file is reported but not held to the reference values.
    let mut custom = base;
    custom["loss_table"]["circulator_pass"] = serde_json::json!(0.7);
    let path = dir.path().join("custom.json");
    write(&path, &custom.to_string());
    let text = stdout(&ftmux(&[
        "losses",
        "validate",
        "--config",
        path.to_str().unwrap(),
    ]));
    assert!(text.contains("circulator           0.700 dB"));
}

#[test]
fn rate_sweep_rows() {
    let text = stdout(&ftmux(&["rate-sweep", "--n", "4", "--m-max", "10"]));
    assert!(text.lines().any(|l| l.starts_with("# config: {")));
    let (header, rows) = parse_csv(&text);
    assert_eq!(
        &header[..6],
        [
            "n",
            "m",
            "rate_lossless_per_bin",
            "rate_lossy_per_bin",
            "rate_lossless_hz",
            "rate_lossy_hz"
        ]
    );
    assert_eq!(rows.len(), 10);
    assert!((field(&header, &rows[0], "rate_lossless_per_bin") - 2.5e-5).abs() < 1e-15);
    assert!((field(&header, &rows[9], "rate_lossless_per_bin") - 4.499e-3).abs() < 5e-7);
    assert!(
        field(&header, &rows[9], "rate_lossy_per_bin")
            < field(&header, &rows[9], "rate_lossless_per_bin")
    );
}

#[test]
fn lossless_preset_columns_match() {
    let text = stdout(&ftmux(&[
        "rate-sweep",
        "--preset",
        "lossless",
        "--n",
        "2,5",
        "--m-max",
        "12",
    ]));
    let (header, rows) = parse_csv(&text);
    for row in &rows {
        assert_eq!(
            field(&header, row, "rate_lossless_per_bin"),
            field(&header, row, "rate_lossy_per_bin")
        );
    }
}

#[test]
fn max_rate_examples() {
    let text = stdout(&ftmux(&["max-rate", "--preset", "lossless", "--n", "4"]));
    let (header, rows) = parse_csv(&text);
    assert_eq!(field(&header, &rows[0], "m_star"), 22.0);
    assert!((field(&header, &rows[0], "max_rate_lossless") - 7.506e-3).abs() < 1e-6);

    let text = stdout(&ftmux(&[
        "max-rate", "--n", "1..3", "--p", "0", "--m-max", "20",
    ]));
    let (header, rows) = parse_csv(&text);
    assert_eq!(rows.len(), 3);
    for row in &rows {
        for col in ["max_rate_lossless", "max_rate_lossy", "no_multiplexing"] {
            assert_eq!(field(&header, row, col), 0.0);
        }
    }
}

#[test]
fn ratio_sweep_cases() {
    let text = stdout(&ftmux(&["ratio-sweep", "--n", "4", "--p-grid", "0.02,0.1"]));
    assert!(text.contains("preset three-loop"));
    let (header, rows) = parse_csv(&text);
    assert!(field(&header, &rows[0], "ratio") > field(&header, &rows[1], "ratio"));

    let text = stdout(&ftmux(&[
        "ratio-sweep",
        "--preset",
        "lossless",
        "--n",
        "1..4",
        "--p",
        "0.3",
        "--m-max",
        "1",
    ]));
    let (header, rows) = parse_csv(&text);
    for row in &rows {
        let n = field(&header, row, "n");
        assert!((field(&header, row, "ratio") - 1.0 / n).abs() < 1e-12);
    }

    let out = ftmux(&["ratio-sweep", "--p-grid", "0,0.1"]);
    assert_eq!(out.status.code(), Some(2));

    let text = stdout(&ftmux(&["ratio-sweep", "--n", "4", "--m-max", "20"]));
    assert_eq!(parse_csv(&text).1.len(), 25);
}

#[test]
fn epsilon_table_meets_target() {
    let text = stdout(&ftmux(&["epsilon", "--n", "4,8", "--epsilon", "0.1,0.001"]));
    let (header, rows) = parse_csv(&text);
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let eps = field(&header, row, "epsilon");
        assert!(field(&header, row, "success_at_m_epsilon") >= 1.0 - eps);
    }
}

#[test]
fn mc_partial_certain_photons() {
    let text = stdout(&ftmux(&[
        "mc-partial",
        "--preset",
        "lossless",
        "--p",
        "1",
        "--samples",
        "1",
        "--n",
        "3",
        "--m-max",
        "1",
    ]));
    let (header, rows) = parse_csv(&text);
    // Success 1 at m=1 over 2n bins of time means rate 1/(2n).
    assert_eq!(field(&header, &rows[0], "rate_partial"), 1.0 / 6.0);
    assert_eq!(field(&header, &rows[0], "stderr"), 0.0);
    assert_eq!(
        rows[0][header.iter().position(|h| h == "occupancy_model").unwrap()],
        "unlimited"
    );
}

#[test]
fn mc_partial_same_seed_same_bytes() {
    let args = [
        "mc-partial",
        "--n",
        "2",
        "--m-max",
        "5",
        "--samples",
        "20000",
        "--seed",
        "3",
    ];
    let a = ftmux(&args);
    let b = ftmux(&args);
    assert_eq!(stdout(&a), stdout(&b));
    let mut other = args.to_vec();
    other[8] = "4";
    assert_ne!(stdout(&ftmux(&other)), stdout(&a));
}

#[test]
fn json_output_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("max.json");
    let out = ftmux(&[
        "max-rate",
        "--n",
        "4",
        "--m-max",
        "30",
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(stdout(&out).is_empty());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["command"], "max-rate");
    assert_eq!(doc["columns"][1], "m_star");
    assert_eq!(doc["rows"][0][0], 4);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["rate-sweep", "--n", "0"],
        vec!["rate-sweep", "--n", "x"],
        vec!["rate-sweep", "--m-max", "0"],
        vec!["rate-sweep", "--variant", "partial"],
        vec!["max-rate", "--p", "2"],
        vec!["max-rate", "--preset", "nope"],
        vec!["max-rate", "--format", "xml"],
        vec!["mc-partial", "--samples", "0"],
        vec!["no-such-command"],
    ] {
        assert_eq!(ftmux(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn grid_snapshot() {
    let text = stdout(&ftmux(&[
        "grid", "--n", "2", "--m", "3", "--seed", "5", "--p", "1",
    ]));
    assert!(text.contains("# fill batch 0"));
    assert!(text.contains("# fill batch 1"));
    let again = stdout(&ftmux(&[
        "grid", "--n", "2", "--m", "3", "--seed", "5", "--p", "1",
    ]));
    assert_eq!(text, again);
}

#[test]
fn plot_from_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rate.csv");
    let svg = dir.path().join("rate.svg");
    stdout(&ftmux(&[
        "rate-sweep",
        "--n",
        "4,6",
        "--m-max",
        "40",
        "--out",
        csv.to_str().unwrap(),
    ]));
    stdout(&ftmux(&[
        "plot",
        csv.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]));
    let first = std::fs::read_to_string(&svg).unwrap();
    assert!(first.starts_with("<svg"));
    assert!(first.contains("n=4 lossless") && first.contains("n=6 lossy"));
    stdout(&ftmux(&[
        "plot",
        csv.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]));
    assert_eq!(first, std::fs::read_to_string(&svg).unwrap());

    let ratio = dir.path().join("ratio.csv");
    stdout(&ftmux(&[
        "ratio-sweep",
        "--n",
        "4",
        "--m-max",
        "20",
        "--out",
        ratio.to_str().unwrap(),
    ]));
    assert!(stdout(&ftmux(&["plot", ratio.to_str().unwrap()])).contains("improvement ratio"));
}

#[test]
fn plot_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    write(&empty, "");
    assert_eq!(
        ftmux(&["plot", empty.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let odd = dir.path().join("odd.csv");
    write(&odd, "# comment\nfoo,bar\n1,2\n");
    assert_eq!(
        ftmux(&["plot", odd.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let epsilon = dir.path().join("eps.csv");
    stdout(&ftmux(&["epsilon", "--out", epsilon.to_str().unwrap()]));
    assert_eq!(
        ftmux(&["plot", epsilon.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        ftmux(&["plot", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
}
