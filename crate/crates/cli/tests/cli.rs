use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qpc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpc"))
        .args(args)
        .env("QPC_OUTPUT_DIR", dir)
        .output()
        .expect("qpc runs")
}

fn status(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn equal_strings_compare_equal() {
    let dir = TempDir::new().unwrap();
    let out = qpc(
        dir.path(),
        &["compare", "--di", "--a", "1011", "--b", "1011", "--seed", "7"],
    );
    assert_eq!(status(&out), 0);
    assert!(stdout(&out).contains("verdict: equal"));
    let artifact = read_json(&dir.path().join("transcript.json"));
    assert_eq!(artifact["verdict"]["result"], "equal");
    assert_eq!(artifact["transcript"]["n"], 4);
}

#[test]
fn compare_replays_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    for name in ["first.json", "second.json"] {
        let out = qpc(
            dir.path(),
            &[
                "compare", "--di", "--a", "1011", "--b", "1010", "--seed", "7", "--output", name,
            ],
        );
        assert_eq!(status(&out), 0);
    }
    let first = fs::read(dir.path().join("first.json")).unwrap();
    assert_eq!(first, fs::read(dir.path().join("second.json")).unwrap());
    let verdict = &read_json(&dir.path().join("first.json"))["verdict"]["result"];
    assert!(verdict == "equal" || verdict == "not_equal", "{verdict}");
}

#[test]
fn qubit_transcripts_have_no_box_events() {
    let dir = TempDir::new().unwrap();
    let out = qpc(
        dir.path(),
        &["compare", "--dd", "--n", "20", "--seed", "3", "--output", "dd.json"],
    );
    assert_eq!(status(&out), 0);
    let artifact = read_json(&dir.path().join("dd.json"));
    let events = artifact["transcript"]["events"].as_array().unwrap();
    assert!(!events.is_empty());
    for event in events {
        let kind = event["type"].as_str().unwrap();
        assert!(kind == "gamma" || kind == "compare", "{kind}");
        assert!(event.get("pair").is_none());
    }
}

#[test]
fn usage_errors_exit_64() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["compare", "--di", "--a", "10x1", "--b", "1011"][..],
        &["compare", "--di", "--a", "101", "--b", "1011"],
        &["compare", "--a", "1011", "--b", "1011"],
        &["compare", "--di", "--schedule", "interleaved:0"],
        &["compare", "--di", "--n", "65"],
        &["compare", "--di", "--c-min", "3"],
        &["abort-dist", "--p-guess", "1.5"],
        &["attack", "psychic"],
        &["attack", "timer", "--format", "svg"],
        &["leakage-curve", "--p-guess", "1"],
    ] {
        let out = qpc(dir.path(), args);
        assert_eq!(status(&out), 64, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn caught_cheating_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = qpc(
        dir.path(),
        &[
            "compare",
            "--di",
            "--n",
            "8",
            "--fraction-local",
            "1",
            "--cheat",
            "alice",
            "--method",
            "local-readout",
            "--schedule",
            "sequential",
        ],
    );
    assert_eq!(status(&out), 2);
    let artifact = read_json(&dir.path().join("transcript.json"));
    assert_eq!(artifact["verdict"]["result"], "cheat_detected");
}

#[test]
fn abort_distribution_is_geometric() {
    let dir = TempDir::new().unwrap();
    let out = qpc(dir.path(), &["abort-dist", "--p-guess", "0.91", "--n", "50"]);
    assert_eq!(status(&out), 0);
    let (header, rows) = csv_rows(&fs::read_to_string(dir.path().join("abort_dist.csv")).unwrap());
    assert_eq!(header, ["m", "p_abort"]);
    assert_eq!(rows.len(), 25);
    assert_eq!(rows[0][0], "2");
    let p: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((p[0] - 0.09).abs() < 1e-12);
    assert!(p.windows(2).all(|w| w[1] < w[0]));

    let out = qpc(dir.path(), &["abort-dist", "--p-guess", "0", "--output", "zero.csv"]);
    assert_eq!(status(&out), 0);
    assert_eq!(
        fs::read_to_string(dir.path().join("zero.csv")).unwrap(),
        "m,p_abort\n2,1.0\n"
    );
}

#[test]
fn monte_carlo_overlay_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let args = |name: &'static str| {
        [
            "abort-dist",
            "--n",
            "12",
            "--trials",
            "3000",
            "--check-rounds",
            "200",
            "--seed",
            "5",
            "--output",
            name,
        ]
    };
    assert_eq!(status(&qpc(dir.path(), &args("one.csv"))), 0);
    assert_eq!(status(&qpc(dir.path(), &args("two.csv"))), 0);
    let text = fs::read_to_string(dir.path().join("one.csv")).unwrap();
    assert_eq!(text, fs::read_to_string(dir.path().join("two.csv")).unwrap());
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["m", "p_abort", "mc_estimate", "mc_stderr"]);
    for row in rows {
        let v: Vec<f64> = row.iter().map(|c| c.parse().unwrap()).collect();
        assert!((v[2] - v[1]).abs() <= 4.0 * v[3], "{row:?}");
    }
}

#[test]
fn leakage_curves_stay_under_their_bounds() {
    let dir = TempDir::new().unwrap();
    let out = qpc(dir.path(), &["leakage-curve", "--n-max", "1000"]);
    assert_eq!(status(&out), 0);
    let (header, rows) = csv_rows(&fs::read_to_string(dir.path().join("leakage_curve.csv")).unwrap());
    assert_eq!(header, ["n", "i_a_bits", "series"]);
    assert_eq!(rows.len(), 3 * 999);
    let p_max = (std::f64::consts::PI / 8.0).cos().powi(2);
    for (series, p, bound) in [("0.91", 0.91, 23.0), ("0.99", 0.99, 200.0), ("pmax", p_max, 14.0)] {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| r[2] == series)
            .map(|r| r[1].parse().unwrap())
            .collect();
        let max = values.iter().cloned().fold(0.0, f64::max);
        assert!(max <= bound, "{series}: {max}");
        // Even n = 1000: 500 geometric terms.
        let at_1000 = 2.0 * (1.0 - f64::powi(p, 500)) / (1.0 - p);
        assert!((values.last().unwrap() - at_1000).abs() < 1e-9, "{series}");
    }
}

#[test]
fn svg_is_written_for_plots() {
    let dir = TempDir::new().unwrap();
    for command in ["abort-dist", "leakage-curve"] {
        let out = qpc(dir.path(), &[command, "--format", "svg", "--output", "-"]);
        assert_eq!(status(&out), 0);
        let text = stdout(&out);
        assert!(
            text.starts_with("<svg") && text.trim_end().ends_with("</svg>"),
            "{command}"
        );
    }
}

#[test]
fn timer_attack_depends_on_the_schedule() {
    let dir = TempDir::new().unwrap();
    let out = qpc(dir.path(), &["attack", "timer", "--trials", "60", "--n", "16"]);
    assert_eq!(status(&out), 0);
    let report = read_json(&dir.path().join("attack.json"));
    let runs = report["runs"].as_array().unwrap();
    assert_eq!(runs[0]["schedule"], "sequential");
    assert!(runs[0]["detection_rate"].as_f64().unwrap() <= 0.01);
    assert!(runs[0]["guess_rate"].as_f64().unwrap() >= 0.99);
    assert_eq!(runs[1]["schedule"], "interleaved:32");
    assert!(runs[1]["detection_rate"].as_f64().unwrap() >= 0.99);
}

#[test]
fn remote_attack_breaks_the_ordering_rule() {
    let dir = TempDir::new().unwrap();
    let out = qpc(
        dir.path(),
        &["attack", "remote", "--trials", "20", "--n", "8", "--output", "-"],
    );
    assert_eq!(status(&out), 0);
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for run in report["runs"].as_array().unwrap() {
        assert_eq!(run["report"]["detection_reasons"]["ordering_violation"], 20);
    }
}

#[test]
fn chsh_interpolates_between_quantum_and_local() {
    let dir = TempDir::new().unwrap();
    let out = qpc(
        dir.path(),
        &[
            "chsh",
            "--fraction-local",
            "0,0.25,0.5,0.75,1",
            "--check-rounds",
            "20000",
        ],
    );
    assert_eq!(status(&out), 0);
    let (header, rows) = csv_rows(&fs::read_to_string(dir.path().join("chsh.csv")).unwrap());
    assert_eq!(
        header,
        [
            "fraction_local",
            "c1",
            "c1_stderr",
            "c2",
            "c2_stderr",
            "c1_expected",
            "c2_expected",
            "passes"
        ]
    );
    for row in &rows {
        let v: Vec<f64> = row[..7].iter().map(|c| c.parse().unwrap()).collect();
        assert!((v[1] - v[5]).abs() <= 3.0 * v[2] + 1e-12, "{row:?}");
        assert!((v[3] - v[6]).abs() <= 3.0 * v[4] + 1e-12, "{row:?}");
    }
    assert_eq!(rows.last().unwrap()[7], "false");
}

#[test]
fn fixed_tables_never_exceed_two() {
    let dir = TempDir::new().unwrap();
    for rule in ["constant", "independent"] {
        let out = qpc(
            dir.path(),
            &["theorem1", "--table-rule", rule, "--format", "json", "--output", "-"],
        );
        assert_eq!(status(&out), 0, "{rule}");
        let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(report["tables_checked"], 128);
        for row in report["rows"].as_array().unwrap() {
            assert!(row["c1"].as_f64().unwrap() <= 2.0, "{rule}: {row}");
        }
    }
}
