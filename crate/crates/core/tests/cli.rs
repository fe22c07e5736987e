use std::path::Path;
use std::process::{Command, Output};

use minee::experiment::{preset, read_summary, read_trace, NOT_CONVERGED};

fn minee(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minee"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn short_run(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["run", "--iterations", "30", "--eval-every", "10", "--out", out];
    args.extend_from_slice(extra);
    minee(&args)
}

#[test]
fn ground_truth_prints_value_and_method() {
    let hg = minee(&["ground-truth", "--model", "hg", "--rho", "0.9", "--d", "6"]);
    assert!(hg.status.success());
    let text = stdout(&hg);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("4.98219"));
    assert_eq!(lines.next(), Some("method: closed form"));

    let mg = minee(&["ground-truth", "--model", "mg"]);
    assert!(mg.status.success());
    let text = stdout(&mg);
    assert!(text.starts_with("0.40844\n"), "{text}");
    assert!(text.contains("quadrature"));

    let zero = minee(&["ground-truth", "--model", "hg", "--rho", "0"]);
    assert_eq!(stdout(&zero).lines().next(), Some("0.00000"));
}

#[test]
fn ground_truth_rejects_bad_rho() {
    let o = minee(&["ground-truth", "--model", "mg", "--rho", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rho"), "{}", stderr(&o));
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = short_run(dir.path(), &["--preset", "mg09-minee", "--hidden", "8,8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("estimate "));

    let summary = read_summary(dir.path()).unwrap();
    let trace = read_trace(dir.path()).unwrap();
    assert_eq!(summary.preset.as_deref(), Some("mg09-minee"));
    assert_eq!(summary.config.network.hidden_widths, vec![8, 8]);
    assert_eq!(summary.recorded_points, 3);
    let iterations: Vec<u64> = trace.rows.iter().map(|r| r.iteration).collect();
    assert_eq!(iterations, vec![10, 20, 30]);
    assert_eq!(summary.final_smoothed_estimate, Some(trace.rows[2].smoothed_estimate));
    assert!(!summary.diverged);

    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("iteration,raw_estimate,smoothed_estimate,loss"));
}

#[test]
fn zero_iterations_leaves_an_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = minee(&["run", "--iterations", "0", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = read_summary(dir.path()).unwrap();
    assert_eq!(summary.recorded_points, 0);
    assert_eq!(summary.final_smoothed_estimate, None);
    assert_eq!(summary.convergence_iteration, None);
    assert!(read_trace(dir.path()).unwrap().rows.is_empty());
}

#[test]
fn saved_config_reproduces_the_trace() {
    let first = tempfile::tempdir().unwrap();
    let o = short_run(first.path(), &["--mode", "mine", "--seed", "5", "--hidden", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = read_summary(first.path()).unwrap();

    let second = tempfile::tempdir().unwrap();
    let mut flags = summary.config.to_flags();
    flags.insert(0, "run".into());
    flags.push("--out".into());
    flags.push(second.path().to_str().unwrap().into());
    let args: Vec<&str> = flags.iter().map(String::as_str).collect();
    let o = minee(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    assert_eq!(read_summary(second.path()).unwrap().config, summary.config);
    let a = std::fs::read(first.path().join("trace.csv")).unwrap();
    let b = std::fs::read(second.path().join("trace.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn preset_flags_round_trip() {
    for name in minee::experiment::PRESET_NAMES {
        let config = preset(name).unwrap();
        let flags = config.to_flags();
        assert!(flags.iter().any(|f| f == "--lr"), "{name}: {flags:?}");
    }
}

#[test]
fn compare_tabulates_runs() {
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("quick");
    let b = root.path().join("empty");
    assert!(short_run(&a, &["--hidden", "4"]).status.success());
    assert!(minee(&["run", "--iterations", "0", "--out", b.to_str().unwrap()]).status.success());

    let o = minee(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].starts_with("run"));
    assert!(lines[1].starts_with("quick"));
    assert!(lines[2].starts_with("empty"));
    assert!(lines[2].split_whitespace().any(|c| c == NOT_CONVERGED));
}

#[test]
fn compare_names_a_malformed_summary() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("summary.json"), "{ not json").unwrap();
    let o = minee(&["compare", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("summary.json") && err.contains("malformed"), "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["run", "--batch-size", "1000", "--out", out],
        vec!["run", "--lr", "-1", "--out", out],
        vec!["run", "--preset", "nope", "--out", out],
        vec!["run", "--mode", "both", "--out", out],
        vec!["run"],
    ] {
        let o = minee(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn divergence_exits_with_three_and_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = short_run(dir.path(), &["--lr", "1e200", "--hidden", "4"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let summary = read_summary(dir.path()).unwrap();
    assert!(summary.diverged);
    assert!(summary.divergence.is_some());
    assert!(dir.path().join("trace.csv").exists());
}
