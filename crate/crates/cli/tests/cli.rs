use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bdpsim_cli::{emit_grid, emit_summary, parse_config, report, OutputError};
use bdpsim_core::scenarios::{run_convergence_grid, run_repetitions, ScenarioConfig, MB};
use bdpsim_core::ResumeMode;

fn bdpsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdpsim"))
        .args(args)
        .output()
        .unwrap()
}

fn one_cell(dir: &Path, seed: &str) -> Output {
    bdpsim(&[
        "grid",
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        seed,
        "--set",
        "grid.rtts=200ms",
        "--set",
        "grid.rates=10Mbps/2Mbps",
        "--set",
        "grid.sizes=500KB",
    ])
}

#[test]
fn config_file_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    fs::write(
        &path,
        "# satellite\nrtt = 600ms\nforward.rate = 10 furlongs\n",
    )
    .unwrap();
    let err = parse_config(&path).unwrap_err();
    assert_eq!(err.code(), "BAD_UNIT");
    assert!(err.to_string().starts_with("line 3:"), "{err}");

    fs::write(&path, "rtt = 600ms\nfoo.bar = 1\n").unwrap();
    let err = parse_config(&path).unwrap_err();
    assert_eq!(err.code(), "UNKNOWN_KEY");
    assert!(err.to_string().starts_with("line 2:"), "{err}");

    assert_eq!(
        parse_config(dir.path().join("absent.conf"))
            .unwrap_err()
            .code(),
        "IO"
    );
}

#[test]
fn rate_override_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.conf");
    fs::write(&path, "forward.rate = 1Mbps\nreturn.rate = 100kbps\n").unwrap();
    let cfg = parse_config(&path).unwrap();
    assert_eq!(cfg.forward_rate_bps, 1_000_000);
    assert_eq!(cfg.return_rate_bps, 100_000);
    assert_eq!(cfg.forward_link().rate_bps, 1_000_000);
}

#[test]
fn single_cell_grid_has_header_and_one_row() {
    let mut cfg = ScenarioConfig::default();
    cfg.grid.rtts_us = vec![200_000];
    cfg.grid.rate_pairs = vec![(10_000_000, 2_000_000)];
    cfg.grid.sizes_bytes = vec![MB / 2];
    let dir = tempfile::tempdir().unwrap();
    let path = emit_grid(&run_convergence_grid(&cfg), dir.path()).unwrap();
    let text = fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "rtt_ms,fwd_rate_bps,size_bytes,transfer_time_s,utilization"
    );
    assert!(
        lines[1].starts_with("200.000,10000000,500000,"),
        "{}",
        lines[1]
    );
    assert!(!text.contains('\r'));
}

#[test]
fn empty_metrics_are_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        emit_grid(&[], dir.path()),
        Err(OutputError::Empty(_))
    ));
    assert!(matches!(
        emit_summary(&[], dir.path()),
        Err(OutputError::Empty(_))
    ));
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("not_a_dir");
    fs::write(&file, "").unwrap();
    let cfg = ScenarioConfig {
        repetitions: 1,
        ..ScenarioConfig::default()
    };
    let rows = run_repetitions(&cfg, &[MB / 2], &[ResumeMode::Fresh]);
    assert!(matches!(
        emit_summary(&rows, &file),
        Err(OutputError::Io { .. })
    ));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(one_cell(a.path(), "7").status.success());
    assert!(one_cell(b.path(), "7").status.success());
    let ga = fs::read(a.path().join("grid.csv")).unwrap();
    let gb = fs::read(b.path().join("grid.csv")).unwrap();
    assert_eq!(ga, gb);
}

#[test]
fn summary_orders_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let out = bdpsim(&[
        "resume",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "resume.repetitions=6",
        "--set",
        "resume.jitter_load=0.3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut modes = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (min, avg, max): (f64, f64, f64) = (
            f[1].parse().unwrap(),
            f[2].parse().unwrap(),
            f[3].parse().unwrap(),
        );
        assert!(min <= avg && avg <= max, "{line}");
        modes.push(f[0].to_string());
    }
    assert_eq!(modes, ["fresh", "0rtt", "bdp"]);

    let tokens = fs::read_to_string(dir.path().join("tokens.tsv")).unwrap();
    assert_eq!(tokens.lines().count(), 1);
    assert_eq!(tokens.lines().next().unwrap().split('\t').count(), 4);

    let table = bdpsim(&["report", "--out", dir.path().to_str().unwrap()]);
    assert!(table.status.success());
    let stdout = String::from_utf8(table.stdout).unwrap();
    assert!(
        stdout.contains("fresh") && stdout.contains("bdp"),
        "{stdout}"
    );
}

#[test]
fn report_without_csv_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        report(dir.path()),
        Err(OutputError::Missing { .. })
    ));
    let out = bdpsim(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("summary.csv"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();

    let out = bdpsim(&["grid", "--out", d, "--set", "forward.rate=-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("BAD_UNIT"));

    let out = bdpsim(&["grid", "--out", d, "--set", "nope=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UNKNOWN_KEY"));

    let out = bdpsim(&["grid", "--out", d, "--set", "rtt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MISSING_FIELD"));

    assert_eq!(bdpsim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        bdpsim(&["grid", "--config", "/nonexistent/x.conf"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(bdpsim(&["--help"]).status.code(), Some(0));

    // Output path is a regular file: runtime error.
    let file = dir.path().join("file");
    fs::write(&file, "").unwrap();
    assert_eq!(one_cell(&file, "1").status.code(), Some(2));

    assert_eq!(one_cell(dir.path(), "1").status.code(), Some(0));
}

#[test]
fn contend_writes_series_for_all_flows() {
    let dir = tempfile::tempdir().unwrap();
    let out = bdpsim(&[
        "contend",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "transfer.mode=bdp",
        "--set",
        "contention.horizon=65s",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("t_s,flow_id,rate_bps"));
    let mut ids: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids, ["1", "2", "3"]);
}
