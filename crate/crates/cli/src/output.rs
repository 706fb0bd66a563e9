//! CSV tables. Columns are fixed, numbers use `.` decimals with a fixed
//! number of digits, and lines end in `\n`, so two runs with the same seed
//! produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use bdpsim_core::scenarios::{ContentionResult, SummaryRow};
use bdpsim_core::GridCell;
use thiserror::Error;

pub const GRID_CSV: &str = "grid.csv";
pub const SERIES_CSV: &str = "series.csv";
pub const SUMMARY_CSV: &str = "summary.csv";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("nothing to write to {0}")]
    Empty(&'static str),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: missing, run the matching subcommand first")]
    Missing { path: PathBuf },
    #[error("{path} line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub fn grid_csv(cells: &[GridCell]) -> String {
    let mut out = String::from("rtt_ms,fwd_rate_bps,size_bytes,transfer_time_s,utilization\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{:.3},{},{},{:.6},{:.6}",
            c.rtt_us as f64 / 1e3,
            c.fwd_rate_bps,
            c.size_bytes,
            c.metrics.transfer_time_s,
            c.metrics.utilization
        );
    }
    out
}

/// Rows ordered by time, then flow.
pub fn series_csv(result: &ContentionResult) -> String {
    let mut rows: Vec<(f64, u32, f64)> = result
        .flows
        .iter()
        .flat_map(|f| f.rate_series.iter().map(move |&(t, r)| (t, f.flow_id(), r)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = String::from("t_s,flow_id,rate_bps\n");
    for (t, id, rate) in rows {
        let _ = writeln!(out, "{t:.3},{id},{rate:.0}");
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("mode,min_s,avg_s,max_s\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6}",
            r.mode, r.min_s, r.avg_s, r.max_s
        );
    }
    out
}

fn write(
    dir: &Path,
    name: &'static str,
    body: String,
    empty: bool,
) -> Result<PathBuf, OutputError> {
    if empty {
        return Err(OutputError::Empty(name));
    }
    fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| OutputError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub fn emit_grid(cells: &[GridCell], dir: &Path) -> Result<PathBuf, OutputError> {
    write(dir, GRID_CSV, grid_csv(cells), cells.is_empty())
}

pub fn emit_series(result: &ContentionResult, dir: &Path) -> Result<PathBuf, OutputError> {
    let empty = result.flows.iter().all(|f| f.rate_series.is_empty());
    write(dir, SERIES_CSV, series_csv(result), empty)
}

pub fn emit_summary(rows: &[SummaryRow], dir: &Path) -> Result<PathBuf, OutputError> {
    write(dir, SUMMARY_CSV, summary_csv(rows), rows.is_empty())
}

fn read_table(path: &Path, header: &str) -> Result<Vec<Vec<String>>, OutputError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(OutputError::Missing {
                path: path.to_path_buf(),
            })
        }
        Err(source) => {
            return Err(OutputError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(OutputError::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {header:?}"),
        });
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .map(|(i, l)| {
            let fields: Vec<String> = l.split(',').map(str::to_string).collect();
            if fields.len() != width {
                return Err(OutputError::Malformed {
                    path: path.to_path_buf(),
                    line: i + 2,
                    message: format!("expected {width} fields, found {}", fields.len()),
                });
            }
            Ok(fields)
        })
        .collect()
}

/// Renders `summary.csv` (required) and `grid.csv` (if present) from `dir`
/// as plain-text tables.
pub fn report(dir: &Path) -> Result<String, OutputError> {
    let summary = read_table(&dir.join(SUMMARY_CSV), "mode,min_s,avg_s,max_s")?;
    let mut out = String::new();
    let _ = writeln!(out, "download time (s)");
    let _ = writeln!(
        out,
        "{:<12} {:>10} {:>10} {:>10}",
        "mode", "min", "avg", "max"
    );
    for row in &summary {
        let _ = writeln!(
            out,
            "{:<12} {:>10} {:>10} {:>10}",
            row[0], row[1], row[2], row[3]
        );
    }

    let grid_path = dir.join(GRID_CSV);
    if grid_path.exists() {
        let grid = read_table(
            &grid_path,
            "rtt_ms,fwd_rate_bps,size_bytes,transfer_time_s,utilization",
        )?;
        let _ = writeln!(out);
        let _ = writeln!(out, "convergence grid");
        let _ = writeln!(
            out,
            "{:>8} {:>12} {:>12} {:>12} {:>8}",
            "rtt_ms", "fwd_bps", "size_B", "time_s", "util"
        );
        for row in &grid {
            let _ = writeln!(
                out,
                "{:>8} {:>12} {:>12} {:>12} {:>8}",
                row[0], row[1], row[2], row[3], row[4]
            );
        }
    }
    Ok(out)
}
