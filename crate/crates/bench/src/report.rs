//! CSV and JSON output for [`BenchReport`]s.
//!
//! CSV columns, in order:
//!
//! `method, trees, depth, bits, tables, hash_length, probes, n, run,
//! precision_at_{n}, recall_at_{n}, avg_query_us, memory_bytes, runs,
//! mean_candidates, queries, recall_skipped`, plus `matches_oracle` when the
//! oracle comparison was requested.
//!
//! `run` is the run index for per-run rows and `mean` for the aggregate row.
//! Parameters that do not apply to a method are left empty. `avg_query_us`
//! is the only timing column.

use std::io::{self, Write};

use crate::bench::{BenchReport, RunRecord};

pub const TIMING_COLUMNS: &[&str] = &["avg_query_us"];

pub fn csv_header(n: usize, with_oracle: bool) -> String {
    let mut h = format!(
        "method,trees,depth,bits,tables,hash_length,probes,n,run,precision_at_{n},recall_at_{n},avg_query_us,memory_bytes,runs,mean_candidates,queries,recall_skipped"
    );
    if with_oracle {
        h.push_str(",matches_oracle");
    }
    h
}

fn opt(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn prefix(report: &BenchReport) -> String {
    let p = &report.params;
    format!(
        "{},{},{},{},{},{},{},{}",
        report.method,
        opt(p.trees),
        opt(p.depth),
        opt(p.bits),
        opt(p.tables),
        opt(p.hash_length),
        opt(p.probes),
        report.n
    )
}

fn oracle_cell(with_oracle: bool, m: Option<bool>) -> String {
    if with_oracle {
        format!(",{}", m.map(|m| m.to_string()).unwrap_or_default())
    } else {
        String::new()
    }
}

pub fn run_row(report: &BenchReport, r: &RunRecord, with_oracle: bool) -> String {
    format!(
        "{},{},{:.6},{:.6},{:.3},{},1,{:.4},{},{}{}",
        prefix(report),
        r.run,
        r.precision,
        r.recall,
        r.avg_query_us,
        r.memory_bytes,
        r.mean_candidates,
        r.queries,
        r.recall_skipped,
        oracle_cell(with_oracle, r.matches_oracle)
    )
}

pub fn aggregate_row(report: &BenchReport, with_oracle: bool) -> String {
    let queries: usize = report.runs.iter().map(|r| r.queries).sum();
    let skipped: usize = report.runs.iter().map(|r| r.recall_skipped).sum();
    format!(
        "{},mean,{:.6},{:.6},{:.3},{:.0},{},{:.4},{},{}{}",
        prefix(report),
        report.precision_at_n,
        report.recall_at_n,
        report.avg_query_us,
        report.memory_bytes,
        report.runs.len(),
        report.mean_candidates,
        queries,
        skipped,
        oracle_cell(with_oracle, report.matches_oracle)
    )
}

/// Header, one row per run, then the aggregate row.
pub fn write_csv<W: Write>(report: &BenchReport, with_oracle: bool, mut out: W) -> io::Result<()> {
    writeln!(out, "{}", csv_header(report.n, with_oracle))?;
    for r in &report.runs {
        writeln!(out, "{}", run_row(report, r, with_oracle))?;
    }
    writeln!(out, "{}", aggregate_row(report, with_oracle))?;
    out.flush()
}

pub fn write_json<W: Write>(report: &BenchReport, mut out: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    out.flush()
}

/// Blanks the timing columns of CSV text so runs can be compared byte for byte.
pub fn strip_timing(csv: &str) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let cols: Vec<usize> = header
        .split(',')
        .enumerate()
        .filter(|(_, c)| TIMING_COLUMNS.contains(c))
        .map(|(i, _)| i)
        .collect();
    let mut out = String::from(header);
    out.push('\n');
    for line in lines {
        let cells: Vec<&str> = line
            .split(',')
            .enumerate()
            .map(|(i, c)| if cols.contains(&i) { "" } else { c })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
