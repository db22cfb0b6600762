//! Run reports: one struct, two renderings (human table, machine records)
//! that carry identical numbers. Records are line-delimited `key=value`
//! pairs in a deterministic order; every float is printed with the shortest
//! round-trip representation so renders are bit-identical across runs with
//! the same inputs.

use std::fmt::Write as _;

#[derive(Debug, Clone, Default)]
pub struct BenchRow {
    pub n: usize,
    pub linearized: usize,
    pub eig_ms: f64,
    pub trace_ms: f64,
    pub total_ms: f64,
    /// total time ratio against the previous (half-size) row
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepRow {
    pub candidate: usize,
    pub dampers: String,
    pub viscosities: Vec<f64>,
    pub objective: Option<f64>,
    pub evaluations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct CheckSummary {
    pub cases: usize,
    pub max_rel_err: f64,
    pub max_imag_leak_rel: f64,
    pub cross_cases: usize,
    pub cross_max_err: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    pub config_echo: Vec<(String, String)>,
    pub system_label: String,
    pub n: usize,
    pub linearized: usize,
    pub dampers: Vec<String>,
    pub s: usize,
    pub viscosities: Vec<f64>,
    pub objective: Option<f64>,
    pub oracle_value: Option<f64>,
    pub evaluations: Option<usize>,
    pub converged: Option<bool>,
    pub stationarity: Option<f64>,
    /// (phase name, wall milliseconds)
    pub timings: Vec<(String, f64)>,
    pub bench: Vec<BenchRow>,
    pub sweep: Vec<SweepRow>,
    pub check: Option<CheckSummary>,
    pub diagnostics: Vec<String>,
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(" ")
}

pub fn render_records(r: &Report) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    put("command", r.command.clone());
    put("system", r.system_label.clone());
    put("n", r.n.to_string());
    put("linearized", r.linearized.to_string());
    put("s", r.s.to_string());
    for (i, d) in r.dampers.iter().enumerate() {
        put(&format!("damper.{}", i + 1), d.clone());
    }
    if !r.viscosities.is_empty() {
        put("viscosities", fmt_list(&r.viscosities));
    }
    if let Some(v) = r.objective {
        put("objective", fmt_num(v));
    }
    if let Some(v) = r.oracle_value {
        put("oracle", fmt_num(v));
    }
    if let Some(v) = r.evaluations {
        put("evaluations", v.to_string());
    }
    if let Some(v) = r.converged {
        put("converged", v.to_string());
    }
    if let Some(v) = r.stationarity {
        put("stationarity", fmt_num(v));
    }
    for row in &r.bench {
        let k = format!("bench.n{}", row.n);
        put(
            &k,
            format!(
                "linearized={} eig_ms={} trace_ms={} total_ms={} ratio={}",
                row.linearized,
                fmt_num(row.eig_ms),
                fmt_num(row.trace_ms),
                fmt_num(row.total_ms),
                row.ratio.map(fmt_num).unwrap_or_else(|| "-".into())
            ),
        );
    }
    for row in &r.sweep {
        let k = format!("sweep.{}", row.candidate + 1);
        match (&row.error, row.objective) {
            (Some(e), _) => put(&k, format!("dampers=[{}] error={e}", row.dampers)),
            (None, Some(obj)) => put(
                &k,
                format!(
                    "dampers=[{}] viscosities=[{}] objective={} evaluations={}",
                    row.dampers,
                    fmt_list(&row.viscosities),
                    fmt_num(obj),
                    row.evaluations
                ),
            ),
            (None, None) => put(&k, format!("dampers=[{}]", row.dampers)),
        }
    }
    if let Some(c) = &r.check {
        put("check.cases", c.cases.to_string());
        put("check.max_rel_err", fmt_num(c.max_rel_err));
        put("check.max_imag_leak_rel", fmt_num(c.max_imag_leak_rel));
        put("check.cross_cases", c.cross_cases.to_string());
        put("check.cross_max_err", fmt_num(c.cross_max_err));
    }
    for (name, ms) in &r.timings {
        put(&format!("time_ms.{name}"), fmt_num(*ms));
    }
    for (i, d) in r.diagnostics.iter().enumerate() {
        put(&format!("diagnostic.{}", i + 1), d.clone());
    }
    for (k, v) in &r.config_echo {
        put(&format!("config.{k}"), v.clone());
    }
    out
}

pub fn render_table(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "command: {}", r.command);
    let _ = writeln!(out, "problem: {} (n = {}, linearized {})", r.system_label, r.n, r.linearized);
    if !r.dampers.is_empty() {
        let _ = writeln!(out, "dampers: {}", r.dampers.join(", "));
    }
    let _ = writeln!(out, "damped eigenfrequencies: s = {}", r.s);
    if r.objective.is_some() || !r.viscosities.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "size | linearized | indices | optimal viscosities | trace");
        let _ = writeln!(
            out,
            "{} | {} | {} | {} | {}",
            r.n,
            r.linearized,
            r.dampers.join("; "),
            fmt_list(&r.viscosities),
            r.objective.map(fmt_num).unwrap_or_else(|| "-".into())
        );
    }
    if let Some(v) = r.oracle_value {
        let _ = writeln!(out, "oracle trace: {}", fmt_num(v));
    }
    if let Some(v) = r.evaluations {
        let _ = writeln!(out, "evaluations: {v}");
    }
    if let Some(v) = r.converged {
        let _ = writeln!(out, "converged: {v}");
    }
    if let Some(v) = r.stationarity {
        let _ = writeln!(out, "stationarity: {}", fmt_num(v));
    }
    if !r.bench.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "n | linearized | eig_ms | trace_ms | total_ms | ratio");
        for row in &r.bench {
            let _ = writeln!(
                out,
                "{} | {} | {} | {} | {} | {}",
                row.n,
                row.linearized,
                fmt_num(row.eig_ms),
                fmt_num(row.trace_ms),
                fmt_num(row.total_ms),
                row.ratio.map(fmt_num).unwrap_or_else(|| "-".into())
            );
        }
    }
    if !r.sweep.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "rank | candidate | dampers | viscosities | objective | evals");
        for (rank, row) in r.sweep.iter().enumerate() {
            match (&row.error, row.objective) {
                (Some(e), _) => {
                    let _ = writeln!(
                        out,
                        "{} | {} | {} | failed: {e} | - | -",
                        rank + 1,
                        row.candidate + 1,
                        row.dampers
                    );
                }
                (None, Some(obj)) => {
                    let _ = writeln!(
                        out,
                        "{} | {} | {} | {} | {} | {}",
                        rank + 1,
                        row.candidate + 1,
                        row.dampers,
                        fmt_list(&row.viscosities),
                        fmt_num(obj),
                        row.evaluations
                    );
                }
                (None, None) => {}
            }
        }
    }
    if let Some(c) = &r.check {
        let _ = writeln!(out);
        let _ = writeln!(out, "oracle-equivalence cases: {}", c.cases);
        let _ = writeln!(out, "max relative error: {}", fmt_num(c.max_rel_err));
        let _ = writeln!(out, "max imaginary leak (rel): {}", fmt_num(c.max_imag_leak_rel));
        let _ = writeln!(
            out,
            "cross-oracle cases: {} (max err {})",
            c.cross_cases,
            fmt_num(c.cross_max_err)
        );
    }
    if !r.timings.is_empty() {
        let _ = writeln!(out);
        for (name, ms) in &r.timings {
            let _ = writeln!(out, "time {name}: {} ms", fmt_num(*ms));
        }
    }
    if !r.diagnostics.is_empty() {
        let _ = writeln!(out);
        for d in &r.diagnostics {
            let _ = writeln!(out, "note: {d}");
        }
    }
    out
}

/// Parse a records rendering back into key/value pairs (round-trip support).
#[cfg(test)]
pub fn parse_records(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| !l.is_empty())
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}
