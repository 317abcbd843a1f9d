use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    FailureProven,
    NoProofAtSizes,
    Timeout,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::FailureProven => 0,
            Verdict::NoProofAtSizes => 1,
            Verdict::Timeout => 2,
        }
    }
}

/// Result of the search at one domain size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeReport {
    pub n: usize,
    /// `solution`, `exhausted` or `timeout`.
    pub outcome: &'static str,
    pub backtracks: u64,
    pub time_ms: f64,
}

/// One line of the machine-readable report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub program: String,
    pub file: String,
    pub query: String,
    pub engine: &'static str,
    pub solver: Option<&'static str>,
    pub clauses: usize,
    pub predicates: usize,
    pub functors: usize,
    /// Size at which failure was proven, else the largest size tried.
    pub domain_size: usize,
    pub size_pre: u64,
    pub size_int: u64,
    pub verdict: Verdict,
    pub certificate: Option<String>,
    /// Abductive engine: value retractions. Constraint engine: backtracks
    /// inside the store solver.
    pub backtracks: u64,
    /// Constraint engine: backtracks into subsumption choices.
    pub table_backtracks: u64,
    pub abductions: u64,
    pub primary_conflicts: u64,
    pub secondary_conflicts: u64,
    pub symmetry_rejections: u64,
    pub derived_clauses: u64,
    pub time_ms: f64,
    pub sizes: Vec<SizeReport>,
}

impl RunReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }

    /// The JSON record with every timing field removed.
    pub fn untimed(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        strip_timing(&mut v);
        v
    }
}

fn strip_timing(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("time_ms");
            m.values_mut().for_each(strip_timing);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

const COLUMNS: [&str; 10] = ["program", "clauses", "pred", "n", "size(pre)", "verdict", "time(s)", "bcktr", "Tbcktr", "abduced"];

/// Aligned text table, one row per report.
pub fn table(reports: &[RunReport]) -> String {
    let rows: Vec<[String; 10]> = reports
        .iter()
        .map(|r| {
            [
                r.program.clone(),
                r.clauses.to_string(),
                r.predicates.to_string(),
                r.domain_size.to_string(),
                r.size_pre.to_string(),
                format!("{:?}", r.verdict),
                format!("{:.2}", r.time_ms / 1000.0),
                r.backtracks.to_string(),
                r.table_backtracks.to_string(),
                r.abductions.to_string(),
            ]
        })
        .collect();
    let mut width = COLUMNS.map(str::len);
    for row in &rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        for (i, (c, w)) in cells.iter().zip(width).enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    line(&mut out, &COLUMNS);
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}
