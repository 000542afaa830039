//! Experiment reports: named tables plus pass/fail checks, rendered as CSV
//! blocks or aligned text. Numbers are printed with a fixed format so the
//! output is byte-stable for a given configuration.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Table,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub experiment: String,
    /// The statement the experiment exercises.
    pub statement: String,
    pub params: Vec<(String, String)>,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

/// Fixed-width scientific notation.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Report {
    pub fn new(experiment: &str, statement: &str) -> Self {
        Report {
            experiment: experiment.into(),
            statement: statement.into(),
            params: Vec::new(),
            tables: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.params.push((key.into(), value.to_string()));
    }

    /// Records a check of `value ≤ bound`.
    pub fn check_le(&mut self, name: &str, value: f64, bound: f64) {
        let passed = value <= bound;
        self.check(name, passed, format!("{} <= {}", num(value), num(bound)));
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(),
            Format::Table => self.render_table(),
        }
    }

    fn header(&self, out: &mut String, prefix: &str) {
        let _ = writeln!(out, "{prefix}experiment: {}", self.experiment);
        let _ = writeln!(out, "{prefix}statement: {}", self.statement);
        for (k, v) in &self.params {
            let _ = writeln!(out, "{prefix}{k} = {v}");
        }
    }

    fn status(passed: bool) -> &'static str {
        if passed {
            "PASS"
        } else {
            "FAIL"
        }
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        self.header(&mut out, "# ");
        for t in &self.tables {
            let _ = writeln!(out, "# table: {}", t.name);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&t.columns).expect("in-memory csv");
            for r in &t.rows {
                w.write_record(r).expect("in-memory csv");
            }
            out.push_str(&String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv"));
        }
        for c in &self.checks {
            let _ = writeln!(out, "# check {}: {} ({})", c.name, Self::status(c.passed), c.detail);
        }
        let _ = writeln!(out, "# result: {}", Self::status(self.passed()));
        out
    }

    fn render_table(&self) -> String {
        let mut out = String::new();
        self.header(&mut out, "");
        for t in &self.tables {
            let _ = writeln!(out, "\n[{}]", t.name);
            let widths: Vec<usize> = (0..t.columns.len())
                .map(|j| t.rows.iter().map(|r| r[j].len()).chain([t.columns[j].len()]).max().unwrap_or(0))
                .collect();
            let line = |cells: &[String]| {
                cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
            };
            let _ = writeln!(out, "{}", line(&t.columns));
            for r in &t.rows {
                let _ = writeln!(out, "{}", line(r));
            }
        }
        if !self.checks.is_empty() {
            out.push('\n');
        }
        for c in &self.checks {
            let _ = writeln!(out, "{}  {}  {}", Self::status(c.passed), c.name, c.detail);
        }
        let _ = writeln!(out, "result: {}", Self::status(self.passed()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_both_formats() {
        let mut r = Report::new("demo", "a statement");
        r.param("p", 1.0);
        let mut t = Table::new("series", &["k", "value"]);
        t.push(vec!["0".into(), num(0.5)]);
        r.tables.push(t);
        r.check_le("small", 1e-9, 1e-8);
        let csv = r.render(Format::Csv);
        assert!(csv.contains("k,value\n0,5.000000000000e-1\n"));
        assert!(csv.ends_with("# result: PASS\n"));
        r.check("broken", false, "x");
        assert!(!r.passed());
        assert!(r.render(Format::Table).contains("FAIL  broken  x"));
        assert_eq!(num(f64::INFINITY), "inf");
    }
}
