//! Reports: tables written as CSV and mirrored losslessly in `report.json`.
//!
//! Floats are written in shortest round-trip form. Non-finite values appear as
//! `inf`, `-inf` or `NaN` in CSV and as the same strings in JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use berezin_core::operators::ProfileSample;
use serde::ser::{Serialize, SerializeMap, Serializer};
use serde_json::Value;

use crate::config::Experiment;
use crate::LabError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn csv(&self) -> String {
        match self {
            Cell::Float(x) => float_text(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

fn float_text(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:?}")
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Float(x) if x.is_finite() => s.serialize_f64(*x),
            Cell::Float(x) => s.serialize_str(&float_text(*x)),
            Cell::Int(i) => s.serialize_i64(*i),
            Cell::Text(t) => s.serialize_str(t),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Meaning of the fixed column names.
pub fn describe(column: &str) -> &'static str {
    match column {
        "t" => "path parameter; the sample point is t·p0",
        "re_berezin" => "real part of the Berezin transform ⟨T k_z, k_z⟩",
        "im_berezin" => "imaginary part of the Berezin transform",
        "trunc_flag" => "1 when -ρ(z) is below the kernel accuracy threshold",
        "k" => "degree threshold: columns of basis elements of degree >= k",
        "tail_norm" => "spectral norm of the operator on basis elements of degree >= k",
        "rel_error" => "relative error |computed - exact| / |exact|",
        "residual" => "max-entry or relative residual of the identity",
        "kind" => "Levi-form class of the boundary point (strong or weak)",
        "min_tangential_eigenvalue" => "smallest eigenvalue of the complex Hessian on the complex tangent space",
        "ratio" => "ratio of diagonal kernels K_2(z,z) / K_1(z,z)",
        "mass_outside" => "∫ over the domain minus U of |k_z|² dμ",
        _ => "",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn profile(name: impl Into<String>, samples: &[ProfileSample]) -> Self {
        let mut t = Self::new(name, &["t", "re_berezin", "im_berezin", "trunc_flag"]);
        for s in samples {
            t.push(vec![s.t.into(), s.value.re.into(), s.value.im.into(), s.flagged.into()]);
        }
        t
    }

    pub fn to_csv(&self) -> Result<String, LabError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }
}

impl Serialize for Table {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let descriptions: BTreeMap<&str, &str> = self
            .columns
            .iter()
            .map(|c| (c.as_str(), describe(c)))
            .filter(|(_, d)| !d.is_empty())
            .collect();
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry("columns", &self.columns)?;
        m.serialize_entry("descriptions", &descriptions)?;
        m.serialize_entry("rows", &self.rows)?;
        m.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::Inconsistent => "inconsistent",
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Consistent
        } else {
            Verdict::Inconsistent
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub experiment: Experiment,
    pub config_hash: String,
    pub tables: Vec<Table>,
    pub summary: BTreeMap<String, Value>,
    pub verdict: Option<Verdict>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(experiment: Experiment, config_hash: String) -> Self {
        Self {
            experiment,
            config_hash,
            tables: Vec::new(),
            summary: BTreeMap::new(),
            verdict: None,
            warnings: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    /// Adds a float to the summary, as a string when it is not finite.
    pub fn set_f64(&mut self, key: &str, value: f64) {
        let v = if value.is_finite() {
            Value::from(value)
        } else {
            Value::from(float_text(value))
        };
        self.summary.insert(key.to_string(), v);
    }

    pub fn to_json(&self) -> String {
        let tables: BTreeMap<&str, &Table> = self.tables.iter().map(|t| (t.name.as_str(), t)).collect();
        let versions: BTreeMap<&str, &str> = [
            ("berezin-lab", env!("CARGO_PKG_VERSION")),
            ("berezin-core", berezin_core::VERSION),
        ]
        .into_iter()
        .collect();
        let doc = serde_json::json!({
            "experiment": self.experiment.name(),
            "config_hash": self.config_hash,
            "versions": versions,
            "summary": self.summary,
            "verdict": self.verdict.map(Verdict::as_str),
            "warnings": self.warnings,
            "tables": tables,
        });
        serde_json::to_string_pretty(&doc).expect("report is serializable") + "\n"
    }

    /// Writes `<table>.csv` for every table and `report.json`; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, LabError> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            fs::write(&path, t.to_csv()?)?;
            paths.push(path);
        }
        let path = dir.join("report.json");
        fs::write(&path, self.to_json())?;
        paths.push(path);
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_agree() {
        let mut t = Table::new("profile", &["t", "re_berezin", "im_berezin", "trunc_flag"]);
        for k in 0..20 {
            let x = 0.5 + 0.48 * k as f64 / 19.0;
            t.push(vec![x.into(), 1.0.into(), 0.0.into(), false.into()]);
        }
        let csv = t.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 21);
        assert_eq!(lines[0], "t,re_berezin,im_berezin,trunc_flag");
        assert!(lines[1..].iter().all(|l| l.split(',').nth(1) == Some("1.0")));
        let json: Value = serde_json::to_value(&t).unwrap();
        let mut reader = csv::Reader::from_reader(csv.as_bytes());
        for (row, rec) in json["rows"].as_array().unwrap().iter().zip(reader.records()) {
            let rec = rec.unwrap();
            for (a, b) in row.as_array().unwrap().iter().zip(rec.iter()) {
                assert_eq!(a.as_f64().unwrap(), b.parse::<f64>().unwrap());
            }
        }
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e-17] {
            assert_eq!(Cell::Float(x).csv().parse::<f64>().unwrap(), x);
            let j = serde_json::to_string(&Cell::Float(x)).unwrap();
            assert_eq!(j.parse::<f64>().unwrap(), x);
        }
        assert_eq!(Cell::Float(f64::INFINITY).csv(), "inf");
        assert_eq!(serde_json::to_string(&Cell::Float(f64::INFINITY)).unwrap(), "\"inf\"");
    }
}
