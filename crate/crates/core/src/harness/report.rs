use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::config::ExperimentKind;
use super::HarnessError;

/// Where a reference value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// a formula or statement of the underlying theory
    Paper,
    /// immediate from the definitions
    Trivial,
    /// an independent oracle computed in the harness
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|computed − reference| ≤ tolerance`
    Abs,
    /// `|computed − reference| ≤ tolerance · |reference|`
    Rel,
    /// `computed ≤ reference + tolerance`
    AtMost,
    /// `computed == reference`
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub computed: f64,
    pub reference: f64,
    pub comparison: Comparison,
    pub provenance: Provenance,
    pub tolerance: f64,
    pub pass: bool,
    /// seconds spent on this check; not part of the canonical form
    #[serde(default)]
    pub runtime_s: f64,
}

impl CheckRow {
    pub fn new(
        name: impl Into<String>,
        computed: f64,
        reference: f64,
        comparison: Comparison,
        tolerance: f64,
        provenance: Provenance,
    ) -> Self {
        let pass = match comparison {
            Comparison::Abs => (computed - reference).abs() <= tolerance,
            Comparison::Rel => (computed - reference).abs() <= tolerance * reference.abs(),
            Comparison::AtMost => computed <= reference + tolerance,
            Comparison::Exact => computed == reference,
        };
        Self { name: name.into(), computed, reference, comparison, provenance, tolerance, pass, runtime_s: 0.0 }
    }

    pub fn abs(name: impl Into<String>, computed: f64, reference: f64, tol: f64, prov: Provenance) -> Self {
        Self::new(name, computed, reference, Comparison::Abs, tol, prov)
    }

    pub fn rel(name: impl Into<String>, computed: f64, reference: f64, tol: f64, prov: Provenance) -> Self {
        Self::new(name, computed, reference, Comparison::Rel, tol, prov)
    }

    pub fn at_most(name: impl Into<String>, computed: f64, bound: f64, slack: f64, prov: Provenance) -> Self {
        Self::new(name, computed, bound, Comparison::AtMost, slack, prov)
    }

    pub fn exact(name: impl Into<String>, computed: f64, reference: f64, prov: Provenance) -> Self {
        Self::new(name, computed, reference, Comparison::Exact, 0.0, prov)
    }

    pub fn flag(name: impl Into<String>, ok: bool, prov: Provenance) -> Self {
        Self::exact(name, if ok { 1.0 } else { 0.0 }, 1.0, prov)
    }

    pub fn timed(mut self, since: Instant) -> Self {
        self.runtime_s = since.elapsed().as_secs_f64();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Status {
    Pass,
    Fail,
    InvalidHypothesis,
}

/// A numeric table written as CSV (with `--csv`) or as whitespace columns (with `--plots`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Timing {
    /// seconds since the Unix epoch when the report was finalized
    pub timestamp: u64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub experiment_id: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub status: Status,
    pub rows: Vec<CheckRow>,
    /// kind-specific summary values
    pub details: Value,
    pub tables: Vec<Table>,
    pub plots: Vec<Table>,
    #[serde(default)]
    pub timing: Timing,
}

impl VerificationReport {
    pub fn empty(experiment_id: impl Into<String>, kind: ExperimentKind, seed: u64) -> Self {
        Self {
            experiment_id: experiment_id.into(),
            kind,
            seed,
            status: Status::Pass,
            rows: Vec::new(),
            details: Value::Object(Default::default()),
            tables: Vec::new(),
            plots: Vec::new(),
            timing: Timing::default(),
        }
    }

    pub fn push(&mut self, row: CheckRow) {
        self.rows.push(row);
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        if let Value::Object(map) = &mut self.details {
            map.insert(key.to_string(), v);
        }
    }

    /// Sets the status from the rows (unless the hypothesis was already rejected) and stamps
    /// the timing block.
    pub fn finalize(&mut self, started: Instant) {
        if self.status != Status::InvalidHypothesis {
            self.status = if self.rows.iter().all(|r| r.pass) { Status::Pass } else { Status::Fail };
        }
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.timing = Timing { timestamp, wall_s: started.elapsed().as_secs_f64() };
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn failed_rows(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// The report without timing data, as a JSON value with sorted keys.
    pub fn canonical_value(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        if let Value::Object(map) = &mut v {
            map.remove("timing");
            if let Some(Value::Array(rows)) = map.get_mut("rows") {
                for r in rows {
                    if let Value::Object(m) = r {
                        m.remove("runtime_s");
                    }
                }
            }
        }
        sort_keys(v)
    }

    pub fn canonical_json(&self) -> String {
        self.canonical_value().to_string()
    }

    pub fn canonical_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// The full report (timing included) plus `canonical_sha256`, keys sorted.
    pub fn to_json_pretty(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        if let Value::Object(map) = &mut v {
            map.insert("canonical_sha256".into(), Value::String(self.canonical_hash()));
        }
        serde_json::to_string_pretty(&sort_keys(v)).expect("values serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let mut v: Value = serde_json::from_str(text)?;
        if let Value::Object(map) = &mut v {
            map.remove("canonical_sha256");
        }
        serde_json::from_value(v)
    }

    /// One CSV with a header row for the check rows.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("name,computed,reference,comparison,provenance,tolerance,pass,runtime_s\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:e},{:e},{},{},{:e},{},{:.6}\n",
                csv_field(&r.name),
                r.computed,
                r.reference,
                enum_name(&r.comparison),
                enum_name(&r.provenance),
                r.tolerance,
                r.pass,
                r.runtime_s
            ));
        }
        out
    }
}

fn enum_name(v: &impl Serialize) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        _ => String::new(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Rebuilds every object with its keys in sorted order, whatever map type serde_json uses.
pub fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    /// Whitespace-delimited columns with a `#` header line.
    pub fn to_columns(&self) -> String {
        let mut out = format!("# {}\n", self.columns.join(" "));
        for row in &self.rows {
            out.push_str(&row.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(" "));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OutputFormats {
    pub json: bool,
    pub csv: bool,
    pub plots: bool,
}

impl OutputFormats {
    pub fn all() -> Self {
        Self { json: true, csv: true, plots: true }
    }
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
    fs::write(&path, contents).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
    written.push(path);
    Ok(())
}

/// Writes `<id>.json`, `<id>_rows.csv` plus one CSV per table, and `<id>_<plot>.dat` files
/// into `dir`, creating it if needed. Returns the written paths.
pub fn emit_report(report: &VerificationReport, formats: &OutputFormats, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
    let id = &report.experiment_id;
    let mut written = Vec::new();
    if formats.json {
        write(dir.join(format!("{id}.json")), &report.to_json_pretty(), &mut written)?;
    }
    if formats.csv {
        write(dir.join(format!("{id}_rows.csv")), &report.rows_csv(), &mut written)?;
        for t in &report.tables {
            write(dir.join(format!("{id}_{}.csv", t.name)), &t.to_csv(), &mut written)?;
        }
    }
    if formats.plots {
        for t in &report.plots {
            write(dir.join(format!("{id}_{}.dat", t.name)), &t.to_columns(), &mut written)?;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VerificationReport {
        let mut r = VerificationReport::empty("demo", ExperimentKind::Duality, 7);
        r.push(CheckRow::abs("integral", -3.0 + 1e-12, -3.0, 1e-9, Provenance::Derived));
        r.push(CheckRow::exact("count", -3.0, -3.0, Provenance::Derived));
        r.detail("signed_count", -3);
        r.tables.push(Table { name: "t".into(), columns: vec!["a".into(), "b".into()], rows: vec![vec![1.0, 2.5]] });
        r
    }

    #[test]
    fn comparisons() {
        assert!(CheckRow::rel("r", 1.0001, 1.0, 1e-3, Provenance::Trivial).pass);
        assert!(!CheckRow::rel("r", 1.01, 1.0, 1e-3, Provenance::Trivial).pass);
        assert!(CheckRow::at_most("b", 2.0, 2.0, 0.0, Provenance::Paper).pass);
        assert!(!CheckRow::at_most("b", f64::NAN, 2.0, 0.0, Provenance::Paper).pass);
        assert!(!CheckRow::abs("a", f64::NAN, 0.0, 1.0, Provenance::Paper).pass);
        assert!(!CheckRow::flag("f", false, Provenance::Trivial).pass);
    }

    #[test]
    fn status_follows_rows() {
        let mut r = sample();
        r.finalize(Instant::now());
        assert_eq!(r.status, Status::Pass);
        r.push(CheckRow::exact("bad", 1.0, 2.0, Provenance::Trivial));
        r.finalize(Instant::now());
        assert_eq!(r.status, Status::Fail);
        r.status = Status::InvalidHypothesis;
        r.finalize(Instant::now());
        assert_eq!(r.status, Status::InvalidHypothesis);
    }

    #[test]
    fn canonical_form_ignores_timing() {
        let mut a = sample();
        a.finalize(Instant::now());
        let mut b = a.clone();
        b.timing = Timing { timestamp: 1, wall_s: 99.0 };
        b.rows[0].runtime_s = 3.0;
        assert_eq!(a.canonical_json(), b.canonical_json());
        assert_eq!(a.canonical_hash(), b.canonical_hash());
        assert_eq!(a.canonical_hash().len(), 64);
        let json = a.canonical_json();
        assert!(!json.contains("timing") && !json.contains("runtime_s"));
        assert!(json.find("\"details\"").unwrap() < json.find("\"experiment_id\"").unwrap());
    }

    #[test]
    fn json_round_trip() {
        let mut a = sample();
        a.finalize(Instant::now());
        let back = VerificationReport::from_json(&a.to_json_pretty()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn empty_report_is_a_valid_skeleton() {
        let mut r = VerificationReport::empty("none", ExperimentKind::Flow, 0);
        r.finalize(Instant::now());
        let v: Value = serde_json::from_str(&r.to_json_pretty()).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 0);
        assert_eq!(v["status"], "PASS");
    }

    #[test]
    fn emits_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = sample();
        r.plots.push(Table { name: "decay".into(), columns: vec!["tau".into(), "x".into()], rows: vec![vec![1.0, -1.0]] });
        r.finalize(Instant::now());
        let paths = emit_report(&r, &OutputFormats::all(), dir.path()).unwrap();
        assert_eq!(paths.len(), 4);
        let csv = fs::read_to_string(dir.path().join("demo_rows.csv")).unwrap();
        assert!(csv.starts_with("name,computed,reference"));
        assert_eq!(csv.lines().count(), 3);
        let dat = fs::read_to_string(dir.path().join("demo_decay.dat")).unwrap();
        assert!(dat.starts_with("# tau x\n"));
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("occupied");
        fs::write(&file, "x").unwrap();
        let err = emit_report(&sample(), &OutputFormats::all(), &file.join("sub")).unwrap_err();
        match err {
            HarnessError::Io { path, .. } => assert!(path.starts_with(&file)),
            other => panic!("{other:?}"),
        }
    }
}
