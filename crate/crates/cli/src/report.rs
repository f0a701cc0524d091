use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use equidyn::equidist::{EquidistRecord, L1Record, ParameterRecord, ProximityRecord, RateRecord};
use equidyn::hyph::ClusterReport;
use equidyn::selberg::{MyrbergReport, SelbergCase, SelbergResult};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;

pub const CSV_HEADER: &str = "kind,n,value,stderr,bound,ratio,eta,pass";

/// One line of the CSV summary. Absent or non-finite numbers are blank.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub kind: ExperimentKind,
    pub n: usize,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub bound: Option<f64>,
    pub ratio: Option<f64>,
    pub eta: Option<f64>,
    pub pass: bool,
}

impl CsvRow {
    pub fn new(kind: ExperimentKind, n: usize) -> Self {
        CsvRow {
            kind,
            n,
            value: None,
            stderr: None,
            bound: None,
            ratio: None,
            eta: None,
            pass: false,
        }
    }

    /// Drops non-finite numbers, which neither CSV nor JSON carry.
    pub fn finite(mut self) -> Self {
        for v in [&mut self.value, &mut self.stderr, &mut self.bound, &mut self.ratio, &mut self.eta] {
            *v = v.filter(|x| x.is_finite());
        }
        self
    }

    pub fn to_csv(&self) -> String {
        // 17 significant digits.
        let num = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.kind,
            self.n,
            num(self.value),
            num(self.stderr),
            num(self.bound),
            num(self.ratio),
            num(self.eta),
            self.pass
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    Proximity(ProximityRecord),
    Equidist(EquidistRecord),
    Rate(RateRecord),
    L1(L1Record),
    Parameter(ParameterRecord),
    Selberg { case: SelbergCase, result: SelbergResult },
    Cluster(ClusterReport),
    Myrberg(MyrbergReport),
    Failed { error: String },
}

/// One task's result with the stream it drew from, so it can be replayed
/// on its own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub index: usize,
    pub n: usize,
    pub target: Option<String>,
    pub eta: Option<f64>,
    pub seed: u64,
    pub substream: u64,
    pub row: CsvRow,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<TaskRecord>,
    pub wall_clock_seconds: f64,
    pub versions: BTreeMap<String, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl ExperimentReport {
    pub fn all_pass(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.row.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TaskRecord> {
        self.records.iter().filter(|r| matches!(r.outcome, Outcome::Failed { .. }))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            writeln!(s, "{}", r.row.to_csv()).unwrap();
        }
        s
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Writes `report.csv`, `report.json` or `atoms.svg` into `dir`. Kinds
/// without an atom cloud write no SVG and return `None`.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, dir: &Path) -> Result<Option<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let (name, body) = match format {
        ReportFormat::Csv => ("report.csv", report.to_csv()),
        ReportFormat::Json => ("report.json", report.to_json()?),
        ReportFormat::Svg => match crate::run::plot_divisor(&report.config)? {
            Some((measure, title)) => ("atoms.svg", crate::svg::render_atoms(&measure, &title)),
            None => return Ok(None),
        },
    };
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    Ok(Some(path))
}
