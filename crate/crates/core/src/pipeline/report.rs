use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::VideoEstimate;
use crate::metrics::{CurvePoint, MetricSummary};
use crate::physics::ParamEstimate;

pub const TOOL_NAME: &str = "physbench";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Estimation outcome of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRow {
    pub material: String,
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<VideoEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    #[serde(flatten)]
    pub estimate: ParamEstimate,
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    #[serde(flatten)]
    pub summary: MetricSummary,
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub mode: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Wall-clock creation time (Unix seconds); the only field allowed to
    /// differ between identical runs.
    pub generated_at: String,
    pub model: String,
    pub videos: Vec<VideoRow>,
    pub params: Vec<ParamRow>,
    pub metrics: Vec<MetricRow>,
    /// mIoU over time pooled across every scored video.
    pub over_time: Vec<CurvePoint>,
    pub checks: Vec<Check>,
    pub failures: usize,
}

impl Report {
    pub fn new(mode: &str, config_sha256: String, seed: u64, model: &str) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            mode: mode.into(),
            config_sha256,
            seed,
            generated_at: timestamp(),
            model: model.into(),
            videos: Vec::new(),
            params: Vec::new(),
            metrics: Vec::new(),
            over_time: Vec::new(),
            checks: Vec::new(),
            failures: 0,
        }
    }

    pub fn count_failures(&mut self) {
        self.failures = self.videos.iter().filter(|v| v.error.is_some()).count()
            + self.checks.iter().filter(|c| !c.passed).count();
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// `SOURCE_DATE_EPOCH` when set, else the current time.
fn timestamp() -> String {
    if let Ok(v) = std::env::var("SOURCE_DATE_EPOCH") {
        return v;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TableStyle {
    ParamTable,
    MiouTable,
    OverTime,
}

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("report has no rows for {0:?}")]
    EmptyReport(TableStyle),
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 fields")
}

/// Render one table of `report` as CSV (comma, `.` decimals, LF, header).
pub fn emit_table(report: &Report, style: TableStyle) -> Result<String, TableError> {
    let s = |x: &str| x.to_string();
    match style {
        TableStyle::ParamTable => {
            if report.params.is_empty() {
                return Err(TableError::EmptyReport(style));
            }
            let header = ["material", "n", "mean", "std", "gt_low", "gt_high", "in_range"].map(s);
            let rows: Vec<Vec<String>> = report
                .params
                .iter()
                .map(|r| {
                    let e = &r.estimate;
                    vec![
                        e.material.clone(),
                        e.per_video.len().to_string(),
                        num(e.mean),
                        num(e.std),
                        num(e.gt_low),
                        num(e.gt_high),
                        e.in_range.to_string(),
                    ]
                })
                .collect();
            Ok(csv_text(&header, &rows))
        }
        TableStyle::MiouTable => {
            if report.metrics.is_empty() {
                return Err(TableError::EmptyReport(style));
            }
            let mut header = vec![s("model")];
            header.extend(report.metrics.iter().map(|m| m.summary.scenario.clone()));
            header.push(s("Avg."));
            let means: Vec<f64> = report.metrics.iter().filter_map(|m| m.summary.mean_miou).collect();
            let avg = (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64);
            let mut row = vec![report.model.clone()];
            row.extend(report.metrics.iter().map(|m| opt(m.summary.mean_miou)));
            row.push(opt(avg));
            Ok(csv_text(&header, &[row]))
        }
        TableStyle::OverTime => {
            if report.over_time.is_empty() {
                return Err(TableError::EmptyReport(style));
            }
            let header = ["frame_index", "mean", "std"].map(s);
            let rows: Vec<Vec<String>> =
                report.over_time.iter().map(|c| vec![c.frame_index.to_string(), num(c.mean), num(c.std)]).collect();
            Ok(csv_text(&header, &rows))
        }
    }
}

/// Writes `report.json` and every non-empty table into `out`.
pub fn write_outputs(report: &Report, out: &Path) -> std::io::Result<Vec<String>> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("report.json"), report.to_json())?;
    let mut written = vec!["report.json".to_string()];
    for (style, name) in [
        (TableStyle::ParamTable, "param_table.csv"),
        (TableStyle::MiouTable, "miou_table.csv"),
        (TableStyle::OverTime, "over_time.csv"),
    ] {
        if let Ok(text) = emit_table(report, style) {
            std::fs::write(out.join(name), text)?;
            written.push(name.into());
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{aggregate, MaterialTable, StdKind};

    fn empty() -> Report {
        Report { generated_at: "0".into(), ..Report::new("validate", "abc".into(), 0, "m") }
    }

    #[test]
    fn param_table_row() {
        let mut r = empty();
        let est = aggregate(&[1.21, 1.23], "glycerine", &MaterialTable::builtin(), StdKind::Population).unwrap();
        r.params.push(ParamRow { estimate: est, sources: vec!["a".into(), "b".into()] });
        let text = emit_table(&r, TableStyle::ParamTable).unwrap();
        assert_eq!(
            text,
            "material,n,mean,std,gt_low,gt_high,in_range\nglycerine,2,1.220000,0.010000,1.150000,1.250000,true\n"
        );
    }

    #[test]
    fn empty_tables_error() {
        let r = empty();
        for style in [TableStyle::ParamTable, TableStyle::MiouTable, TableStyle::OverTime] {
            assert_eq!(emit_table(&r, style), Err(TableError::EmptyReport(style)));
        }
    }

    #[test]
    fn constant_curve_has_zero_std() {
        let mut r = empty();
        r.over_time = (0..3).map(|i| CurvePoint { frame_index: i, mean: 0.5, std: 0.0, n: 2 }).collect();
        let text = emit_table(&r, TableStyle::OverTime).unwrap();
        assert!(text.lines().skip(1).all(|l| l.ends_with(",0.000000")));
    }
}
