//! Metric reports and leaderboard fixture rendering.
//!
//! Reports serialize through a canonical writer: object keys sorted,
//! floats in fixed 6-decimal notation, no incidental state. Equal
//! evaluation inputs therefore produce byte-identical files, which makes
//! determinism checkable by diff. Wall time is measured and echoed on
//! stderr by the CLI but deliberately kept out of the file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metrics::panoptic::vpq_aggregate;

/// Windowed panoptic scores in percent.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct VpqValues {
    pub per_k: BTreeMap<usize, f64>,
    pub vpq: f64,
}

/// Association, segmentation and combined tracking quality as ratios.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
pub struct StqValues {
    pub aq: f64,
    pub sq: f64,
    pub stq: f64,
}

/// Metric values of one video or of the dataset aggregate. VPQ is kept
/// in percent, everything else as ratios in [0, 1]; the field names spell
/// the convention out.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct MetricValues {
    #[serde(default)]
    pub vpq_percent: Option<VpqValues>,
    #[serde(default)]
    pub stq: Option<StqValues>,
    #[serde(default)]
    pub miou: Option<f64>,
    #[serde(default)]
    pub weighted_iou: Option<f64>,
    #[serde(default)]
    pub vc: Option<BTreeMap<usize, f64>>,
}

/// Echo of the evaluation configuration.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct ReportConfig {
    pub task: String,
    #[serde(default)]
    pub windows: Vec<usize>,
    #[serde(default)]
    pub vc: Vec<usize>,
    #[serde(default)]
    pub per_video_aggregation: bool,
    #[serde(default)]
    pub vc_mode: String,
    #[serde(default)]
    pub vc_aggregation: String,
    #[serde(default)]
    pub include_stuff_in_aq: bool,
}

/// Full result record of one evaluation run.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct MetricReport {
    pub version: String,
    pub config: ReportConfig,
    pub aggregate: MetricValues,
    pub per_video: BTreeMap<String, MetricValues>,
    /// Measured but never serialized; see module docs.
    #[serde(default)]
    pub wall_time_secs: f64,
}

enum Json {
    Bool(bool),
    UInt(u64),
    Float(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(BTreeMap<String, Json>),
}

fn escape_into(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn render_json(node: &Json, indent: usize, out: &mut String) {
    const STEP: usize = 2;
    match node {
        Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Json::UInt(n) => out.push_str(&n.to_string()),
        Json::Float(v) => out.push_str(&format!("{v:.6}")),
        Json::Str(s) => escape_into(s, out),
        Json::Arr(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (idx, item) in items.iter().enumerate() {
                if idx > 0 {
                    out.push(',');
                }
                out.push(' ');
                render_json(item, indent, out);
            }
            out.push_str(" ]");
        }
        Json::Obj(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            let pad = " ".repeat(indent + STEP);
            for (idx, (key, value)) in map.iter().enumerate() {
                if idx > 0 {
                    out.push_str(",\n");
                }
                out.push_str(&pad);
                escape_into(key, out);
                out.push_str(": ");
                render_json(value, indent + STEP, out);
            }
            out.push('\n');
            out.push_str(&" ".repeat(indent));
            out.push('}');
        }
    }
}

fn values_node(values: &MetricValues) -> Json {
    let mut obj = BTreeMap::new();
    if let Some(vpq) = &values.vpq_percent {
        let mut per_k = BTreeMap::new();
        for (&k, &score) in &vpq.per_k {
            per_k.insert(k.to_string(), Json::Float(score));
        }
        let mut inner = BTreeMap::new();
        inner.insert("per_k".to_string(), Json::Obj(per_k));
        inner.insert("vpq".to_string(), Json::Float(vpq.vpq));
        obj.insert("vpq_percent".to_string(), Json::Obj(inner));
    }
    if let Some(stq) = &values.stq {
        let mut inner = BTreeMap::new();
        inner.insert("aq".to_string(), Json::Float(stq.aq));
        inner.insert("sq".to_string(), Json::Float(stq.sq));
        inner.insert("stq".to_string(), Json::Float(stq.stq));
        obj.insert("stq".to_string(), Json::Obj(inner));
    }
    if let Some(miou) = values.miou {
        obj.insert("miou".to_string(), Json::Float(miou));
    }
    if let Some(weighted) = values.weighted_iou {
        obj.insert("weighted_iou".to_string(), Json::Float(weighted));
    }
    if let Some(vc) = &values.vc {
        let mut inner = BTreeMap::new();
        for (&n, &ratio) in vc {
            inner.insert(n.to_string(), Json::Float(ratio));
        }
        obj.insert("vc".to_string(), Json::Obj(inner));
    }
    Json::Obj(obj)
}

impl MetricReport {
    /// Canonical JSON: sorted keys, fixed 6-decimal floats, trailing
    /// newline. Byte-identical for equal inputs.
    pub fn to_canonical_json(&self) -> String {
        let mut config = BTreeMap::new();
        config.insert("task".to_string(), Json::Str(self.config.task.clone()));
        config.insert(
            "windows".to_string(),
            Json::Arr(
                self.config
                    .windows
                    .iter()
                    .map(|&k| Json::UInt(k as u64))
                    .collect(),
            ),
        );
        config.insert(
            "vc".to_string(),
            Json::Arr(self.config.vc.iter().map(|&n| Json::UInt(n as u64)).collect()),
        );
        config.insert(
            "per_video_aggregation".to_string(),
            Json::Bool(self.config.per_video_aggregation),
        );
        config.insert(
            "vc_mode".to_string(),
            Json::Str(self.config.vc_mode.clone()),
        );
        config.insert(
            "vc_aggregation".to_string(),
            Json::Str(self.config.vc_aggregation.clone()),
        );
        config.insert(
            "include_stuff_in_aq".to_string(),
            Json::Bool(self.config.include_stuff_in_aq),
        );

        let mut per_video = BTreeMap::new();
        for (video_id, values) in &self.per_video {
            per_video.insert(video_id.clone(), values_node(values));
        }

        let mut root = BTreeMap::new();
        root.insert("version".to_string(), Json::Str(self.version.clone()));
        root.insert("config".to_string(), Json::Obj(config));
        root.insert("aggregate".to_string(), values_node(&self.aggregate));
        root.insert("per_video".to_string(), Json::Obj(per_video));

        let mut out = String::new();
        render_json(&Json::Obj(root), 0, &mut out);
        out.push('\n');
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_canonical_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: &Path) -> Result<MetricReport> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

/// Parsed leaderboard fixture: a header of metric names and one row of
/// values per method.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardFixture {
    pub metrics: Vec<String>,
    pub rows: Vec<LeaderboardRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardRow {
    pub method: String,
    /// Cells as written in the fixture, parallel to `metrics`.
    pub cells: Vec<String>,
    /// Parsed values, parallel to `metrics`.
    pub values: Vec<f64>,
}

impl LeaderboardFixture {
    pub fn from_csv_str(text: &str, origin: &Path) -> Result<LeaderboardFixture> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(origin, e))?
            .clone();
        if headers.is_empty() {
            return Err(Error::parse(origin, "fixture has no header row"));
        }
        let metrics: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        if metrics.is_empty() {
            return Err(Error::parse(origin, "fixture header has no metric columns"));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::parse(origin, e))?;
            if record.len() != metrics.len() + 1 {
                return Err(Error::parse(
                    origin,
                    format!(
                        "row '{}' has {} cells, expected {}",
                        record.get(0).unwrap_or(""),
                        record.len(),
                        metrics.len() + 1
                    ),
                ));
            }
            let method = record[0].to_string();
            let cells: Vec<String> = record.iter().skip(1).map(str::to_string).collect();
            let mut values = Vec::with_capacity(cells.len());
            for (cell, metric) in cells.iter().zip(&metrics) {
                let value: f64 = cell.parse().map_err(|_| {
                    Error::parse(
                        origin,
                        format!("row '{method}', column '{metric}': '{cell}' is not a number"),
                    )
                })?;
                if !value.is_finite() {
                    return Err(Error::parse(
                        origin,
                        format!("row '{method}', column '{metric}': non-finite value"),
                    ));
                }
                values.push(value);
            }
            rows.push(LeaderboardRow {
                method,
                cells,
                values,
            });
        }
        Ok(LeaderboardFixture { metrics, rows })
    }

    pub fn load(path: &Path) -> Result<LeaderboardFixture> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        LeaderboardFixture::from_csv_str(&text, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

/// Rendered fixture plus the methods whose stored aggregate disagreed
/// with the recomputed one.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReport {
    pub text: String,
    pub flagged: Vec<String>,
}

/// Tolerance for comparing a recomputed window mean against a stored
/// aggregate that was rounded to two decimals.
const AGGREGATE_TOLERANCE: f64 = 0.005 + 1e-9;

/// Renders a leaderboard fixture. When the fixture carries a `VPQ`
/// column together with windowed `VPQ<k>` columns, the aggregate is
/// recomputed as their mean and rows disagreeing by more than 0.005
/// (the headroom of two-decimal rounding) are flagged.
pub fn render_report(
    fixture: &LeaderboardFixture,
    format: ReportFormat,
) -> Result<RenderedReport> {
    let vpq_col = fixture.metrics.iter().position(|m| m == "VPQ");
    let mut window_cols: Vec<(usize, usize)> = Vec::new();
    for (idx, name) in fixture.metrics.iter().enumerate() {
        if let Some(rest) = name.strip_prefix("VPQ") {
            if let Ok(k) = rest.parse::<usize>() {
                window_cols.push((k, idx));
            }
        }
    }
    window_cols.sort_unstable();
    let verify = vpq_col.filter(|_| !window_cols.is_empty());

    let mut flagged = Vec::new();
    let mut checks: Vec<Option<bool>> = Vec::with_capacity(fixture.rows.len());
    for row in &fixture.rows {
        let check = verify.map(|vpq_idx| {
            let per_k: BTreeMap<usize, f64> = window_cols
                .iter()
                .map(|&(k, idx)| (k, row.values[idx]))
                .collect();
            let recomputed = vpq_aggregate(&per_k).expect("window columns present");
            let ok = (recomputed - row.values[vpq_idx]).abs() <= AGGREGATE_TOLERANCE;
            if !ok {
                flagged.push(row.method.clone());
            }
            ok
        });
        checks.push(check);
    }

    let check_header = verify.map(|_| "vpq_check");
    let mut text = String::new();
    match format {
        ReportFormat::Markdown => {
            text.push_str("| method |");
            for metric in &fixture.metrics {
                text.push_str(&format!(" {metric} |"));
            }
            if let Some(header) = check_header {
                text.push_str(&format!(" {header} |"));
            }
            text.push('\n');
            text.push_str("| --- |");
            for _ in &fixture.metrics {
                text.push_str(" --- |");
            }
            if check_header.is_some() {
                text.push_str(" --- |");
            }
            text.push('\n');
            for (row, check) in fixture.rows.iter().zip(&checks) {
                text.push_str(&format!("| {} |", row.method));
                for cell in &row.cells {
                    text.push_str(&format!(" {cell} |"));
                }
                if let Some(ok) = check {
                    text.push_str(if *ok { " ok |" } else { " FLAG |" });
                }
                text.push('\n');
            }
        }
        ReportFormat::Csv => {
            text.push_str("method");
            for metric in &fixture.metrics {
                text.push(',');
                text.push_str(metric);
            }
            if let Some(header) = check_header {
                text.push(',');
                text.push_str(header);
            }
            text.push('\n');
            for (row, check) in fixture.rows.iter().zip(&checks) {
                text.push_str(&row.method);
                for cell in &row.cells {
                    text.push(',');
                    text.push_str(cell);
                }
                if let Some(ok) = check {
                    text.push_str(if *ok { ",ok" } else { ",FLAG" });
                }
                text.push('\n');
            }
        }
    }

    Ok(RenderedReport { text, flagged })
}
