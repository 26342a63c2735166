use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::metrics::EvalRecord;

pub const TOOL_VERSION: &str = concat!("irsr ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub psnr_db: f64,
    pub ssim: f64,
    pub score: f64,
}

impl Aggregate {
    /// Arithmetic means, summed in slice order.
    pub fn mean_of(records: &[EvalRecord]) -> Option<Self> {
        if records.is_empty() {
            return None;
        }
        let n = records.len() as f64;
        let (mut p, mut s, mut sc) = (0.0, 0.0, 0.0);
        for r in records {
            p += r.psnr_db;
            s += r.ssim;
            sc += r.score;
        }
        Some(Self {
            psnr_db: p / n,
            ssim: s / n,
            score: sc / n,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryFailure {
    pub name: String,
    pub cause: String,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Evaluation report. Contains no timestamps so identical runs produce
/// identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool_version: String,
    pub config_fingerprint: String,
    pub images: Vec<EvalRecord>,
    pub aggregate: Aggregate,
    #[serde(default, skip_serializing_if = "is_false")]
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<EntryFailure>,
}

impl Report {
    /// Sorts records by name and computes the aggregate (NaN when there
    /// are no records; such reports are refused by the renderers).
    pub fn new(
        fingerprint: String,
        mut images: Vec<EvalRecord>,
        mut failures: Vec<EntryFailure>,
    ) -> Self {
        images.sort_by(|a, b| a.name.cmp(&b.name));
        failures.sort_by(|a, b| a.name.cmp(&b.name));
        let aggregate = Aggregate::mean_of(&images).unwrap_or(Aggregate {
            psnr_db: f64::NAN,
            ssim: f64::NAN,
            score: f64::NAN,
        });
        Self {
            tool_version: TOOL_VERSION.to_string(),
            config_fingerprint: fingerprint,
            partial: !failures.is_empty(),
            images,
            aggregate,
            failures,
        }
    }
}

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("fingerprint input serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" | "text-table" => Ok(ReportFormat::Table),
            other => Err(HarnessError::Report(format!(
                "unknown report format `{other}`"
            ))),
        }
    }
}

/// Renders the report. Text tables use four decimals throughout.
pub fn render_report(r: &Report, fmt: ReportFormat) -> Result<String, HarnessError> {
    if r.images.is_empty() {
        return Err(HarnessError::Report("report has no image records".into()));
    }
    match fmt {
        ReportFormat::Json => {
            Ok(serde_json::to_string_pretty(r).expect("report serializes") + "\n")
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["name", "psnr_db", "ssim", "score"])
                .and_then(|_| {
                    for rec in &r.images {
                        w.write_record([
                            rec.name.clone(),
                            rec.psnr_db.to_string(),
                            rec.ssim.to_string(),
                            rec.score.to_string(),
                        ])?;
                    }
                    Ok(())
                })
                .map_err(|e| HarnessError::Report(e.to_string()))?;
            let bytes = w
                .into_inner()
                .map_err(|e| HarnessError::Report(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
        ReportFormat::Table => {
            let rows: Vec<(&str, f64, f64, f64)> = r
                .images
                .iter()
                .map(|x| (x.name.as_str(), x.psnr_db, x.ssim, x.score))
                .chain(std::iter::once((
                    "Mean",
                    r.aggregate.psnr_db,
                    r.aggregate.ssim,
                    r.aggregate.score,
                )))
                .collect();
            Ok(format_table(&rows))
        }
    }
}

/// Four-decimal `name PSNR SSIM Score` table.
pub fn format_table(rows: &[(&str, f64, f64, f64)]) -> String {
    let name_w = rows
        .iter()
        .map(|r| r.0.len())
        .max()
        .unwrap_or(0)
        .max("Method".len());
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<name_w$}  {:>8}  {:>6}  {:>8}",
        "Method", "PSNR", "SSIM", "Score"
    );
    for (name, p, ss, sc) in rows {
        let _ = writeln!(s, "{name:<name_w$}  {p:>8.4}  {ss:>6.4}  {sc:>8.4}");
    }
    s
}

pub fn emit_report(r: &Report, fmt: ReportFormat, path: &Path) -> Result<(), HarnessError> {
    let text = render_report(r, fmt)?;
    fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}
