//! Dataset pairing, LR synthesis, batch evaluation, reports and montages.

use std::path::PathBuf;

use thiserror::Error;

use crate::ensemble::PipelineError;
use crate::image::ImageError;
use crate::metrics::MetricsError;
use crate::resample::ResampleError;

mod eval;
mod manifest;
mod montage;
mod report;
mod synth;

pub use eval::{
    evaluate_dirs, fuse_dirs, restore_dir, run_eval, store_sr, EvalOptions, RestoreOutcome,
};
pub use manifest::{build_manifest, images_by_stem, DatasetManifest, ManifestEntry};
pub use montage::{compose_grid, labels_path, montage, MontageColumn, SEPARATOR, SEPARATOR_VALUE};
pub use report::{
    emit_report, fingerprint, format_table, render_report, Aggregate, EntryFailure, Report,
    ReportFormat, TOOL_VERSION,
};
pub use synth::{
    generate_scene, synth_scenes, synthesize_lr, write_synth_demo, SYNTH_HEIGHT, SYNTH_WIDTH,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("no supported images in {0}")]
    EmptyDataset(PathBuf),
    #[error("manifest has no entries")]
    EmptyManifest,
    #[error("report: {0}")]
    Report(String),
    #[error("montage: {0}")]
    Montage(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}
