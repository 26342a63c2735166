use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::report::{fingerprint, EntryFailure, Report};
use super::{images_by_stem, DatasetManifest, HarnessError, ManifestEntry};
use crate::ensemble::{fuse, FusionWeights, Pipeline, PipelineConfig, PipelineError};
use crate::image::{load_image, store_image, BitDepth, Image, PixelFormat};
use crate::metrics::{evaluate_pair, EvalRecord, MetricConfig};
use crate::par;

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Data-parallel workers; each owns its own backend instances.
    pub workers: usize,
    /// Where to write SR outputs (16-bit PNG, `<name>.png`), if anywhere.
    pub sr_dir: Option<PathBuf>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            sr_dir: None,
        }
    }
}

#[derive(Serialize)]
struct PipelineFingerprint<'a> {
    pipeline: &'a PipelineConfig,
    metrics: &'a MetricConfig,
    dataset_scale: usize,
}

#[derive(Serialize)]
struct EvalFingerprint<'a> {
    mode: &'static str,
    scale: usize,
    metrics: &'a MetricConfig,
}

/// Runs `items` through `f` on `workers` threads, one pipeline per worker,
/// returning results in input order.
fn run_pool<T, R, F>(pipelines: &[Pipeline], items: &[T], f: F) -> Result<Vec<R>, HarnessError>
where
    T: Sync,
    R: Send,
    F: Fn(&Pipeline, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(pipelines.len())
            .build()
            .map_err(|e| HarnessError::Pool(e.to_string()))?;
        Ok(pool.install(|| {
            items
                .par_iter()
                .map(|item| {
                    let worker = rayon::current_thread_index().unwrap_or(0) % pipelines.len();
                    f(&pipelines[worker], item)
                })
                .collect()
        }))
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(items.iter().map(|item| f(&pipelines[0], item)).collect())
    }
}

fn eval_entry(
    pipeline: &Pipeline,
    e: &ManifestEntry,
    scale: usize,
    metric_cfg: &MetricConfig,
    sr_dir: Option<&Path>,
) -> Result<EvalRecord, HarnessError> {
    let lr_path =
        e.lr.as_ref()
            .ok_or_else(|| HarnessError::Manifest(format!("entry `{}` has no LR image", e.name)))?;
    let lr = load_image(lr_path)?;
    let sr = pipeline.run(&lr)?;
    if let Some(dir) = sr_dir {
        store_sr(&sr, dir, &e.name)?;
    }
    let hr = load_image(&e.hr)?;
    Ok(evaluate_pair(
        &e.name,
        &hr,
        &sr,
        scale,
        metric_cfg.shave,
        &metric_cfg.ssim,
    )?)
}

/// Writes an SR output as a 16-bit PNG.
pub fn store_sr(sr: &Image, dir: &Path, name: &str) -> Result<PathBuf, HarnessError> {
    let path = dir.join(format!("{name}.png"));
    store_image(sr, &path, PixelFormat::for_image(sr, BitDepth::Sixteen))?;
    Ok(path)
}

/// Full protocol over a manifest: pipeline on every LR input, then metrics
/// against the HR ground truth. Entry failures are collected and mark the
/// report partial instead of aborting.
pub fn run_eval(
    m: &DatasetManifest,
    cfg: &PipelineConfig,
    metric_cfg: &MetricConfig,
    opts: &EvalOptions,
) -> Result<Report, HarnessError> {
    if m.entries.is_empty() {
        return Err(HarnessError::EmptyManifest);
    }
    if cfg.scale != m.scale {
        return Err(HarnessError::Manifest(format!(
            "manifest scale {} differs from pipeline scale {}",
            m.scale, cfg.scale
        )));
    }
    if let Some(dir) = &opts.sr_dir {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.clone(),
            source,
        })?;
    }
    let workers = opts.workers.max(1);
    let pipelines = (0..workers)
        .map(|_| Pipeline::build(cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let results = run_pool(&pipelines, &m.entries, |p, e| {
        eval_entry(p, e, m.scale, metric_cfg, opts.sr_dir.as_deref())
    })?;

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (e, r) in m.entries.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(err) => failures.push(EntryFailure {
                name: e.name.clone(),
                cause: err.to_string(),
            }),
        }
    }
    let fp = fingerprint(&PipelineFingerprint {
        pipeline: cfg,
        metrics: metric_cfg,
        dataset_scale: m.scale,
    });
    Ok(Report::new(fp, records, failures))
}

/// Scores existing SR images against ground truth, paired by stem.
pub fn evaluate_dirs(
    gt_dir: &Path,
    sr_dir: &Path,
    scale: usize,
    metric_cfg: &MetricConfig,
) -> Result<Report, HarnessError> {
    let gt = images_by_stem(gt_dir)?;
    let sr = images_by_stem(sr_dir)?;
    if gt.is_empty() {
        return Err(HarnessError::EmptyDataset(gt_dir.to_path_buf()));
    }
    if let Some(stray) = sr.keys().find(|k| !gt.contains_key(*k)) {
        return Err(HarnessError::Manifest(format!(
            "SR image `{stray}` has no ground truth"
        )));
    }
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (name, gt_path) in &gt {
        let result = match sr.get(name) {
            None => Err(HarnessError::Manifest(format!("no SR image for `{name}`"))),
            Some(sr_path) => (|| {
                let g = load_image(gt_path)?;
                let s = load_image(sr_path)?;
                Ok(evaluate_pair(
                    name,
                    &g,
                    &s,
                    scale,
                    metric_cfg.shave,
                    &metric_cfg.ssim,
                )?)
            })(),
        };
        match result {
            Ok(r) => records.push(r),
            Err(e) => failures.push(EntryFailure {
                name: name.clone(),
                cause: e.to_string(),
            }),
        }
    }
    let fp = fingerprint(&EvalFingerprint {
        mode: "eval",
        scale,
        metrics: metric_cfg,
    });
    Ok(Report::new(fp, records, failures))
}

/// Per-stem result of [`restore_dir`].
pub type RestoreOutcome = (String, Result<PathBuf, HarnessError>);

/// Runs the pipeline on every image in `in_dir`, writing `<stem>.png`
/// (16-bit) to `out_dir`. Outcomes are returned per stem, sorted by name.
pub fn restore_dir(
    cfg: &PipelineConfig,
    in_dir: &Path,
    out_dir: &Path,
    workers: usize,
) -> Result<Vec<RestoreOutcome>, HarnessError> {
    let inputs: Vec<(String, PathBuf)> = images_by_stem(in_dir)?.into_iter().collect();
    if inputs.is_empty() {
        return Err(HarnessError::EmptyDataset(in_dir.to_path_buf()));
    }
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let pipelines = (0..workers.max(1))
        .map(|_| Pipeline::build(cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let results = run_pool(&pipelines, &inputs, |p, (name, path)| {
        let lr = load_image(path)?;
        let sr = p.run(&lr)?;
        store_sr(&sr, out_dir, name)
    })?;
    Ok(inputs.into_iter().map(|(n, _)| n).zip(results).collect())
}

/// Fuses same-stem images from several directories with `weights`,
/// writing 16-bit PNGs to `out_dir`. Every directory must hold the same
/// stems.
pub fn fuse_dirs(
    dirs: &[PathBuf],
    weights: &FusionWeights,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    if dirs.len() != weights.len() {
        return Err(HarnessError::Manifest(format!(
            "{} directories but {} weights",
            dirs.len(),
            weights.len()
        )));
    }
    let indexes = dirs
        .iter()
        .map(|d| images_by_stem(d))
        .collect::<Result<Vec<_>, _>>()?;
    let first = indexes
        .first()
        .ok_or_else(|| HarnessError::Manifest("no input directories".into()))?;
    if first.is_empty() {
        return Err(HarnessError::EmptyDataset(dirs[0].clone()));
    }
    for (d, idx) in dirs.iter().zip(&indexes).skip(1) {
        if let Some(stem) = first
            .keys()
            .find(|k| !idx.contains_key(*k))
            .or_else(|| idx.keys().find(|k| !first.contains_key(*k)))
        {
            return Err(HarnessError::Manifest(format!(
                "`{stem}` is not present in every input (checking {})",
                d.display()
            )));
        }
    }
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let names: Vec<&String> = first.keys().collect();
    let written = par::map_indexed(names.len(), |i| {
        let name = names[i];
        let images = indexes
            .iter()
            .map(|idx| load_image(&idx[name]))
            .collect::<Result<Vec<_>, _>>()?;
        let fused = fuse(&images, weights).map_err(PipelineError::Fusion)?;
        store_sr(&fused, out_dir, name)
    });
    written.into_iter().collect()
}
