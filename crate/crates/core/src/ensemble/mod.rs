//! Test-time refinements and the dual-branch orchestrator.
//!
//! * [`self_ensemble`]: restore all D4 views of the input, undo each view on
//!   the HR grid and average them.
//! * [`tiled_restore`]: pipeline-level local conversion; the LR frame is cut
//!   into overlapping tiles that are restored independently and blended.
//! * [`fuse`]: fixed-weight per-pixel combination of branch outputs.
//! * [`Pipeline`]: runs each configured branch independently, then fuses.

mod pipeline;
mod tiling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{self, BackendError, Restorer};
use crate::geometry::{apply_transform, TransformId};
use crate::image::Image;
use crate::par;

pub use pipeline::{
    run_pipeline, BranchConfig, Pipeline, PipelineConfig, PipelineError, ResolvedBranch,
};
pub use tiling::{tile_starts, tiled_restore, Blend, TileConfig, TilePlan, TileRect};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble config: {0}")]
    Config(String),
    #[error("invalid tile config: {0}")]
    Tiling(String),
    #[error("invalid fusion input: {0}")]
    Fusion(String),
    #[error("view `{transform}` failed: {source}")]
    View {
        transform: TransformId,
        #[source]
        source: Box<EnsembleError>,
    },
    #[error("tile at LR ({y0}, {x0}) failed: {source}")]
    Tile {
        y0: usize,
        x0: usize,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Ordered, duplicate-free subset of D4 to average over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub transforms: Vec<TransformId>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            transforms: TransformId::ALL.to_vec(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.transforms.is_empty() {
            return Err(EnsembleError::Config("transform list is empty".into()));
        }
        for (i, t) in self.transforms.iter().enumerate() {
            if self.transforms[..i].contains(t) {
                return Err(EnsembleError::Config(format!(
                    "transform `{t}` listed twice"
                )));
            }
        }
        Ok(())
    }
}

/// Self-ensemble over `cfg.transforms`, each view restored directly.
pub fn self_ensemble(
    b: &dyn Restorer,
    img_lr: &Image,
    cfg: &EnsembleConfig,
) -> Result<Image, EnsembleError> {
    self_ensemble_with(img_lr, cfg, |view| Ok(backends::restore(b, view)?))
}

/// Self-ensemble where each view goes through `restore_view`; used to nest
/// tiling inside the ensemble.
pub fn self_ensemble_with<F>(
    img_lr: &Image,
    cfg: &EnsembleConfig,
    restore_view: F,
) -> Result<Image, EnsembleError>
where
    F: Fn(&Image) -> Result<Image, EnsembleError> + Sync + Send,
{
    cfg.validate()?;
    let transforms = &cfg.transforms;
    let views: Vec<Result<Image, EnsembleError>> = par::map_indexed(transforms.len(), |i| {
        let t = transforms[i];
        let restored =
            restore_view(&apply_transform(img_lr, t)).map_err(|e| EnsembleError::View {
                transform: t,
                source: Box::new(e),
            })?;
        Ok(apply_transform(&restored, t.inverse()))
    });

    // Accumulate in list order; any failed view aborts the whole ensemble.
    let mut acc: Option<Vec<f64>> = None;
    let mut dims = (0, 0, 0);
    for view in views {
        let view = view?;
        match acc.as_mut() {
            None => {
                dims = view.dims();
                acc = Some(view.into_data());
            }
            Some(sum) => {
                if view.dims() != dims {
                    return Err(EnsembleError::Fusion(format!(
                        "view dims {:?} differ from {dims:?}",
                        view.dims()
                    )));
                }
                for (s, v) in sum.iter_mut().zip(view.data()) {
                    *s += v;
                }
            }
        }
    }
    let n = transforms.len() as f64;
    let data = acc
        .expect("non-empty transform list")
        .into_iter()
        .map(|s| s / n)
        .collect();
    Ok(Image::new(dims.0, dims.1, dims.2, data)
        .expect("ensemble keeps view dims")
        .clamp01())
}

/// Non-negative per-branch weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FusionWeights(Vec<f64>);

impl FusionWeights {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(w: Vec<f64>) -> Result<Self, EnsembleError> {
        if w.is_empty() {
            return Err(EnsembleError::Fusion("no weights".into()));
        }
        if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(EnsembleError::Fusion(format!(
                "weight {bad} is negative or not finite"
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(EnsembleError::Fusion(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self(w))
    }

    /// `n` equal weights.
    pub fn equal(n: usize) -> Self {
        assert!(n > 0, "equal weights need at least one branch");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self(vec![0.5, 0.5])
    }
}

impl TryFrom<Vec<f64>> for FusionWeights {
    type Error = EnsembleError;

    fn try_from(w: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(w)
    }
}

impl From<FusionWeights> for Vec<f64> {
    fn from(w: FusionWeights) -> Self {
        w.0
    }
}

/// Weighted per-pixel sum, clamped to `[0, 1]`.
pub fn fuse(images: &[Image], w: &FusionWeights) -> Result<Image, EnsembleError> {
    Ok(fuse_unclamped(images, w)?.clamp01())
}

/// Weighted per-pixel sum without the final clamp.
pub fn fuse_unclamped(images: &[Image], w: &FusionWeights) -> Result<Image, EnsembleError> {
    if images.len() != w.len() {
        return Err(EnsembleError::Fusion(format!(
            "{} images but {} weights",
            images.len(),
            w.len()
        )));
    }
    let first = &images[0];
    if let Some(bad) = images.iter().find(|img| !img.same_dims(first)) {
        return Err(EnsembleError::Fusion(format!(
            "dimension mismatch: {:?} vs {:?}",
            first.dims(),
            bad.dims()
        )));
    }
    let mut acc = vec![0.0; first.data().len()];
    for (img, &wt) in images.iter().zip(w.as_slice()) {
        for (a, v) in acc.iter_mut().zip(img.data()) {
            *a += wt * v;
        }
    }
    let (h, wd, c) = first.dims();
    Ok(Image::new(h, wd, c, acc).expect("fusion keeps dims"))
}
