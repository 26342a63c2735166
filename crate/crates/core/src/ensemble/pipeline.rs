use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    fuse, self_ensemble_with, tiled_restore, EnsembleConfig, EnsembleError, FusionWeights,
    TileConfig,
};
use crate::backends::{self, BackendError, BackendSpec, Restorer};
use crate::image::Image;
use crate::par;
use crate::resample::KernelSpec;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("cannot start backend for branch `{branch}`: {source}")]
    Backend {
        branch: String,
        #[source]
        source: BackendError,
    },
    #[error("branch `{branch}` failed: {source}")]
    Branch {
        branch: String,
        #[source]
        source: EnsembleError,
    },
    #[error("fusion failed: {0}")]
    Fusion(#[source] EnsembleError),
}

/// One restoration branch as written in a config file.
///
/// `tiling` and `self_ensemble` default by position: the first branch is
/// tiled, the second is self-ensembled, any further branch runs plain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub name: String,
    /// `bicubic`, `nearest`, `blur-bicubic`, `identity1x` or `ext:CMD ARGS`.
    #[serde(with = "spec_string")]
    pub backend: BackendSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiling: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_ensemble: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile: Option<TileConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
}

mod spec_string {
    use super::BackendSpec;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(spec: &BackendSpec, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(spec)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BackendSpec, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl BranchConfig {
    pub fn new(name: impl Into<String>, backend: BackendSpec) -> Self {
        Self {
            name: name.into(),
            backend,
            timeout_secs: None,
            weight: None,
            tiling: None,
            self_ensemble: None,
            tile: None,
            ensemble: None,
        }
    }

    pub fn with_tiling(mut self, tc: TileConfig) -> Self {
        self.tiling = Some(true);
        self.tile = Some(tc);
        self
    }

    pub fn without_tiling(mut self) -> Self {
        self.tiling = Some(false);
        self
    }

    pub fn with_self_ensemble(mut self, on: bool) -> Self {
        self.self_ensemble = Some(on);
        self
    }

    pub fn with_weight(mut self, w: f64) -> Self {
        self.weight = Some(w);
        self
    }

    fn resolve(&self, index: usize) -> Result<ResolvedBranch, PipelineError> {
        let tiling = self.tiling.unwrap_or(index == 0);
        let ensemble = self.self_ensemble.unwrap_or(index == 1);
        let tile = tiling.then(|| self.tile.unwrap_or_default());
        let ensemble = ensemble.then(|| self.ensemble.clone().unwrap_or_default());
        if let Some(tc) = &tile {
            tc.validate()
                .map_err(|e| PipelineError::Config(format!("branch `{}`: {e}", self.name)))?;
        }
        if let Some(ec) = &ensemble {
            ec.validate()
                .map_err(|e| PipelineError::Config(format!("branch `{}`: {e}", self.name)))?;
        }
        let mut backend = self.backend.clone();
        if let (BackendSpec::External { timeout_secs, .. }, Some(t)) =
            (&mut backend, self.timeout_secs)
        {
            *timeout_secs = t;
        }
        Ok(ResolvedBranch {
            name: self.name.clone(),
            backend,
            tile,
            ensemble,
        })
    }
}

/// A branch with its refinements made explicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedBranch {
    pub name: String,
    pub backend: BackendSpec,
    pub tile: Option<TileConfig>,
    pub ensemble: Option<EnsembleConfig>,
}

/// Declarative description of a full multi-branch run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_scale")]
    pub scale: usize,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(rename = "branch")]
    pub branches: Vec<BranchConfig>,
}

fn default_scale() -> usize {
    4
}

impl PipelineConfig {
    pub fn new(scale: usize, branches: Vec<BranchConfig>) -> Self {
        Self {
            scale,
            kernel: KernelSpec::default(),
            branches,
        }
    }

    /// Branches with position defaults applied.
    pub fn resolved_branches(&self) -> Result<Vec<ResolvedBranch>, PipelineError> {
        if self.branches.is_empty() {
            return Err(PipelineError::Config(
                "at least one branch is required".into(),
            ));
        }
        if self.scale == 0 {
            return Err(PipelineError::Config("scale must be >= 1".into()));
        }
        for (i, b) in self.branches.iter().enumerate() {
            if self.branches[..i].iter().any(|o| o.name == b.name) {
                return Err(PipelineError::Config(format!(
                    "duplicate branch name `{}`",
                    b.name
                )));
            }
        }
        self.branches
            .iter()
            .enumerate()
            .map(|(i, b)| b.resolve(i))
            .collect()
    }

    /// Explicit per-branch weights, or equal weights when none are given.
    pub fn fusion_weights(&self) -> Result<FusionWeights, PipelineError> {
        let given: Vec<Option<f64>> = self.branches.iter().map(|b| b.weight).collect();
        if given.iter().all(Option::is_none) {
            return Ok(FusionWeights::equal(self.branches.len().max(1)));
        }
        let w: Option<Vec<f64>> = given.into_iter().collect();
        let w = w.ok_or_else(|| {
            PipelineError::Config("either every branch sets `weight` or none does".into())
        })?;
        FusionWeights::new(w).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.resolved_branches()?;
        cfg.fusion_weights()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config serializes")
    }
}

/// A pipeline with live backends, ready to run.
pub struct Pipeline {
    branches: Vec<(ResolvedBranch, Box<dyn Restorer>)>,
    weights: FusionWeights,
}

impl Pipeline {
    pub fn build(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let resolved = cfg.resolved_branches()?;
        let weights = cfg.fusion_weights()?;
        let mut branches = Vec::with_capacity(resolved.len());
        for b in resolved {
            let backend = b.backend.build(cfg.scale, cfg.kernel).map_err(|source| {
                PipelineError::Backend {
                    branch: b.name.clone(),
                    source,
                }
            })?;
            branches.push((b, backend));
        }
        Ok(Self { branches, weights })
    }

    pub fn weights(&self) -> &FusionWeights {
        &self.weights
    }

    pub fn branch_names(&self) -> Vec<&str> {
        self.branches.iter().map(|(b, _)| b.name.as_str()).collect()
    }

    /// Refined output of every branch, in config order.
    pub fn run_branches(&self, img_lr: &Image) -> Result<Vec<Image>, PipelineError> {
        let outputs = par::map_indexed(self.branches.len(), |i| {
            let (branch, backend) = &self.branches[i];
            run_branch(branch, backend.as_ref(), img_lr).map_err(|source| PipelineError::Branch {
                branch: branch.name.clone(),
                source,
            })
        });
        outputs.into_iter().collect()
    }

    pub fn run(&self, img_lr: &Image) -> Result<Image, PipelineError> {
        let outputs = self.run_branches(img_lr)?;
        fuse(&outputs, &self.weights).map_err(PipelineError::Fusion)
    }
}

fn run_branch(
    branch: &ResolvedBranch,
    backend: &dyn Restorer,
    img_lr: &Image,
) -> Result<Image, EnsembleError> {
    // A backend that converts internally is never tiled by the pipeline.
    let tile = branch.tile.filter(|_| !backend.info().internal_tlc);
    let restore_view = |view: &Image| -> Result<Image, EnsembleError> {
        match &tile {
            Some(tc) => tiled_restore(backend, view, tc),
            None => Ok(backends::restore(backend, view)?),
        }
    };
    match &branch.ensemble {
        Some(ec) => self_ensemble_with(img_lr, ec, restore_view),
        None => restore_view(img_lr),
    }
}

/// Builds the backends for `cfg` and runs it once.
pub fn run_pipeline(cfg: &PipelineConfig, img_lr: &Image) -> Result<Image, PipelineError> {
    Pipeline::build(cfg)?.run(img_lr)
}
