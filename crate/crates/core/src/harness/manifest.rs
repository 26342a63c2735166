use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::image::is_supported_path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub hr: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<PathBuf>,
}

/// HR/LR pairs keyed by filename stem, sorted by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub scale: usize,
    #[serde(default)]
    pub notes: String,
}

impl DatasetManifest {
    /// Checks name uniqueness and that every referenced file exists.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.scale == 0 {
            return Err(HarnessError::Manifest("scale must be >= 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.name.as_str()) {
                return Err(HarnessError::Manifest(format!(
                    "duplicate entry `{}`",
                    e.name
                )));
            }
            for p in std::iter::once(&e.hr).chain(e.lr.as_ref()) {
                if !p.is_file() {
                    return Err(HarnessError::Manifest(format!(
                        "entry `{}`: {} does not exist",
                        e.name,
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when every entry has an LR image.
    pub fn lr_complete(&self) -> bool {
        self.entries.iter().all(|e| e.lr.is_some())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let m: Self =
            serde_json::from_str(&text).map_err(|e| HarnessError::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Supported images in `dir`, keyed by stem. Stems are case-sensitive.
pub fn images_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>, HarnessError> {
    let read = fs::read_dir(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = BTreeMap::new();
    for entry in read {
        let entry = entry.map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if !path.is_file() || !is_supported_path(&path) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| {
                HarnessError::Manifest(format!("non-UTF-8 file name {}", path.display()))
            })?
            .to_string();
        if let Some(prev) = out.insert(stem.clone(), path.clone()) {
            return Err(HarnessError::Manifest(format!(
                "duplicate stem `{stem}`: {} and {}",
                prev.display(),
                path.display()
            )));
        }
    }
    Ok(out)
}

/// Pairs HR and LR images by filename stem.
pub fn build_manifest(
    hr_dir: &Path,
    lr_dir: Option<&Path>,
    scale: usize,
) -> Result<DatasetManifest, HarnessError> {
    if scale == 0 {
        return Err(HarnessError::Manifest("scale must be >= 1".into()));
    }
    let hr = images_by_stem(hr_dir)?;
    if hr.is_empty() {
        return Err(HarnessError::EmptyDataset(hr_dir.to_path_buf()));
    }
    let mut lr = match lr_dir {
        Some(d) => Some(images_by_stem(d)?),
        None => None,
    };
    if let Some(lr) = &lr {
        if let Some(stray) = lr.keys().find(|k| !hr.contains_key(*k)) {
            return Err(HarnessError::Manifest(format!(
                "LR image `{stray}` has no HR counterpart"
            )));
        }
        if let Some(missing) = hr.keys().find(|k| !lr.contains_key(*k)) {
            return Err(HarnessError::Manifest(format!(
                "HR image `{missing}` has no LR counterpart"
            )));
        }
    }
    let entries = hr
        .into_iter()
        .map(|(name, hr)| {
            let lr = lr.as_mut().and_then(|m| m.remove(&name));
            ManifestEntry { name, hr, lr }
        })
        .collect();
    Ok(DatasetManifest {
        entries,
        scale,
        notes: String::new(),
    })
}
