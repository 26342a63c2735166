use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BackendError, BackendInfo, Restorer};
use crate::image::Image;
use crate::resample::{self, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinKind {
    Bicubic,
    Nearest,
    /// 3×3 box blur (clamp-to-edge) followed by bicubic upscaling.
    BlurBicubic,
    #[serde(rename = "identity1x")]
    Identity1x,
}

impl BuiltinKind {
    pub fn name(self) -> &'static str {
        match self {
            BuiltinKind::Bicubic => "bicubic",
            BuiltinKind::Nearest => "nearest",
            BuiltinKind::BlurBicubic => "blur-bicubic",
            BuiltinKind::Identity1x => "identity1x",
        }
    }
}

impl fmt::Display for BuiltinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinKind {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            BuiltinKind::Bicubic,
            BuiltinKind::Nearest,
            BuiltinKind::BlurBicubic,
            BuiltinKind::Identity1x,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| BackendError::UnknownKind(s.to_string()))
    }
}

/// Pure, deterministic classical restorer.
#[derive(Debug, Clone)]
pub struct BuiltinBackend {
    kind: BuiltinKind,
    kernel: KernelSpec,
    info: BackendInfo,
}

impl BuiltinBackend {
    pub fn new(kind: BuiltinKind, scale: usize, kernel: KernelSpec) -> Result<Self, BackendError> {
        let scale = match kind {
            BuiltinKind::Identity1x => 1,
            _ if scale == 0 => return Err(BackendError::InvalidScale),
            _ => scale,
        };
        Ok(Self {
            kind,
            kernel,
            info: BackendInfo {
                name: kind.name().to_string(),
                scale,
                channels: None,
                internal_tlc: false,
                deterministic: true,
            },
        })
    }

    pub fn kind(&self) -> BuiltinKind {
        self.kind
    }
}

impl Restorer for BuiltinBackend {
    fn info(&self) -> &BackendInfo {
        &self.info
    }

    fn process(&self, img: &Image) -> Result<Image, BackendError> {
        let scale = self.info.scale;
        let fail = |e: resample::ResampleError| BackendError::Failure {
            backend: self.info.name.clone(),
            message: e.to_string(),
        };
        match self.kind {
            BuiltinKind::Identity1x => Ok(img.clone()),
            BuiltinKind::Nearest => resample::nearest_upscale(img, scale).map_err(fail),
            BuiltinKind::Bicubic => {
                resample::bicubic_upscale(img, scale, &self.kernel).map_err(fail)
            }
            BuiltinKind::BlurBicubic => {
                resample::bicubic_upscale(&box_blur3(img), scale, &self.kernel).map_err(fail)
            }
        }
    }
}

/// Normalised 3×3 box filter with clamp-to-edge, applied separably.
pub fn box_blur3(img: &Image) -> Image {
    let (h, w, c) = img.dims();
    let third = 1.0 / 3.0;
    let horiz = Image::from_fn(h, w, c, |ch, y, x| {
        let l = img.get(ch, y, x.saturating_sub(1));
        let r = img.get(ch, y, (x + 1).min(w - 1));
        (l + img.get(ch, y, x) + r) * third
    });
    Image::from_fn(h, w, c, |ch, y, x| {
        let u = horiz.get(ch, y.saturating_sub(1), x);
        let d = horiz.get(ch, (y + 1).min(h - 1), x);
        (u + horiz.get(ch, y, x) + d) * third
    })
}
