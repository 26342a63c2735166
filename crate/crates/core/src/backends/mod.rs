//! Restorer backends: the abstraction every branch operator runs behind.
//!
//! Built-in backends are classical, pure and D4-equivariant; they serve as
//! the bicubic baseline and as exact fixtures for ensemble and tiling tests.
//! Trained networks plug in out-of-process through the `irsr/1` protocol
//! (see [`wire`] and [`external`]).

mod builtin;
pub mod external;
pub mod wire;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::Image;
use crate::resample::KernelSpec;

pub use builtin::{BuiltinBackend, BuiltinKind};
pub use external::ExternalBackend;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("unknown backend kind `{0}`")]
    UnknownKind(String),
    #[error("backend scale must be >= 1")]
    InvalidScale,
    #[error("backend `{backend}` does not accept {channels}-channel input")]
    UnsupportedChannels { backend: String, channels: usize },
    #[error("backend `{backend}` failed: {message}")]
    Failure { backend: String, message: String },
    #[error("backend `{backend}` returned {actual:?}, expected {expected:?} (h, w, c)")]
    DimensionMismatch {
        backend: String,
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },
    #[error("backend `{backend}` timed out after {after:?}")]
    Timeout { backend: String, after: Duration },
    #[error("handshake with `{backend}` failed: {message}")]
    Handshake { backend: String, message: String },
    #[error("protocol violation from `{backend}`: {message}")]
    Protocol { backend: String, message: String },
    #[error("payload underrun from `{backend}`: expected {expected} bytes, got {got}")]
    PayloadUnderrun {
        backend: String,
        expected: usize,
        got: usize,
    },
    #[error("backend process `{backend}` exited with {status}")]
    ProcessExit { backend: String, status: String },
    #[error("cannot spawn `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("connection to `{backend}` is closed after an earlier failure")]
    Closed { backend: String },
}

/// Static description of a backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackendInfo {
    pub name: String,
    pub scale: usize,
    /// Accepted channel count; `None` accepts 1 or 3.
    pub channels: Option<usize>,
    /// The model applies local conversion internally, so pipeline tiling is
    /// skipped for this branch.
    pub internal_tlc: bool,
    pub deterministic: bool,
}

/// An LR → HR restorer with a fixed integer scale.
///
/// Implementations must be callable from several threads; backends that
/// cannot run concurrently serialize internally.
pub trait Restorer: Send + Sync {
    fn info(&self) -> &BackendInfo;

    /// Raw restoration. Callers go through [`restore`], which validates
    /// shapes and clamps.
    fn process(&self, img: &Image) -> Result<Image, BackendError>;
}

/// Runs `b` on `img_lr`, checking the output shape and clamping to `[0, 1]`.
pub fn restore(b: &dyn Restorer, img_lr: &Image) -> Result<Image, BackendError> {
    Ok(restore_unclamped(b, img_lr)?.clamp01())
}

pub(crate) fn restore_unclamped(b: &dyn Restorer, img_lr: &Image) -> Result<Image, BackendError> {
    let info = b.info();
    let (h, w, c) = img_lr.dims();
    if let Some(expected) = info.channels {
        if expected != c {
            return Err(BackendError::UnsupportedChannels {
                backend: info.name.clone(),
                channels: c,
            });
        }
    }
    let out = b.process(img_lr)?;
    let expected = (h * info.scale, w * info.scale, c);
    if out.dims() != expected {
        return Err(BackendError::DimensionMismatch {
            backend: info.name.clone(),
            expected,
            actual: out.dims(),
        });
    }
    Ok(out)
}

/// Constructs one of the classical backends. `identity1x` always has scale 1.
pub fn builtin_backend(kind: BuiltinKind, scale: usize) -> Result<BuiltinBackend, BackendError> {
    BuiltinBackend::new(kind, scale, KernelSpec::default())
}

pub fn external_backend(
    command: &[String],
    timeout: Duration,
) -> Result<ExternalBackend, BackendError> {
    ExternalBackend::spawn(command, timeout)
}

/// Declarative backend choice, as written in configs and on the command
/// line (`bicubic`, `nearest`, `blur-bicubic`, `identity1x`, `ext:CMD ARGS`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BackendSpec {
    Builtin {
        kind: BuiltinKind,
    },
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: f64,
    },
}

fn default_timeout_secs() -> f64 {
    600.0
}

impl BackendSpec {
    /// Instantiates the backend. `scale` and `kernel` apply to built-ins;
    /// external backends announce their own scale, which must match.
    pub fn build(
        &self,
        scale: usize,
        kernel: KernelSpec,
    ) -> Result<Box<dyn Restorer>, BackendError> {
        match self {
            BackendSpec::Builtin { kind } => {
                Ok(Box::new(BuiltinBackend::new(*kind, scale, kernel)?))
            }
            BackendSpec::External {
                command,
                timeout_secs,
            } => {
                let b = ExternalBackend::spawn(command, Duration::from_secs_f64(*timeout_secs))?;
                if b.info().scale != scale {
                    return Err(BackendError::Handshake {
                        backend: b.info().name.clone(),
                        message: format!(
                            "announced scale {}, pipeline needs {scale}",
                            b.info().scale
                        ),
                    });
                }
                Ok(Box::new(b))
            }
        }
    }
}

impl FromStr for BackendSpec {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(cmd) = s.strip_prefix("ext:") {
            let command: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if command.is_empty() {
                return Err(BackendError::UnknownKind(s.to_string()));
            }
            return Ok(BackendSpec::External {
                command,
                timeout_secs: default_timeout_secs(),
            });
        }
        Ok(BackendSpec::Builtin { kind: s.parse()? })
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Builtin { kind } => write!(f, "{kind}"),
            BackendSpec::External { command, .. } => write!(f, "ext:{}", command.join(" ")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Shrinker(BackendInfo);

    impl Restorer for Shrinker {
        fn info(&self) -> &BackendInfo {
            &self.0
        }
        fn process(&self, img: &Image) -> Result<Image, BackendError> {
            Ok(img.clone())
        }
    }

    #[test]
    fn restore_checks_output_shape() {
        let b = Shrinker(BackendInfo {
            name: "shrinker".into(),
            scale: 2,
            channels: Some(1),
            internal_tlc: false,
            deterministic: true,
        });
        let img = Image::filled(4, 5, 1, 0.5);
        match restore(&b, &img) {
            Err(BackendError::DimensionMismatch {
                expected, actual, ..
            }) => {
                assert_eq!(expected, (8, 10, 1));
                assert_eq!(actual, (4, 5, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            restore(&b, &Image::filled(4, 5, 3, 0.5)),
            Err(BackendError::UnsupportedChannels { channels: 3, .. })
        ));
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "blur-bicubic".parse::<BackendSpec>().unwrap(),
            BackendSpec::Builtin {
                kind: BuiltinKind::BlurBicubic
            }
        );
        match "ext:python3 adapter.py --kind hat"
            .parse::<BackendSpec>()
            .unwrap()
        {
            BackendSpec::External { command, .. } => {
                assert_eq!(command, ["python3", "adapter.py", "--kind", "hat"]);
            }
            other => panic!("{other:?}"),
        }
        assert!("ext:".parse::<BackendSpec>().is_err());
        assert!(matches!(
            "lanczos".parse::<BackendSpec>(),
            Err(BackendError::UnknownKind(_))
        ));
    }
}
