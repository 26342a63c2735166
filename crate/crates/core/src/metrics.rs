//! PSNR, SSIM and the challenge Score (`PSNR + 20 * SSIM`) under the
//! modcrop/shave protocol.
//!
//! Metrics operate on normalised single-channel images with a peak value
//! of 1.0. SSIM uses an 11×11 Gaussian window (σ = 1.5), K1 = 0.01,
//! K2 = 0.03, and averages the SSIM map over the valid (unpadded) region.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{modcrop, shave, to_luminance, Image, ImageError};

/// PSNR stored in records when the images are identical.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Weight of SSIM in the Score.
pub const SCORE_SSIM_WEIGHT: f64 = 20.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?} (h, w, c)")]
    DimensionMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },
    #[error("image {height}x{width} is smaller than the {window}x{window} SSIM window")]
    TooSmall {
        height: usize,
        width: usize,
        window: usize,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimParams {
    /// Window side in pixels (odd).
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the normalised intensities.
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    /// Normalised 1-D Gaussian; the 2-D window is its outer product.
    pub fn gaussian_1d(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let g: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                (-(d * d) / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let sum: f64 = g.iter().sum();
        g.into_iter().map(|v| v / sum).collect()
    }
}

fn check_dims(a: &Image, b: &Image) -> Result<(), MetricsError> {
    if a.dims() != b.dims() {
        return Err(MetricsError::DimensionMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    Ok(())
}

pub fn mse(reference: &Image, test: &Image) -> Result<f64, MetricsError> {
    check_dims(reference, test)?;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.data().len() as f64)
}

/// `10 log10(1 / MSE)` in dB; `+inf` when the images are identical.
pub fn psnr(reference: &Image, test: &Image) -> Result<f64, MetricsError> {
    let m = mse(reference, test)?;
    Ok(if m == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / m).log10()
    })
}

/// Valid-region correlation of one plane with a separable kernel.
fn filter_valid(plane: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut horiz = vec![0.0; h * ow];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = g.iter().zip(&row[x..x + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for (i, gi) in g.iter().enumerate() {
            let src = &horiz[(y + i) * ow..(y + i + 1) * ow];
            for (o, s) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *o += gi * s;
            }
        }
    }
    out
}

/// SSIM map over the valid region, row-major with shape
/// `(H - window + 1) x (W - window + 1)`. Single-channel inputs only.
pub fn ssim_map(reference: &Image, test: &Image, p: &SsimParams) -> Result<Vec<f64>, MetricsError> {
    check_dims(reference, test)?;
    let (h, w, c) = reference.dims();
    if c != 1 {
        return Err(MetricsError::Image(ImageError::Channels(c)));
    }
    if h < p.window || w < p.window {
        return Err(MetricsError::TooSmall {
            height: h,
            width: w,
            window: p.window,
        });
    }
    let g = p.gaussian_1d();
    let x = reference.plane(0);
    let y = test.plane(0);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mu_x = filter_valid(x, h, w, &g);
    let mu_y = filter_valid(y, h, w, &g);
    let e_xx = filter_valid(&xx, h, w, &g);
    let e_yy = filter_valid(&yy, h, w, &g);
    let e_xy = filter_valid(&xy, h, w, &g);
    let (c1, c2) = (p.c1(), p.c2());

    Ok((0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let (mxx, myy, mxy) = (mx * mx, my * my, mx * my);
            let sx = e_xx[i] - mxx;
            let sy = e_yy[i] - myy;
            let sxy = e_xy[i] - mxy;
            ((2.0 * mxy + c1) * (2.0 * sxy + c2)) / ((mxx + myy + c1) * (sx + sy + c2))
        })
        .collect())
}

/// Mean SSIM over the valid region.
pub fn ssim(reference: &Image, test: &Image, p: &SsimParams) -> Result<f64, MetricsError> {
    let map = ssim_map(reference, test, p)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

pub fn score(psnr_db: f64, ssim: f64) -> f64 {
    psnr_db + SCORE_SSIM_WEIGHT * ssim
}

/// Per-image result of the evaluation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub name: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub score: f64,
    /// `psnr_db` was infinite and has been replaced by [`PSNR_CAP_DB`].
    pub psnr_capped: bool,
}

impl EvalRecord {
    pub fn new(name: impl Into<String>, psnr_db: f64, ssim: f64) -> Self {
        let psnr_capped = psnr_db.is_infinite() && psnr_db > 0.0;
        let psnr_db = if psnr_capped { PSNR_CAP_DB } else { psnr_db };
        Self {
            name: name.into(),
            psnr_db,
            ssim,
            score: score(psnr_db, ssim),
            psnr_capped,
        }
    }
}

/// Shave and SSIM settings for [`evaluate_pair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub shave: usize,
    pub ssim: SsimParams,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            shave: 4,
            ssim: SsimParams::default(),
        }
    }
}

/// Scores `sr` against `gt`: luminance, modcrop of the ground truth, border
/// shave on both, then PSNR / SSIM / Score.
pub fn evaluate_pair(
    name: &str,
    gt: &Image,
    sr: &Image,
    scale: usize,
    shave_border: usize,
    p: &SsimParams,
) -> Result<EvalRecord, MetricsError> {
    let gt = modcrop(&to_luminance(gt)?, scale)?;
    let sr = to_luminance(sr)?;
    if gt.dims() != sr.dims() {
        return Err(MetricsError::DimensionMismatch {
            expected: gt.dims(),
            actual: sr.dims(),
        });
    }
    let gt = shave(&gt, shave_border)?;
    let sr = shave(&sr, shave_border)?;
    Ok(EvalRecord::new(name, psnr(&gt, &sr)?, ssim(&gt, &sr, p)?))
}
