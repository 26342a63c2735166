//! Separable Keys-cubic resampling: degradation synthesis and the bicubic
//! baseline restorer.
//!
//! Grid mapping is centre-aligned (`src = (dst + 0.5) * in / out - 0.5`),
//! out-of-range taps are clamped to the edge, and on downsampling with
//! antialiasing the kernel is stretched by `in / out`. Weights are always
//! renormalised to sum to one. Accumulation is `f64` with a fixed tap order
//! per output sample, so results do not depend on thread count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::Image;
use crate::par;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResampleError {
    #[error("target size {0}x{1} has a zero dimension")]
    ZeroSize(usize, usize),
    #[error("scale must be >= 1")]
    ZeroScale,
    #[error("{height}x{width} is not divisible by scale {scale}; modcrop first")]
    NotDivisible {
        height: usize,
        width: usize,
        scale: usize,
    },
}

/// Cubic convolution kernel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    /// Keys sharpness parameter.
    pub a: f64,
    /// Widen the kernel by the reduction factor when downsampling.
    pub antialias: bool,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            a: -0.5,
            antialias: true,
        }
    }
}

/// Keys cubic convolution kernel with parameter `a`; support is `(-2, 2)`.
pub fn keys_cubic(x: f64, a: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Taps `(source index, weight)` for one output sample.
pub type Taps = Vec<(usize, f64)>;

/// Per-output-sample taps for resampling an axis of `in_len` samples to
/// `out_len` samples.
pub fn axis_weights(in_len: usize, out_len: usize, k: &KernelSpec) -> Vec<Taps> {
    let ratio = in_len as f64 / out_len as f64;
    let stretch = if k.antialias && ratio > 1.0 {
        ratio
    } else {
        1.0
    };
    let support = 2.0 * stretch;
    let last = in_len as isize - 1;
    (0..out_len)
        .map(|d| {
            let center = (d as f64 + 0.5) * ratio - 0.5;
            let lo = (center - support).floor() as isize;
            let hi = (center + support).ceil() as isize;
            let mut taps: Taps = (lo..=hi)
                .filter_map(|i| {
                    let w = keys_cubic((i as f64 - center) / stretch, k.a);
                    (w != 0.0).then(|| (i.clamp(0, last) as usize, w))
                })
                .collect();
            let sum: f64 = taps.iter().map(|t| t.1).sum();
            for t in &mut taps {
                t.1 /= sum;
            }
            taps
        })
        .collect()
}

/// Resizes `img` to `out_h × out_w`; output is clamped to `[0, 1]`.
pub fn resize(
    img: &Image,
    out_h: usize,
    out_w: usize,
    k: &KernelSpec,
) -> Result<Image, ResampleError> {
    Ok(resize_raw(img, out_h, out_w, k)?.clamp01())
}

/// Resize without the final clamp.
pub(crate) fn resize_raw(
    img: &Image,
    out_h: usize,
    out_w: usize,
    k: &KernelSpec,
) -> Result<Image, ResampleError> {
    if out_h == 0 || out_w == 0 {
        return Err(ResampleError::ZeroSize(out_h, out_w));
    }
    let (h, w, c) = img.dims();
    let wx = axis_weights(w, out_w, k);
    let wy = axis_weights(h, out_h, k);

    // Horizontal pass: (c, h, out_w).
    let rows: Vec<Vec<f64>> = par::map_indexed(c * h, |row| {
        let src = &img.data()[row * w..(row + 1) * w];
        wx.iter()
            .map(|taps| taps.iter().map(|&(i, wt)| src[i] * wt).sum())
            .collect()
    });
    // Vertical pass: (c, out_h, out_w).
    let out_rows: Vec<Vec<f64>> = par::map_indexed(c * out_h, |row| {
        let (ch, y) = (row / out_h, row % out_h);
        let mut acc = vec![0.0; out_w];
        for &(i, wt) in &wy[y] {
            let src = &rows[ch * h + i];
            for (a, s) in acc.iter_mut().zip(src) {
                *a += s * wt;
            }
        }
        acc
    });
    let data = out_rows.into_iter().flatten().collect();
    Ok(Image::new(out_h, out_w, c, data).expect("resize produces consistent buffers"))
}

/// Downsamples by an integer factor. Dimensions must already be divisible.
pub fn degrade(img_hr: &Image, scale: usize, k: &KernelSpec) -> Result<Image, ResampleError> {
    if scale == 0 {
        return Err(ResampleError::ZeroScale);
    }
    let (h, w, _) = img_hr.dims();
    if h % scale != 0 || w % scale != 0 {
        return Err(ResampleError::NotDivisible {
            height: h,
            width: w,
            scale,
        });
    }
    resize(img_hr, h / scale, w / scale, k)
}

/// Bicubic ×4 downsampling used to synthesise LR inputs.
pub fn degrade_x4(img_hr: &Image, k: &KernelSpec) -> Result<Image, ResampleError> {
    degrade(img_hr, 4, k)
}

pub fn bicubic_upscale(
    img_lr: &Image,
    scale: usize,
    k: &KernelSpec,
) -> Result<Image, ResampleError> {
    if scale == 0 {
        return Err(ResampleError::ZeroScale);
    }
    if scale == 1 {
        return Ok(img_lr.clone().clamp01());
    }
    resize(img_lr, img_lr.height() * scale, img_lr.width() * scale, k)
}

/// Pixel replication by an integer factor.
pub fn nearest_upscale(img_lr: &Image, scale: usize) -> Result<Image, ResampleError> {
    if scale == 0 {
        return Err(ResampleError::ZeroScale);
    }
    Ok(img_lr.replicate(scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(keys_cubic(0.0, -0.5), 1.0);
        assert_eq!(keys_cubic(1.0, -0.5), 0.0);
        assert_eq!(keys_cubic(2.0, -0.5), 0.0);
        assert_eq!(keys_cubic(-3.0, -0.5), 0.0);
        // a/8 * (1 - 10 + 32 - 32) = -0.5 * -9 / 8
        assert!((keys_cubic(1.5, -0.5) - (-0.0625)).abs() < 1e-15);
        assert!((keys_cubic(0.5, -0.5) - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn shapes() {
        let img = Image::filled(128, 256, 1, 0.3);
        assert_eq!(
            degrade_x4(&img, &KernelSpec::default()).unwrap().dims(),
            (32, 64, 1)
        );
        assert!(matches!(
            degrade_x4(&Image::filled(130, 256, 1, 0.3), &KernelSpec::default()),
            Err(ResampleError::NotDivisible { .. })
        ));
        assert!(resize(&img, 0, 3, &KernelSpec::default()).is_err());
        assert_eq!(
            bicubic_upscale(&Image::filled(3, 5, 3, 0.1), 4, &KernelSpec::default())
                .unwrap()
                .dims(),
            (12, 20, 3)
        );
    }

    #[test]
    fn weights_normalised_and_clamped() {
        for (n_in, n_out) in [(7, 3), (3, 7), (16, 4), (5, 5), (1, 4)] {
            for k in [
                KernelSpec::default(),
                KernelSpec {
                    a: -0.75,
                    antialias: false,
                },
            ] {
                for taps in axis_weights(n_in, n_out, &k) {
                    let s: f64 = taps.iter().map(|t| t.1).sum();
                    assert!((s - 1.0).abs() < 1e-12);
                    assert!(taps.iter().all(|t| t.0 < n_in));
                }
            }
        }
    }

    #[test]
    fn upscale_beats_nearest_on_a_smooth_image() {
        let k = KernelSpec::default();
        let hr = Image::from_fn(64, 64, 1, |_, y, x| {
            let (dy, dx) = (y as f64 - 30.0, x as f64 - 35.0);
            0.2 + 0.6 * (-(dy * dy + dx * dx) / (2.0 * 12.0 * 12.0)).exp()
        });
        let lr = degrade_x4(&hr, &k).unwrap();
        let mse = |a: &Image| -> f64 {
            a.data()
                .iter()
                .zip(hr.data())
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                / a.data().len() as f64
        };
        let bic = mse(&bicubic_upscale(&lr, 4, &k).unwrap());
        let nn = mse(&nearest_upscale(&lr, 4).unwrap());
        assert!(bic < nn, "bicubic {bic} vs nearest {nn}");
    }
}
