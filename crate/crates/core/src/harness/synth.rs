//! LR synthesis for a manifest and the bundled synthetic HR scene set.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetManifest, HarnessError};
use crate::image::{load_image, modcrop, store_image, BitDepth, Image, PixelFormat};
use crate::par;
use crate::resample::{degrade, KernelSpec};

/// HR size of the bundled synthetic frames; deliberately not a multiple of
/// 4 so that modcrop is exercised.
pub const SYNTH_HEIGHT: usize = 130;
pub const SYNTH_WIDTH: usize = 162;

/// Modcrops and downsamples every HR image, writing 16-bit PNGs named
/// `<name>.png` into `out_dir`. Returns the manifest with LR paths set.
pub fn synthesize_lr(
    m: &DatasetManifest,
    out_dir: &Path,
    k: &KernelSpec,
) -> Result<DatasetManifest, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let scale = m.scale;
    let written: Vec<Result<PathBuf, HarnessError>> = par::map_indexed(m.entries.len(), |i| {
        let e = &m.entries[i];
        let hr = modcrop(&load_image(&e.hr)?, scale)?;
        let lr = degrade(&hr, scale, k)?;
        let path = out_dir.join(format!("{}.png", e.name));
        store_image(&lr, &path, PixelFormat::for_image(&lr, BitDepth::Sixteen))?;
        Ok(path)
    });
    let mut out = m.clone();
    for (entry, path) in out.entries.iter_mut().zip(written) {
        entry.lr = Some(path?);
    }
    Ok(out)
}

/// A smooth thermal-like scene: a gentle background gradient, warm and cold
/// Gaussian blobs, and a few constant-offset rectangles (step edges).
pub fn generate_scene<R: Rng>(height: usize, width: usize, rng: &mut R) -> Image {
    let (h, w) = (height as f64, width as f64);
    let base = rng.gen_range(0.25..0.45);
    let gy = rng.gen_range(-0.1..0.1) / h;
    let gx = rng.gen_range(-0.1..0.1) / w;

    let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.gen_range(3..7))
        .map(|_| {
            let amp = rng.gen_range(-0.2..0.35);
            let cy = rng.gen_range(0.0..h);
            let cx = rng.gen_range(0.0..w);
            let sigma = rng.gen_range(3.0..h.min(w) / 5.0);
            (amp, cy, cx, sigma)
        })
        .collect();
    let rects: Vec<(f64, f64, f64, f64, f64)> = (0..rng.gen_range(1..4))
        .map(|_| {
            let y0 = rng.gen_range(0.0..h * 0.8);
            let x0 = rng.gen_range(0.0..w * 0.8);
            let y1 = y0 + rng.gen_range(6.0..h * 0.4);
            let x1 = x0 + rng.gen_range(6.0..w * 0.4);
            (y0, x0, y1, x1, rng.gen_range(-0.15..0.2))
        })
        .collect();

    Image::from_fn(height, width, 1, |_, y, x| {
        let (yf, xf) = (y as f64, x as f64);
        let mut v = base + gy * yf + gx * xf;
        for &(amp, cy, cx, s) in &blobs {
            let d2 = (yf - cy).powi(2) + (xf - cx).powi(2);
            v += amp * (-d2 / (2.0 * s * s)).exp();
        }
        for &(y0, x0, y1, x1, step) in &rects {
            if yf >= y0 && yf < y1 && xf >= x0 && xf < x1 {
                v += step;
            }
        }
        v.clamp(0.02, 0.98)
    })
}

/// Generates `count` synthetic frames from `seed`, quantized to 16 bits.
pub fn synth_scenes(count: usize, seed: u64) -> Vec<(String, Image)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let img = generate_scene(SYNTH_HEIGHT, SYNTH_WIDTH, &mut rng);
            (
                format!("synth_{i:02}"),
                crate::image::quantize_image(&img, BitDepth::Sixteen),
            )
        })
        .collect()
}

/// Writes the synthetic HR set as 16-bit grayscale PNGs.
pub fn write_synth_demo(
    out_dir: &Path,
    count: usize,
    seed: u64,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    synth_scenes(count, seed)
        .into_iter()
        .map(|(name, img)| {
            let path = out_dir.join(format!("{name}.png"));
            store_image(&img, &path, PixelFormat::for_image(&img, BitDepth::Sixteen))?;
            Ok(path)
        })
        .collect()
}
