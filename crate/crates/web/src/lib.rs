//! Browser demo bindings. Each export builds a [`Panel`] of grayscale
//! frames (RGBA bytes ready for `ImageData`) plus a JSON summary.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use irsr::backends::{restore, BuiltinBackend, BuiltinKind, Restorer};
use irsr::ensemble::{Blend, EnsembleConfig, TileConfig, TilePlan};
use irsr::geometry::{apply_transform, inverse, TransformId};
use irsr::harness::generate_scene;
use irsr::image::{modcrop, Image};
use irsr::metrics::{evaluate_pair, SsimParams};
use irsr::resample::{degrade, KernelSpec};

const SCENE_H: usize = 96;
const SCENE_W: usize = 128;

#[wasm_bindgen]
pub struct Frame {
    width: usize,
    height: usize,
    rgba: Vec<u8>,
    label: String,
}

#[wasm_bindgen]
impl Frame {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    #[wasm_bindgen(getter)]
    pub fn label(&self) -> String {
        self.label.clone()
    }

    /// `width * height * 4` bytes.
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }
}

impl Frame {
    /// Renders channel 0 of `img`, mapping `[lo, hi]` to `[0, 255]`.
    fn from_image(label: &str, img: &Image, lo: f64, hi: f64) -> Self {
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut rgba = Vec::with_capacity(img.height() * img.width() * 4);
        for &v in img.plane(0) {
            let g = (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8;
            rgba.extend_from_slice(&[g, g, g, 255]);
        }
        Self {
            width: img.width(),
            height: img.height(),
            rgba,
            label: label.to_string(),
        }
    }
}

#[wasm_bindgen]
pub struct Panel {
    frames: Vec<Frame>,
    summary: String,
}

#[wasm_bindgen]
impl Panel {
    #[wasm_bindgen(getter)]
    pub fn count(&self) -> usize {
        self.frames.len()
    }

    /// Moves frame `i` out of the panel; later calls for `i` return `None`.
    pub fn frame(&mut self, i: usize) -> Option<Frame> {
        let f = self.frames.get_mut(i)?;
        Some(std::mem::replace(
            f,
            Frame {
                width: 0,
                height: 0,
                rgba: Vec::new(),
                label: String::new(),
            },
        ))
    }

    /// JSON description of the panel's numbers.
    #[wasm_bindgen(getter)]
    pub fn summary(&self) -> String {
        self.summary.clone()
    }
}

fn scene(seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_scene(SCENE_H, SCENE_W, &mut rng)
}

#[derive(Serialize)]
struct MethodScore {
    method: &'static str,
    psnr_db: f64,
    ssim: f64,
    score: f64,
}

/// Degrades a synthetic scene by `scale` and compares the built-in
/// upscalers against the ground truth.
pub fn compare_upscalers_impl(seed: u64, scale: usize) -> Result<Panel, String> {
    if !(2..=4).contains(&scale) {
        return Err(format!("scale must be 2, 3 or 4, got {scale}"));
    }
    let k = KernelSpec::default();
    let hr = modcrop(&scene(seed), scale).map_err(|e| e.to_string())?;
    let lr = degrade(&hr, scale, &k).map_err(|e| e.to_string())?;
    let mut frames = vec![
        Frame::from_image("ground truth", &hr, 0.0, 1.0),
        Frame::from_image("LR input", &lr.replicate(scale), 0.0, 1.0),
    ];
    let mut scores = Vec::new();
    for kind in [
        BuiltinKind::Nearest,
        BuiltinKind::Bicubic,
        BuiltinKind::BlurBicubic,
    ] {
        let b = BuiltinBackend::new(kind, scale, k).map_err(|e| e.to_string())?;
        let sr = restore(&b, &lr).map_err(|e| e.to_string())?;
        let r = evaluate_pair(kind.name(), &hr, &sr, scale, scale, &SsimParams::default())
            .map_err(|e| e.to_string())?;
        scores.push(MethodScore {
            method: kind.name(),
            psnr_db: r.psnr_db,
            ssim: r.ssim,
            score: r.score,
        });
        frames.push(Frame::from_image(kind.name(), &sr, 0.0, 1.0));
    }
    Ok(Panel {
        frames,
        summary: serde_json::to_string(&scores).expect("scores serialize"),
    })
}

#[derive(Serialize)]
struct TileSummary {
    tiles: usize,
    min_total: f64,
    max_total: f64,
}

/// Blend-weight maps on the HR grid of an `lr_h x lr_w` frame: the weight
/// of tile `focus` and the per-pixel weight total.
pub fn tile_weights_impl(
    lr_h: usize,
    lr_w: usize,
    tile: usize,
    overlap: usize,
    blend: &str,
    focus: usize,
) -> Result<Panel, String> {
    let blend: Blend = blend
        .parse()
        .map_err(|e: irsr::ensemble::EnsembleError| e.to_string())?;
    let scale = 2;
    let tc = TileConfig {
        tile,
        overlap,
        blend,
    };
    let plan = TilePlan::new(lr_h, lr_w, scale, &tc).map_err(|e| e.to_string())?;
    let tiles = plan.tiles();
    let focus = focus % tiles.len();
    let t = tiles[focus];
    let (oh, ow) = plan.output_dims();
    let totals = plan.weight_totals();
    let mut single = Image::filled(oh, ow, 1, 0.0);
    for hy in 0..t.height * scale {
        for hx in 0..t.width * scale {
            single.set(
                0,
                t.y0 * scale + hy,
                t.x0 * scale + hx,
                plan.weight(focus, hy, hx),
            );
        }
    }
    let total_img = Image::new(oh, ow, 1, totals.clone()).map_err(|e| e.to_string())?;
    let (lo, hi) = totals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let summary = TileSummary {
        tiles: tiles.len(),
        min_total: lo,
        max_total: hi,
    };
    Ok(Panel {
        frames: vec![
            Frame::from_image(&format!("tile {focus} weight"), &single, 0.0, 1.0),
            Frame::from_image("weight total", &total_img, 0.0, hi.max(1.0)),
        ],
        summary: serde_json::to_string(&summary).expect("summary serializes"),
    })
}

#[derive(Serialize)]
struct EnsembleSummary {
    transforms: Vec<&'static str>,
    max_abs_vs_direct: f64,
}

/// Self-ensemble walkthrough: each D4 view of the LR input restored and
/// mapped back, then their average and its deviation from a direct restore.
pub fn ensemble_views_impl(seed: u64, kind: &str, transforms: &str) -> Result<Panel, String> {
    let kind: BuiltinKind = kind
        .parse()
        .map_err(|e: irsr::backends::BackendError| e.to_string())?;
    let ts = transforms
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<TransformId>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = EnsembleConfig {
        transforms: ts.clone(),
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let scale = 4;
    let b = BuiltinBackend::new(kind, scale, KernelSpec::default()).map_err(|e| e.to_string())?;
    let lr = degrade(
        &modcrop(&scene(seed), scale).map_err(|e| e.to_string())?,
        scale,
        &KernelSpec::default(),
    )
    .map_err(|e| e.to_string())?;

    let mut frames = Vec::new();
    let mut sum = Image::filled(lr.height() * scale, lr.width() * scale, 1, 0.0);
    for &t in &ts {
        let view = apply_transform(&lr, t);
        let restored = restore(&b as &dyn Restorer, &view).map_err(|e| e.to_string())?;
        let back = apply_transform(&restored, inverse(t));
        for (s, v) in sum.data_mut().iter_mut().zip(back.data()) {
            *s += v;
        }
        frames.push(Frame::from_image(
            t.name(),
            &view.replicate(scale),
            0.0,
            1.0,
        ));
    }
    let mean = sum.map(|v| v / ts.len() as f64).clamp01();
    let direct = restore(&b, &lr).map_err(|e| e.to_string())?;
    let diff = Image::from_fn(mean.height(), mean.width(), 1, |_, y, x| {
        (mean.get(0, y, x) - direct.get(0, y, x)).abs()
    });
    let max_abs = diff.data().iter().copied().fold(0.0, f64::max);
    frames.push(Frame::from_image("ensemble", &mean, 0.0, 1.0));
    frames.push(Frame::from_image(
        "|ensemble - direct|",
        &diff,
        0.0,
        max_abs.max(1e-12),
    ));
    Ok(Panel {
        frames,
        summary: serde_json::to_string(&EnsembleSummary {
            transforms: ts.iter().map(|t| t.name()).collect(),
            max_abs_vs_direct: max_abs,
        })
        .expect("summary serializes"),
    })
}

#[wasm_bindgen]
pub fn compare_upscalers(seed: u32, scale: u32) -> Result<Panel, JsError> {
    compare_upscalers_impl(seed as u64, scale as usize).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn tile_weights(
    lr_h: u32,
    lr_w: u32,
    tile: u32,
    overlap: u32,
    blend: &str,
    focus: u32,
) -> Result<Panel, JsError> {
    tile_weights_impl(
        lr_h as usize,
        lr_w as usize,
        tile as usize,
        overlap as usize,
        blend,
        focus as usize,
    )
    .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ensemble_views(seed: u32, kind: &str, transforms: &str) -> Result<Panel, JsError> {
    ensemble_views_impl(seed as u64, kind, transforms).map_err(|e| JsError::new(&e))
}
