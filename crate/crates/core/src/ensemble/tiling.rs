//! Overlapping-tile inference with normalised blending.
//!
//! Tiles of side `tile` are laid out with stride `tile - overlap`; the last
//! tile on each axis is snapped to the border. Along an edge shared with a
//! neighbouring tile, a tile's weight ramps up across the overlap:
//!
//! * `tent`: linear ramp from 0 to 1 over the full overlap.
//! * `uniform`: a step at the middle of each shared region, so every HR
//!   pixel is owned by exactly one tile. Output is then exact for any
//!   backend whose receptive-field radius is at most `overlap / 2`.
//!
//! Edges on the image border never taper. Weights are separable and the
//! accumulated result is divided by the per-pixel weight sum.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EnsembleError;
use crate::backends::{self, Restorer};
use crate::image::Image;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Blend {
    Uniform,
    Tent,
}

impl fmt::Display for Blend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Blend::Uniform => "uniform",
            Blend::Tent => "tent",
        })
    }
}

impl FromStr for Blend {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Blend::Uniform),
            "tent" => Ok(Blend::Tent),
            other => Err(EnsembleError::Tiling(format!("unknown blend `{other}`"))),
        }
    }
}

/// Tile geometry on the LR grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TileConfig {
    pub tile: usize,
    pub overlap: usize,
    pub blend: Blend,
}

impl Default for TileConfig {
    fn default() -> Self {
        Self {
            tile: 96,
            overlap: 16,
            blend: Blend::Tent,
        }
    }
}

impl TileConfig {
    pub const MIN_TILE: usize = 8;

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.tile < Self::MIN_TILE {
            return Err(EnsembleError::Tiling(format!(
                "tile {} is below the minimum {}",
                self.tile,
                Self::MIN_TILE
            )));
        }
        if self.overlap >= self.tile {
            return Err(EnsembleError::Tiling(format!(
                "overlap {} must be smaller than tile {}",
                self.overlap, self.tile
            )));
        }
        Ok(())
    }
}

/// Start offsets along an axis of length `n`.
pub fn tile_starts(n: usize, tile: usize, overlap: usize) -> Vec<usize> {
    if tile >= n {
        return vec![0];
    }
    let stride = tile - overlap;
    let mut starts = vec![0];
    let mut s = 0;
    while s + tile < n {
        s = (s + stride).min(n - tile);
        starts.push(s);
    }
    starts
}

/// One tile on the LR grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileRect {
    pub y0: usize,
    pub x0: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone)]
struct AxisSpan {
    start: usize,
    len: usize,
    /// HR-resolution weights for this span.
    weights: Vec<f64>,
}

/// Tile layout plus blend weights for an LR frame at a given scale.
#[derive(Debug, Clone)]
pub struct TilePlan {
    scale: usize,
    lr_h: usize,
    lr_w: usize,
    rows: Vec<AxisSpan>,
    cols: Vec<AxisSpan>,
}

fn axis_spans(n: usize, tc: &TileConfig, scale: usize) -> Vec<AxisSpan> {
    let len = tc.tile.min(n);
    let o = tc.overlap as f64;
    let starts = tile_starts(n, tc.tile, tc.overlap);
    // Uniform blend cuts each shared region at its midpoint, so the tiles
    // partition the axis: every HR sample is owned by exactly one tile.
    let cut = |k: usize| (starts[k + 1] + starts[k] + len) as f64 / 2.0;
    starts
        .iter()
        .enumerate()
        .map(|(k, &start)| {
            let left_shared = k > 0;
            let right_shared = k + 1 < starts.len();
            let lo = if left_shared {
                cut(k - 1)
            } else {
                f64::NEG_INFINITY
            };
            let hi = if right_shared { cut(k) } else { f64::INFINITY };
            let weights = (0..len * scale)
                .map(|h| {
                    let u = (h as f64 + 0.5) / scale as f64;
                    match tc.blend {
                        Blend::Tent if tc.overlap == 0 => 1.0,
                        Blend::Tent => {
                            let (dl, dr) = (u, len as f64 - u);
                            let mut w: f64 = 1.0;
                            if left_shared {
                                w = w.min(dl / o);
                            }
                            if right_shared {
                                w = w.min(dr / o);
                            }
                            w
                        }
                        Blend::Uniform => {
                            let g = start as f64 + u;
                            if lo <= g && g < hi {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    }
                })
                .collect();
            AxisSpan {
                start,
                len,
                weights,
            }
        })
        .collect()
}

impl TilePlan {
    pub fn new(
        lr_h: usize,
        lr_w: usize,
        scale: usize,
        tc: &TileConfig,
    ) -> Result<Self, EnsembleError> {
        tc.validate()?;
        Ok(Self {
            scale,
            lr_h,
            lr_w,
            rows: axis_spans(lr_h, tc, scale),
            cols: axis_spans(lr_w, tc, scale),
        })
    }

    pub fn is_single_tile(&self) -> bool {
        self.rows.len() == 1 && self.cols.len() == 1
    }

    /// Tiles in row-major order.
    pub fn tiles(&self) -> Vec<TileRect> {
        self.rows
            .iter()
            .flat_map(|r| {
                self.cols.iter().map(move |c| TileRect {
                    y0: r.start,
                    x0: c.start,
                    height: r.len,
                    width: c.len,
                })
            })
            .collect()
    }

    /// Blend weight of tile `index` at tile-local HR position `(hy, hx)`.
    pub fn weight(&self, index: usize, hy: usize, hx: usize) -> f64 {
        let r = &self.rows[index / self.cols.len()];
        let c = &self.cols[index % self.cols.len()];
        r.weights[hy] * c.weights[hx]
    }

    /// HR size of the assembled output.
    pub fn output_dims(&self) -> (usize, usize) {
        (self.lr_h * self.scale, self.lr_w * self.scale)
    }

    /// Unnormalised weight total at every HR pixel (row-major).
    pub fn weight_totals(&self) -> Vec<f64> {
        let (oh, ow) = self.output_dims();
        let mut total = vec![0.0; oh * ow];
        for (i, t) in self.tiles().iter().enumerate() {
            let (hy0, hx0) = (t.y0 * self.scale, t.x0 * self.scale);
            for hy in 0..t.height * self.scale {
                for hx in 0..t.width * self.scale {
                    total[(hy0 + hy) * ow + hx0 + hx] += self.weight(i, hy, hx);
                }
            }
        }
        total
    }
}

/// Restores `img_lr` tile by tile and blends the HR tiles.
pub fn tiled_restore(
    b: &dyn Restorer,
    img_lr: &Image,
    tc: &TileConfig,
) -> Result<Image, EnsembleError> {
    let scale = b.info().scale;
    let plan = TilePlan::new(img_lr.height(), img_lr.width(), scale, tc)?;
    if plan.is_single_tile() {
        return Ok(backends::restore(b, img_lr)?);
    }
    let tiles = plan.tiles();
    let outputs: Vec<Result<Image, EnsembleError>> = par::map_indexed(tiles.len(), |i| {
        let t = tiles[i];
        let crop = img_lr
            .crop(t.y0, t.x0, t.height, t.width)
            .expect("tiles lie inside the frame");
        backends::restore(b, &crop).map_err(|source| EnsembleError::Tile {
            y0: t.y0,
            x0: t.x0,
            source,
        })
    });

    let (oh, ow) = plan.output_dims();
    let c = img_lr.channels();
    let mut acc = vec![0.0; oh * ow * c];
    let totals = plan.weight_totals();
    for (i, (t, out)) in tiles.iter().zip(outputs).enumerate() {
        let out = out?;
        let (hy0, hx0) = (t.y0 * scale, t.x0 * scale);
        for ch in 0..c {
            for hy in 0..t.height * scale {
                for hx in 0..t.width * scale {
                    let w = plan.weight(i, hy, hx);
                    if w != 0.0 {
                        acc[(ch * oh + hy0 + hy) * ow + hx0 + hx] += w * out.get(ch, hy, hx);
                    }
                }
            }
        }
    }
    let plane = oh * ow;
    for (i, v) in acc.iter_mut().enumerate() {
        *v /= totals[i % plane];
    }
    Ok(Image::new(oh, ow, c, acc)
        .expect("tiling keeps dims")
        .clamp01())
}
