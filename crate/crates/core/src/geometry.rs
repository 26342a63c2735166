//! The eight axis-aligned symmetries of the pixel grid (dihedral group D4).
//!
//! Each element is stored as a signed 2×2 permutation matrix acting on
//! centred `(y, x)` coordinates, so composition and inversion reduce to
//! integer matrix algebra and are exact by construction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::image::Image;

/// One element of D4. `Rot90` is a quarter turn counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
#[repr(u8)]
pub enum TransformId {
    Identity = 0,
    Rot90 = 1,
    Rot180 = 2,
    Rot270 = 3,
    HFlip = 4,
    VFlip = 5,
    Transpose = 6,
    AntiTranspose = 7,
}

type Mat = [[i8; 2]; 2];

impl TransformId {
    /// Fixed enumeration order; ensemble averaging follows it.
    pub const ALL: [TransformId; 8] = [
        TransformId::Identity,
        TransformId::Rot90,
        TransformId::Rot180,
        TransformId::Rot270,
        TransformId::HFlip,
        TransformId::VFlip,
        TransformId::Transpose,
        TransformId::AntiTranspose,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformId::Identity => "id",
            TransformId::Rot90 => "rot90",
            TransformId::Rot180 => "rot180",
            TransformId::Rot270 => "rot270",
            TransformId::HFlip => "hflip",
            TransformId::VFlip => "vflip",
            TransformId::Transpose => "transpose",
            TransformId::AntiTranspose => "antitranspose",
        }
    }

    // Maps an input centred coordinate (y, x) to its output position.
    fn matrix(self) -> Mat {
        match self {
            TransformId::Identity => [[1, 0], [0, 1]],
            TransformId::Rot90 => [[0, -1], [1, 0]],
            TransformId::Rot180 => [[-1, 0], [0, -1]],
            TransformId::Rot270 => [[0, 1], [-1, 0]],
            TransformId::HFlip => [[1, 0], [0, -1]],
            TransformId::VFlip => [[-1, 0], [0, 1]],
            TransformId::Transpose => [[0, 1], [1, 0]],
            TransformId::AntiTranspose => [[0, -1], [-1, 0]],
        }
    }

    fn from_matrix(m: Mat) -> Self {
        Self::ALL
            .into_iter()
            .find(|t| t.matrix() == m)
            .expect("D4 is closed under products")
    }

    /// True for the four elements that exchange height and width.
    pub fn swaps_axes(self) -> bool {
        self.matrix()[0][0] == 0
    }

    pub fn inverse(self) -> Self {
        let m = self.matrix();
        Self::from_matrix([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    /// The element equal to applying `inner` first, then `self`.
    pub fn then_after(self, inner: TransformId) -> Self {
        compose(self, inner)
    }

    /// Output `(height, width)` for an input of the given size.
    pub fn output_dims(self, height: usize, width: usize) -> (usize, usize) {
        if self.swaps_axes() {
            (width, height)
        } else {
            (height, width)
        }
    }
}

/// `apply(x, compose(a, b)) == apply(apply(x, b), a)`.
pub fn compose(a: TransformId, b: TransformId) -> TransformId {
    let (ma, mb) = (a.matrix(), b.matrix());
    let mut m = [[0i8; 2]; 2];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = ma[i][0] * mb[0][j] + ma[i][1] * mb[1][j];
        }
    }
    TransformId::from_matrix(m)
}

pub fn inverse(t: TransformId) -> TransformId {
    t.inverse()
}

/// Permutes the samples of `img` according to `t`.
pub fn apply_transform(img: &Image, t: TransformId) -> Image {
    if t == TransformId::Identity {
        return img.clone();
    }
    let (h, w, c) = img.dims();
    let (oh, ow) = t.output_dims(h, w);
    // Source position of each output pixel: the inverse matrix applied to
    // the output coordinate, undone from centred form per axis.
    let n = t.inverse().matrix();
    let src = |m: [i8; 2], oy: usize, ox: usize| -> usize {
        match m {
            [1, 0] => oy,
            [-1, 0] => oh - 1 - oy,
            [0, 1] => ox,
            [0, -1] => ow - 1 - ox,
            _ => unreachable!(),
        }
    };
    Image::from_fn(oh, ow, c, |ch, oy, ox| {
        img.get(ch, src(n[0], oy, ox), src(n[1], oy, ox))
    })
}

impl fmt::Display for TransformId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown transform `{0}` (expected one of id, rot90, rot180, rot270, hflip, vflip, transpose, antitranspose)")]
pub struct UnknownTransform(pub String);

impl FromStr for TransformId {
    type Err = UnknownTransform;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| UnknownTransform(s.to_string()))
    }
}

impl TryFrom<String> for TransformId {
    type Error = UnknownTransform;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<TransformId> for String {
    fn from(t: TransformId) -> String {
        t.name().to_string()
    }
}
