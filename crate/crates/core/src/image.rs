//! Planar floating-point image buffer, lossless file I/O and the
//! cropping/reduction helpers used by the evaluation protocol.
//!
//! All intensities are normalized to `[0, 1]` regardless of the bit depth of
//! the file they came from. Samples are stored channel-planar, row-major:
//! `data[c * H * W + y * W + x]`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};
use thiserror::Error;

/// ITU-R BT.601 luma weights.
pub const BT601: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("unsupported pixel format in {path}: {detail}")]
    Unsupported { path: PathBuf, detail: String },
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
    #[error("invalid image dimensions: {0}")]
    Dimensions(String),
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("pixel format {format:?} does not match a {channels}-channel image")]
    LayoutMismatch {
        format: PixelFormat,
        channels: usize,
    },
}

/// Image with `f64` samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::Dimensions(format!(
                "{height}x{width} has a zero dimension"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(ImageError::Dimensions(format!(
                "buffer holds {} samples, {height}x{width}x{channels} needs {expected}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Image where every sample equals `value`.
    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
        .expect("filled: invalid dimensions")
    }

    /// Builds an image by evaluating `f(channel, y, x)` for every sample.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(height, width, channels, data).expect("from_fn: invalid dimensions")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        let i = self.index(c, y, x);
        self.data[i] = v;
    }

    /// One channel plane as a row-major slice.
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Clamps every sample into `[0, 1]`. NaN maps to 0.
    pub fn clamp01(mut self) -> Self {
        for v in &mut self.data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    /// Largest absolute sample difference. Panics on mismatched dims.
    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        assert_eq!(self.dims(), other.dims(), "max_abs_diff: dims differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Sub-rectangle starting at `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Image, ImageError> {
        if h == 0 || w == 0 || y0 + h > self.height || x0 + w > self.width {
            return Err(ImageError::Dimensions(format!(
                "crop {h}x{w} at ({y0},{x0}) outside {}x{}",
                self.height, self.width
            )));
        }
        Ok(Image::from_fn(h, w, self.channels, |c, y, x| {
            self.get(c, y0 + y, x0 + x)
        }))
    }

    /// Nearest-neighbour replication by an integer factor.
    pub fn replicate(&self, scale: usize) -> Image {
        assert!(scale >= 1, "replicate: scale must be positive");
        Image::from_fn(
            self.height * scale,
            self.width * scale,
            self.channels,
            |c, y, x| self.get(c, y / scale, x / scale),
        )
    }
}

/// Trims the bottom rows and right columns so both dimensions are divisible
/// by `scale`.
pub fn modcrop(img: &Image, scale: usize) -> Result<Image, ImageError> {
    if scale == 0 {
        return Err(ImageError::Dimensions("modcrop scale must be >= 1".into()));
    }
    let h = img.height / scale * scale;
    let w = img.width / scale * scale;
    if h == 0 || w == 0 {
        return Err(ImageError::Dimensions(format!(
            "modcrop of {}x{} by {scale} leaves nothing",
            img.height, img.width
        )));
    }
    if (h, w) == (img.height, img.width) {
        return Ok(img.clone());
    }
    img.crop(0, 0, h, w)
}

/// Removes `border` pixels from every side.
pub fn shave(img: &Image, border: usize) -> Result<Image, ImageError> {
    if border == 0 {
        return Ok(img.clone());
    }
    if img.height <= 2 * border || img.width <= 2 * border {
        return Err(ImageError::Dimensions(format!(
            "cannot shave {border} px from {}x{}",
            img.height, img.width
        )));
    }
    img.crop(
        border,
        border,
        img.height - 2 * border,
        img.width - 2 * border,
    )
}

/// Single-channel view: identity for grayscale, BT.601 luma for RGB.
///
/// Gray RGB pixels (r = g = b) map to that value exactly.
pub fn to_luminance(img: &Image) -> Result<Image, ImageError> {
    match img.channels {
        1 => Ok(img.clone()),
        3 => {
            let n = img.height * img.width;
            let (r, rest) = img.data.split_at(n);
            let (g, b) = rest.split_at(n);
            let data = r
                .iter()
                .zip(g)
                .zip(b)
                .map(|((&r, &g), &b)| {
                    if r == g && g == b {
                        r
                    } else {
                        (BT601[0] * r + BT601[1] * g + BT601[2] * b).clamp(0.0, 1.0)
                    }
                })
                .collect();
            Image::new(img.height, img.width, 1, data)
        }
        c => Err(ImageError::Channels(c)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_code(self) -> u32 {
        match self {
            BitDepth::Eight => u8::MAX as u32,
            BitDepth::Sixteen => u16::MAX as u32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    Gray,
    Rgb,
}

impl Layout {
    pub fn channels(self) -> usize {
        match self {
            Layout::Gray => 1,
            Layout::Rgb => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelFormat {
    pub depth: BitDepth,
    pub layout: Layout,
}

impl PixelFormat {
    /// Format matching the channel count of `img` at the given depth.
    pub fn for_image(img: &Image, depth: BitDepth) -> Self {
        let layout = if img.channels() == 3 {
            Layout::Rgb
        } else {
            Layout::Gray
        };
        Self { depth, layout }
    }
}

/// Maps a `[0, 1]` value to an integer code, rounding half to even.
pub fn quantize(v: f64, depth: BitDepth) -> u32 {
    let max = depth.max_code() as f64;
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * max).round_ties_even() as u32
}

pub fn dequantize(code: u32, depth: BitDepth) -> f64 {
    code as f64 / depth.max_code() as f64
}

/// Snaps every sample onto the lattice of representable codes at `depth`.
pub fn quantize_image(img: &Image, depth: BitDepth) -> Image {
    img.map(|v| dequantize(quantize(v, depth), depth))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FileKind {
    Png,
    Pnm,
}

fn file_kind(path: &Path) -> Option<FileKind> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "png" => Some(FileKind::Png),
        "pgm" | "ppm" | "pnm" => Some(FileKind::Pnm),
        _ => None,
    }
}

/// True when the extension names a format `load_image` understands.
pub fn is_supported_path(path: &Path) -> bool {
    file_kind(path).is_some()
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|source| ImageError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = reader
        .with_guessed_format()
        .map_err(|source| ImageError::Read {
            path: path.to_path_buf(),
            source,
        })?;
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => ImageError::Unsupported {
            path: path.to_path_buf(),
            detail: u.to_string(),
        },
        image::ImageError::IoError(source) => ImageError::Read {
            path: path.to_path_buf(),
            source,
        },
        other => ImageError::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })?;

    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, data): (usize, Vec<f64>) = match decoded {
        DynamicImage::ImageLuma8(buf) => {
            (1, interleaved_to_planar(buf.as_raw(), 1, BitDepth::Eight))
        }
        DynamicImage::ImageRgb8(buf) => {
            (3, interleaved_to_planar(buf.as_raw(), 3, BitDepth::Eight))
        }
        DynamicImage::ImageLuma16(buf) => {
            (1, interleaved_to_planar(buf.as_raw(), 1, BitDepth::Sixteen))
        }
        DynamicImage::ImageRgb16(buf) => {
            (3, interleaved_to_planar(buf.as_raw(), 3, BitDepth::Sixteen))
        }
        other => {
            return Err(ImageError::Unsupported {
                path: path.to_path_buf(),
                detail: format!("{:?} (only 8/16-bit gray or RGB)", other.color()),
            })
        }
    };
    Image::new(h, w, channels, data)
}

fn interleaved_to_planar<T: Copy + Into<u32>>(
    raw: &[T],
    channels: usize,
    depth: BitDepth,
) -> Vec<f64> {
    let n = raw.len() / channels;
    let mut out = vec![0.0; raw.len()];
    for (i, px) in raw.chunks_exact(channels).enumerate() {
        for (c, &s) in px.iter().enumerate() {
            out[c * n + i] = dequantize(s.into(), depth);
        }
    }
    out
}

fn planar_codes(img: &Image, depth: BitDepth) -> Vec<u32> {
    let n = img.height * img.width;
    let mut out = Vec::with_capacity(img.data.len());
    for i in 0..n {
        for c in 0..img.channels {
            out.push(quantize(img.data[c * n + i], depth));
        }
    }
    out
}

/// Writes `img` as PNG or binary PGM/PPM (chosen by extension) at the
/// requested depth.
pub fn store_image(
    img: &Image,
    path: impl AsRef<Path>,
    fmt: PixelFormat,
) -> Result<(), ImageError> {
    let path = path.as_ref();
    if fmt.layout.channels() != img.channels {
        return Err(ImageError::LayoutMismatch {
            format: fmt,
            channels: img.channels,
        });
    }
    let write_err = |message: String| ImageError::Write {
        path: path.to_path_buf(),
        message,
    };
    let kind = file_kind(path)
        .ok_or_else(|| write_err("extension must be .png, .pgm, .ppm or .pnm".into()))?;

    let codes = planar_codes(img, fmt.depth);
    let (bytes, color) = match fmt.depth {
        BitDepth::Eight => (
            codes.iter().map(|&c| c as u8).collect::<Vec<u8>>(),
            match fmt.layout {
                Layout::Gray => ExtendedColorType::L8,
                Layout::Rgb => ExtendedColorType::Rgb8,
            },
        ),
        // The encoders take native-endian 16-bit samples and byte-swap to
        // big-endian on disk themselves.
        BitDepth::Sixteen => {
            let mut b = Vec::with_capacity(codes.len() * 2);
            for &c in &codes {
                b.extend_from_slice(&(c as u16).to_ne_bytes());
            }
            (
                b,
                match fmt.layout {
                    Layout::Gray => ExtendedColorType::L16,
                    Layout::Rgb => ExtendedColorType::Rgb16,
                },
            )
        }
    };

    let file = File::create(path).map_err(|e| write_err(e.to_string()))?;
    let mut out = BufWriter::new(file);
    let (w, h) = (img.width as u32, img.height as u32);
    match kind {
        FileKind::Png => {
            PngEncoder::new_with_quality(&mut out, CompressionType::Default, FilterType::Adaptive)
                .write_image(&bytes, w, h, color)
                .map_err(|e| write_err(e.to_string()))?;
        }
        FileKind::Pnm => {
            // Binary P5/P6 written directly: the codec's PNM encoder has no
            // 16-bit RGB support. Samples are big-endian when maxval > 255.
            let magic = match fmt.layout {
                Layout::Gray => "P5",
                Layout::Rgb => "P6",
            };
            write!(out, "{magic}\n{w} {h}\n{}\n", fmt.depth.max_code())
                .map_err(|e| write_err(e.to_string()))?;
            let interleaved: Vec<u8> = match fmt.depth {
                BitDepth::Eight => codes.iter().map(|&c| c as u8).collect(),
                BitDepth::Sixteen => codes
                    .iter()
                    .flat_map(|&c| (c as u16).to_be_bytes())
                    .collect(),
            };
            out.write_all(&interleaved)
                .map_err(|e| write_err(e.to_string()))?;
        }
    }
    out.flush().map_err(|e| write_err(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, 1, |_, y, x| ((y * w + x) % 97) as f64 / 96.0)
    }

    #[test]
    fn quantize_ties_to_even() {
        assert_eq!(quantize(0.5, BitDepth::Eight), 128);
        assert_eq!(quantize(1.0, BitDepth::Sixteen), 65535);
        assert_eq!(quantize(0.0, BitDepth::Sixteen), 0);
        assert_eq!(quantize(1.5, BitDepth::Eight), 255);
        assert_eq!(quantize(-0.2, BitDepth::Eight), 0);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(Image::new(0, 3, 1, vec![]).is_err());
        assert!(Image::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Image::new(2, 2, 1, vec![0.0; 3]).is_err());
    }

    #[test]
    fn modcrop_examples() {
        let img = Image::filled(130, 257, 1, 0.2);
        assert_eq!(modcrop(&img, 4).unwrap().dims(), (128, 256, 1));
        let img = Image::filled(128, 256, 1, 0.2);
        assert_eq!(modcrop(&img, 4).unwrap(), img);
        assert!(modcrop(&Image::filled(3, 8, 1, 0.0), 4).is_err());
        assert!(modcrop(&img, 0).is_err());
    }

    #[test]
    fn modcrop_keeps_top_left_block() {
        let img = ramp(5, 5);
        let out = modcrop(&img, 4).unwrap();
        assert_eq!(out.dims(), (4, 4, 1));
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(out.get(0, y, x), img.data()[y * 5 + x]);
            }
        }
    }

    #[test]
    fn shave_examples() {
        let img = Image::filled(128, 256, 1, 0.1);
        assert_eq!(shave(&img, 4).unwrap().dims(), (120, 248, 1));
        assert_eq!(shave(&img, 0).unwrap(), img);
        let img = ramp(9, 9);
        let c = shave(&img, 4).unwrap();
        assert_eq!(c.dims(), (1, 1, 1));
        assert_eq!(c.get(0, 0, 0), img.data()[4 * 9 + 4]);
        assert!(shave(&ramp(8, 20), 4).is_err());
    }

    #[test]
    fn luminance() {
        let g = ramp(3, 4);
        assert_eq!(to_luminance(&g).unwrap(), g);
        let gray = Image::filled(2, 2, 3, 0.5);
        assert!(to_luminance(&gray)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.5));
        let red = Image::from_fn(1, 1, 3, |c, _, _| if c == 0 { 1.0 } else { 0.0 });
        assert!((to_luminance(&red).unwrap().get(0, 0, 0) - 0.299).abs() < 1e-15);
    }

    #[test]
    fn load_store_8bit_max_code() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("white.png");
        image::GrayImage::from_pixel(5, 3, image::Luma([255]))
            .save(&p)
            .unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.dims(), (3, 5, 1));
        assert!(img.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn load_16bit_zero() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("black.png");
        image::ImageBuffer::<image::Luma<u16>, _>::from_pixel(4, 4, image::Luma([0u16]))
            .save(&p)
            .unwrap();
        let img = load_image(&p).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn every_8bit_code_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_fn(16, 16, 1, |_, y, x| (y * 16 + x) as f64 / 255.0);
        for ext in ["png", "pgm"] {
            let p = dir.path().join(format!("codes.{ext}"));
            store_image(&img, &p, PixelFormat::for_image(&img, BitDepth::Eight)).unwrap();
            let back = load_image(&p).unwrap();
            assert!(back.max_abs_diff(&img) <= 0.5 / 255.0);
            assert_eq!(back, img, "{ext}");
        }
    }

    #[test]
    fn rgb_16bit_pnm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = quantize_image(
            &Image::from_fn(7, 5, 3, |c, y, x| {
                ((c * 31 + y * 7 + x * 3) % 50) as f64 / 49.0
            }),
            BitDepth::Sixteen,
        );
        let p = dir.path().join("rgb.ppm");
        store_image(&img, &p, PixelFormat::for_image(&img, BitDepth::Sixteen)).unwrap();
        assert_eq!(load_image(&p).unwrap(), img);
    }

    #[test]
    fn error_categories() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_image(dir.path().join("missing.png")),
            Err(ImageError::Read { .. })
        ));
        let p = dir.path().join("alpha.png");
        image::RgbaImage::from_pixel(2, 2, image::Rgba([1, 2, 3, 4]))
            .save(&p)
            .unwrap();
        assert!(matches!(
            load_image(&p),
            Err(ImageError::Unsupported { .. })
        ));
        let img = Image::filled(2, 2, 1, 0.0);
        let fmt = PixelFormat {
            depth: BitDepth::Eight,
            layout: Layout::Rgb,
        };
        assert!(matches!(
            store_image(&img, dir.path().join("x.png"), fmt),
            Err(ImageError::LayoutMismatch { .. })
        ));
        assert!(matches!(
            store_image(
                &img,
                dir.path().join("no/such/dir/x.png"),
                PixelFormat::for_image(&img, BitDepth::Eight)
            ),
            Err(ImageError::Write { .. })
        ));
    }
}
