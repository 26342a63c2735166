//! Thermal-infrared ×4 super-resolution toolkit: bicubic degradation,
//! restoration backends (built-in and external over the `irsr/1` pipe
//! protocol), D4 self-ensemble, tiled inference, weighted fusion, and the
//! PSNR/SSIM/Score evaluation harness.

pub mod backends;
pub mod ensemble;
pub mod geometry;
pub mod harness;
pub mod image;
pub mod metrics;
pub mod par;
pub mod resample;

pub use crate::image::Image;
