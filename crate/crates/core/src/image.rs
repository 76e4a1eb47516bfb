//! The normalized 3x32x32 byte tensor and its geometric transforms.

use std::fmt;

use crate::error::{Error, Result};
use crate::{IMG_CHANNELS, IMG_DIM, IMG_SIDE};

/// Pooling factors accepted by [`avg_pool_upsample`].
pub const POOL_FACTORS: [usize; 6] = [1, 2, 4, 8, 16, 32];

/// A 3x32x32 image, 8-bit, stored row-major in channel-plane order.
///
/// Every input to the scoring pipeline is normalized to this shape; its
/// dimensionality `d = 3072` is the normalizer behind every bits-per-dimension
/// quantity in the crate.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageTensor {
    pixels: Vec<u8>,
}

impl ImageTensor {
    /// Wraps a raw pixel buffer; `pixels.len()` must be exactly `IMG_DIM`.
    pub fn from_pixels(pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != IMG_DIM {
            return Err(Error::Format(format!(
                "expected {IMG_DIM} pixels, got {}",
                pixels.len()
            )));
        }
        Ok(Self { pixels })
    }

    /// Image with each channel plane filled by one byte.
    pub fn constant(channel_values: [u8; IMG_CHANNELS]) -> Self {
        let mut pixels = Vec::with_capacity(IMG_DIM);
        for v in channel_values {
            pixels.extend(std::iter::repeat_n(v, IMG_SIDE * IMG_SIDE));
        }
        Self { pixels }
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// One channel plane, `IMG_SIDE * IMG_SIDE` bytes, row-major.
    pub fn plane(&self, channel: usize) -> &[u8] {
        let n = IMG_SIDE * IMG_SIDE;
        &self.pixels[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> u8 {
        self.pixels[channel * IMG_SIDE * IMG_SIDE + y * IMG_SIDE + x]
    }
}

impl fmt::Debug for ImageTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ImageTensor(3x32x32, first bytes {:?}...)",
            &self.pixels[..8.min(self.pixels.len())]
        )
    }
}

/// An image of arbitrary size prior to normalization, channel-plane order.
#[derive(Clone, Debug)]
pub struct RawImage {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl RawImage {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Format("image has a zero dimension".into()));
        }
        if data.len() != channels * height * width {
            return Err(Error::Format(format!(
                "pixel buffer length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    fn plane(&self, channel: usize) -> &[u8] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }
}

/// Rounds a non-negative value half away from zero and clamps to a byte.
fn round_byte(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Normalizes an arbitrary-size 1- or 3-channel image to the 3x32x32 tensor.
///
/// Resizing is bilinear with an align-corners-false grid: the source
/// coordinate of output pixel `i` is `(i + 0.5) * src/dst - 0.5`, sampled with
/// edge clamping, then rounded half away from zero back to 8 bits. Grayscale
/// inputs are copied to all three output channels.
pub fn normalize_input(raw: &RawImage) -> Result<ImageTensor> {
    if raw.channels != 1 && raw.channels != 3 {
        return Err(Error::Format(format!(
            "expected 1 or 3 channels, got {}",
            raw.channels
        )));
    }
    let mut pixels = Vec::with_capacity(IMG_DIM);
    for out_c in 0..IMG_CHANNELS {
        let src_c = if raw.channels == 1 { 0 } else { out_c };
        resize_plane_bilinear(raw.plane(src_c), raw.height, raw.width, &mut pixels);
    }
    ImageTensor::from_pixels(pixels)
}

fn resize_plane_bilinear(src: &[u8], src_h: usize, src_w: usize, out: &mut Vec<u8>) {
    let scale_y = src_h as f64 / IMG_SIDE as f64;
    let scale_x = src_w as f64 / IMG_SIDE as f64;
    for dy in 0..IMG_SIDE {
        let sy = (dy as f64 + 0.5) * scale_y - 0.5;
        let y0 = sy.floor();
        let wy = sy - y0;
        let y0c = (y0 as i64).clamp(0, src_h as i64 - 1) as usize;
        let y1c = (y0 as i64 + 1).clamp(0, src_h as i64 - 1) as usize;
        for dx in 0..IMG_SIDE {
            let sx = (dx as f64 + 0.5) * scale_x - 0.5;
            let x0 = sx.floor();
            let wx = sx - x0;
            let x0c = (x0 as i64).clamp(0, src_w as i64 - 1) as usize;
            let x1c = (x0 as i64 + 1).clamp(0, src_w as i64 - 1) as usize;
            let p00 = src[y0c * src_w + x0c] as f64;
            let p01 = src[y0c * src_w + x1c] as f64;
            let p10 = src[y1c * src_w + x0c] as f64;
            let p11 = src[y1c * src_w + x1c] as f64;
            let top = p00 * (1.0 - wx) + p01 * wx;
            let bottom = p10 * (1.0 - wx) + p11 * wx;
            out.push(round_byte(top * (1.0 - wy) + bottom * wy));
        }
    }
}

/// Average-pools each channel plane in `f x f` blocks (mean rounded half away
/// from zero) and upsamples back to 32x32 by nearest neighbor.
///
/// `f = 1` is the identity; `f = 32` collapses each plane to its mean.
pub fn avg_pool_upsample(img: &ImageTensor, f: usize) -> Result<ImageTensor> {
    if !POOL_FACTORS.contains(&f) {
        return Err(Error::InvalidArgument(format!(
            "pooling factor {f} not in {POOL_FACTORS:?}"
        )));
    }
    if f == 1 {
        return Ok(img.clone());
    }
    let block = f * f;
    let mut pixels = vec![0u8; IMG_DIM];
    for c in 0..IMG_CHANNELS {
        let plane = img.plane(c);
        let out_plane = &mut pixels[c * IMG_SIDE * IMG_SIDE..(c + 1) * IMG_SIDE * IMG_SIDE];
        for by in (0..IMG_SIDE).step_by(f) {
            for bx in (0..IMG_SIDE).step_by(f) {
                let mut sum: u32 = 0;
                for y in by..by + f {
                    for x in bx..bx + f {
                        sum += plane[y * IMG_SIDE + x] as u32;
                    }
                }
                // round(sum / block) half away from zero, in integer arithmetic
                let mean = ((2 * sum + block as u32) / (2 * block as u32)) as u8;
                for y in by..by + f {
                    for x in bx..bx + f {
                        out_plane[y * IMG_SIDE + x] = mean;
                    }
                }
            }
        }
    }
    ImageTensor::from_pixels(pixels)
}
