//! Floating-point raster images.
//!
//! Samples are stored row-major and interleaved (`RGBRGB...` for color),
//! nominally in `[0, 1]`. Intermediate results may leave that range; callers
//! clamp where a bounded image is required.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{width}x{height}x{channels} needs {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Image::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Single-channel image from a function of `(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
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
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Sample with coordinates clamped into the image (replicated border).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y, c)
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    pub fn clamp(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    pub fn clamped(mut self) -> Image {
        self.clamp();
        self
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Image {
        Image {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Element-wise `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Image, b: f64) -> Result<Image> {
        self.ensure_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&p, &q)| a * p + b * q)
            .collect();
        Ok(Image { data, ..self.clone() })
    }

    /// Extract channel `c` as a single-channel image.
    pub fn plane(&self, c: usize) -> Image {
        assert!(c < self.channels, "channel {c} out of range");
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Interleave single-channel planes of equal size.
    pub fn from_planes(planes: &[Image]) -> Result<Image> {
        let first = planes
            .first()
            .ok_or_else(|| Error::InvalidImage("no planes".into()))?;
        for p in planes {
            if p.channels != 1 || p.dims() != first.dims() {
                return Err(Error::DimensionMismatch("planes differ in shape".into()));
            }
        }
        let n = planes.len();
        let mut data = vec![0.0; first.pixel_count() * n];
        for (c, p) in planes.iter().enumerate() {
            for (i, &v) in p.data.iter().enumerate() {
                data[i * n + c] = v;
            }
        }
        Image::new(first.width, first.height, n, data)
    }

    /// Apply a single-channel operation to every plane and re-interleave.
    pub fn map_planes(&self, mut f: impl FnMut(&Image) -> Result<Image>) -> Result<Image> {
        if self.channels == 1 {
            return f(self);
        }
        let planes = (0..self.channels)
            .map(|c| f(&self.plane(c)))
            .collect::<Result<Vec<_>>>()?;
        Image::from_planes(&planes)
    }

    /// Top-left crop to `width x height`.
    pub fn crop(&self, width: usize, height: usize) -> Result<Image> {
        if width == 0 || height == 0 || width > self.width || height > self.height {
            return Err(Error::InvalidParameter(format!(
                "cannot crop {}x{} to {width}x{height}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height * self.channels);
        for y in 0..height {
            let start = y * self.width * self.channels;
            data.extend_from_slice(&self.data[start..start + width * self.channels]);
        }
        Image::new(width, height, self.channels, data)
    }

    /// Crop so both dimensions are multiples of `m`.
    pub fn crop_to_multiple(&self, m: usize) -> Result<Image> {
        let w = self.width - self.width % m;
        let h = self.height - self.height % m;
        if w == 0 || h == 0 {
            return Err(Error::TooSmall(format!(
                "{}x{} has no {m}-multiple crop",
                self.width, self.height
            )));
        }
        self.crop(w, h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BitDepth {
    #[serde(rename = "8")]
    Eight,
    #[serde(rename = "16")]
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }

    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(Error::UnsupportedFormat(format!("bit depth {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorSpace {
    Gray,
    Rgb,
    YcbcrY,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub source_path: String,
    pub bit_depth: BitDepth,
    pub colorspace: ColorSpace,
}

// ITU-R BT.601 studio-swing YCbCr on [0,1] samples.
const Y_COEF: [f64; 3] = [65.481, 128.553, 24.966];
const CB_COEF: [f64; 3] = [-37.797, -74.203, 112.0];
const CR_COEF: [f64; 3] = [112.0, -93.786, -18.214];

fn require_rgb(img: &Image) -> Result<()> {
    if img.channels != 3 {
        return Err(Error::WrongChannels {
            expected: 3,
            actual: img.channels,
        });
    }
    Ok(())
}

/// BT.601 luma: `Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255`.
pub fn rgb_to_luma(img: &Image) -> Result<Image> {
    require_rgb(img)?;
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| (Y_COEF[0] * p[0] + Y_COEF[1] * p[1] + Y_COEF[2] * p[2] + 16.0) / 255.0)
        .collect();
    Image::new(img.width, img.height, 1, data)
}

/// Luma for color images, identity for gray ones.
pub fn luma_of(img: &Image) -> Result<Image> {
    if img.channels == 1 {
        Ok(img.clone())
    } else {
        rgb_to_luma(img)
    }
}

/// Split RGB into BT.601 (Y, Cb, Cr) planes, each scaled by 1/255.
pub fn rgb_to_ycbcr(img: &Image) -> Result<[Image; 3]> {
    require_rgb(img)?;
    let n = img.pixel_count();
    let (mut y, mut cb, mut cr) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for p in img.data.chunks_exact(3) {
        let dot = |k: &[f64; 3]| k[0] * p[0] + k[1] * p[1] + k[2] * p[2];
        y.push((dot(&Y_COEF) + 16.0) / 255.0);
        cb.push((dot(&CB_COEF) + 128.0) / 255.0);
        cr.push((dot(&CR_COEF) + 128.0) / 255.0);
    }
    Ok([
        Image::new(img.width, img.height, 1, y)?,
        Image::new(img.width, img.height, 1, cb)?,
        Image::new(img.width, img.height, 1, cr)?,
    ])
}

/// Inverse of [`rgb_to_ycbcr`].
pub fn ycbcr_to_rgb(y: &Image, cb: &Image, cr: &Image) -> Result<Image> {
    y.ensure_same_shape(cb)?;
    y.ensure_same_shape(cr)?;
    if y.channels != 1 {
        return Err(Error::WrongChannels {
            expected: 1,
            actual: y.channels,
        });
    }
    let mut data = Vec::with_capacity(y.pixel_count() * 3);
    for i in 0..y.pixel_count() {
        let yy = y.data[i] * 255.0 - 16.0;
        let u = cb.data[i] * 255.0 - 128.0;
        let v = cr.data[i] * 255.0 - 128.0;
        data.push((yy / 219.0 * 255.0 + 1.402 * 255.0 / 224.0 * v) / 255.0);
        data.push(
            (yy / 219.0 * 255.0 - 0.344136 * 255.0 / 224.0 * u - 0.714136 * 255.0 / 224.0 * v) / 255.0,
        );
        data.push((yy / 219.0 * 255.0 + 1.772 * 255.0 / 224.0 * u) / 255.0);
    }
    Image::new(y.width, y.height, 3, data)
}
