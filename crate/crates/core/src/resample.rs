//! Separable kernel resampling and the degradation operator.
//!
//! Output sample `u` sits at input coordinate `(u + 0.5) / factor - 0.5`,
//! where `factor = out_len / in_len` (so `(u + 0.5) * s - 0.5` when
//! shrinking by an integer `s`). When shrinking with antialiasing the kernel
//! is stretched by `1 / factor` and rescaled, which makes it a low-pass
//! filter matched to the new sampling rate. Taps that fall outside the
//! image read the nearest border sample. Every row of weights is
//! normalized to sum to one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Cubic convolution parameter (Keys kernel, `a = -0.5`).
pub const CUBIC_A: f64 = -0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    Cubic,
    Lanczos3,
}

impl Filter {
    /// Half-width of the kernel's support.
    pub fn support(self) -> f64 {
        match self {
            Filter::Cubic => 2.0,
            Filter::Lanczos3 => 3.0,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Filter::Cubic => cubic(x),
            Filter::Lanczos3 => lanczos3(x),
        }
    }
}

pub fn cubic(x: f64) -> f64 {
    let a = CUBIC_A;
    let t = x.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

pub fn lanczos3(x: f64) -> f64 {
    if x.abs() < 3.0 {
        sinc(x) * sinc(x / 3.0)
    } else {
        0.0
    }
}

/// Per-output-sample taps for a 1-D resampling pass. Every output has the
/// same number of taps; indices are already clamped into the input.
#[derive(Clone, Debug)]
pub struct Contributions {
    in_len: usize,
    out_len: usize,
    taps: usize,
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl Contributions {
    pub fn new(in_len: usize, out_len: usize, factor: f64, filter: Filter, antialias: bool) -> Self {
        assert!(in_len > 0 && out_len > 0 && factor > 0.0);
        let stretch = if antialias && factor < 1.0 { factor } else { 1.0 };
        let width = 2.0 * filter.support() / stretch;
        let taps = width.ceil() as usize + 2;
        let mut indices = Vec::with_capacity(out_len * taps);
        let mut weights = Vec::with_capacity(out_len * taps);
        let last = in_len as isize - 1;
        for u in 0..out_len {
            let center = (u as f64 + 0.5) / factor - 0.5;
            let left = (center - width / 2.0).floor() as isize;
            let row_start = weights.len();
            for k in 0..taps as isize {
                let j = left + k;
                weights.push(stretch * filter.eval(stretch * (center - j as f64)));
                indices.push(j.clamp(0, last) as usize);
            }
            normalize(&mut weights[row_start..]);
        }
        Contributions {
            in_len,
            out_len,
            taps,
            indices,
            weights,
        }
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    /// `(input indices, weights)` for output sample `u`.
    pub fn row(&self, u: usize) -> (&[usize], &[f64]) {
        let r = u * self.taps..(u + 1) * self.taps;
        (&self.indices[r.clone()], &self.weights[r])
    }
}

fn normalize(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|w| *w /= sum);
}

/// `sum_k w_k v_k` accumulated as `v_a + sum_k w_k (v_k - v_a)` around the
/// middle tap `a`. The two agree because the weights sum to one, and the
/// second form returns a constant input bit-for-bit.
#[inline]
fn weighted(idx: &[usize], wts: &[f64], value: impl Fn(usize) -> f64) -> f64 {
    let anchor = value(idx[idx.len() / 2]);
    let mut acc = 0.0;
    for (&j, &wt) in idx.iter().zip(wts) {
        acc += wt * (value(j) - anchor);
    }
    anchor + acc
}

fn resample_rows(img: &Image, contrib: &Contributions) -> Image {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    debug_assert_eq!(contrib.in_len(), w);
    let out_w = contrib.out_len();
    let src = img.data();
    let mut out = vec![0.0; out_w * h * ch];
    out.par_chunks_mut(out_w * ch).enumerate().for_each(|(y, row)| {
        let line = &src[y * w * ch..(y + 1) * w * ch];
        for u in 0..out_w {
            let (idx, wts) = contrib.row(u);
            for c in 0..ch {
                row[u * ch + c] = weighted(idx, wts, |j| line[j * ch + c]);
            }
        }
    });
    Image::new(out_w, h, ch, out).expect("shape computed above")
}

fn resample_cols(img: &Image, contrib: &Contributions) -> Image {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    debug_assert_eq!(contrib.in_len(), h);
    let out_h = contrib.out_len();
    let stride = w * ch;
    let src = img.data();
    let mut out = vec![0.0; stride * out_h];
    out.par_chunks_mut(stride).enumerate().for_each(|(v, row)| {
        let (idx, wts) = contrib.row(v);
        for (i, o) in row.iter_mut().enumerate() {
            *o = weighted(idx, wts, |j| src[j * stride + i]);
        }
    });
    Image::new(w, out_h, ch, out).expect("shape computed above")
}

/// General separable resize with explicit per-axis factors
/// (`factor = out / in`). Horizontal pass first, then vertical.
pub fn resize(
    img: &Image,
    out_width: usize,
    out_height: usize,
    factor_x: f64,
    factor_y: f64,
    filter: Filter,
    antialias: bool,
) -> Image {
    let horiz = Contributions::new(img.width(), out_width, factor_x, filter, antialias);
    let vert = Contributions::new(img.height(), out_height, factor_y, filter, antialias);
    resample_cols(&resample_rows(img, &horiz), &vert)
}

/// The blur-plus-decimation operator `H` that maps an HR image to its LR
/// observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationModel {
    pub scale: u32,
    #[serde(default = "default_antialias")]
    pub antialias: bool,
}

fn default_antialias() -> bool {
    true
}

impl DegradationModel {
    /// Bicubic antialiased decimation by `scale`.
    pub fn bicubic(scale: u32) -> Result<Self> {
        validate_scale(scale)?;
        Ok(DegradationModel {
            scale,
            antialias: true,
        })
    }

    pub fn output_dims(&self, width: usize, height: usize) -> (usize, usize) {
        let s = self.scale as usize;
        (width / s, height / s)
    }

    /// 1-D tap tables for an input of the given size.
    pub fn contributions(&self, width: usize, height: usize) -> (Contributions, Contributions) {
        let (ow, oh) = self.output_dims(width, height);
        let f = 1.0 / f64::from(self.scale);
        (
            Contributions::new(width, ow, f, Filter::Cubic, self.antialias),
            Contributions::new(height, oh, f, Filter::Cubic, self.antialias),
        )
    }
}

pub fn validate_scale(scale: u32) -> Result<()> {
    if scale < 2 {
        return Err(Error::InvalidParameter(format!("scale must be >= 2, got {scale}")));
    }
    Ok(())
}

/// Degrade `img` by the model: output is `floor(dim / scale)` per axis.
pub fn downsample(img: &Image, model: &DegradationModel) -> Result<Image> {
    validate_scale(model.scale)?;
    let min = 2 * model.scale as usize;
    if img.width() < min || img.height() < min {
        return Err(Error::TooSmall(format!(
            "{}x{} cannot be downsampled by {} (need at least {min} per side)",
            img.width(),
            img.height(),
            model.scale
        )));
    }
    let (h, v) = model.contributions(img.width(), img.height());
    Ok(resample_cols(&resample_rows(img, &h), &v))
}

/// `H` applied to a resolver output. Identical to [`downsample`]; the
/// ensemble relies on this being the very operator that produced the LR
/// input.
pub fn apply_h(img: &Image, model: &DegradationModel) -> Result<Image> {
    downsample(img, model)
}

fn upsample_with(img: &Image, scale: u32, filter: Filter) -> Result<Image> {
    validate_scale(scale)?;
    let s = scale as usize;
    let f = f64::from(scale);
    Ok(resize(img, img.width() * s, img.height() * s, f, f, filter, false))
}

pub fn upsample_bicubic(img: &Image, scale: u32) -> Result<Image> {
    upsample_with(img, scale, Filter::Cubic)
}

pub fn upsample_lanczos3(img: &Image, scale: u32) -> Result<Image> {
    upsample_with(img, scale, Filter::Lanczos3)
}

/// Pixel replication.
pub fn upsample_nearest(img: &Image, scale: u32) -> Result<Image> {
    validate_scale(scale)?;
    let s = scale as usize;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = Vec::with_capacity(w * h * ch * s * s);
    for y in 0..h * s {
        for x in 0..w * s {
            for c in 0..ch {
                out.push(img.get(x / s, y / s, c));
            }
        }
    }
    Image::new(w * s, h * s, ch, out)
}

/// Add white Gaussian noise with standard deviation `sigma / 255`.
/// The result is not clamped.
pub fn add_gaussian_noise(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, sigma / 255.0).expect("sigma checked");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(img.map(|v| v + normal.sample(&mut rng)))
}

/// Normalized 1-D Gaussian with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Same-size Gaussian blur with replicated borders.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("blur sigma must be > 0, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let kernel = gaussian_kernel(sigma, radius);
    let conv = |len: usize| -> Contributions {
        let r = radius as isize;
        let last = len as isize - 1;
        let taps = kernel.len();
        let mut indices = Vec::with_capacity(len * taps);
        let mut weights = Vec::with_capacity(len * taps);
        for u in 0..len as isize {
            for (k, &w) in kernel.iter().enumerate() {
                indices.push((u + k as isize - r).clamp(0, last) as usize);
                weights.push(w);
            }
        }
        Contributions {
            in_len: len,
            out_len: len,
            taps,
            indices,
            weights,
        }
    };
    Ok(resample_cols(&resample_rows(img, &conv(img.width())), &conv(img.height())))
}
