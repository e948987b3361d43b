//! PSNR and SSIM on single-channel `[0, 1]` images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// PSNR cap substituted for identical images when scores are aggregated.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr {
    Db(f64),
    /// Zero mean squared error.
    Identical,
}

impl Psnr {
    pub fn is_identical(self) -> bool {
        matches!(self, Psnr::Identical)
    }

    /// Decibels, with `Identical` mapped to `+inf`.
    pub fn value(self) -> f64 {
        match self {
            Psnr::Db(v) => v,
            Psnr::Identical => f64::INFINITY,
        }
    }

    /// Decibels, with `Identical` mapped to `cap`.
    pub fn capped(self, cap: f64) -> f64 {
        match self {
            Psnr::Db(v) => v.min(cap),
            Psnr::Identical => cap,
        }
    }

    /// Serialized form: `null` for identical images.
    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Db(v) => Some(v),
            Psnr::Identical => None,
        }
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Db(v) => write!(f, "{v:.4}"),
            Psnr::Identical => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// `None` when the images are identical.
    pub psnr_db: Option<f64>,
    pub identical: bool,
    pub ssim: f64,
    pub shave: usize,
}

impl MetricReport {
    pub fn psnr(&self) -> Psnr {
        match self.psnr_db {
            Some(v) if !self.identical => Psnr::Db(v),
            _ => Psnr::Identical,
        }
    }
}

pub fn evaluate(a: &Image, b: &Image, shave: usize) -> Result<MetricReport> {
    let p = psnr(a, b, shave)?;
    Ok(MetricReport {
        psnr_db: p.db(),
        identical: p.is_identical(),
        ssim: ssim(a, b, shave)?,
        shave,
    })
}

fn check_pair(a: &Image, b: &Image, shave: usize) -> Result<(usize, usize)> {
    a.ensure_same_shape(b)?;
    if a.channels() != 1 {
        return Err(Error::WrongChannels {
            expected: 1,
            actual: a.channels(),
        });
    }
    let (w, h) = a.dims();
    if 2 * shave >= w.min(h) {
        return Err(Error::TooSmall(format!("shave {shave} leaves nothing of {w}x{h}")));
    }
    Ok((w - 2 * shave, h - 2 * shave))
}

/// Iterate the shaved region as `(a, b)` sample pairs, row-major.
fn shaved_pairs<'a>(a: &'a Image, b: &'a Image, shave: usize) -> impl Iterator<Item = (f64, f64)> + 'a {
    let (w, h) = a.dims();
    (shave..h - shave).flat_map(move |y| (shave..w - shave).map(move |x| (a.get(x, y, 0), b.get(x, y, 0))))
}

pub fn mse(a: &Image, b: &Image, shave: usize) -> Result<f64> {
    let (w, h) = check_pair(a, b, shave)?;
    let sum: f64 = shaved_pairs(a, b, shave).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(sum / (w * h) as f64)
}

/// `10 log10(1 / MSE)` over the shaved region.
pub fn psnr(a: &Image, b: &Image, shave: usize) -> Result<Psnr> {
    let m = mse(a, b, shave)?;
    Ok(if m == 0.0 {
        Psnr::Identical
    } else {
        Psnr::Db(-10.0 * m.log10())
    })
}

pub fn ssim_window() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Valid-mode separable filtering of a `w x h` buffer.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * tmp[(y + i) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Mean SSIM over all fully-contained 11x11 Gaussian windows
/// (`sigma = 1.5`, `L = 1`).
pub fn ssim(a: &Image, b: &Image, shave: usize) -> Result<f64> {
    let (w, h) = check_pair(a, b, shave)?;
    if w.min(h) < SSIM_WINDOW {
        return Err(Error::TooSmall(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} after shaving, got {w}x{h}"
        )));
    }
    let (mut xa, mut xb) = (Vec::with_capacity(w * h), Vec::with_capacity(w * h));
    for (p, q) in shaved_pairs(a, b, shave) {
        xa.push(p);
        xb.push(q);
    }
    let prod = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).collect::<Vec<_>>();
    let k = ssim_window();
    let mu_a = filter_valid(&xa, w, h, &k);
    let mu_b = filter_valid(&xb, w, h, &k);
    let e_aa = filter_valid(&prod(&xa, &xa), w, h, &k);
    let e_bb = filter_valid(&prod(&xb, &xb), w, h, &k);
    let e_ab = filter_valid(&prod(&xa, &xb), w, h, &k);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ssim_local(ma, mb, va, vb, cov);
    }
    Ok(total / mu_a.len() as f64)
}

#[inline]
fn ssim_local(ma: f64, mb: f64, va: f64, vb: f64, cov: f64) -> f64 {
    // Equal inputs give bitwise-equal numerator and denominator.
    ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
}
