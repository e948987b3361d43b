//! Reference-dataset scoring and the ensemble-weight prior.
//!
//! Each resolver is scored on a set of HR reference images at scales 2, 3
//! and 4 by `score_i = sum_s mean_psnr(i, s) * mean_ssim(i, s)`, and the
//! scores are turned into prior weights with a Gaussian kernel around the
//! best score:
//!
//! ```text
//! w_i = exp(-(score_i - score_max)^2 / rho^2) / sum_j exp(-(score_j - score_max)^2 / rho^2)
//! ```
//!
//! A small `rho` concentrates the prior on the best resolver; a large one
//! spreads it evenly.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::image::{luma_of, Image};
use crate::metrics::{psnr, ssim, PSNR_CAP_DB};
use crate::resample::{downsample, DegradationModel};
use crate::resolvers::ResolverSet;

/// Default bandwidth on normalized scores.
pub const DEFAULT_RHO: f64 = 0.07;

pub const DEFAULT_SCALES: [u32; 3] = [2, 3, 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreCell {
    pub resolver_id: String,
    pub scale: u32,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub image_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub resolver_ids: Vec<String>,
    pub scales: Vec<u32>,
    /// Resolver-major: `cells[i * scales.len() + k]`.
    pub cells: Vec<ScoreCell>,
    /// Aggregate score per resolver, in `resolver_ids` order.
    pub scores: Vec<f64>,
}

impl ScoreTable {
    pub fn cell(&self, resolver: usize, scale_index: usize) -> &ScoreCell {
        &self.cells[resolver * self.scales.len() + scale_index]
    }

    /// `sum_s mean_psnr * mean_ssim` from the stored cells.
    pub fn recompute_scores(&self) -> Vec<f64> {
        (0..self.resolver_ids.len())
            .map(|i| {
                (0..self.scales.len())
                    .map(|k| {
                        let c = self.cell(i, k);
                        c.mean_psnr * c.mean_ssim
                    })
                    .sum()
            })
            .collect()
    }

    /// Check the structural invariants of a (possibly deserialized) table.
    pub fn validate(&self) -> Result<()> {
        let n = self.resolver_ids.len();
        if n == 0 || self.scales.is_empty() {
            return Err(Error::Serialization("score table is empty".into()));
        }
        if self.cells.len() != n * self.scales.len() || self.scores.len() != n {
            return Err(Error::Serialization("score table shape is inconsistent".into()));
        }
        let count = self.cells[0].image_count;
        for (idx, c) in self.cells.iter().enumerate() {
            let (i, k) = (idx / self.scales.len(), idx % self.scales.len());
            if c.resolver_id != self.resolver_ids[i] || c.scale != self.scales[k] || c.image_count != count {
                return Err(Error::Serialization(format!("score cell {idx} is out of place")));
            }
        }
        for (stored, fresh) in self.scores.iter().zip(self.recompute_scores()) {
            if (stored - fresh).abs() > 1e-9 * fresh.abs().max(1.0) {
                return Err(Error::Serialization(format!("stored score {stored} != recomputed {fresh}")));
            }
        }
        Ok(())
    }
}

/// An HR reference image with the name used for `external_dir` lookups.
#[derive(Clone, Debug)]
pub struct NamedImage {
    pub name: String,
    pub image: Image,
}

impl NamedImage {
    pub fn new(name: impl Into<String>, image: Image) -> Self {
        NamedImage {
            name: name.into(),
            image,
        }
    }
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Luma, cropped to a multiple of every scale.
pub fn prepare_reference(img: &Image, scales: &[u32]) -> Result<Image> {
    let m = scales.iter().fold(1, |acc, &s| lcm(acc, s as usize));
    luma_of(img)?.crop_to_multiple(m)
}

/// Degrade every reference image at every scale, run every resolver and
/// average PSNR (identical images count as [`PSNR_CAP_DB`]) and SSIM on
/// luma with `shave = scale`.
pub fn build_score_table(refset: &[NamedImage], resolvers: &ResolverSet, scales: &[u32]) -> Result<ScoreTable> {
    if refset.is_empty() {
        return Err(Error::EmptyDataset("reference set has no images".into()));
    }
    if scales.is_empty() {
        return Err(Error::InvalidParameter("no scales given".into()));
    }
    let prepared = refset
        .iter()
        .map(|r| {
            prepare_reference(&r.image, scales).map_err(|e| Error::ResolverFailed {
                resolver: "<prepare>".into(),
                image: r.name.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // (image, scale) -> LR
    let lrs = prepared
        .iter()
        .flat_map(|hr| scales.iter().map(move |&s| (hr, s)))
        .map(|(hr, s)| downsample(hr, &DegradationModel::bicubic(s)?))
        .collect::<Result<Vec<_>>>()?;

    let n_scales = scales.len();
    let n_res = resolvers.len();
    let specs: Vec<_> = resolvers.iter().collect();
    let triples: Vec<(usize, usize, usize)> = (0..refset.len())
        .flat_map(|i| (0..n_scales).flat_map(move |k| (0..n_res).map(move |r| (i, k, r))))
        .collect();
    let measured = triples
        .par_iter()
        .map(|&(i, k, r)| {
            let scale = scales[k];
            let wrap = |e: Error| Error::ResolverFailed {
                resolver: specs[r].id.clone(),
                image: refset[i].name.clone(),
                source: Box::new(e),
            };
            let out = specs[r]
                .run(&lrs[i * n_scales + k], scale, Some(&refset[i].name))
                .map_err(wrap)?;
            let gt = &prepared[i];
            let shave = scale as usize;
            let p = psnr(&out, gt, shave).map_err(wrap)?.capped(PSNR_CAP_DB);
            let s = ssim(&out, gt, shave).map_err(wrap)?;
            Ok((p, s))
        })
        .collect::<Result<Vec<_>>>()?;

    let count = refset.len();
    let mut cells = Vec::with_capacity(n_res * n_scales);
    for (r, spec) in specs.iter().enumerate() {
        for (k, &scale) in scales.iter().enumerate() {
            let (mut sp, mut ss) = (0.0, 0.0);
            for i in 0..count {
                let (p, s) = measured[(i * n_scales + k) * n_res + r];
                sp += p;
                ss += s;
            }
            cells.push(ScoreCell {
                resolver_id: spec.id.clone(),
                scale,
                mean_psnr: sp / count as f64,
                mean_ssim: ss / count as f64,
                image_count: count,
            });
        }
    }
    let mut table = ScoreTable {
        resolver_ids: resolvers.ids(),
        scales: scales.to_vec(),
        cells,
        scores: Vec::new(),
    };
    table.scores = table.recompute_scores();
    Ok(table)
}

/// How `rho` is interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMode {
    /// Scores are mapped affinely onto `[0, 1]` first, so `rho` is a fraction
    /// of the spread between the worst and the best resolver.
    #[default]
    Normalized,
    /// `rho` applies to the raw `psnr * ssim` sums.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceWeights {
    pub weights: Vec<f64>,
    pub rho: f64,
    pub mode: RhoMode,
    pub resolver_ids: Vec<String>,
    /// Best raw aggregate score.
    pub score_max: f64,
}

impl ReferenceWeights {
    /// Flat prior, as if `rho` were unbounded. No scores are involved, so
    /// `score_max` is 0.
    pub fn uniform(resolver_ids: Vec<String>) -> Self {
        let n = resolver_ids.len();
        ReferenceWeights {
            weights: vec![1.0 / n as f64; n],
            rho: f64::MAX,
            mode: RhoMode::Raw,
            resolver_ids,
            score_max: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.weights)
    }
}

/// `(s - min) / (max - min)`; all zeros when every score is equal.
pub fn normalize_scores(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let span = max - min;
    if span > 0.0 {
        scores.iter().map(|s| (s - min) / span).collect()
    } else {
        vec![0.0; scores.len()]
    }
}

/// Gaussian-kernel weights around the best score. The best entry has
/// kernel value 1, so the normalizer never underflows; entries far from
/// the best may underflow to exactly 0.
pub fn weights_from_scores(scores: &[f64], rho: f64) -> Result<Vec<f64>> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be > 0, got {rho}")));
    }
    if scores.is_empty() {
        return Err(Error::InvalidParameter("no scores".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("scores must be finite".into()));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kernel: Vec<f64> = scores
        .iter()
        .map(|s| {
            let d = (s - max) / rho;
            (-d * d).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    Ok(kernel.into_iter().map(|k| k / total).collect())
}

pub fn reference_weights(table: &ScoreTable, rho: f64, mode: RhoMode) -> Result<ReferenceWeights> {
    let scores = match mode {
        RhoMode::Raw => table.scores.clone(),
        RhoMode::Normalized => normalize_scores(&table.scores),
    };
    Ok(ReferenceWeights {
        weights: weights_from_scores(&scores, rho)?,
        rho,
        mode,
        resolver_ids: table.resolver_ids.clone(),
        score_max: table.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Shannon entropy in nats; zero weights contribute nothing.
pub fn entropy(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&w| w > 0.0)
        .fold(0.0, |h, &w| h - w * w.ln())
}

/// On-disk prior: score table, weights, and the configuration that made them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorFile {
    pub tool_version: String,
    pub config: Value,
    pub score_table: ScoreTable,
    pub reference_weights: ReferenceWeights,
}

impl PriorFile {
    pub fn new(config: Value, score_table: ScoreTable, reference_weights: ReferenceWeights) -> Self {
        PriorFile {
            tool_version: crate::VERSION.to_string(),
            config,
            score_table,
            reference_weights,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: PriorFile = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        p.score_table.validate()?;
        if p.reference_weights.resolver_ids != p.score_table.resolver_ids {
            return Err(Error::Serialization("prior weights and score table disagree on resolvers".into()));
        }
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}
