//! The per-image super-resolution path shared by `superres`, `evaluate` and
//! `sweep`. Color images are processed on BT.601 luma; chroma is upscaled
//! with bicubic interpolation.

use std::path::Path;

use refesr::ensemble::{combine, ensemble_outputs, WeightSolution};
use refesr::image::{luma_of, rgb_to_ycbcr, ycbcr_to_rgb};
use refesr::prior::{PriorFile, ReferenceWeights};
use refesr::resample::{downsample, upsample_bicubic, DegradationModel};
use refesr::resolvers::ResolverSet;
use refesr::{Error, Image, Result};

use crate::args::ResolverArgs;

pub fn load_resolvers(args: &ResolverArgs) -> Result<ResolverSet> {
    let set = match &args.resolvers {
        Some(path) => ResolverSet::load(path)?,
        None => ResolverSet::builtin(),
    };
    Ok(if args.self_ensemble {
        set.with_self_ensemble(true)
    } else {
        set
    })
}

/// Prior weights from a prior file, or uniform ones.
pub fn load_prior(path: Option<&Path>, set: &ResolverSet) -> Result<ReferenceWeights> {
    let Some(path) = path else {
        return Ok(ReferenceWeights::uniform(set.ids()));
    };
    let prior = PriorFile::load(path)?.reference_weights;
    if prior.resolver_ids != set.ids() {
        return Err(Error::Config(format!(
            "prior {} was learned for resolvers {:?} but the set is {:?}",
            path.display(),
            prior.resolver_ids,
            set.ids()
        )));
    }
    Ok(prior)
}

/// Luma plane plus the chroma planes of a color image.
pub struct Planes {
    pub luma: Image,
    chroma: Option<(Image, Image)>,
}

impl Planes {
    pub fn split(img: &Image) -> Result<Planes> {
        if img.channels() == 1 {
            return Ok(Planes {
                luma: img.clone(),
                chroma: None,
            });
        }
        let [y, cb, cr] = rgb_to_ycbcr(img)?;
        Ok(Planes {
            luma: y,
            chroma: Some((cb, cr)),
        })
    }

    /// Recombine an upscaled luma plane with bicubic-upscaled chroma.
    pub fn merge(&self, luma_hr: Image, scale: u32) -> Result<Image> {
        match &self.chroma {
            None => Ok(luma_hr),
            Some((cb, cr)) => {
                let cb = upsample_bicubic(cb, scale)?;
                let cr = upsample_bicubic(cr, scale)?;
                Ok(ycbcr_to_rgb(&luma_hr, &cb, &cr)?.clamped())
            }
        }
    }
}

/// Resolver outputs on the luma plane of `lr`.
pub struct Resolved {
    pub planes: Planes,
    pub outputs: Vec<Image>,
}

pub fn resolve_all(lr: &Image, set: &ResolverSet, scale: u32, stem: &str) -> Result<Resolved> {
    let planes = Planes::split(lr)?;
    let outputs = set.run_all(&planes.luma, scale, Some(stem))?;
    Ok(Resolved { planes, outputs })
}

pub struct Combined {
    /// HR luma.
    pub luma: Image,
    /// `None` when the outputs were averaged without solving.
    pub solution: Option<WeightSolution>,
    pub weights: Vec<f64>,
}

pub fn combine_outputs(resolved: &Resolved, scale: u32, w_ref: &[f64], lambda: f64, average: bool) -> Result<Combined> {
    if average {
        let n = resolved.outputs.len();
        let weights = vec![1.0 / n as f64; n];
        return Ok(Combined {
            luma: combine(&resolved.outputs, &weights)?,
            solution: None,
            weights,
        });
    }
    let model = DegradationModel::bicubic(scale)?;
    let sol = ensemble_outputs(&resolved.planes.luma, &resolved.outputs, &model, w_ref, lambda)?;
    Ok(Combined {
        weights: sol.solution.weights.clone(),
        luma: sol.hr,
        solution: Some(sol.solution),
    })
}

/// Ground truth cropped to a multiple of `scale`, its LR observation and
/// its luma.
pub struct Degraded {
    pub lr: Image,
    pub gt_luma: Image,
}

pub fn degrade_gt(gt: &Image, scale: u32) -> Result<Degraded> {
    let cropped = gt.crop_to_multiple(scale as usize)?;
    Ok(Degraded {
        lr: downsample(&cropped, &DegradationModel::bicubic(scale)?)?,
        gt_luma: luma_of(&cropped)?,
    })
}
