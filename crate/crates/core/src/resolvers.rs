//! Component super-resolvers.
//!
//! Each resolver maps an LR image to an HR estimate at an integer scale.
//! The built-in kinds are classical methods; `external_dir` reads outputs
//! produced elsewhere (for example by a deep network) from disk.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::image::{luma_of, Image};
use crate::io::load_image;
use crate::resample::{
    apply_h, downsample, gaussian_blur, resize, upsample_bicubic, upsample_lanczos3, upsample_nearest, DegradationModel,
    Filter,
};

/// Scales the resolvers are defined for.
pub const SUPPORTED_SCALES: [u32; 3] = [2, 3, 4];

/// Side of the comparison window used by `selfsim_patch`.
pub const SELFSIM_WINDOW: usize = 7;

#[derive(Clone, Debug, PartialEq)]
pub enum ResolverKind {
    Bicubic,
    Lanczos3,
    Nearest,
    Ibp { iterations: usize, step: f64 },
    UnsharpBicubic { sigma: f64, amount: f64 },
    SelfsimPatch { patch: usize, radius: usize },
    ExternalDir { dir: PathBuf, ext: String },
}

impl ResolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            ResolverKind::Bicubic => "bicubic",
            ResolverKind::Lanczos3 => "lanczos3",
            ResolverKind::Nearest => "nearest",
            ResolverKind::Ibp { .. } => "ibp",
            ResolverKind::UnsharpBicubic { .. } => "unsharp_bicubic",
            ResolverKind::SelfsimPatch { .. } => "selfsim_patch",
            ResolverKind::ExternalDir { .. } => "external_dir",
        }
    }

    fn params(&self) -> Map<String, Value> {
        let mut m = Map::new();
        match self {
            ResolverKind::Ibp { iterations, step } => {
                m.insert("iterations".into(), (*iterations).into());
                m.insert("step".into(), (*step).into());
            }
            ResolverKind::UnsharpBicubic { sigma, amount } => {
                m.insert("sigma".into(), (*sigma).into());
                m.insert("amount".into(), (*amount).into());
            }
            ResolverKind::SelfsimPatch { patch, radius } => {
                m.insert("patch".into(), (*patch).into());
                m.insert("radius".into(), (*radius).into());
            }
            ResolverKind::ExternalDir { dir, ext } => {
                m.insert("dir".into(), dir.display().to_string().into());
                m.insert("ext".into(), ext.clone().into());
            }
            _ => {}
        }
        m
    }
}

/// Config-file shape of a resolver entry.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    id: String,
    kind: String,
    #[serde(default)]
    params: Map<String, Value>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    self_ensemble: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct ResolverSpec {
    pub id: String,
    pub kind: ResolverKind,
    /// Wrap the resolver in the eight-fold geometric self-ensemble.
    pub self_ensemble: bool,
}

struct Params {
    map: Map<String, Value>,
    kind: String,
}

impl Params {
    fn take(&mut self, keys: &[&str]) -> Option<Value> {
        keys.iter().find_map(|k| self.map.remove(*k))
    }

    fn usize(&mut self, keys: &[&str], default: usize) -> Result<usize> {
        match self.take(keys) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| Error::Config(format!("{}: `{}` must be a non-negative integer", self.kind, keys[0]))),
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(&[key]) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| Error::Config(format!("{}: `{key}` must be a number", self.kind))),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(&[key]) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(Error::Config(format!("{}: `{key}` must be a string", self.kind))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::Config(format!("{}: unknown parameter `{k}`", self.kind))),
        }
    }
}

impl TryFrom<RawSpec> for ResolverSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        if raw.id.trim().is_empty() {
            return Err(Error::Config("resolver id must not be empty".into()));
        }
        let mut p = Params {
            map: raw.params,
            kind: raw.kind.clone(),
        };
        let kind = match raw.kind.as_str() {
            "bicubic" => ResolverKind::Bicubic,
            "lanczos3" => ResolverKind::Lanczos3,
            "nearest" => ResolverKind::Nearest,
            "ibp" => {
                let iterations = p.usize(&["iterations", "k"], 10)?;
                let step = p.f64("step", 1.0)?;
                if !(step > 0.0) {
                    return Err(Error::Config(format!("ibp: step must be > 0, got {step}")));
                }
                ResolverKind::Ibp { iterations, step }
            }
            "unsharp_bicubic" => {
                let sigma = p.f64("sigma", 1.0)?;
                let amount = p.f64("amount", 0.5)?;
                if !(sigma > 0.0) {
                    return Err(Error::Config(format!("unsharp_bicubic: sigma must be > 0, got {sigma}")));
                }
                ResolverKind::UnsharpBicubic { sigma, amount }
            }
            "selfsim_patch" => {
                let patch = p.usize(&["patch"], 5)?;
                let radius = p.usize(&["radius"], 10)?;
                if patch == 0 {
                    return Err(Error::Config("selfsim_patch: patch must be >= 1".into()));
                }
                ResolverKind::SelfsimPatch { patch, radius }
            }
            "external_dir" => {
                let dir = p
                    .string("dir")?
                    .ok_or_else(|| Error::Config("external_dir: `dir` is required".into()))?;
                let ext = p.string("ext")?.unwrap_or_else(|| "png".into());
                ResolverKind::ExternalDir {
                    dir: PathBuf::from(dir),
                    ext: ext.trim_start_matches('.').to_string(),
                }
            }
            other => return Err(Error::Config(format!("unknown resolver kind `{other}`"))),
        };
        p.finish()?;
        Ok(ResolverSpec {
            id: raw.id,
            kind,
            self_ensemble: raw.self_ensemble,
        })
    }
}

impl From<ResolverSpec> for RawSpec {
    fn from(spec: ResolverSpec) -> Self {
        RawSpec {
            params: spec.kind.params(),
            kind: spec.kind.name().to_string(),
            id: spec.id,
            self_ensemble: spec.self_ensemble,
        }
    }
}

impl ResolverSpec {
    pub fn new(id: impl Into<String>, kind: ResolverKind) -> Self {
        ResolverSpec {
            id: id.into(),
            kind,
            self_ensemble: false,
        }
    }

    /// Run the resolver, honoring `self_ensemble`. `stem` names the image
    /// for `external_dir` lookups.
    pub fn run(&self, lr: &Image, scale: u32, stem: Option<&str>) -> Result<Image> {
        if self.self_ensemble {
            geometric_self_ensemble(self, lr, scale, stem)
        } else {
            resolve(self, lr, scale, stem)
        }
    }
}

fn check_scale(scale: u32) -> Result<()> {
    if SUPPORTED_SCALES.contains(&scale) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("resolver scale must be 2, 3 or 4, got {scale}")))
    }
}

/// Plain (non-ensembled) resolver output, clamped to `[0, 1]`.
pub fn resolve(spec: &ResolverSpec, lr: &Image, scale: u32, stem: Option<&str>) -> Result<Image> {
    check_scale(scale)?;
    let out = match &spec.kind {
        ResolverKind::Bicubic => upsample_bicubic(lr, scale)?,
        ResolverKind::Lanczos3 => upsample_lanczos3(lr, scale)?,
        ResolverKind::Nearest => upsample_nearest(lr, scale)?,
        ResolverKind::Ibp { iterations, step } => back_projection(lr, scale, *iterations, *step)?.hr,
        ResolverKind::UnsharpBicubic { sigma, amount } => unsharp_bicubic(lr, scale, *sigma, *amount)?,
        ResolverKind::SelfsimPatch { patch, radius } => lr.map_planes(|p| selfsim_patch(p, scale, *patch, *radius))?,
        ResolverKind::ExternalDir { dir, ext } => {
            let stem = stem.ok_or_else(|| Error::Config("external_dir resolver needs an image name".into()))?;
            load_external(dir, ext, stem, lr, scale)?
        }
    };
    Ok(out.clamped())
}

/// File an `external_dir` resolver reads for `stem` at `scale`.
pub fn external_path(dir: &Path, ext: &str, stem: &str, scale: u32) -> PathBuf {
    dir.join(format!("{stem}_x{scale}.{ext}"))
}

fn load_external(dir: &Path, ext: &str, stem: &str, lr: &Image, scale: u32) -> Result<Image> {
    let path = external_path(dir, ext, stem, scale);
    if !path.is_file() {
        return Err(Error::MissingExternal(path));
    }
    let (img, _) = load_image(&path)?;
    let s = scale as usize;
    let expected = (lr.width() * s, lr.height() * s);
    if img.dims() != expected {
        return Err(Error::DimensionMismatch(format!(
            "{} is {}x{}, expected {}x{}",
            path.display(),
            img.width(),
            img.height(),
            expected.0,
            expected.1
        )));
    }
    match (lr.channels(), img.channels()) {
        (a, b) if a == b => Ok(img),
        (1, 3) => luma_of(&img),
        (a, b) => Err(Error::WrongChannels { expected: a, actual: b }),
    }
}

/// Result of iterative back-projection with its residual history.
#[derive(Clone, Debug)]
pub struct BackProjection {
    pub hr: Image,
    /// `||x - H(y_k)||_2` for `k = 0..=iterations_run`.
    pub residuals: Vec<f64>,
    /// Step actually used per iteration after backtracking.
    pub steps: Vec<f64>,
}

fn l2_diff(a: &Image, b: &Image) -> f64 {
    a.data().iter().zip(b.data()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Bicubic start, then `y <- y + step * U(x - H(y))`. A step that would
/// raise the LR residual is halved (up to 30 times); if no step helps the
/// iteration stops early. The returned image is not clamped.
pub fn back_projection(lr: &Image, scale: u32, iterations: usize, step: f64) -> Result<BackProjection> {
    let model = DegradationModel::bicubic(scale)?;
    let mut hr = upsample_bicubic(lr, scale)?;
    let mut residual = l2_diff(lr, &apply_h(&hr, &model)?);
    let mut residuals = vec![residual];
    let mut steps = Vec::new();
    for _ in 0..iterations {
        let err = lr.lin_comb(1.0, &apply_h(&hr, &model)?, -1.0)?;
        let correction = upsample_bicubic(&err, scale)?;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..30 {
            let candidate = hr.lin_comb(1.0, &correction, t)?;
            let r = l2_diff(lr, &apply_h(&candidate, &model)?);
            if r <= residual {
                accepted = Some((candidate, r));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((candidate, r)) => {
                hr = candidate;
                residual = r;
                residuals.push(r);
                steps.push(t);
            }
            None => break,
        }
    }
    Ok(BackProjection { hr, residuals, steps })
}

fn unsharp_bicubic(lr: &Image, scale: u32, sigma: f64, amount: f64) -> Result<Image> {
    let base = upsample_bicubic(lr, scale)?;
    let blurred = gaussian_blur(&base, sigma)?;
    base.lin_comb(1.0 + amount, &blurred, -amount)
}

/// Positions of `patch`-wide tiles covering `len` with overlap.
fn tile_starts(len: usize, patch: usize) -> Vec<usize> {
    if len <= patch {
        return vec![0];
    }
    let stride = (patch / 2 + 1).max(1);
    let mut v: Vec<usize> = (0..=len - patch).step_by(stride).collect();
    if *v.last().unwrap() != len - patch {
        v.push(len - patch);
    }
    v
}

/// Local self-example super-resolution on one plane.
///
/// The bicubic base image and a low-passed copy of the LR input share the
/// same relative bandwidth, so small structures in the base resemble
/// structures in the low-passed input near the corresponding position.
/// For every HR tile we find the best-matching low-passed LR window (SSD
/// over a 7x7 window, within `radius` LR pixels of the tile's mapped
/// center) and paste the input's high-frequency band from the match onto
/// the base. Overlapping tiles are averaged.
fn selfsim_patch(lr: &Image, scale: u32, patch: usize, radius: usize) -> Result<Image> {
    let base = upsample_bicubic(lr, scale)?;
    let s = f64::from(scale);
    let (w, h) = lr.dims();
    let (dw, dh) = ((w as f64 / s).ceil() as usize, (h as f64 / s).ceil() as usize);
    let coarse = resize(lr, dw, dh, 1.0 / s, 1.0 / s, Filter::Cubic, true);
    let low = resize(&coarse, w, h, s, s, Filter::Cubic, false);
    let high = lr.lin_comb(1.0, &low, -1.0)?;

    let (bw, bh) = base.dims();
    let half_win = (SELFSIM_WINDOW / 2) as isize;
    let half_patch = (patch / 2) as isize;
    let r = radius as isize;
    let mut acc = vec![0.0; bw * bh];
    let mut count = vec![0u32; bw * bh];
    let xs = tile_starts(bw, patch);
    let ys = tile_starts(bh, patch);
    for &py in &ys {
        for &px in &xs {
            let cx = (px + patch / 2) as isize;
            let cy = (py + patch / 2) as isize;
            let qx = ((cx as f64 + 0.5) / s - 0.5).round() as isize;
            let qy = ((cy as f64 + 0.5) / s - 0.5).round() as isize;
            let mut best = (f64::INFINITY, qx, qy);
            for sy in (qy - r).max(0)..=(qy + r).min(h as isize - 1) {
                for sx in (qx - r).max(0)..=(qx + r).min(w as isize - 1) {
                    let mut ssd = 0.0;
                    for dy in -half_win..=half_win {
                        for dx in -half_win..=half_win {
                            let d = base.get_clamped(cx + dx, cy + dy, 0) - low.get_clamped(sx + dx, sy + dy, 0);
                            ssd += d * d;
                        }
                    }
                    if ssd < best.0 {
                        best = (ssd, sx, sy);
                    }
                }
            }
            let (_, bx, by) = best;
            for i in 0..patch.min(bh - py) {
                for j in 0..patch.min(bw - px) {
                    let v = high.get_clamped(bx - half_patch + j as isize, by - half_patch + i as isize, 0);
                    let k = (py + i) * bw + px + j;
                    acc[k] += v;
                    count[k] += 1;
                }
            }
        }
    }
    let data = base
        .data()
        .iter()
        .zip(acc.iter().zip(&count))
        .map(|(&b, (&a, &n))| if n > 0 { b + a / f64::from(n) } else { b })
        .collect();
    Image::new(bw, bh, 1, data)
}

/// One of the eight symmetries of the square: optional transpose, then
/// optional mirroring of each axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dihedral {
    pub transpose: bool,
    pub flip_x: bool,
    pub flip_y: bool,
}

impl Dihedral {
    pub fn all() -> [Dihedral; 8] {
        let mut out = [Dihedral {
            transpose: false,
            flip_x: false,
            flip_y: false,
        }; 8];
        for (i, d) in out.iter_mut().enumerate() {
            d.transpose = i & 4 != 0;
            d.flip_x = i & 1 != 0;
            d.flip_y = i & 2 != 0;
        }
        out
    }

    /// `out(x, y) = in(fx(x'), fy(y'))` with `(x', y')` the (possibly
    /// transposed) output coordinate.
    pub fn apply(&self, img: &Image) -> Image {
        let (w, h, ch) = (img.width(), img.height(), img.channels());
        let (ow, oh) = if self.transpose { (h, w) } else { (w, h) };
        let mut data = Vec::with_capacity(img.data().len());
        for y in 0..oh {
            for x in 0..ow {
                let (a, b) = if self.transpose { (y, x) } else { (x, y) };
                let sx = if self.flip_x { w - 1 - a } else { a };
                let sy = if self.flip_y { h - 1 - b } else { b };
                for c in 0..ch {
                    data.push(img.get(sx, sy, c));
                }
            }
        }
        Image::new(ow, oh, ch, data).expect("permutation of a valid image")
    }

    /// Undo [`Dihedral::apply`].
    pub fn invert(&self, img: &Image) -> Image {
        let (tw, th, ch) = (img.width(), img.height(), img.channels());
        let (w, h) = if self.transpose { (th, tw) } else { (tw, th) };
        let mut data = Vec::with_capacity(img.data().len());
        for j in 0..h {
            for i in 0..w {
                let a = if self.flip_x { w - 1 - i } else { i };
                let b = if self.flip_y { h - 1 - j } else { j };
                let (x, y) = if self.transpose { (b, a) } else { (a, b) };
                for c in 0..ch {
                    data.push(img.get(x, y, c));
                }
            }
        }
        Image::new(w, h, ch, data).expect("permutation of a valid image")
    }
}

/// Mean of `T^-1(resolve(T(lr)))` over the eight symmetries `T`.
///
/// `external_dir` outputs exist only for the untransformed input, so for
/// that kind the plain output is returned.
pub fn geometric_self_ensemble(spec: &ResolverSpec, lr: &Image, scale: u32, stem: Option<&str>) -> Result<Image> {
    if matches!(spec.kind, ResolverKind::ExternalDir { .. }) {
        return resolve(spec, lr, scale, stem);
    }
    let outputs = Dihedral::all()
        .par_iter()
        .map(|t| resolve(spec, &t.apply(lr), scale, stem).map(|hr| t.invert(&hr)))
        .collect::<Result<Vec<_>>>()?;
    let mut sum = vec![0.0; outputs[0].data().len()];
    for o in &outputs {
        for (s, v) in sum.iter_mut().zip(o.data()) {
            *s += v;
        }
    }
    let n = outputs.len() as f64;
    Image::new(
        outputs[0].width(),
        outputs[0].height(),
        outputs[0].channels(),
        sum.into_iter().map(|v| v / n).collect(),
    )
}

/// Ordered resolver list; the order fixes the index of every weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ResolverSpec>", into = "Vec<ResolverSpec>")]
pub struct ResolverSet {
    resolvers: Vec<ResolverSpec>,
}

impl TryFrom<Vec<ResolverSpec>> for ResolverSet {
    type Error = Error;

    fn try_from(resolvers: Vec<ResolverSpec>) -> Result<Self> {
        ResolverSet::new(resolvers)
    }
}

impl From<ResolverSet> for Vec<ResolverSpec> {
    fn from(set: ResolverSet) -> Self {
        set.resolvers
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    List(Vec<ResolverSpec>),
    Table { resolvers: Vec<ResolverSpec> },
}

impl ResolverSet {
    pub fn new(resolvers: Vec<ResolverSpec>) -> Result<Self> {
        if resolvers.is_empty() {
            return Err(Error::Config("resolver set is empty".into()));
        }
        let mut seen = HashSet::new();
        for r in &resolvers {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Config(format!("duplicate resolver id `{}`", r.id)));
            }
        }
        Ok(ResolverSet { resolvers })
    }

    /// The six built-in kinds with default parameters.
    pub fn builtin() -> Self {
        ResolverSet::new(vec![
            ResolverSpec::new("bicubic", ResolverKind::Bicubic),
            ResolverSpec::new("lanczos3", ResolverKind::Lanczos3),
            ResolverSpec::new("nearest", ResolverKind::Nearest),
            ResolverSpec::new("ibp", ResolverKind::Ibp { iterations: 10, step: 1.0 }),
            ResolverSpec::new("unsharp_bicubic", ResolverKind::UnsharpBicubic { sigma: 1.0, amount: 0.5 }),
            ResolverSpec::new("selfsim_patch", ResolverKind::SelfsimPatch { patch: 5, radius: 10 }),
        ])
        .expect("distinct ids")
    }

    /// JSON: either an array of entries or `{"resolvers": [...]}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_file(file)
    }

    /// TOML: an array of `[[resolvers]]` tables.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_file(file)
    }

    fn from_file(file: ConfigFile) -> Result<Self> {
        match file {
            ConfigFile::List(v) | ConfigFile::Table { resolvers: v } => ResolverSet::new(v),
        }
    }

    /// Load by extension (`.toml` is TOML, anything else JSON). Relative
    /// `external_dir` paths are resolved against the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        let mut set = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
            Self::from_toml_str(&text)?
        } else {
            Self::from_json_str(&text)?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        for r in &mut set.resolvers {
            if let ResolverKind::ExternalDir { dir, .. } = &mut r.kind {
                if dir.is_relative() {
                    *dir = base.join(&*dir);
                }
            }
        }
        Ok(set)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("resolver specs serialize")
    }

    pub fn len(&self) -> usize {
        self.resolvers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resolvers.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ResolverSpec> {
        self.resolvers.iter()
    }

    pub fn ids(&self) -> Vec<String> {
        self.resolvers.iter().map(|r| r.id.clone()).collect()
    }

    /// Copy with the geometric self-ensemble switched on or off everywhere.
    pub fn with_self_ensemble(&self, on: bool) -> Self {
        let mut set = self.clone();
        set.resolvers.iter_mut().for_each(|r| r.self_ensemble = on);
        set
    }

    /// Run every resolver, in set order.
    pub fn run_all(&self, lr: &Image, scale: u32, stem: Option<&str>) -> Result<Vec<Image>> {
        self.resolvers
            .par_iter()
            .map(|r| {
                r.run(lr, scale, stem).map_err(|e| Error::ResolverFailed {
                    resolver: r.id.clone(),
                    image: stem.unwrap_or("<unnamed>").to_string(),
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

impl<'a> IntoIterator for &'a ResolverSet {
    type Item = &'a ResolverSpec;
    type IntoIter = std::slice::Iter<'a, ResolverSpec>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

/// Degrade `hr` with the bicubic model at `scale`.
pub fn make_lr(hr: &Image, scale: u32) -> Result<Image> {
    downsample(hr, &DegradationModel::bicubic(scale)?)
}
