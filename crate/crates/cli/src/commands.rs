use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use refesr::corpus::synthetic_corpus;
use refesr::image::{luma_of, BitDepth};
use refesr::io::{load_image, save_image};
use refesr::metrics::{evaluate, MetricReport, PSNR_CAP_DB};
use refesr::prior::{
    build_score_table, reference_weights, NamedImage, PriorFile, RhoMode, DEFAULT_RHO,
};
use refesr::resample::{add_gaussian_noise, downsample, validate_scale, DegradationModel};
use refesr::resolvers::ResolverSet;
use refesr::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    Command, DegradeArgs, EvaluateArgs, LearnPriorArgs, SuperresArgs, SweepArgs, SynthArgs,
};
use crate::files::{
    config_value, create_dir, list_images, load_all, round6, sig6, stem, write_report, write_text,
};
use crate::pipeline::{combine_outputs, degrade_gt, load_prior, load_resolvers, resolve_all};

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// The command's arguments plus the resolver set they resolved to.
fn resolved_config(config: &Command, set: &ResolverSet) -> Value {
    let mut v = config_value(config);
    if let Value::Object(m) = &mut v {
        m.insert("resolver_set".into(), set.to_json());
    }
    v
}

#[derive(Serialize)]
struct DegradeEntry {
    name: String,
    source: String,
    output: String,
    original: [usize; 2],
    cropped: [usize; 2],
    lr: [usize; 2],
}

pub fn degrade(args: &DegradeArgs, config: &Command) -> Result<()> {
    validate_scale(args.scale)?;
    let model = DegradationModel::bicubic(args.scale)?;
    let files = list_images(&args.input)?;
    create_dir(&args.output_dir)?;
    let hr_dir = args.output_dir.join("hr");
    if args.keep_hr {
        create_dir(&hr_dir)?;
    }
    let entries = files
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let (img, meta) = load_image(path)?;
            let cropped = img.crop_to_multiple(args.scale as usize)?;
            let mut lr = downsample(&cropped, &model)?;
            if args.noise > 0.0 {
                lr = add_gaussian_noise(&lr, args.noise, args.seed.wrapping_add(i as u64))?;
            }
            let name = file_name(path);
            let out = args.output_dir.join(&name);
            save_image(&lr, meta.bit_depth, &out)?;
            if args.keep_hr {
                save_image(&cropped, meta.bit_depth, hr_dir.join(&name))?;
            }
            eprintln!(
                "degrade: {name} {}x{} -> {}x{}",
                cropped.width(),
                cropped.height(),
                lr.width(),
                lr.height()
            );
            Ok(DegradeEntry {
                name,
                source: path.display().to_string(),
                output: out.display().to_string(),
                original: [img.width(), img.height()],
                cropped: [cropped.width(), cropped.height()],
                lr: [lr.width(), lr.height()],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_report(&args.output_dir.join("manifest.json"), config, json!({ "images": entries }))
}

pub fn learn_prior(args: &LearnPriorArgs, config: &Command) -> Result<()> {
    let set = load_resolvers(&args.resolvers)?;
    let (rho, mode) = match (args.rho.rho, args.rho.rho_relative) {
        (Some(r), _) => (r, RhoMode::Raw),
        (None, Some(r)) => (r, RhoMode::Normalized),
        (None, None) => (DEFAULT_RHO, RhoMode::Normalized),
    };
    let refset: Vec<NamedImage> = load_all(&args.reference)?
        .into_iter()
        .map(|l| NamedImage::new(l.name, l.image))
        .collect();
    let table = build_score_table(&refset, &set, &args.scales)?;
    let weights = reference_weights(&table, rho, mode)?;
    for ((id, score), w) in table.resolver_ids.iter().zip(&table.scores).zip(&weights.weights) {
        eprintln!("learn-prior: {id} score {score:.4} weight {w:.6}");
    }
    PriorFile::new(resolved_config(config, &set), table, weights).save(&args.output)
}

pub fn superres(args: &SuperresArgs, config: &Command) -> Result<()> {
    validate_scale(args.scale)?;
    let set = load_resolvers(&args.ensemble.resolvers)?;
    let prior = load_prior(args.ensemble.prior.as_deref(), &set)?;
    let files = list_images(&args.input)?;
    create_dir(&args.output_dir)?;
    let full_config = resolved_config(config, &set);
    files.par_iter().try_for_each(|path| {
        let (lr, meta) = load_image(path)?;
        let name = stem(path);
        let resolved = resolve_all(&lr, &set, args.scale, &name)?;
        let combined = combine_outputs(&resolved, args.scale, &prior.weights, args.ensemble.lambda, args.average)?;
        let hr = resolved.planes.merge(combined.luma, args.scale)?;
        let out = args.output_dir.join(file_name(path));
        save_image(&hr, meta.bit_depth, &out)?;
        eprintln!("superres: {name} weights {:.4?}", combined.weights);
        let sidecar = json!({
            "config": full_config,
            "image": name,
            "input": path.display().to_string(),
            "output": out.display().to_string(),
            "scale": args.scale,
            "lambda": args.ensemble.lambda,
            "mode": if args.average { "average" } else { "solved" },
            "resolver_ids": set.ids(),
            "prior_weights": prior.weights,
            "weights": combined.weights,
            "solution": combined.solution,
        });
        write_report(&args.output_dir.join(format!("{name}.json")), config, sidecar)
    })
}

#[derive(Clone, Serialize)]
struct Row {
    image: String,
    resolver: String,
    #[serde(flatten)]
    report: MetricReport,
}

fn mean_rows(rows: &[Row]) -> Vec<Row> {
    let mut order = Vec::new();
    let mut acc: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry(&r.resolver).or_insert_with(|| {
            order.push(r.resolver.clone());
            (0.0, 0.0, 0)
        });
        e.0 += r.report.psnr().capped(PSNR_CAP_DB);
        e.1 += r.report.ssim;
        e.2 += 1;
    }
    order
        .into_iter()
        .map(|id| {
            let (p, s, n) = acc[id.as_str()];
            Row {
                image: "mean".into(),
                resolver: id,
                report: MetricReport {
                    psnr_db: Some(p / n as f64),
                    identical: false,
                    ssim: s / n as f64,
                    shave: rows[0].report.shave,
                },
            }
        })
        .collect()
}

fn print_table(rows: &[Row]) {
    let iw = rows.iter().map(|r| r.image.len()).max().unwrap_or(0).max(5);
    let rw = rows.iter().map(|r| r.resolver.len()).max().unwrap_or(0).max(8);
    println!("{:<iw$}  {:<rw$}  {:>9}  {:>6}", "image", "resolver", "psnr_db", "ssim");
    for r in rows {
        let p = r.report.psnr().to_string();
        println!("{:<iw$}  {:<rw$}  {p:>9}  {:>6.4}", r.image, r.resolver, r.report.ssim);
    }
}

pub fn evaluate_cmd(args: &EvaluateArgs, config: &Command) -> Result<()> {
    let shave = args.shave.or(args.scale.map(|s| s as usize)).unwrap_or(0);
    let (rows, set) = match &args.pred {
        Some(pred) => (evaluate_predictions(args, pred, shave)?, None),
        None => {
            let (rows, set) = evaluate_resolvers(args, shave)?;
            (rows, Some(set))
        }
    };
    let means = mean_rows(&rows);
    let mut all = rows.clone();
    all.extend(means.iter().cloned());
    print_table(&all);
    if let Some(path) = &args.json {
        let cfg = match &set {
            Some(s) => resolved_config(config, s),
            None => config_value(config),
        };
        write_report(path, config, json!({ "config": cfg, "rows": rows, "means": means }))?;
    }
    Ok(())
}

fn evaluate_predictions(args: &EvaluateArgs, pred: &Path, shave: usize) -> Result<Vec<Row>> {
    let gts: BTreeMap<String, _> = load_all(&args.gt)?.into_iter().map(|l| (l.name.clone(), l)).collect();
    load_all(pred)?
        .into_par_iter()
        .map(|p| {
            let gt = gts
                .get(&p.name)
                .ok_or_else(|| Error::InvalidParameter(format!("no ground truth named `{}`", p.name)))?;
            // ground truth larger than the prediction is cropped the way
            // `degrade` crops it
            let gt_img = if gt.image.dims() != p.image.dims() {
                gt.image.crop(p.image.width(), p.image.height()).map_err(|_| {
                    Error::DimensionMismatch(format!(
                        "prediction {} is {}x{} but ground truth {} is {}x{}",
                        p.path.display(),
                        p.image.width(),
                        p.image.height(),
                        gt.path.display(),
                        gt.image.width(),
                        gt.image.height()
                    ))
                })?
            } else {
                gt.image.clone()
            };
            Ok(Row {
                image: p.name.clone(),
                resolver: args.label.clone(),
                report: evaluate(&luma_of(&p.image)?, &luma_of(&gt_img)?, shave)?,
            })
        })
        .collect()
}

fn evaluate_resolvers(args: &EvaluateArgs, shave: usize) -> Result<(Vec<Row>, ResolverSet)> {
    let scale = args
        .scale
        .ok_or_else(|| Error::InvalidParameter("--scale is required without --pred".into()))?;
    validate_scale(scale)?;
    let set = load_resolvers(&args.ensemble.resolvers)?;
    let prior = load_prior(args.ensemble.prior.as_deref(), &set)?;
    let per_image = load_all(&args.gt)?
        .into_par_iter()
        .map(|gt| {
            let d = degrade_gt(&gt.image, scale)?;
            let resolved = resolve_all(&d.lr, &set, scale, &gt.name)?;
            let row = |resolver: &str, img| -> Result<Row> {
                Ok(Row {
                    image: gt.name.clone(),
                    resolver: resolver.into(),
                    report: evaluate(img, &d.gt_luma, shave)?,
                })
            };
            let mut rows = Vec::new();
            for (id, out) in set.ids().iter().zip(&resolved.outputs) {
                rows.push(row(id, out)?);
            }
            let solved = combine_outputs(&resolved, scale, &prior.weights, args.ensemble.lambda, false)?;
            rows.push(row("refesr", &solved.luma)?);
            let averaged = combine_outputs(&resolved, scale, &prior.weights, args.ensemble.lambda, true)?;
            rows.push(row("average", &averaged.luma)?);
            eprintln!("evaluate: {} weights {:.4?}", gt.name, solved.weights);
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((per_image.into_iter().flatten().collect(), set))
}

const SWEEP_COLUMNS: &str = "rho,lambda,mean_psnr_db,mean_ssim,prior_entropy,images";

pub fn sweep(args: &SweepArgs, config: &Command) -> Result<()> {
    validate_scale(args.scale)?;
    if args.rho_grid.is_empty() || args.lambda_grid.is_empty() {
        return Err(Error::InvalidParameter("rho and lambda grids must be nonempty".into()));
    }
    let set = load_resolvers(&args.resolvers)?;
    let refset: Vec<NamedImage> = load_all(&args.reference)?
        .into_iter()
        .map(|l| NamedImage::new(l.name, l.image))
        .collect();
    let table = build_score_table(&refset, &set, &args.scales)?;
    let mode = if args.rho_raw { RhoMode::Raw } else { RhoMode::Normalized };
    let cases = load_all(&args.test)?
        .into_par_iter()
        .map(|gt| {
            let d = degrade_gt(&gt.image, args.scale)?;
            let resolved = resolve_all(&d.lr, &set, args.scale, &gt.name)?;
            Ok((d, resolved))
        })
        .collect::<Result<Vec<_>>>()?;
    let shave = args.scale as usize;

    let mut csv = String::from(SWEEP_COLUMNS);
    csv.push('\n');
    let mut rows = Vec::new();
    for &rho in &args.rho_grid {
        let prior = reference_weights(&table, rho, mode)?;
        for &lambda in &args.lambda_grid {
            let reports = cases
                .par_iter()
                .map(|(d, resolved)| {
                    let c = combine_outputs(resolved, args.scale, &prior.weights, lambda, false)?;
                    evaluate(&c.luma, &d.gt_luma, shave)
                })
                .collect::<Result<Vec<_>>>()?;
            let n = reports.len() as f64;
            let psnr = reports.iter().map(|r| r.psnr().capped(PSNR_CAP_DB)).sum::<f64>() / n;
            let ssim = reports.iter().map(|r| r.ssim).sum::<f64>() / n;
            let h = prior.entropy();
            eprintln!("sweep: rho {} lambda {} psnr {} ssim {}", sig6(rho), sig6(lambda), sig6(psnr), sig6(ssim));
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                sig6(rho),
                sig6(lambda),
                sig6(psnr),
                sig6(ssim),
                sig6(h),
                reports.len()
            ));
            rows.push(json!({
                "rho": round6(rho),
                "lambda": round6(lambda),
                "mean_psnr_db": round6(psnr),
                "mean_ssim": round6(ssim),
                "prior_entropy": round6(h),
                "images": reports.len(),
                "prior_weights": prior.weights.iter().map(|&w| round6(w)).collect::<Vec<_>>(),
            }));
        }
    }
    create_dir(&args.output_dir)?;
    write_text(&args.output_dir.join("sweep.csv"), &csv)?;
    print!("{csv}");
    write_report(
        &args.output_dir.join("sweep.json"),
        config,
        json!({
            "config": resolved_config(config, &set),
            "columns": SWEEP_COLUMNS.split(',').collect::<Vec<_>>(),
            "rho_mode": mode,
            "score_table": table,
            "rows": rows,
        }),
    )
}

pub fn synth_corpus(args: &SynthArgs, config: &Command) -> Result<()> {
    if args.count == 0 || args.size == 0 {
        return Err(Error::InvalidParameter("count and size must be positive".into()));
    }
    create_dir(&args.output_dir)?;
    let corpus = synthetic_corpus(args.seed, args.count, args.size);
    let mut names = Vec::new();
    for item in &corpus {
        let file = format!("{}.png", item.name);
        save_image(&item.image, BitDepth::Sixteen, args.output_dir.join(&file))?;
        names.push(file);
    }
    eprintln!("synth-corpus: wrote {} images to {}", names.len(), args.output_dir.display());
    write_report(&args.output_dir.join("manifest.json"), config, json!({ "images": names }))
}
