//! Dataset listing and output writing.

use std::fs;
use std::path::{Path, PathBuf};

use refesr::io::load_image;
use refesr::{Error, Image, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::Command;

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

pub struct Loaded {
    pub name: String,
    pub path: PathBuf,
    pub image: Image,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// A single image file, or every image in a directory sorted by file name.
pub fn list_images(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = fs::read_dir(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let p = entry
            .map_err(|source| Error::Unreadable {
                path: path.to_path_buf(),
                source,
            })?
            .path();
        if p.is_file() && is_image(&p) {
            files.push(p);
        }
    }
    if files.is_empty() {
        return Err(Error::EmptyDataset(format!("no PNG/PGM/PPM images in {}", path.display())));
    }
    files.sort();
    Ok(files)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn load_all(path: &Path) -> Result<Vec<Loaded>> {
    list_images(path)?
        .into_iter()
        .map(|p| {
            let (image, _) = load_image(&p)?;
            Ok(Loaded {
                name: stem(&p),
                path: p,
                image,
            })
        })
        .collect()
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// `{"tool_version", "config", ...body}` as pretty JSON with a final newline.
pub fn write_report(path: &Path, config: &Command, body: impl Serialize) -> Result<()> {
    let mut out = json!({
        "tool_version": refesr::VERSION,
        "config": config_value(config),
    });
    let body = serde_json::to_value(body).map_err(|e| Error::Serialization(e.to_string()))?;
    if let (Value::Object(out), Value::Object(body)) = (&mut out, body) {
        out.extend(body);
    }
    let text = serde_json::to_string_pretty(&out).map_err(|e| Error::Serialization(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn config_value(config: &Command) -> Value {
    serde_json::to_value(config).expect("arguments serialize")
}

/// `v` with six significant digits, in fixed notation where that is
/// readable and exponent notation otherwise.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, v)
    } else {
        format!("{v:.5e}")
    }
}

/// `v` rounded to six significant digits.
pub fn round6(v: f64) -> f64 {
    sig6(v).parse().unwrap_or(v)
}
