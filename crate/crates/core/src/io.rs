//! Binary PGM/PPM and PNG reading and writing.
//!
//! Samples are scaled by `1 / (2^depth - 1)` on load and quantized with
//! `round(clamp(v) * (2^depth - 1))` on save, rounding halves up.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{BitDepth, ColorSpace, Image, ImageMeta};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

pub fn load_image(path: impl AsRef<Path>) -> Result<(Image, ImageMeta)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    let (img, depth) = decode(&bytes)?;
    let colorspace = if img.channels() == 3 {
        ColorSpace::Rgb
    } else {
        ColorSpace::Gray
    };
    Ok((
        img,
        ImageMeta {
            source_path: path.display().to_string(),
            bit_depth: depth,
            colorspace,
        },
    ))
}

/// Decode PGM (P5), PPM (P6) or PNG bytes, sniffing the format.
pub fn decode(bytes: &[u8]) -> Result<(Image, BitDepth)> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else {
        Err(Error::UnsupportedFormat(
            "expected binary PGM (P5), PPM (P6) or PNG".into(),
        ))
    }
}

pub fn save_image(img: &Image, depth: BitDepth, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let bytes = match ext.as_str() {
        "pgm" | "ppm" | "pnm" => {
            let expected = if ext == "pgm" { Some(1) } else if ext == "ppm" { Some(3) } else { None };
            if let Some(expected) = expected {
                if img.channels() != expected {
                    return Err(Error::WrongChannels {
                        expected,
                        actual: img.channels(),
                    });
                }
            }
            encode_pnm(img, depth)
        }
        "png" => encode_png(img, depth)?,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "cannot infer output format from extension `{other}`"
            )))
        }
    };
    fs::write(path, bytes).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Quantize one sample to an integer code at the given depth.
pub fn quantize(v: f64, depth: BitDepth) -> u16 {
    // f64::round rounds halves away from zero, which is half-up on [0, max].
    (v.clamp(0.0, 1.0) * depth.max_value()).round() as u16
}

fn samples_to_image(width: usize, height: usize, channels: usize, codes: impl Iterator<Item = u16>, depth: BitDepth) -> Result<Image> {
    let scale = depth.max_value();
    Image::new(width, height, channels, codes.map(|c| f64::from(c) / scale).collect())
}

struct PnmHeader {
    channels: usize,
    width: usize,
    height: usize,
    depth: BitDepth,
    data_offset: usize,
}

fn parse_pnm_header(bytes: &[u8]) -> Result<PnmHeader> {
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(Error::UnsupportedFormat("not a binary PNM".into())),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and `#` comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while !matches!(bytes.get(pos), Some(b'\n') | Some(b'\r') | None) {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::MalformedHeader("header ends early".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader(format!("expected a number at byte {start}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| Error::MalformedHeader(format!("number out of range: {text}")))?;
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::MalformedHeader("missing separator after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!("zero dimension {width}x{height}")));
    }
    let depth = match maxval {
        255 => BitDepth::Eight,
        65535 => BitDepth::Sixteen,
        other => return Err(Error::UnsupportedFormat(format!("PNM maxval {other}"))),
    };
    Ok(PnmHeader {
        channels,
        width,
        height,
        depth,
        data_offset: pos,
    })
}

pub fn decode_pnm(bytes: &[u8]) -> Result<(Image, BitDepth)> {
    let h = parse_pnm_header(bytes)?;
    let count = h.width * h.height * h.channels;
    let bytes_per = if h.depth == BitDepth::Eight { 1 } else { 2 };
    let payload = &bytes[h.data_offset..];
    let expected = count * bytes_per;
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let payload = &payload[..expected];
    let img = match h.depth {
        BitDepth::Eight => samples_to_image(h.width, h.height, h.channels, payload.iter().map(|&b| u16::from(b)), h.depth)?,
        BitDepth::Sixteen => samples_to_image(
            h.width,
            h.height,
            h.channels,
            payload.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])),
            h.depth,
        )?,
    };
    Ok((img, h.depth))
}

pub fn encode_pnm(img: &Image, depth: BitDepth) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!(
        "{magic}\n{} {}\n{}\n",
        img.width(),
        img.height(),
        depth.max_value() as u32
    )
    .into_bytes();
    for &v in img.data() {
        let q = quantize(v, depth);
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&q.to_be_bytes()),
        }
    }
    out
}

pub fn decode_png(bytes: &[u8]) -> Result<(Image, BitDepth)> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_error)?;
    let info = reader.info();
    if info.interlaced {
        return Err(Error::UnsupportedFormat("interlaced PNG".into()));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(Error::UnsupportedFormat(format!("PNG color type {other:?}"))),
    };
    let depth = match info.bit_depth {
        png::BitDepth::Eight => BitDepth::Eight,
        png::BitDepth::Sixteen => BitDepth::Sixteen,
        other => return Err(Error::UnsupportedFormat(format!("PNG bit depth {other:?}"))),
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| Error::UnsupportedFormat("PNG too large".into()))?];
    let frame = reader.next_frame(&mut buf).map_err(png_error)?;
    let raw = &buf[..frame.buffer_size()];
    let img = match depth {
        BitDepth::Eight => samples_to_image(width, height, channels, raw.iter().map(|&b| u16::from(b)), depth)?,
        BitDepth::Sixteen => samples_to_image(
            width,
            height,
            channels,
            raw.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])),
            depth,
        )?,
    };
    Ok((img, depth))
}

fn png_error(e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => Error::Truncated {
            expected: 0,
            found: 0,
        },
        png::DecodingError::IoError(io) => Error::UnsupportedFormat(format!("PNG read failed: {io}")),
        other => Error::UnsupportedFormat(format!("PNG: {other}")),
    }
}

pub fn encode_png(img: &Image, depth: BitDepth) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        encoder.set_color(if img.channels() == 1 {
            png::ColorType::Grayscale
        } else {
            png::ColorType::Rgb
        });
        encoder.set_depth(match depth {
            BitDepth::Eight => png::BitDepth::Eight,
            BitDepth::Sixteen => png::BitDepth::Sixteen,
        });
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Serialization(format!("PNG header: {e}")))?;
        let raw: Vec<u8> = match depth {
            BitDepth::Eight => img.data().iter().map(|&v| quantize(v, depth) as u8).collect(),
            BitDepth::Sixteen => img
                .data()
                .iter()
                .flat_map(|&v| quantize(v, depth).to_be_bytes())
                .collect(),
        };
        writer
            .write_image_data(&raw)
            .map_err(|e| Error::Serialization(format!("PNG data: {e}")))?;
    }
    Ok(out)
}
