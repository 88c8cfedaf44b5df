//! Image and mask file I/O.
//!
//! Binary PGM (P5) is the baseline format and written bit-exactly
//! (`P5\n<w> <h>\n255\n` followed by raw rows). PNG input is accepted for
//! 8-bit grayscale files. Paths of the form `synthetic:NAME[@WxH]`
//! generate a corpus image on the fly instead of reading a file.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use freqfill::conceal::GrayImage;
use freqfill::grid::SampleState;
use freqfill::synth::{self, Recipe};

use crate::usage_error;

/// Reads an image from a file path or a `synthetic:` pseudo-path. `seed`
/// feeds synthetic generation and is ignored for files.
pub fn read_image(source: &str, seed: Option<u64>) -> Result<GrayImage> {
    if let Some(rest) = source.strip_prefix("synthetic:") {
        return synthetic_image(rest, seed);
    }
    let bytes = fs::read(source).with_context(|| format!("reading {source}"))?;
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes).with_context(|| format!("decoding PGM {source}"))
    } else {
        decode_other(&bytes).with_context(|| format!("decoding {source}"))
    }
}

/// Writes an image; the extension picks the format (`.pgm` or `.png`).
pub fn write_image(path: &Path, image: &GrayImage) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("pgm") => fs::write(path, encode_pgm(image))
            .with_context(|| format!("writing {}", path.display())),
        Some("png") => {
            let buf = image::GrayImage::from_raw(
                image.width() as u32,
                image.height() as u32,
                image.pixels().to_vec(),
            )
            .ok_or_else(|| anyhow!("image buffer construction failed"))?;
            buf.save(path)
                .with_context(|| format!("writing {}", path.display()))
        }
        _ => Err(usage_error(format!(
            "unsupported output extension in {} (use .pgm or .png)",
            path.display()
        ))),
    }
}

/// Reads a mask image: pixels below 128 are Lost, the rest Support.
pub fn read_mask(source: &str) -> Result<(usize, usize, Vec<SampleState>)> {
    let image = read_image(source, None)?;
    let mask = image
        .pixels()
        .iter()
        .map(|&v| {
            if v < 128 {
                SampleState::Lost
            } else {
                SampleState::Support
            }
        })
        .collect();
    Ok((image.width(), image.height(), mask))
}

/// Writes a mask image: 0 = Lost, 255 = Support.
pub fn write_mask(path: &Path, width: usize, height: usize, mask: &[SampleState]) -> Result<()> {
    let pixels = mask
        .iter()
        .map(|s| match s {
            SampleState::Lost => 0u8,
            SampleState::Support => 255u8,
        })
        .collect();
    write_image(path, &GrayImage::new(width, height, pixels)?)
}

// ===== PGM codec =====

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 2; // past the "P5" magic
    let width = pgm_token(bytes, &mut pos)?;
    let height = pgm_token(bytes, &mut pos)?;
    let maxval = pgm_token(bytes, &mut pos)?;
    ensure!(maxval == 255, "only 8-bit PGM (maxval 255) is supported");
    // exactly one whitespace byte separates the header from the raster
    ensure!(
        bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()),
        "missing raster separator"
    );
    pos += 1;
    let len = width * height;
    let data = bytes
        .get(pos..pos + len)
        .ok_or_else(|| anyhow!("truncated raster: need {len} bytes"))?;
    GrayImage::new(width, height, data.to_vec()).map_err(Into::into)
}

/// Reads one decimal header field, skipping whitespace and `#` comments.
fn pgm_token(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while !matches!(bytes.get(*pos), None | Some(b'\n')) {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_digit() => break,
            other => bail!("malformed PGM header (byte {other:?} at {pos})"),
        }
    }
    let mut value = 0usize;
    while let Some(b) = bytes.get(*pos).filter(|b| b.is_ascii_digit()) {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add((b - b'0') as usize))
            .ok_or_else(|| anyhow!("PGM header field overflows"))?;
        *pos += 1;
    }
    Ok(value)
}

// ===== Other formats =====

fn decode_other(bytes: &[u8]) -> Result<GrayImage> {
    match image::load_from_memory(bytes)? {
        image::DynamicImage::ImageLuma8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            GrayImage::new(w, h, buf.into_raw()).map_err(Into::into)
        }
        _ => bail!("only 8-bit grayscale input images are supported"),
    }
}

// ===== Synthetic pseudo-paths =====

fn synthetic_image(source: &str, seed: Option<u64>) -> Result<GrayImage> {
    let (name, size) = match source.split_once('@') {
        Some((name, size)) => (name, Some(size)),
        None => (source, None),
    };
    let recipe = Recipe::ALL
        .iter()
        .copied()
        .find(|r| r.name() == name)
        .ok_or_else(|| {
            usage_error(format!(
                "unknown synthetic image {name:?} (expected one of {})",
                Recipe::ALL.map(|r| r.name()).join(", ")
            ))
        })?;
    let (width, height) = match size {
        None => (512, 512),
        Some(s) => {
            let (w, h) = s
                .split_once('x')
                .ok_or_else(|| usage_error(format!("bad size {s:?} (expected WxH)")))?;
            (
                w.parse().map_err(|_| usage_error(format!("bad width {w:?}")))?,
                h.parse().map_err(|_| usage_error(format!("bad height {h:?}")))?,
            )
        }
    };
    Ok(synth::generate_seeded(
        recipe,
        width,
        height,
        seed.unwrap_or(synth::BASE_SEED),
    ))
}

// ===== Tests =====
