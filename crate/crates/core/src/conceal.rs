//! Image-level concealment pipeline: loss-pattern geometry, per-block
//! window extraction, engine dispatch, image reassembly, sequential
//! concealment of connected losses, and quality metrics.

use std::time::Duration;

use crate::basis::build_dictionary;
use crate::error::{Error, Result};
use crate::fse::{fse_run_with_reference, psnr_from_mse, IterationTrace, SparseModel};
use crate::grid::{
    build_isotropic_weights, DataArea, ExtrapolationConfig, Method, SampleState, WeightMatrix,
};
use crate::muse::muse_run_with_reference;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Width of the support frame around a lost block, in samples.
pub const DEFAULT_FRAME: usize = 16;

// ===== Image container =====

/// 8-bit grayscale image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        if width == 0 || height == 0 {
            return Err(Error::param("dimensions", "image must be non-empty"));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let pixels = (0..width * height)
            .map(|i| f(i / width, i % width))
            .collect();
        GrayImage::new(width, height, pixels)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

/// Round-half-away-from-zero to an integer, clamped to [0, 255]. Applied
/// only at image write-back; all internal math stays floating point.
#[inline]
pub fn quantize(value: f64) -> u8 {
    value.round().clamp(0.0, 255.0) as u8
}

// ===== Loss pattern geometry =====

/// Regular grid of square loss blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LossPattern {
    pub block_size: usize,
    /// Grid stride between loss-block origins.
    pub spacing: usize,
    /// (row, col) origin of the first block.
    pub offset: (usize, usize),
    /// Support-frame width used when windows are extracted around blocks.
    pub frame: usize,
}

/// One loss block of a pattern: `id` is its index in raster order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LossBlock {
    pub id: usize,
    pub row: usize,
    pub col: usize,
}

impl LossPattern {
    /// Pattern with the frame width equal to the block size (a 16×16 block
    /// gets a 16-sample frame, giving 48×48 windows).
    pub fn new(block_size: usize, spacing: usize, offset: (usize, usize)) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::param("block_size", "must be positive"));
        }
        if spacing == 0 {
            return Err(Error::param("spacing", "must be positive"));
        }
        Ok(LossPattern {
            block_size,
            spacing,
            offset,
            frame: block_size,
        })
    }

    pub fn with_frame(mut self, frame: usize) -> Self {
        self.frame = frame;
        self
    }

    /// Whether every block's support frame is free of other Lost samples:
    /// the gap between adjacent blocks must be at least the frame width.
    pub fn is_isolated(&self) -> bool {
        self.spacing - self.block_size.min(self.spacing) >= self.frame
    }

    /// Blocks lying fully inside a width×height image, raster order.
    pub fn blocks(&self, width: usize, height: usize) -> Vec<LossBlock> {
        let mut out = Vec::new();
        let mut row = self.offset.0;
        while row + self.block_size <= height {
            let mut col = self.offset.1;
            while col + self.block_size <= width {
                out.push(LossBlock {
                    id: out.len(),
                    row,
                    col,
                });
                col += self.spacing;
            }
            row += self.spacing;
        }
        out
    }

    /// Full-image mask: Lost inside every block, Support elsewhere.
    pub fn mask(&self, width: usize, height: usize) -> Vec<SampleState> {
        let mut mask = vec![SampleState::Support; width * height];
        for block in self.blocks(width, height) {
            for m in block.row..block.row + self.block_size {
                for n in block.col..block.col + self.block_size {
                    mask[m * width + n] = SampleState::Lost;
                }
            }
        }
        mask
    }
}

/// Window bounds (row range, col range) of a block plus its frame, clipped
/// to the image.
fn window_bounds(
    image: &GrayImage,
    block: LossBlock,
    block_size: usize,
    frame: usize,
) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let r0 = block.row.saturating_sub(frame);
    let c0 = block.col.saturating_sub(frame);
    let r1 = (block.row + block_size + frame).min(image.height);
    let c1 = (block.col + block_size + frame).min(image.width);
    (r0..r1, c0..c1)
}

/// Cuts the data area around one loss block: the block's samples are marked
/// Lost, the surrounding frame Support. Frames are clipped at image borders
/// (the window shrinks; the block itself must lie inside the image).
pub fn extract_window(image: &GrayImage, pattern: &LossPattern, block_id: usize) -> Result<DataArea> {
    let blocks = pattern.blocks(image.width, image.height);
    let block = *blocks
        .get(block_id)
        .ok_or_else(|| Error::param("block_id", format!("pattern has {} blocks", blocks.len())))?;
    let (rows, cols) = window_bounds(image, block, pattern.block_size, pattern.frame);
    let mut samples = Vec::with_capacity(rows.len() * cols.len());
    let mut mask = Vec::with_capacity(rows.len() * cols.len());
    for m in rows.clone() {
        for n in cols.clone() {
            samples.push(image.get(m, n) as f64);
            let lost = m >= block.row
                && m < block.row + pattern.block_size
                && n >= block.col
                && n < block.col + pattern.block_size;
            mask.push(if lost {
                SampleState::Lost
            } else {
                SampleState::Support
            });
        }
    }
    DataArea::new(rows.len(), cols.len(), samples, mask)
}

// ===== Engine dispatch =====

/// Runs the selected engine on one prepared data area.
pub fn run_engine(
    method: Method,
    area: &DataArea,
    weights: &WeightMatrix,
    dict: &crate::basis::FourierDictionary,
    config: &ExtrapolationConfig,
    reference: Option<&[f64]>,
) -> Result<(SparseModel, IterationTrace)> {
    match method {
        Method::Fse => fse_run_with_reference(area, weights, dict, config, reference),
        Method::Muse => muse_run_with_reference(area, weights, dict, config, reference),
    }
}

// ===== Reports =====

/// Result record of one concealed block (or tile).
#[derive(Clone, Debug)]
pub struct BlockReport {
    pub block_id: usize,
    /// Top-left corner of the lost region this record covers.
    pub origin: (usize, usize),
    pub trace: IterationTrace,
    /// Number of Lost pixels written by this block.
    pub lost_count: usize,
    /// PSNR of the written (quantized) pixels vs the reference, when given.
    pub psnr_db: Option<f64>,
    pub wall_time: Duration,
}

/// Whole-run concealment summary.
#[derive(Clone, Debug)]
pub struct ConcealmentReport {
    pub blocks: Vec<BlockReport>,
    /// PSNR over all Lost pixels pooled across blocks (from pooled squared
    /// error, never averaged per-block PSNRs), when a reference was given.
    pub aggregate_psnr_db: Option<f64>,
}

impl ConcealmentReport {
    /// Pools the per-iteration PSNR probes of all block traces into one
    /// corpus-style curve: per iteration, per-block MSEs are pooled by
    /// their Lost-pixel counts and converted back to dB. `None` when any
    /// block lacks probe data.
    pub fn pooled_iteration_curve(&self) -> Option<Vec<f64>> {
        let iterations = self.blocks.iter().map(|b| b.trace.len()).max()?;
        let mut curve = Vec::with_capacity(iterations);
        for nu in 0..iterations {
            let mut sse = 0.0;
            let mut count = 0usize;
            for block in &self.blocks {
                // a shorter trace holds its last value (saturated blocks)
                let record = block.trace.records().get(nu.min(block.trace.len() - 1))?;
                let psnr = record.psnr_db?;
                let mse = if psnr.is_infinite() {
                    0.0
                } else {
                    PSNR_PEAK_SQ * 10f64.powf(-psnr / 10.0)
                };
                sse += mse * block.lost_count as f64;
                count += block.lost_count;
            }
            curve.push(psnr_from_mse(sse / count as f64));
        }
        Some(curve)
    }
}

const PSNR_PEAK_SQ: f64 = 255.0 * 255.0;

// ===== Block-independent concealment =====

/// Conceals every block of an isolated loss pattern independently and
/// returns the reassembled image. Support pixels pass through bit-exactly.
///
/// `reference` (the uncorrupted image) enables per-iteration PSNR probes
/// and the report's PSNR fields. `allow_contiguous` skips the isolation
/// guard for patterns whose frames touch other blocks.
pub fn conceal_image(
    image: &GrayImage,
    pattern: &LossPattern,
    method: Method,
    config: &ExtrapolationConfig,
    reference: Option<&GrayImage>,
    allow_contiguous: bool,
) -> Result<(GrayImage, ConcealmentReport)> {
    config.validate()?;
    if !allow_contiguous && !pattern.is_isolated() {
        return Err(Error::NotIsolated(format!(
            "spacing {} leaves a {}-sample gap, frame needs {}",
            pattern.spacing,
            pattern.spacing.saturating_sub(pattern.block_size),
            pattern.frame
        )));
    }
    if let Some(r) = reference {
        if r.width != image.width || r.height != image.height {
            return Err(Error::DimensionMismatch {
                expected: image.pixels.len(),
                got: r.pixels.len(),
            });
        }
    }
    let blocks = pattern.blocks(image.width, image.height);

    let conceal_block = |block: &LossBlock| -> Result<(Vec<(usize, u8)>, BlockReport)> {
        conceal_one_block(image, pattern, *block, method, config, reference)
            .map_err(|e| Error::Block {
                id: block.id,
                source: Box::new(e),
            })
    };

    #[cfg(feature = "parallel")]
    let results: Vec<(Vec<(usize, u8)>, BlockReport)> =
        blocks.par_iter().map(conceal_block).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(Vec<(usize, u8)>, BlockReport)> =
        blocks.iter().map(conceal_block).collect::<Result<_>>()?;

    let mut out = image.clone();
    let mut reports = Vec::with_capacity(results.len());
    for (writes, report) in results {
        for (i, v) in writes {
            out.pixels[i] = v;
        }
        reports.push(report);
    }
    let aggregate = reference.map(|r| pooled_psnr(r, &out, &pattern.mask(image.width, image.height)));
    Ok((
        out,
        ConcealmentReport {
            blocks: reports,
            aggregate_psnr_db: aggregate,
        },
    ))
}

fn conceal_one_block(
    image: &GrayImage,
    pattern: &LossPattern,
    block: LossBlock,
    method: Method,
    config: &ExtrapolationConfig,
    reference: Option<&GrayImage>,
) -> Result<(Vec<(usize, u8)>, BlockReport)> {
    let start = std::time::Instant::now();
    let area = extract_window(image, pattern, block.id)?;
    let (rows, cols) = window_bounds(image, block, pattern.block_size, pattern.frame);
    let ref_window: Option<Vec<f64>> = reference.map(|r| {
        rows.clone()
            .flat_map(|m| cols.clone().map(move |n| r.get(m, n) as f64))
            .collect()
    });
    let (model, trace) = run_block(method, &area, config, ref_window.as_deref())?;

    let mut writes = Vec::with_capacity(pattern.block_size * pattern.block_size);
    let mut sse = 0.0;
    for (i, state) in area.mask().iter().enumerate() {
        if *state == SampleState::Lost {
            let m = rows.start + i / cols.len();
            let n = cols.start + i % cols.len();
            let value = quantize(model.model()[i]);
            writes.push((m * image.width + n, value));
            if let Some(r) = reference {
                let d = value as f64 - r.get(m, n) as f64;
                sse += d * d;
            }
        }
    }
    let lost_count = writes.len();
    let psnr_db = reference.map(|_| psnr_from_mse(sse / lost_count as f64));
    Ok((
        writes,
        BlockReport {
            block_id: block.id,
            origin: (block.row, block.col),
            trace,
            lost_count,
            psnr_db,
            wall_time: start.elapsed(),
        },
    ))
}

/// Builds weights and dictionary for one window and runs the engine.
/// A zero-iteration budget short-circuits to the empty model (Lost pixels
/// get filled with 0) instead of being rejected.
fn run_block(
    method: Method,
    area: &DataArea,
    config: &ExtrapolationConfig,
    reference: Option<&[f64]>,
) -> Result<(SparseModel, IterationTrace)> {
    if config.iterations == 0 {
        return Ok((
            SparseModel::new(area.rows(), area.cols()),
            IterationTrace::new(),
        ));
    }
    let weights = build_isotropic_weights(area, config.rho_hat)?;
    let dict = build_dictionary(area, &weights)?;
    run_engine(method, area, &weights, &dict, config, reference)
}

// ===== Sequential concealment =====

/// Conceals an arbitrary loss mask by tiling each connected lost region
/// into `tile`-sized tiles (grid anchored at the region's bounding box)
/// and processing them in raster order. Already concealed tiles join later
/// windows as Support samples with their weights multiplied by
/// `concealed_weight` ∈ [0, 1]; a weight of 0 excludes them entirely.
///
/// The support frame around each tile window equals the tile size, so a
/// mask of isolated blocks reproduces `conceal_image` exactly.
pub fn conceal_sequential(
    image: &GrayImage,
    mask: &[SampleState],
    tile: usize,
    method: Method,
    config: &ExtrapolationConfig,
    concealed_weight: f64,
    reference: Option<&GrayImage>,
) -> Result<(GrayImage, ConcealmentReport)> {
    config.validate()?;
    if tile == 0 {
        return Err(Error::param("tile", "must be positive"));
    }
    if !(0.0..=1.0).contains(&concealed_weight) || !concealed_weight.is_finite() {
        return Err(Error::param("concealed_weight", "must lie in [0, 1]"));
    }
    if mask.len() != image.pixels.len() {
        return Err(Error::DimensionMismatch {
            expected: image.pixels.len(),
            got: mask.len(),
        });
    }
    if let Some(r) = reference {
        if r.width != image.width || r.height != image.height {
            return Err(Error::DimensionMismatch {
                expected: image.pixels.len(),
                got: r.pixels.len(),
            });
        }
    }
    let (width, height) = (image.width, image.height);
    let mut out = image.clone();
    // per-pixel working state: Lost until its tile is concealed
    let mut concealed = vec![false; mask.len()];
    let mut reports = Vec::new();

    for (tile_id, rect) in tile_schedule(mask, width, height, tile).into_iter().enumerate() {
        let start = std::time::Instant::now();
        let (r0, c0, r1, c1) = rect;
        let (wr0, wc0) = (r0.saturating_sub(tile), c0.saturating_sub(tile));
        let (wr1, wc1) = ((r1 + tile).min(height), (c1 + tile).min(width));
        let (wrows, wcols) = (wr1 - wr0, wc1 - wc0);
        let mut samples = Vec::with_capacity(wrows * wcols);
        let mut wmask = Vec::with_capacity(wrows * wcols);
        let mut concealed_positions = Vec::new();
        for m in wr0..wr1 {
            for n in wc0..wc1 {
                let gi = m * width + n;
                samples.push(out.pixels[gi] as f64);
                if mask[gi] == SampleState::Lost && !concealed[gi] {
                    wmask.push(SampleState::Lost);
                } else {
                    if mask[gi] == SampleState::Lost {
                        concealed_positions.push((m - wr0) * wcols + (n - wc0));
                    }
                    wmask.push(SampleState::Support);
                }
            }
        }
        let area = DataArea::new(wrows, wcols, samples, wmask)
            .map_err(|e| Error::Block { id: tile_id, source: Box::new(e) })?;
        let ref_window: Option<Vec<f64>> = reference.map(|r| {
            (wr0..wr1)
                .flat_map(|m| (wc0..wc1).map(move |n| r.get(m, n) as f64))
                .collect()
        });
        let run = || -> Result<(SparseModel, IterationTrace)> {
            if config.iterations == 0 {
                return Ok((
                    SparseModel::new(area.rows(), area.cols()),
                    IterationTrace::new(),
                ));
            }
            let weights = build_isotropic_weights(&area, config.rho_hat)?
                .scaled_at(&concealed_positions, concealed_weight)?;
            let dict = build_dictionary(&area, &weights)?;
            run_engine(method, &area, &weights, &dict, config, ref_window.as_deref())
        };
        let (model, trace) = run().map_err(|e| Error::Block {
            id: tile_id,
            source: Box::new(e),
        })?;

        // write back (and mark concealed) only the current tile
        let mut lost_count = 0usize;
        let mut sse = 0.0;
        for m in r0..r1 {
            for n in c0..c1 {
                let gi = m * width + n;
                if mask[gi] == SampleState::Lost && !concealed[gi] {
                    let value = quantize(model.model()[(m - wr0) * wcols + (n - wc0)]);
                    out.pixels[gi] = value;
                    concealed[gi] = true;
                    lost_count += 1;
                    if let Some(r) = reference {
                        let d = value as f64 - r.pixels[gi] as f64;
                        sse += d * d;
                    }
                }
            }
        }
        reports.push(BlockReport {
            block_id: tile_id,
            origin: (r0, c0),
            trace,
            lost_count,
            psnr_db: reference.map(|_| psnr_from_mse(sse / lost_count.max(1) as f64)),
            wall_time: start.elapsed(),
        });
    }
    let aggregate = reference.map(|r| pooled_psnr(r, &out, mask));
    Ok((
        out,
        ConcealmentReport {
            blocks: reports,
            aggregate_psnr_db: aggregate,
        },
    ))
}

/// Raster-ordered tile rectangles (r0, c0, r1, c1) covering the lost pixels
/// of every connected lost region, tiling each region's bounding box.
fn tile_schedule(
    mask: &[SampleState],
    width: usize,
    height: usize,
    tile: usize,
) -> Vec<(usize, usize, usize, usize)> {
    let mut component = vec![usize::MAX; mask.len()];
    let mut boxes: Vec<(usize, usize, usize, usize)> = Vec::new();
    for start in 0..mask.len() {
        if mask[start] != SampleState::Lost || component[start] != usize::MAX {
            continue;
        }
        // flood fill one 4-connected component, tracking its bounding box
        let id = boxes.len();
        let mut bbox = (height, width, 0usize, 0usize);
        let mut stack = vec![start];
        component[start] = id;
        while let Some(i) = stack.pop() {
            let (m, n) = (i / width, i % width);
            bbox.0 = bbox.0.min(m);
            bbox.1 = bbox.1.min(n);
            bbox.2 = bbox.2.max(m + 1);
            bbox.3 = bbox.3.max(n + 1);
            let mut push = |j: usize| {
                if mask[j] == SampleState::Lost && component[j] == usize::MAX {
                    component[j] = id;
                    stack.push(j);
                }
            };
            if m > 0 {
                push(i - width);
            }
            if m + 1 < height {
                push(i + width);
            }
            if n > 0 {
                push(i - 1);
            }
            if n + 1 < width {
                push(i + 1);
            }
        }
        boxes.push(bbox);
    }
    // components in raster order of their top-left corners
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by_key(|&i| (boxes[i].0, boxes[i].1));
    let mut out = Vec::new();
    for &i in &order {
        let (r0, c0, r1, c1) = boxes[i];
        let mut tr = r0;
        while tr < r1 {
            let mut tc = c0;
            while tc < c1 {
                let rect = (tr, tc, (tr + tile).min(r1), (tc + tile).min(c1));
                // keep only tiles that actually contain lost pixels of this component
                let has_lost = (rect.0..rect.2).any(|m| {
                    (rect.1..rect.3).any(|n| component[m * width + n] == i)
                });
                if has_lost {
                    out.push(rect);
                }
                tc += tile;
            }
            tr += tile;
        }
    }
    out
}

// ===== Metrics =====

/// PSNR in dB between two images over the Lost pixels of `mask`:
/// `10·log10(255²/MSE)`, +∞ when the masked pixels match exactly.
pub fn psnr(reference: &GrayImage, test: &GrayImage, mask: &[SampleState]) -> Result<f64> {
    if reference.pixels.len() != test.pixels.len() || mask.len() != test.pixels.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.pixels.len(),
            got: if mask.len() != reference.pixels.len() {
                mask.len()
            } else {
                test.pixels.len()
            },
        });
    }
    if !mask.contains(&SampleState::Lost) {
        return Err(Error::param("mask", "selects no pixels"));
    }
    Ok(pooled_psnr(reference, test, mask))
}

fn pooled_psnr(reference: &GrayImage, test: &GrayImage, mask: &[SampleState]) -> f64 {
    let mut sse = 0.0;
    let mut count = 0usize;
    for (i, state) in mask.iter().enumerate() {
        if *state == SampleState::Lost {
            let d = reference.pixels[i] as f64 - test.pixels[i] as f64;
            sse += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return f64::INFINITY;
    }
    psnr_from_mse(sse / count as f64)
}

/// Smallest 1-based iteration count whose PSNR is within `delta` dB of the
/// final iteration's PSNR.
pub fn saturation_iterations(psnr_curve: &[f64], delta: f64) -> Result<u32> {
    let final_psnr = *psnr_curve
        .last()
        .ok_or_else(|| Error::param("psnr_curve", "curve is empty"))?;
    let threshold = final_psnr - delta;
    for (i, &v) in psnr_curve.iter().enumerate() {
        if v >= threshold {
            return Ok(i as u32 + 1);
        }
    }
    Ok(psnr_curve.len() as u32)
}

// ===== Tests =====

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_image(width: usize, height: usize, seed: u64) -> GrayImage {
        let mut rng = Rng::new(seed);
        GrayImage::new(
            width,
            height,
            (0..width * height)
                .map(|_| rng.uniform(0.0, 255.9) as u8)
                .collect(),
        )
        .unwrap()
    }

    fn default_pattern() -> LossPattern {
        LossPattern::new(16, 64, (24, 24)).unwrap()
    }

    #[test]
    fn default_pattern_places_64_isolated_blocks() {
        let p = default_pattern();
        assert!(p.is_isolated());
        let blocks = p.blocks(512, 512);
        assert_eq!(blocks.len(), 64);
        assert_eq!(blocks[0].row, 24);
        assert_eq!(blocks[0].col, 24);
        assert_eq!(blocks[63].row, 24 + 7 * 64);
        // mask marks exactly 64·16·16 pixels lost
        let lost = p
            .mask(512, 512)
            .iter()
            .filter(|&&s| s == SampleState::Lost)
            .count();
        assert_eq!(lost, 64 * 256);
    }

    #[test]
    fn oversized_spacing_yields_zero_or_one_block() {
        let p = LossPattern::new(16, 600, (4, 4)).unwrap();
        assert_eq!(p.blocks(32, 32).len(), 1);
        let p = LossPattern::new(16, 600, (20, 20)).unwrap();
        assert_eq!(p.blocks(32, 32).len(), 0);
    }

    #[test]
    fn touching_blocks_are_not_isolated() {
        let p = LossPattern::new(16, 16, (0, 0)).unwrap();
        assert!(!p.is_isolated());
        let p = LossPattern::new(16, 32, (0, 0)).unwrap(); // 16-gap = frame
        assert!(p.is_isolated());
        let p = LossPattern::new(16, 31, (0, 0)).unwrap(); // 15-gap < frame
        assert!(!p.is_isolated());
    }

    #[test]
    fn interior_window_has_full_frame() {
        let image = random_image(512, 512, 7);
        let area = extract_window(&image, &default_pattern(), 9).unwrap();
        assert_eq!((area.rows(), area.cols()), (48, 48));
        let lost = area
            .mask()
            .iter()
            .filter(|&&s| s == SampleState::Lost)
            .count();
        assert_eq!(lost, 256);
        assert_eq!(area.support_count(), 2048);
    }

    #[test]
    fn corner_window_is_clipped() {
        let image = random_image(64, 64, 8);
        let p = LossPattern::new(16, 64, (0, 0)).unwrap();
        let area = extract_window(&image, &p, 0).unwrap();
        assert_eq!((area.rows(), area.cols()), (32, 32));
        assert_eq!(area.support_count(), 32 * 32 - 256);
    }

    #[test]
    fn scaled_window_geometry() {
        let image = random_image(32, 32, 9);
        let p = LossPattern::new(2, 16, (8, 8)).unwrap();
        assert_eq!(p.frame, 2);
        let area = extract_window(&image, &p, 0).unwrap();
        assert_eq!((area.rows(), area.cols()), (6, 6));
        let lost = area
            .mask()
            .iter()
            .filter(|&&s| s == SampleState::Lost)
            .count();
        assert_eq!(lost, 4);
    }

    #[test]
    fn missing_block_is_an_error() {
        let image = random_image(64, 64, 10);
        let p = LossPattern::new(16, 64, (24, 24)).unwrap();
        assert_eq!(p.blocks(64, 64).len(), 1);
        assert!(extract_window(&image, &p, 1).is_err());
    }

    #[test]
    fn window_samples_match_image_values() {
        let image = random_image(128, 128, 11);
        let p = LossPattern::new(8, 64, (32, 40)).unwrap();
        let area = extract_window(&image, &p, 0).unwrap();
        // support samples copied; lost samples zeroed by construction
        for m in 0..area.rows() {
            for n in 0..area.cols() {
                let v = area.samples()[m * area.cols() + n];
                let expect = if area.is_support(m, n) {
                    image.get(32 - 8 + m, 40 - 8 + n) as f64
                } else {
                    0.0
                };
                assert_eq!(v, expect);
            }
        }
    }

    #[test]
    fn constant_image_heals_to_original() {
        let image = GrayImage::filled(96, 96, 128).unwrap();
        let p = LossPattern::new(16, 96, (40, 40)).unwrap();
        let config = ExtrapolationConfig {
            iterations: 40,
            ..ExtrapolationConfig::default()
        };
        for method in [Method::Fse, Method::Muse] {
            let (out, _) = conceal_image(&image, &p, method, &config, None, false).unwrap();
            assert_eq!(out.pixels(), image.pixels());
        }
    }

    #[test]
    fn zero_iterations_zero_fills_lost_pixels() {
        let image = random_image(96, 96, 12);
        let p = LossPattern::new(16, 96, (40, 40)).unwrap();
        let config = ExtrapolationConfig {
            iterations: 0,
            ..ExtrapolationConfig::default()
        };
        let (out, report) =
            conceal_image(&image, &p, Method::Fse, &config, Some(&image), false).unwrap();
        let mask = p.mask(96, 96);
        for (i, state) in mask.iter().enumerate() {
            match state {
                SampleState::Lost => assert_eq!(out.pixels()[i], 0),
                SampleState::Support => assert_eq!(out.pixels()[i], image.pixels()[i]),
            }
        }
        // report PSNR equals the zero-fill PSNR
        let zero_fill = psnr(&image, &out, &mask).unwrap();
        assert_eq!(report.aggregate_psnr_db, Some(zero_fill));
    }

    #[test]
    fn support_pixels_pass_through_bit_exactly() {
        let image = random_image(160, 160, 13);
        let p = LossPattern::new(16, 64, (24, 24)).unwrap();
        let config = ExtrapolationConfig {
            iterations: 15,
            ..ExtrapolationConfig::default()
        };
        let (out, report) =
            conceal_image(&image, &p, Method::Muse, &config, Some(&image), false).unwrap();
        let mask = p.mask(160, 160);
        for (i, state) in mask.iter().enumerate() {
            if *state == SampleState::Support {
                assert_eq!(out.pixels()[i], image.pixels()[i]);
            }
        }
        assert_eq!(report.blocks.len(), p.blocks(160, 160).len());
        // aggregate equals a direct pooled computation over the whole image
        let direct = psnr(&image, &out, &mask).unwrap();
        assert_eq!(report.aggregate_psnr_db, Some(direct));
    }

    #[test]
    fn non_isolated_pattern_requires_explicit_override() {
        let image = random_image(64, 64, 14);
        let p = LossPattern::new(16, 16, (0, 0)).unwrap();
        let config = ExtrapolationConfig {
            iterations: 1,
            ..ExtrapolationConfig::default()
        };
        let denied = conceal_image(&image, &p, Method::Fse, &config, None, false);
        assert!(matches!(denied, Err(Error::NotIsolated(_))));
        assert!(conceal_image(&image, &p, Method::Fse, &config, None, true).is_ok());
    }

    #[test]
    fn repeated_runs_are_identical() {
        let image = random_image(112, 112, 15);
        let p = LossPattern::new(16, 64, (24, 24)).unwrap();
        let config = ExtrapolationConfig {
            iterations: 12,
            ..ExtrapolationConfig::default()
        };
        let (a, _) = conceal_image(&image, &p, Method::Muse, &config, None, false).unwrap();
        let (b, _) = conceal_image(&image, &p, Method::Muse, &config, None, false).unwrap();
        assert_eq!(a.pixels(), b.pixels());
    }

    #[test]
    fn sequential_on_isolated_blocks_matches_independent_driver() {
        let image = random_image(112, 112, 16);
        let p = LossPattern::new(16, 64, (24, 24)).unwrap();
        let config = ExtrapolationConfig {
            iterations: 10,
            ..ExtrapolationConfig::default()
        };
        let (independent, _) =
            conceal_image(&image, &p, Method::Muse, &config, None, false).unwrap();
        let mask = p.mask(112, 112);
        let (sequential, report) =
            conceal_sequential(&image, &mask, 16, Method::Muse, &config, 0.5, Some(&image))
                .unwrap();
        assert_eq!(independent.pixels(), sequential.pixels());
        assert_eq!(report.blocks.len(), p.blocks(112, 112).len());
        // with a reference, the aggregate matches a direct computation
        let direct = psnr(&image, &sequential, &mask).unwrap();
        assert_eq!(report.aggregate_psnr_db, Some(direct));
        assert!(report.blocks.iter().all(|b| b.psnr_db.is_some()));
    }

    #[test]
    fn adjacent_tiles_see_earlier_results_at_reduced_weight() {
        // a 16×32 loss: the second tile's window must include the first
        // tile's concealed pixels, so its result depends on concealed_weight
        let image = random_image(96, 96, 17);
        let mut mask = vec![SampleState::Support; 96 * 96];
        for m in 40..56 {
            for n in 32..64 {
                mask[m * 96 + n] = SampleState::Lost;
            }
        }
        let config = ExtrapolationConfig {
            iterations: 10,
            ..ExtrapolationConfig::default()
        };
        let (half, report) =
            conceal_sequential(&image, &mask, 16, Method::Fse, &config, 0.5, None).unwrap();
        assert_eq!(report.blocks.len(), 2);
        assert_eq!(report.blocks[0].origin, (40, 32));
        assert_eq!(report.blocks[1].origin, (40, 48));
        let (zero, _) =
            conceal_sequential(&image, &mask, 16, Method::Fse, &config, 0.0, None).unwrap();
        // reduced-weight reuse must actually influence the second tile
        assert_ne!(half.pixels(), zero.pixels());
        for (i, state) in mask.iter().enumerate() {
            if *state == SampleState::Support {
                assert_eq!(half.pixels()[i], image.pixels()[i]);
            }
        }
    }

    #[test]
    fn excluded_reuse_equals_keeping_tiles_lost() {
        // concealed_weight = 0 must match an emulation where previously
        // concealed pixels simply stay Lost in the second tile's window
        let image = random_image(80, 80, 18);
        let mut mask = vec![SampleState::Support; 80 * 80];
        for m in 32..48 {
            for n in 24..56 {
                mask[m * 80 + n] = SampleState::Lost;
            }
        }
        let config = ExtrapolationConfig {
            iterations: 8,
            ..ExtrapolationConfig::default()
        };
        let (out, _) =
            conceal_sequential(&image, &mask, 16, Method::Fse, &config, 0.0, None).unwrap();

        // emulation: every tile's window treats *all* lost pixels as Lost
        let mut emulated = image.clone();
        for (r0, c0) in [(32usize, 24usize), (32usize, 40usize)] {
            let (wr0, wc0) = (r0 - 16, c0 - 16);
            let (wr1, wc1) = (r0 + 32, c0 + 32);
            let mut samples = Vec::new();
            let mut wmask = Vec::new();
            for m in wr0..wr1 {
                for n in wc0..wc1 {
                    samples.push(image.get(m, n) as f64);
                    wmask.push(mask[m * 80 + n]);
                }
            }
            let cols = wc1 - wc0;
            let area = DataArea::new(wr1 - wr0, cols, samples, wmask).unwrap();
            let weights = build_isotropic_weights(&area, config.rho_hat).unwrap();
            let dict = build_dictionary(&area, &weights).unwrap();
            let (model, _) = run_engine(Method::Fse, &area, &weights, &dict, &config, None).unwrap();
            for m in r0..r0 + 16 {
                for n in c0..c0 + 16 {
                    let v = model.model()[(m - wr0) * cols + (n - wc0)];
                    emulated.pixels[m * 80 + n] = quantize(v);
                }
            }
        }
        assert_eq!(out.pixels(), emulated.pixels());
    }

    #[test]
    fn psnr_examples() {
        let a = random_image(16, 16, 19);
        let mask = vec![SampleState::Lost; 256];
        assert_eq!(psnr(&a, &a, &mask).unwrap(), f64::INFINITY);
        // uniform 16-level error on every masked pixel
        let b = GrayImage::new(
            16,
            16,
            a.pixels().iter().map(|&v| v.saturating_sub(16).max(16)).collect(),
        )
        .unwrap();
        let shifted = GrayImage::new(
            16,
            16,
            b.pixels().iter().map(|&v| v + 16).collect(),
        )
        .unwrap();
        let got = psnr(&b, &shifted, &mask).unwrap();
        assert!((got - 24.048_403_955_560_609).abs() < 1e-9, "{got}");
        // unmasked pixels are free
        let mut partial = vec![SampleState::Support; 256];
        partial[0] = SampleState::Lost;
        let mut c = a.pixels().to_vec();
        c[200] = c[200].wrapping_add(90);
        let c = GrayImage::new(16, 16, c).unwrap();
        assert_eq!(psnr(&a, &c, &partial).unwrap(), f64::INFINITY);
        // empty mask is an error
        assert!(psnr(&a, &a, &vec![SampleState::Support; 256]).is_err());
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(saturation_iterations(&[25.0; 7], 0.25).unwrap(), 1);
        let curve = [20.0, 25.0, 26.7, 26.9, 27.0];
        assert_eq!(saturation_iterations(&curve, 0.25).unwrap(), 4);
        // early spike counts even if the curve dips afterwards
        assert_eq!(saturation_iterations(&[26.9, 20.0, 27.0], 0.25).unwrap(), 1);
        assert!(saturation_iterations(&[], 0.25).is_err());
    }

    #[test]
    fn pooled_curve_matches_hand_pooling() {
        let image = random_image(96, 96, 20);
        let p = LossPattern::new(16, 48, (8, 8)).unwrap();
        let config = ExtrapolationConfig {
            iterations: 6,
            ..ExtrapolationConfig::default()
        };
        let (_, report) =
            conceal_image(&image, &p, Method::Muse, &config, Some(&image), false).unwrap();
        let curve = report.pooled_iteration_curve().unwrap();
        assert_eq!(curve.len(), 6);
        for (nu, &pooled) in curve.iter().enumerate() {
            let mut sse = 0.0;
            let mut count = 0usize;
            for b in &report.blocks {
                let mse = 255.0f64.powi(2)
                    * 10f64.powf(-b.trace.records()[nu].psnr_db.unwrap() / 10.0);
                sse += mse * b.lost_count as f64;
                count += b.lost_count;
            }
            let expect = 10.0 * (255.0f64.powi(2) / (sse / count as f64)).log10();
            assert!((pooled - expect).abs() < 1e-9);
        }
    }
}
