//! Browser bindings for the block-loss concealment demo.
//!
//! Three operations are exported: synthetic test-image generation, a full
//! concealment run (corrupted preview, concealed result, PSNR curve), and
//! the isotropic weight field used inside one analysis window. The logic
//! lives in plain functions returning `Result<_, String>`; thin
//! `wasm_bindgen` wrappers adapt them to JS, which keeps everything
//! testable on the host target.

use freqfill::conceal::{conceal_image, saturation_iterations, LossPattern};
use freqfill::grid::{
    build_isotropic_weights, DataArea, ExtrapolationConfig, Method, SampleState,
};
use freqfill::synth::{self, Recipe};
use wasm_bindgen::prelude::*;

fn recipe_by_name(name: &str) -> Result<Recipe, String> {
    Recipe::ALL
        .iter()
        .copied()
        .find(|r| r.name() == name)
        .ok_or_else(|| {
            format!(
                "unknown recipe {name:?} (expected one of {})",
                Recipe::ALL.map(|r| r.name()).join(", ")
            )
        })
}

// ===== Synthetic images =====

fn synthetic_image_impl(recipe: &str, width: u32, height: u32, seed: u32) -> Result<Vec<u8>, String> {
    if width == 0 || height == 0 || width > 2048 || height > 2048 {
        return Err("image side must lie in 1..=2048".into());
    }
    let recipe = recipe_by_name(recipe)?;
    let base = synth::BASE_SEED.wrapping_add(seed as u64);
    Ok(synth::generate_seeded(recipe, width as usize, height as usize, base)
        .pixels()
        .to_vec())
}

/// Generates a synthetic grayscale image; returns row-major bytes.
#[wasm_bindgen]
pub fn synthetic_image(recipe: &str, width: u32, height: u32, seed: u32) -> Result<Vec<u8>, JsError> {
    synthetic_image_impl(recipe, width, height, seed).map_err(|e| JsError::new(&e))
}

// ===== Concealment runs =====

/// Result bundle of one demo concealment run.
#[wasm_bindgen]
pub struct DemoRun {
    width: u32,
    height: u32,
    corrupted: Vec<u8>,
    concealed: Vec<u8>,
    curve: Vec<f64>,
    aggregate_psnr_db: f64,
    saturation: u32,
    blocks: u32,
}

#[wasm_bindgen]
impl DemoRun {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Input with lost blocks blacked out, row-major bytes.
    pub fn corrupted(&self) -> Vec<u8> {
        self.corrupted.clone()
    }

    /// Concealed output, row-major bytes.
    pub fn concealed(&self) -> Vec<u8> {
        self.concealed.clone()
    }

    /// Pooled PSNR over the lost pixels after each iteration, in dB.
    pub fn psnr_curve(&self) -> Vec<f64> {
        self.curve.clone()
    }

    pub fn aggregate_psnr_db(&self) -> f64 {
        self.aggregate_psnr_db
    }

    /// Iterations needed to come within 0.25 dB of the final PSNR.
    pub fn saturation_iterations(&self) -> u32 {
        self.saturation
    }

    pub fn blocks(&self) -> u32 {
        self.blocks
    }
}

#[allow(clippy::too_many_arguments)]
fn run_demo_impl(
    recipe: &str,
    size: u32,
    seed: u32,
    method: &str,
    iterations: u32,
    gamma: f64,
    rho_hat: f64,
    tau: f64,
    n_bf: u32,
    block_size: u32,
    spacing: u32,
) -> Result<DemoRun, String> {
    if size == 0 || size > 1024 {
        return Err("image side must lie in 1..=1024".into());
    }
    let recipe = recipe_by_name(recipe)?;
    let method: Method = method.parse()?;
    let config = ExtrapolationConfig {
        iterations,
        gamma,
        rho_hat,
        tau,
        n_bf: n_bf as usize,
    };
    let base = synth::BASE_SEED.wrapping_add(seed as u64);
    let image = synth::generate_seeded(recipe, size as usize, size as usize, base);
    // center each block within its grid cell, like the standard pattern
    let margin = spacing.saturating_sub(block_size) as usize / 2;
    let pattern = LossPattern::new(block_size as usize, spacing as usize, (margin, margin))
        .map_err(|e| e.to_string())?;
    let (concealed, report) = conceal_image(&image, &pattern, method, &config, Some(&image), false)
        .map_err(|e| e.to_string())?;

    let mut corrupted = image.pixels().to_vec();
    for (i, state) in pattern
        .mask(image.width(), image.height())
        .iter()
        .enumerate()
    {
        if *state == SampleState::Lost {
            corrupted[i] = 0;
        }
    }
    let curve = report.pooled_iteration_curve().unwrap_or_default();
    let saturation = if curve.is_empty() {
        0
    } else {
        saturation_iterations(&curve, 0.25).map_err(|e| e.to_string())?
    };
    Ok(DemoRun {
        width: image.width() as u32,
        height: image.height() as u32,
        corrupted,
        concealed: concealed.pixels().to_vec(),
        curve,
        aggregate_psnr_db: report.aggregate_psnr_db.unwrap_or(f64::INFINITY),
        saturation,
        blocks: report.blocks.len() as u32,
    })
}

/// Runs block-loss concealment on a synthetic image and reports the
/// corrupted preview, the concealed result, and the PSNR trajectory.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn run_demo(
    recipe: &str,
    size: u32,
    seed: u32,
    method: &str,
    iterations: u32,
    gamma: f64,
    rho_hat: f64,
    tau: f64,
    n_bf: u32,
    block_size: u32,
    spacing: u32,
) -> Result<DemoRun, JsError> {
    run_demo_impl(
        recipe, size, seed, method, iterations, gamma, rho_hat, tau, n_bf, block_size, spacing,
    )
    .map_err(|e| JsError::new(&e))
}

// ===== Weight field =====

fn weight_field_impl(window: u32, block: u32, rho_hat: f64) -> Result<Vec<f64>, String> {
    if window == 0 || window > 256 {
        return Err("window side must lie in 1..=256".into());
    }
    if block >= window {
        return Err("block must be smaller than the window".into());
    }
    let (window, block) = (window as usize, block as usize);
    let start = (window - block) / 2;
    let mut mask = vec![SampleState::Support; window * window];
    for m in start..start + block {
        for n in start..start + block {
            mask[m * window + n] = SampleState::Lost;
        }
    }
    let area = DataArea::new(window, window, vec![0.0; window * window], mask)
        .map_err(|e| e.to_string())?;
    let weights = build_isotropic_weights(&area, rho_hat).map_err(|e| e.to_string())?;
    Ok(weights.values().to_vec())
}

/// Isotropic weight field of a square window with a centered lost block;
/// returns row-major weights in [0, 1] (zero over the lost block).
#[wasm_bindgen]
pub fn weight_field(window: u32, block: u32, rho_hat: f64) -> Result<Vec<f64>, JsError> {
    weight_field_impl(window, block, rho_hat).map_err(|e| JsError::new(&e))
}

// ===== Tests =====
