//! Deterministic synthetic grayscale corpus.
//!
//! Four 512×512 images with distinct spectral character exercise the
//! extrapolation engines across smooth, textured, and edge-heavy content:
//! rolling hills (low-pass fields), woven cloth (orthogonal amplitude-
//! modulated carriers), soft discs (broadband edges) and wavy ridges
//! (frequency-modulated carriers). Every image is a pure function of its
//! recipe seed, so repeated runs produce identical bytes.

use std::f64::consts::PI;

use crate::conceal::{quantize, GrayImage};
use crate::rng::Rng;

/// Base seed the per-recipe seeds are derived from.
pub const BASE_SEED: u64 = 20_240_801;

/// Identifies one synthetic corpus image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recipe {
    Hills,
    Weave,
    Discs,
    Ridges,
}

impl Recipe {
    pub const ALL: [Recipe; 4] = [Recipe::Hills, Recipe::Weave, Recipe::Discs, Recipe::Ridges];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Hills => "hills",
            Recipe::Weave => "weave",
            Recipe::Discs => "discs",
            Recipe::Ridges => "ridges",
        }
    }

    /// Per-recipe stream offset, so recipes draw independent streams from
    /// a shared base seed.
    fn stream(self) -> u64 {
        match self {
            Recipe::Hills => 1,
            Recipe::Weave => 2,
            Recipe::Discs => 3,
            Recipe::Ridges => 4,
        }
    }
}

/// The standard four-image 512×512 corpus.
pub fn corpus() -> Vec<(&'static str, GrayImage)> {
    Recipe::ALL
        .iter()
        .map(|&r| (r.name(), generate(r, 512, 512)))
        .collect()
}

/// Generates one corpus image at an arbitrary size with the standard seed.
pub fn generate(recipe: Recipe, width: usize, height: usize) -> GrayImage {
    generate_seeded(recipe, width, height, BASE_SEED)
}

/// Generates one corpus image from an explicit base seed. The structural
/// parameters depend only on the seed and recipe, not on the size.
pub fn generate_seeded(recipe: Recipe, width: usize, height: usize, base_seed: u64) -> GrayImage {
    let mut rng = Rng::new(base_seed.wrapping_add(recipe.stream()));
    let field = match recipe {
        Recipe::Hills => hills(&mut rng, width, height),
        Recipe::Weave => weave(&mut rng, width, height),
        Recipe::Discs => discs(&mut rng, width, height),
        Recipe::Ridges => ridges(&mut rng, width, height),
    };
    field.into_image()
}

// ===== Field assembly =====

/// Slow sinusoidal amplitude/frequency modulation applied to a carrier.
#[derive(Clone, Copy)]
struct Modulation {
    /// Amplitude swing: local gain varies over [1 − depth, 1].
    am_depth: f64,
    am_cycles: f64,
    am_phase: f64,
    /// Peak phase wobble (radians) across the transverse axis.
    fm_radians: f64,
    fm_cycles: f64,
    fm_phase: f64,
}

impl Modulation {
    fn none() -> Self {
        Modulation {
            am_depth: 0.0,
            am_cycles: 0.0,
            am_phase: 0.0,
            fm_radians: 0.0,
            fm_cycles: 0.0,
            fm_phase: 0.0,
        }
    }

    fn am(rng: &mut Rng, depth: f64, cycle_lo: f64, cycle_hi: f64) -> Self {
        Modulation {
            am_depth: depth,
            am_cycles: rng.uniform(cycle_lo, cycle_hi),
            am_phase: rng.uniform(0.0, 2.0 * PI),
            ..Modulation::none()
        }
    }
}

struct Field {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Field {
    fn filled(rows: usize, cols: usize, base: f64) -> Self {
        Field {
            rows,
            cols,
            values: vec![base; rows * cols],
        }
    }

    /// Reference length for cycle counts: "cycles" always means cycles per
    /// longest image side, so frequencies scale with the image.
    fn span(&self) -> f64 {
        self.rows.max(self.cols) as f64
    }

    /// Adds `amp·cos(2π(cr·m + cc·n)/span + phase)`.
    fn add_cosine(&mut self, amp: f64, cycles_r: f64, cycles_c: f64, phase: f64) {
        let span = self.span();
        for m in 0..self.rows {
            let row_part = 2.0 * PI * cycles_r * m as f64 / span + phase;
            for n in 0..self.cols {
                let arg = row_part + 2.0 * PI * cycles_c * n as f64 / span;
                self.values[m * self.cols + n] += amp * arg.cos();
            }
        }
    }

    /// Adds a cosine with exactly `a` vertical and `b` horizontal cycles
    /// per 48 samples. Such components complete integer cycle counts in
    /// any 48-sample window, so block-scale analysis resolves them without
    /// cross-bin leakage.
    fn add_lattice_cosine(&mut self, amp: f64, a: i32, b: i32, phase: f64) {
        for m in 0..self.rows {
            let row_part = 2.0 * PI * (a as f64) * m as f64 / 48.0 + phase;
            for n in 0..self.cols {
                let arg = row_part + 2.0 * PI * (b as f64) * n as f64 / 48.0;
                self.values[m * self.cols + n] += amp * arg.cos();
            }
        }
    }

    /// Adds an oriented carrier: `cycles` along direction `theta`, with the
    /// modulation envelope varying across the transverse direction.
    fn add_wave(&mut self, amp: f64, theta: f64, cycles: f64, phase: f64, md: Modulation) {
        let span = self.span();
        let (sin_t, cos_t) = theta.sin_cos();
        for m in 0..self.rows {
            for n in 0..self.cols {
                let along = m as f64 * cos_t + n as f64 * sin_t;
                let across = -(m as f64) * sin_t + n as f64 * cos_t;
                let wobble = md.fm_radians
                    * (2.0 * PI * md.fm_cycles * across / span + md.fm_phase).sin();
                let gain = 1.0
                    - md.am_depth
                        * 0.5
                        * (1.0 + (2.0 * PI * md.am_cycles * across / span + md.am_phase).cos());
                let arg = 2.0 * PI * cycles * along / span + phase + wobble;
                self.values[m * self.cols + n] += amp * gain * arg.cos();
            }
        }
    }

    /// Adds a soft-edged disc: `amp · sigmoid((radius − dist)/edge)`.
    fn add_disc(&mut self, center: (f64, f64), radius: f64, edge: f64, amp: f64) {
        // beyond ~6 edge widths the sigmoid is numerically negligible
        let reach = radius + 6.0 * edge;
        let r0 = (center.0 - reach).floor().max(0.0) as usize;
        let r1 = ((center.0 + reach).ceil() as usize + 1).min(self.rows);
        let c0 = (center.1 - reach).floor().max(0.0) as usize;
        let c1 = ((center.1 + reach).ceil() as usize + 1).min(self.cols);
        for m in r0..r1 {
            for n in c0..c1 {
                let dm = m as f64 - center.0;
                let dn = n as f64 - center.1;
                let dist = (dm * dm + dn * dn).sqrt();
                self.values[m * self.cols + n] += amp / (1.0 + ((dist - radius) / edge).exp());
            }
        }
    }

    fn add_grain(&mut self, rng: &mut Rng, sigma: f64) {
        for v in &mut self.values {
            *v += sigma * rng.normal();
        }
    }

    fn into_image(self) -> GrayImage {
        let pixels = self.values.iter().map(|&v| quantize(v)).collect();
        GrayImage::new(self.cols, self.rows, pixels).expect("field dimensions are valid")
    }
}

/// Draws a low-frequency direction/magnitude pair in polar form, keeping
/// the magnitude away from DC.
fn polar_cycles(rng: &mut Rng, lo: f64, hi: f64) -> (f64, f64) {
    let mag = rng.uniform(lo, hi);
    let angle = rng.uniform(0.0, PI);
    (mag * angle.cos(), mag * angle.sin())
}

// ===== Recipes =====

fn hills(rng: &mut Rng, width: usize, height: usize) -> Field {
    let mut f = Field::filled(height, width, 125.0);
    // gentle large-scale drift
    for _ in 0..2 {
        let amp = rng.uniform(3.5, 5.5);
        let (cr, cc) = polar_cycles(rng, 1.2, 2.0);
        let phase = rng.uniform(0.0, 2.0 * PI);
        f.add_cosine(amp, cr, cc, phase);
    }
    // main undulations, lattice-aligned
    for (a, b) in [(1, 1), (1, -1), (2, 1), (1, 2)] {
        let amp = rng.uniform(10.0, 15.0);
        let phase = rng.uniform(0.0, 2.0 * PI);
        f.add_lattice_cosine(amp, a, b, phase);
    }
    // fainter second-order detail
    for (a, b) in [(2, 2), (2, -2)] {
        let amp = rng.uniform(3.5, 5.5);
        let phase = rng.uniform(0.0, 2.0 * PI);
        f.add_lattice_cosine(amp, a, b, phase);
    }
    f.add_grain(rng, 3.0);
    f
}

fn weave(rng: &mut Rng, width: usize, height: usize) -> Field {
    let mut f = Field::filled(height, width, 128.0);
    for _ in 0..3 {
        let amp = rng.uniform(6.0, 11.0);
        let (cr, cc) = polar_cycles(rng, 1.2, 3.5);
        let phase = rng.uniform(0.0, 2.0 * PI);
        f.add_cosine(amp, cr, cc, phase);
    }
    let theta_warp = rng.uniform(0.08, 0.24);
    let theta_weft = theta_warp + PI / 2.0 + rng.uniform(-0.12, 0.12);
    for (theta, lo, hi) in [(theta_warp, 22.0, 27.0), (theta_weft, 29.0, 34.0)] {
        let cycles = rng.uniform(lo, hi);
        let amp = rng.uniform(13.0, 17.0);
        let phase = rng.uniform(0.0, 2.0 * PI);
        let md = Modulation::am(rng, 0.35, 1.8, 3.2);
        f.add_wave(amp, theta, cycles, phase, md);
        // weak second harmonic sharpens the thread profile
        let h_amp = amp * rng.uniform(0.25, 0.35);
        let h_phase = rng.uniform(0.0, 2.0 * PI);
        let h_md = Modulation::am(rng, 0.35, 1.8, 3.2);
        f.add_wave(h_amp, theta, 2.0 * cycles, h_phase, h_md);
    }
    f.add_grain(rng, 2.0);
    f
}

fn discs(rng: &mut Rng, width: usize, height: usize) -> Field {
    let mut f = Field::filled(height, width, 120.0);
    for _ in 0..3 {
        let amp = rng.uniform(8.0, 13.0);
        let (cr, cc) = polar_cycles(rng, 1.2, 3.0);
        let phase = rng.uniform(0.0, 2.0 * PI);
        f.add_cosine(amp, cr, cc, phase);
    }
    for _ in 0..36 {
        let center = (
            rng.uniform(-20.0, height as f64 + 20.0),
            rng.uniform(-20.0, width as f64 + 20.0),
        );
        let radius = rng.uniform(10.0, 44.0);
        let edge = rng.uniform(2.2, 3.6);
        let magnitude = rng.uniform(13.0, 25.0);
        let amp = if rng.next_u64() & 1 == 0 {
            magnitude
        } else {
            -magnitude
        };
        f.add_disc(center, radius, edge, amp);
    }
    for _ in 0..2 {
        let amp = rng.uniform(3.0, 5.0);
        let (cr, cc) = polar_cycles(rng, 9.0, 16.0);
        let phase = rng.uniform(0.0, 2.0 * PI);
        f.add_cosine(amp, cr, cc, phase);
    }
    f.add_grain(rng, 2.5);
    f
}

fn ridges(rng: &mut Rng, width: usize, height: usize) -> Field {
    let mut f = Field::filled(height, width, 128.0);
    for _ in 0..2 {
        let amp = rng.uniform(4.0, 6.5);
        let (cr, cc) = polar_cycles(rng, 1.2, 2.0);
        let phase = rng.uniform(0.0, 2.0 * PI);
        f.add_cosine(amp, cr, cc, phase);
    }
    // oriented ridge carriers on the lattice, gently wobbled
    for (a, b) in [(1, 2), (2, -1), (2, 2)] {
        let amp = rng.uniform(12.0, 16.0);
        let phase = rng.uniform(0.0, 2.0 * PI);
        let theta = (b as f64).atan2(a as f64);
        let cycles = ((a * a + b * b) as f64).sqrt() * f.span() / 48.0;
        let md = Modulation {
            am_depth: 0.2,
            am_cycles: rng.uniform(1.5, 2.8),
            am_phase: rng.uniform(0.0, 2.0 * PI),
            fm_radians: rng.uniform(0.3, 0.5),
            fm_cycles: rng.uniform(1.8, 3.0),
            fm_phase: rng.uniform(0.0, 2.0 * PI),
        };
        f.add_wave(amp, theta, cycles, phase, md);
    }
    f.add_grain(rng, 2.6);
    f
}

// ===== Tests =====
