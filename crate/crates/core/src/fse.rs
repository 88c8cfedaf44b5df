//! Frequency Selective Extrapolation: per iteration, the basis pair that
//! maximizes the weighted-error-energy decrement is selected, and a fixed
//! fraction γ of its projection coefficient is added to the model to
//! compensate the orthogonality deficiency of the masked, weighted support.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::basis::{project_all, BasisIndex, FourierDictionary};
use crate::error::{Error, Result};
use crate::grid::{weighted_energy, DataArea, ExtrapolationConfig, SampleState, WeightMatrix};

pub(crate) const PSNR_PEAK: f64 = 255.0;

/// `10·log10(peak² / mse)`; +∞ for an exact match.
pub(crate) fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PSNR_PEAK * PSNR_PEAK / mse).log10()
    }
}

// ===== Model and trace types =====

/// Sparse signal model: accumulated expansion coefficients plus the
/// materialized real synthesis `g[m,n] = Re Σ c_k·φ_k`.
///
/// Coefficients come in conjugate pairs — storing c for k implies conj(c)
/// stored for its partner — which keeps the synthesis real.
#[derive(Clone, Debug)]
pub struct SparseModel {
    rows: usize,
    cols: usize,
    coefficients: BTreeMap<usize, Complex64>,
    model: Vec<f64>,
}

impl SparseModel {
    pub fn new(rows: usize, cols: usize) -> Self {
        SparseModel {
            rows,
            cols,
            coefficients: BTreeMap::new(),
            model: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Materialized model samples, row-major.
    #[inline]
    pub fn model(&self) -> &[f64] {
        &self.model
    }

    /// Accumulated coefficients keyed by flattened frequency index.
    #[inline]
    pub fn coefficients(&self) -> impl Iterator<Item = (BasisIndex, Complex64)> + '_ {
        self.coefficients
            .iter()
            .map(|(&flat, &c)| (BasisIndex::from_flat(flat, self.cols), c))
    }

    /// Number of distinct frequency indices carrying a coefficient.
    #[inline]
    pub fn coefficient_count(&self) -> usize {
        self.coefficients.len()
    }

    /// Re-synthesizes `Re Σ c_k·φ_k` from the coefficient map alone
    /// (reference path; `model()` is the incrementally maintained copy).
    pub fn synthesize(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for (&flat, &c) in &self.coefficients {
            let k = BasisIndex::from_flat(flat, self.cols);
            for m in 0..self.rows {
                for n in 0..self.cols {
                    let phi = crate::basis::evaluate_basis(self.rows, self.cols, k, m, n);
                    out[m * self.cols + n] += (c * phi).re;
                }
            }
        }
        out
    }

    fn accumulate(&mut self, flat: usize, partner: usize, c: Complex64) {
        *self
            .coefficients
            .entry(flat)
            .or_insert(Complex64::new(0.0, 0.0)) += c;
        if partner != flat {
            *self
                .coefficients
                .entry(partner)
                .or_insert(Complex64::new(0.0, 0.0)) += c.conj();
        }
    }
}

/// One iteration's instrumentation record.
#[derive(Clone, Debug)]
pub struct TraceRecord {
    /// 1-based iteration number ν.
    pub iteration: u32,
    /// Selected frequency indices (canonical pair representatives; empty
    /// when the iteration was a zero-residual no-op).
    pub selected: Vec<BasisIndex>,
    /// Coefficient updates ĉ applied this iteration, matching `selected`.
    pub coefficients: Vec<Complex64>,
    /// Weighted residual energy after the update.
    pub residual_energy: f64,
    /// PSNR of the model against ground truth over Lost positions, when a
    /// reference was attached.
    pub psnr_db: Option<f64>,
    /// Whether the joint solve fell back to independent projection
    /// coefficients (never set by the single-selection engine).
    pub used_fallback: bool,
}

/// Per-iteration records of one extrapolation run.
#[derive(Clone, Debug, Default)]
pub struct IterationTrace {
    records: Vec<TraceRecord>,
}

impl IterationTrace {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.records.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.records.last().map(|r| r.residual_energy)
    }

    pub(crate) fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }
}

// ===== Extrapolation state =====

/// Mutable state threaded through the iteration of either engine.
#[derive(Clone)]
pub struct ExtrapolationState<'a> {
    pub(crate) area: &'a DataArea,
    pub(crate) weights: &'a WeightMatrix,
    pub(crate) dict: &'a FourierDictionary,
    pub(crate) model: SparseModel,
    pub(crate) residual: Vec<f64>,
    pub(crate) iteration: u32,
    pub(crate) reference: Option<&'a [f64]>,
}

impl<'a> ExtrapolationState<'a> {
    pub fn new(
        area: &'a DataArea,
        weights: &'a WeightMatrix,
        dict: &'a FourierDictionary,
    ) -> Result<Self> {
        if weights.rows() != area.rows() || weights.cols() != area.cols() {
            return Err(Error::DimensionMismatch {
                expected: area.len(),
                got: weights.values().len(),
            });
        }
        if dict.rows() != area.rows() || dict.cols() != area.cols() {
            return Err(Error::DimensionMismatch {
                expected: area.len(),
                got: dict.len(),
            });
        }
        let (model, residual) = fse_init(area);
        Ok(ExtrapolationState {
            area,
            weights,
            dict,
            model,
            residual,
            iteration: 0,
            reference: None,
        })
    }

    /// Attaches ground-truth samples (full data area, row-major) used for
    /// the per-iteration PSNR probe over Lost positions.
    pub fn with_reference(mut self, reference: &'a [f64]) -> Result<Self> {
        if reference.len() != self.area.len() {
            return Err(Error::DimensionMismatch {
                expected: self.area.len(),
                got: reference.len(),
            });
        }
        self.reference = Some(reference);
        Ok(self)
    }

    #[inline]
    pub fn model(&self) -> &SparseModel {
        &self.model
    }

    #[inline]
    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    /// Iterations completed so far.
    #[inline]
    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn into_model(self) -> SparseModel {
        self.model
    }

    pub(crate) fn probe_psnr(&self) -> Option<f64> {
        let reference = self.reference?;
        let mut sse = 0.0;
        let mut count = 0usize;
        for (i, state) in self.area.mask().iter().enumerate() {
            if *state == SampleState::Lost {
                let d = self.model.model[i] - reference[i];
                sse += d * d;
                count += 1;
            }
        }
        if count == 0 {
            return Some(f64::INFINITY);
        }
        Some(psnr_from_mse(sse / count as f64))
    }
}

// ===== Initialization and selection =====

/// Initial model (identically zero) and residual (samples on Support, zero
/// on Lost positions).
pub fn fse_init(area: &DataArea) -> (SparseModel, Vec<f64>) {
    // DataArea stores Lost samples as zero, so the samples are the residual
    (
        SparseModel::new(area.rows(), area.cols()),
        area.samples().to_vec(),
    )
}

/// Energy-decrement objective of index k: `|p_k|²·weighted_norms[k]`,
/// doubled when the conjugate partner is distinct (a selection always
/// updates the whole pair).
#[inline]
pub(crate) fn selection_score(
    projections: &[Complex64],
    dict: &FourierDictionary,
    flat: usize,
) -> f64 {
    let pair_weight = if dict.is_self_paired(flat) { 1.0 } else { 2.0 };
    projections[flat].norm_sqr() * dict.weighted_norms()[flat] * pair_weight
}

/// Returns the index maximizing the weighted-error-energy decrement.
/// Ties break toward the smallest flattened index, so on conjugate-symmetric
/// projections the canonical pair representative wins.
pub fn fse_select(projections: &[Complex64], dict: &FourierDictionary) -> BasisIndex {
    let mut best = 0usize;
    let mut best_score = -1.0;
    for flat in 0..dict.len() {
        let score = selection_score(projections, dict, flat);
        if score > best_score {
            best_score = score;
            best = flat;
        }
    }
    BasisIndex::from_flat(best, dict.cols())
}

// ===== Model update =====

/// Adds `c·φ_u` plus the conjugate-partner term to the model and subtracts
/// the same real quantity from the residual on Support positions (the
/// residual is identically zero on Lost positions and stays so).
///
/// For a self-paired u the single real term `c·φ_u` is added (c real).
pub(crate) fn apply_pair_update(
    model: &mut SparseModel,
    residual: &mut [f64],
    area: &DataArea,
    dict: &FourierDictionary,
    flat: usize,
    c: Complex64,
) {
    let partner = dict.pair_of()[flat];
    let self_paired = partner == flat;
    let (rows, cols) = (dict.rows(), dict.cols());
    for m in 0..rows {
        for n in 0..cols {
            let i = m * cols + n;
            let phi = dict.basis_at(flat, m, n);
            let delta = if self_paired {
                c.re * phi.re
            } else {
                2.0 * (c.re * phi.re - c.im * phi.im)
            };
            model.model[i] += delta;
            if area.mask()[i] == SampleState::Support {
                residual[i] -= delta;
            }
        }
    }
    model.accumulate(flat, partner, c);
}

/// Builds the no-op record emitted when the weighted residual is zero.
pub(crate) fn no_op_record(state: &ExtrapolationState) -> TraceRecord {
    TraceRecord {
        iteration: state.iteration,
        selected: Vec::new(),
        coefficients: Vec::new(),
        residual_energy: weighted_energy(&state.residual, state.weights)
            .expect("state dimensions validated at construction"),
        psnr_db: state.probe_psnr(),
        used_fallback: false,
    }
}

// ===== Iteration =====

/// One FSE iteration: project, select the best pair, apply ĉ_u = γ·p_u.
/// A zero residual makes the iteration a no-op with an empty selection.
pub fn fse_step(state: &mut ExtrapolationState, config: &ExtrapolationConfig) -> TraceRecord {
    let projections = project_all(&state.residual, state.weights, state.dict)
        .expect("state dimensions validated at construction");
    state.iteration += 1;
    let u = fse_select(&projections, state.dict);
    let flat = u.flatten(state.dict.cols());
    if selection_score(&projections, state.dict, flat) == 0.0 {
        return no_op_record(state);
    }
    let c = config.gamma * projections[flat];
    apply_pair_update(
        &mut state.model,
        &mut state.residual,
        state.area,
        state.dict,
        flat,
        c,
    );
    TraceRecord {
        iteration: state.iteration,
        selected: vec![u],
        coefficients: vec![c],
        residual_energy: weighted_energy(&state.residual, state.weights)
            .expect("state dimensions validated at construction"),
        psnr_db: state.probe_psnr(),
        used_fallback: false,
    }
}

/// Runs `config.iterations` FSE steps; the model restricted to Lost
/// positions is the extrapolation result.
pub fn fse_run(
    area: &DataArea,
    weights: &WeightMatrix,
    dict: &FourierDictionary,
    config: &ExtrapolationConfig,
) -> Result<(SparseModel, IterationTrace)> {
    fse_run_with_reference(area, weights, dict, config, None)
}

/// `fse_run` with an optional ground-truth reference enabling the
/// per-iteration PSNR probe.
pub fn fse_run_with_reference(
    area: &DataArea,
    weights: &WeightMatrix,
    dict: &FourierDictionary,
    config: &ExtrapolationConfig,
    reference: Option<&[f64]>,
) -> Result<(SparseModel, IterationTrace)> {
    config.validate()?;
    if config.iterations == 0 {
        return Err(Error::param("iterations", "must be at least 1"));
    }
    let mut state = ExtrapolationState::new(area, weights, dict)?;
    if let Some(r) = reference {
        state = state.with_reference(r)?;
    }
    let mut trace = IterationTrace::new();
    for _ in 0..config.iterations {
        let record = fse_step(&mut state, config);
        trace.push(record);
    }
    Ok((state.into_model(), trace))
}

// ===== Tests =====
