//! Multiple Selection Extrapolation: per iteration a whole set of basis
//! pairs passes the energy-fraction threshold, their coefficients are
//! refined jointly by a least-squares fit over the selected subspace, and
//! the model update applies all of them simultaneously.

use num_complex::Complex64;

use crate::basis::{project_all, BasisIndex, FourierDictionary};
use crate::error::{Error, Result};
use crate::fse::{
    apply_pair_update, no_op_record, selection_score, ExtrapolationState, IterationTrace,
    SparseModel, TraceRecord,
};
use crate::grid::{weighted_energy, DataArea, ExtrapolationConfig, WeightMatrix};

// ===== Candidate selection =====

/// Candidate set 𝔊 of one iteration.
///
/// `positions` index into the per-pair decrement array handed to
/// [`select_candidates`] (position i ↔ i-th canonical pair representative),
/// ordered by decreasing decrement, ties toward the lower position.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    positions: Vec<usize>,
    decrements: Vec<f64>,
}

impl CandidateSet {
    #[inline]
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    /// Decrements matching `positions`, decreasing.
    #[inline]
    pub fn decrements(&self) -> &[f64] {
        &self.decrements
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Hypothetical weighted-error-energy decrements, one per conjugate pair
/// (aligned with `dict.representatives()`):
/// `ΔĒ_k = γ²·|p_k|²·weighted_norms[k]`, doubled for non-self-paired k.
pub fn hypothetical_decrements(
    projections: &[Complex64],
    dict: &FourierDictionary,
    gamma: f64,
) -> Vec<f64> {
    dict.representatives()
        .iter()
        .map(|&k| gamma * gamma * selection_score(projections, dict, k))
        .collect()
}

/// Keeps the decrements that exceed `tau` times the maximum (strictly) and
/// survive the `n_bf`-th-largest cut; boundary ties are resolved toward
/// lower positions. The result is sorted by decreasing decrement and always
/// contains the position of the maximum.
pub fn select_candidates(decrements: &[f64], tau: f64, n_bf: usize) -> CandidateSet {
    let max = decrements.iter().cloned().fold(0.0, f64::max);
    let threshold = tau * max;
    let mut positions: Vec<usize> = (0..decrements.len())
        .filter(|&i| decrements[i] > threshold)
        .collect();
    // sorting by (decrement desc, position asc) and truncating implements
    // the order-statistic cut: everything above the n_bf-th largest stays,
    // ties at the boundary keep the lowest positions
    positions.sort_by(|&a, &b| {
        decrements[b]
            .partial_cmp(&decrements[a])
            .expect("decrements are finite")
            .then(a.cmp(&b))
    });
    positions.truncate(n_bf);
    let decrements = positions.iter().map(|&i| decrements[i]).collect();
    CandidateSet {
        positions,
        decrements,
    }
}

// ===== Normal system =====

/// Normal equations of the joint fit over the selected pairs, normalized by
/// the common weighted norm Σw: `gram[i][j] = ⟨φ_uj, φ_ui⟩_w / Σw` (unit
/// diagonal), `rhs[i] = ⟨r, φ_ui⟩_w / Σw = p_ui`. The normalization keeps
/// the system well scaled and costs nothing: Σw is a common positive factor
/// on both sides.
#[derive(Clone, Debug)]
pub struct NormalSystem {
    indices: Vec<usize>,
    gram: Vec<Complex64>,
    rhs: Vec<Complex64>,
}

impl NormalSystem {
    /// Assembles the system for the given flat canonical indices; every
    /// Gram entry is a weight-spectrum lookup computed once per unordered
    /// pair and mirrored conjugately, so the matrix is exactly Hermitian.
    pub fn assemble(
        projections: &[Complex64],
        dict: &FourierDictionary,
        indices: &[usize],
    ) -> NormalSystem {
        let n = indices.len();
        let total = dict.weighted_norms()[0];
        let mut gram = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            gram[i * n + i] = Complex64::new(1.0, 0.0);
            for j in i + 1..n {
                let g = dict.weighted_inner(indices[j], indices[i]) / total;
                gram[i * n + j] = g;
                gram[j * n + i] = g.conj();
            }
        }
        let rhs = indices.iter().map(|&k| projections[k]).collect();
        NormalSystem {
            indices: indices.to_vec(),
            gram,
            rhs,
        }
    }

    /// Number of pair unknowns.
    #[inline]
    pub fn dimension(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Row-major Hermitian Gram (normalized, unit diagonal).
    #[inline]
    pub fn gram(&self) -> &[Complex64] {
        &self.gram
    }

    #[inline]
    pub fn rhs(&self) -> &[Complex64] {
        &self.rhs
    }

    /// Real form of the complex system: each pair coefficient contributes
    /// its cosine and sine amplitude (≙ real and imaginary part) as two
    /// real unknowns, giving the 2n×2n symmetric block matrix
    /// [[Re G, −Im G], [Im G, Re G]] — exactly symmetric because the Gram
    /// is exactly Hermitian.
    fn real_system(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dimension();
        let d = 2 * n;
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        for i in 0..n {
            for j in 0..n {
                let g = self.gram[i * n + j];
                a[i * d + j] = g.re;
                a[i * d + n + j] = -g.im;
                a[(n + i) * d + j] = g.im;
                a[(n + i) * d + n + j] = g.re;
            }
            b[i] = self.rhs[i].re;
            b[n + i] = self.rhs[i].im;
        }
        (a, b)
    }

    /// Solves the system by Gaussian elimination with partial pivoting on
    /// the real form. Returns `None` when a pivot falls below the
    /// rank-deficiency threshold (near-collinear selected functions); the
    /// caller then falls back to the independent projection coefficients.
    pub fn solve(&self) -> Option<Vec<Complex64>> {
        let n = self.dimension();
        let d = 2 * n;
        let (mut a, mut b) = self.real_system();
        let tol = 1e-12 * d as f64;
        for col in 0..d {
            let pivot_row = (col..d)
                .max_by(|&r, &s| {
                    a[r * d + col]
                        .abs()
                        .partial_cmp(&a[s * d + col].abs())
                        .expect("gram entries are finite")
                })
                .expect("non-empty system");
            if a[pivot_row * d + col].abs() < tol {
                return None;
            }
            if pivot_row != col {
                for c in 0..d {
                    a.swap(col * d + c, pivot_row * d + c);
                }
                b.swap(col, pivot_row);
            }
            let pivot = a[col * d + col];
            for row in col + 1..d {
                let factor = a[row * d + col] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for c in col..d {
                    a[row * d + c] -= factor * a[col * d + c];
                }
                b[row] -= factor * b[col];
            }
        }
        let mut x = vec![0.0; d];
        for row in (0..d).rev() {
            let mut acc = b[row];
            for c in row + 1..d {
                acc -= a[row * d + c] * x[c];
            }
            x[row] = acc / a[row * d + row];
        }
        Some((0..n).map(|i| Complex64::new(x[i], x[n + i])).collect())
    }
}

/// Joint least-squares coefficients p̃ for the candidate pairs: projects
/// the residual, assembles the normal system over the candidates, solves
/// it. Returns the coefficients (candidate order) and whether the
/// near-singular fallback to the independent projections p̃ = p engaged.
pub fn solve_subspace(
    residual: &[f64],
    weights: &WeightMatrix,
    dict: &FourierDictionary,
    set: &CandidateSet,
) -> Result<(Vec<Complex64>, bool)> {
    if set.is_empty() {
        return Err(Error::param("candidates", "candidate set is empty"));
    }
    let projections = project_all(residual, weights, dict)?;
    let flats: Vec<usize> = set
        .positions()
        .iter()
        .map(|&pos| dict.representatives()[pos])
        .collect();
    Ok(joint_coefficients(&projections, dict, &flats))
}

fn joint_coefficients(
    projections: &[Complex64],
    dict: &FourierDictionary,
    flats: &[usize],
) -> (Vec<Complex64>, bool) {
    let system = NormalSystem::assemble(projections, dict, flats);
    match system.solve() {
        Some(x) => (x, false),
        None => (flats.iter().map(|&k| projections[k]).collect(), true),
    }
}

// ===== Iteration =====

/// One MuSE iteration: project, threshold the hypothetical decrements into
/// a candidate set, refine the candidates jointly, apply ĉ_u = γ·p̃_u for
/// all of them simultaneously. A zero residual is a no-op.
pub fn muse_step(state: &mut ExtrapolationState, config: &ExtrapolationConfig) -> TraceRecord {
    let projections = project_all(&state.residual, state.weights, state.dict)
        .expect("state dimensions validated at construction");
    state.iteration += 1;
    let decrements = hypothetical_decrements(&projections, state.dict, config.gamma);
    if decrements.iter().cloned().fold(0.0, f64::max) == 0.0 {
        return no_op_record(state);
    }
    let set = select_candidates(&decrements, config.tau, config.n_bf);
    let flats: Vec<usize> = set
        .positions()
        .iter()
        .map(|&pos| state.dict.representatives()[pos])
        .collect();
    let (refined, used_fallback) = joint_coefficients(&projections, state.dict, &flats);
    let mut selected = Vec::with_capacity(flats.len());
    let mut coefficients = Vec::with_capacity(flats.len());
    for (&flat, &ptilde) in flats.iter().zip(&refined) {
        // a self-paired function only ever contributes its real term
        let c = if state.dict.is_self_paired(flat) {
            config.gamma * Complex64::new(ptilde.re, 0.0)
        } else {
            config.gamma * ptilde
        };
        apply_pair_update(
            &mut state.model,
            &mut state.residual,
            state.area,
            state.dict,
            flat,
            c,
        );
        selected.push(BasisIndex::from_flat(flat, state.dict.cols()));
        coefficients.push(c);
    }
    TraceRecord {
        iteration: state.iteration,
        selected,
        coefficients,
        residual_energy: weighted_energy(&state.residual, state.weights)
            .expect("state dimensions validated at construction"),
        psnr_db: state.probe_psnr(),
        used_fallback,
    }
}

/// Runs `config.iterations` MuSE steps; the model restricted to Lost
/// positions is the concealment result.
pub fn muse_run(
    area: &DataArea,
    weights: &WeightMatrix,
    dict: &FourierDictionary,
    config: &ExtrapolationConfig,
) -> Result<(SparseModel, IterationTrace)> {
    muse_run_with_reference(area, weights, dict, config, None)
}

/// `muse_run` with an optional ground-truth reference enabling the
/// per-iteration PSNR probe.
pub fn muse_run_with_reference(
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
        let record = muse_step(&mut state, config);
        trace.push(record);
    }
    Ok((state.into_model(), trace))
}

// ===== Tests =====
