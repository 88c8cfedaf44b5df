//! 2D Fourier dictionary: basis evaluation, conjugate pairing, weighted
//! projections and weighted inner products between basis functions.
//!
//! Basis function `k = (k_row, k_col)` over an M×N area is the complex
//! exponential `φ_k[m,n] = exp(+j·2π·(k_row·m/M + k_col·n/N))`. Real models
//! are kept real by always updating a basis function together with its
//! conjugate partner `(−k_row mod M, −k_col mod N)` using conjugate
//! coefficients.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{DataArea, WeightMatrix};

// ===== Basis indexing =====

/// Frequency index of one dictionary function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisIndex {
    pub row: usize,
    pub col: usize,
}

impl BasisIndex {
    #[inline]
    pub fn flatten(self, cols: usize) -> usize {
        self.row * cols + self.col
    }

    #[inline]
    pub fn from_flat(flat: usize, cols: usize) -> Self {
        BasisIndex {
            row: flat / cols,
            col: flat % cols,
        }
    }

    /// Conjugate partner `(−row mod M, −col mod N)`.
    #[inline]
    pub fn conjugate(self, rows: usize, cols: usize) -> Self {
        BasisIndex {
            row: (rows - self.row) % rows,
            col: (cols - self.col) % cols,
        }
    }
}

/// Evaluates `φ_k[m,n]` directly from the angle (reference path; the
/// dictionary carries precomputed twiddle tables for the hot paths).
pub fn evaluate_basis(rows: usize, cols: usize, k: BasisIndex, m: usize, n: usize) -> Complex64 {
    // reduce k·m modulo the period first so the angle stays small and exact
    let a = (k.row * m) % rows;
    let b = (k.col * n) % cols;
    let angle = std::f64::consts::TAU * (a as f64 / rows as f64 + b as f64 / cols as f64);
    Complex64::from_polar(1.0, angle)
}

// ===== Dictionary =====

/// Precomputed state of the full M·N-function dictionary over one weighted
/// data area: twiddle tables, conjugate-pair map, per-function weighted
/// norms, and the weight spectrum that yields every pairwise weighted inner
/// product by table lookup.
#[derive(Clone, Debug)]
pub struct FourierDictionary {
    rows: usize,
    cols: usize,
    /// `Σ |φ_k|²·w` per function; equals `Σ w` for every k (|φ| ≡ 1).
    weighted_norms: Vec<f64>,
    /// Flat index of each function's conjugate partner (an involution).
    pair: Vec<usize>,
    /// Flat indices k with k ≤ pair[k]: one canonical representative per
    /// conjugate pair (self-paired functions represent themselves).
    representatives: Vec<usize>,
    /// e^{+j·2π·t/M} for t in 0..M.
    row_tw: Vec<Complex64>,
    /// e^{+j·2π·t/N} for t in 0..N.
    col_tw: Vec<Complex64>,
    /// `Ŵ[d] = Σ w·conj(φ_d)`: weighted inner products between any two
    /// dictionary functions are lookups into this table.
    weight_spectrum: Vec<Complex64>,
}

/// Builds the dictionary for one data area and weight matrix.
pub fn build_dictionary(area: &DataArea, weights: &WeightMatrix) -> Result<FourierDictionary> {
    let (rows, cols) = (area.rows(), area.cols());
    if weights.rows() != rows || weights.cols() != cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            got: weights.rows() * weights.cols(),
        });
    }
    let row_tw = twiddle_table(rows);
    let col_tw = twiddle_table(cols);
    let weight_spectrum = dft2(weights.values(), rows, cols, &row_tw, &col_tw);
    let total = weights.total();
    let len = rows * cols;
    let mut pair = vec![0usize; len];
    let mut representatives = Vec::with_capacity(len / 2 + 2);
    for kr in 0..rows {
        for kc in 0..cols {
            let k = kr * cols + kc;
            let p = ((rows - kr) % rows) * cols + ((cols - kc) % cols);
            pair[k] = p;
            if k <= p {
                representatives.push(k);
            }
        }
    }
    Ok(FourierDictionary {
        rows,
        cols,
        weighted_norms: vec![total; len],
        pair,
        representatives,
        row_tw,
        col_tw,
        weight_spectrum,
    })
}

impl FourierDictionary {
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of dictionary functions (M·N).
    #[inline]
    pub fn len(&self) -> usize {
        self.pair.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pair.is_empty()
    }

    #[inline]
    pub fn weighted_norms(&self) -> &[f64] {
        &self.weighted_norms
    }

    /// Conjugate-pair involution over flat indices.
    #[inline]
    pub fn pair_of(&self) -> &[usize] {
        &self.pair
    }

    #[inline]
    pub fn is_self_paired(&self, flat: usize) -> bool {
        self.pair[flat] == flat
    }

    /// Canonical representatives, ascending (one per conjugate pair).
    #[inline]
    pub fn representatives(&self) -> &[usize] {
        &self.representatives
    }

    /// `φ_k[m,n]` via the twiddle tables.
    #[inline]
    pub fn basis_at(&self, flat: usize, m: usize, n: usize) -> Complex64 {
        let kr = flat / self.cols;
        let kc = flat % self.cols;
        self.row_tw[(kr * m) % self.rows] * self.col_tw[(kc * n) % self.cols]
    }

    /// Weighted inner product `⟨φ_a, φ_b⟩_w = Σ φ_a·conj(φ_b)·w`, by lookup
    /// into the weight spectrum.
    #[inline]
    pub fn weighted_inner(&self, a: usize, b: usize) -> Complex64 {
        let (ar, ac) = (a / self.cols, a % self.cols);
        let (br, bc) = (b / self.cols, b % self.cols);
        let dr = (ar + self.rows - br) % self.rows;
        let dc = (ac + self.cols - bc) % self.cols;
        self.weight_spectrum[dr * self.cols + dc].conj()
    }
}

/// Projects the residual onto every dictionary function:
/// `p_k = Σ residual·conj(φ_k)·w / weighted_norms[k]`.
///
/// The numerators are evaluated by two stages of direct summation (the 2D
/// kernel factors into row and column kernels), which computes exactly the
/// per-function sums at O(M·N·(M+N)) total cost.
///
/// For real residuals the exact projections are conjugate-symmetric across
/// pairs (and real at self-paired indices); the returned array carries that
/// symmetry exactly — partner entries are stored as conjugates of their
/// representative — so pair-level logic downstream never sees the two
/// members of a pair disagree by rounding.
pub fn project_all(
    residual: &[f64],
    weights: &WeightMatrix,
    dict: &FourierDictionary,
) -> Result<Vec<Complex64>> {
    let len = dict.len();
    if residual.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: residual.len(),
        });
    }
    if weights.values().len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: weights.values().len(),
        });
    }
    let rw: Vec<f64> = residual
        .iter()
        .zip(weights.values())
        .map(|(r, w)| r * w)
        .collect();
    let num = dft2(&rw, dict.rows, dict.cols, &dict.row_tw, &dict.col_tw);
    let mut p = vec![Complex64::new(0.0, 0.0); len];
    for &k in &dict.representatives {
        let v = num[k] / dict.weighted_norms[k];
        let q = dict.pair[k];
        if q == k {
            p[k] = Complex64::new(v.re, 0.0);
        } else {
            p[k] = v;
            p[q] = v.conj();
        }
    }
    Ok(p)
}

// ===== Internal transforms =====

fn twiddle_table(period: usize) -> Vec<Complex64> {
    (0..period)
        .map(|t| Complex64::from_polar(1.0, std::f64::consts::TAU * t as f64 / period as f64))
        .collect()
}

/// `X[k] = Σ_{m,n} v[m,n]·conj(φ_k[m,n])` for all k, via row–column
/// factorization of the separable kernel.
fn dft2(
    values: &[f64],
    rows: usize,
    cols: usize,
    row_tw: &[Complex64],
    col_tw: &[Complex64],
) -> Vec<Complex64> {
    // stage 1: per row m, column-kernel sums T[m][kc] = Σ_n v·conj(col_tw[kc·n mod N])
    let mut stage = vec![Complex64::new(0.0, 0.0); rows * cols];
    for m in 0..rows {
        let row = &values[m * cols..(m + 1) * cols];
        let out = &mut stage[m * cols..(m + 1) * cols];
        for (kc, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, &v) in row.iter().enumerate() {
                let tw = col_tw[(kc * n) % cols];
                // v·conj(tw)
                acc.re += v * tw.re;
                acc.im -= v * tw.im;
            }
            *o = acc;
        }
    }
    // stage 2: per column kc, row-kernel sums X[kr][kc] = Σ_m T[m][kc]·conj(row_tw[kr·m mod M])
    let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
    for kr in 0..rows {
        for kc in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..rows {
                let t = stage[m * cols + kc];
                let tw = row_tw[(kr * m) % rows];
                acc.re += t.re * tw.re + t.im * tw.im;
                acc.im += t.im * tw.re - t.re * tw.im;
            }
            out[kr * cols + kc] = acc;
        }
    }
    out
}

// ===== Tests =====
