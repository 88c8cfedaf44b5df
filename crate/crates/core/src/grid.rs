//! Grid primitives: the data area (observed + lost samples), spatial
//! weighting, and the weighted error-energy measure the engines minimize.

use crate::error::{Error, Result};

// ===== Sample mask =====

/// State of one sample position in the data area.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleState {
    /// Observed sample; participates in projections with positive weight.
    Support,
    /// Unknown sample; carries zero weight and zero residual.
    Lost,
}

// ===== Data area =====

/// Rectangular M×N data area `L = A ∪ B`: observed samples on the support
/// area `A`, unknown samples on the loss area `B`.
///
/// Samples are stored row-major; the value at every `Lost` position is
/// normalized to 0.0 on construction (its content is meaningless).
#[derive(Clone, Debug)]
pub struct DataArea {
    rows: usize,
    cols: usize,
    samples: Vec<f64>,
    mask: Vec<SampleState>,
}

impl DataArea {
    pub fn new(
        rows: usize,
        cols: usize,
        mut samples: Vec<f64>,
        mask: Vec<SampleState>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("dimensions", "rows and cols must be positive"));
        }
        let len = rows * cols;
        if samples.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: samples.len(),
            });
        }
        if mask.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: mask.len(),
            });
        }
        if !mask.iter().any(|&s| s == SampleState::Support) {
            return Err(Error::EmptySupport);
        }
        for (v, s) in samples.iter_mut().zip(&mask) {
            match s {
                SampleState::Lost => *v = 0.0,
                SampleState::Support => {
                    if !v.is_finite() {
                        return Err(Error::param("samples", "support samples must be finite"));
                    }
                }
            }
        }
        Ok(DataArea {
            rows,
            cols,
            samples,
            mask,
        })
    }

    /// Area with support everywhere (no loss).
    pub fn full_support(rows: usize, cols: usize, samples: Vec<f64>) -> Result<Self> {
        let mask = vec![SampleState::Support; rows * cols];
        DataArea::new(rows, cols, samples, mask)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Flat index of position (m, n).
    #[inline]
    pub fn idx(&self, m: usize, n: usize) -> usize {
        debug_assert!(m < self.rows && n < self.cols);
        m * self.cols + n
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    #[inline]
    pub fn mask(&self) -> &[SampleState] {
        &self.mask
    }

    #[inline]
    pub fn is_support(&self, m: usize, n: usize) -> bool {
        self.mask[self.idx(m, n)] == SampleState::Support
    }

    pub fn support_count(&self) -> usize {
        self.mask
            .iter()
            .filter(|&&s| s == SampleState::Support)
            .count()
    }
}

// ===== Weight matrix =====

/// Per-sample nonnegative weights over the data area; exactly zero at every
/// `Lost` position, positive somewhere on the support.
#[derive(Clone, Debug)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    total: f64,
}

impl WeightMatrix {
    /// Builds a weight matrix from raw values, enforcing the mask contract.
    pub fn from_values(area: &DataArea, values: Vec<f64>) -> Result<Self> {
        if values.len() != area.len() {
            return Err(Error::DimensionMismatch {
                expected: area.len(),
                got: values.len(),
            });
        }
        let mut any_positive = false;
        for (i, (&v, &s)) in values.iter().zip(area.mask()).enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::param(
                    "weights",
                    format!("weight {v} at flat index {i} is not a finite nonnegative value"),
                ));
            }
            if s == SampleState::Lost && v != 0.0 {
                return Err(Error::param(
                    "weights",
                    format!("weight at lost position (flat index {i}) must be zero"),
                ));
            }
            any_positive |= v > 0.0;
        }
        if !any_positive {
            return Err(Error::param("weights", "all weights are zero"));
        }
        let total = values.iter().sum();
        Ok(WeightMatrix {
            rows: area.rows(),
            cols: area.cols(),
            values,
            total,
        })
    }

    /// Uniform unit weights on the support area.
    pub fn uniform(area: &DataArea) -> Self {
        let values = area
            .mask()
            .iter()
            .map(|&s| if s == SampleState::Support { 1.0 } else { 0.0 })
            .collect();
        WeightMatrix::from_values(area, values).expect("uniform weights are always valid")
    }

    /// Returns a copy with the weight at each listed flat index multiplied by
    /// `factor`. Used by the sequential driver to down-weight previously
    /// concealed samples.
    pub fn scaled_at(&self, indices: &[usize], factor: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&factor) {
            return Err(Error::param("factor", "must lie in [0, 1]"));
        }
        let mut values = self.values.clone();
        for &i in indices {
            values[i] *= factor;
        }
        let total = values.iter().sum();
        if total <= 0.0 {
            return Err(Error::param("weights", "scaling removed all weight"));
        }
        Ok(WeightMatrix {
            rows: self.rows,
            cols: self.cols,
            values,
            total,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Σ w over the area (equals the weighted norm of every unit-magnitude
    /// basis function).
    #[inline]
    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Isotropic radial weights: `w[m,n] = rho_hat^dist((m,n), center)` on the
/// support, zero on the loss, with the fractional center
/// `((M−1)/2, (N−1)/2)` evaluated exactly.
pub fn build_isotropic_weights(area: &DataArea, rho_hat: f64) -> Result<WeightMatrix> {
    if !(rho_hat > 0.0 && rho_hat < 1.0) {
        return Err(Error::param("rho_hat", "must lie in (0, 1)"));
    }
    let (rows, cols) = (area.rows(), area.cols());
    let cm = (rows as f64 - 1.0) / 2.0;
    let cn = (cols as f64 - 1.0) / 2.0;
    let mut values = vec![0.0; area.len()];
    for m in 0..rows {
        for n in 0..cols {
            let i = area.idx(m, n);
            if area.mask()[i] == SampleState::Support {
                let dm = m as f64 - cm;
                let dn = n as f64 - cn;
                values[i] = rho_hat.powf((dm * dm + dn * dn).sqrt());
            }
        }
    }
    WeightMatrix::from_values(area, values)
}

/// Weighted error energy `Σ residual²·w` over the data area.
pub fn weighted_energy(residual: &[f64], weights: &WeightMatrix) -> Result<f64> {
    let len = weights.values().len();
    if residual.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: residual.len(),
        });
    }
    Ok(residual
        .iter()
        .zip(weights.values())
        .map(|(r, w)| r * r * w)
        .sum())
}

// ===== Engine configuration =====

/// Extrapolation method selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// One basis-function pair per iteration.
    Fse,
    /// Up to `n_bf` pairs per iteration with a joint least-squares fit.
    Muse,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fse => "fse",
            Method::Muse => "muse",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fse" => Ok(Method::Fse),
            "muse" => Ok(Method::Muse),
            other => Err(format!("unknown method '{other}' (expected fse or muse)")),
        }
    }
}

/// Parameters shared by both engines.
///
/// `tau` and `n_bf` only affect the multiple-selection engine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtrapolationConfig {
    /// Number of iterations to run.
    pub iterations: u32,
    /// Orthogonality-deficiency compensation factor applied to every
    /// estimated expansion coefficient.
    pub gamma: f64,
    /// Radial decay base of the isotropic weight function.
    pub rho_hat: f64,
    /// Relative candidate threshold: a pair qualifies only if its
    /// hypothetical decrement strictly exceeds `tau` times the maximum.
    pub tau: f64,
    /// Upper bound on the number of pairs selected per iteration.
    pub n_bf: usize,
}

impl Default for ExtrapolationConfig {
    fn default() -> Self {
        ExtrapolationConfig {
            iterations: 200,
            gamma: 0.2,
            rho_hat: 0.8,
            tau: 0.9,
            n_bf: 5,
        }
    }
}

impl ExtrapolationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::param("gamma", "must lie in (0, 1]"));
        }
        if !(self.rho_hat > 0.0 && self.rho_hat < 1.0) {
            return Err(Error::param("rho_hat", "must lie in (0, 1)"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::param("tau", "must lie in (0, 1)"));
        }
        if self.n_bf == 0 {
            return Err(Error::param("n_bf", "must be at least 1"));
        }
        Ok(())
    }
}

// ===== Tests =====
