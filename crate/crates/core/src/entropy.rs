//! Matrix-based Rényi α-entropy on trace-normalized RBF Gram matrices.
//!
//! For a sample `x₁…x_w` the Gram matrix `K[i][j] = exp(-(xᵢ - xⱼ)² / 2σ²)` is
//! scaled to unit trace, `A = K / tr(K)`, and the entropy is read off its
//! eigenvalues:
//!
//! ```text
//! H_α(A)    = 1/(1-α) · log₂ Σ λᵢ(A)^α          (α ≠ 1)
//! H_1(A)    = -Σ λᵢ log₂ λᵢ                      (Shannon limit)
//! H_α(A, B) = H_α(A∘B / tr(A∘B))
//! I_α(A; B) = H_α(A) + H_α(B) - H_α(A, B)
//! ```
//!
//! No density is estimated. All entropies are in bits. A plug-in Shannon
//! estimator over equal-width histograms is included for comparison runs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PmimError, Result};
use crate::linalg;

/// Orders this close to 1 are evaluated with the Shannon-limit formula.
pub const SHANNON_TOLERANCE: f64 = 1e-6;

const TRACE_TOLERANCE: f64 = 1e-12;
const NEGATIVE_EIGEN_TOLERANCE: f64 = 1e-8;

/// Entropy order α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EntropyOrder {
    Alpha(f64),
    Shannon,
}

impl EntropyOrder {
    /// Validates `alpha > 0`; values within [`SHANNON_TOLERANCE`] of 1 map to
    /// the Shannon limit.
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(PmimError::InvalidParameter(format!(
                "entropy order must be positive and finite, got {alpha}"
            )));
        }
        if (alpha - 1.0).abs() < SHANNON_TOLERANCE {
            Ok(EntropyOrder::Shannon)
        } else {
            Ok(EntropyOrder::Alpha(alpha))
        }
    }

    /// Numeric value of the order; the Shannon limit reports 1.
    pub fn value(&self) -> f64 {
        match *self {
            EntropyOrder::Alpha(a) => a,
            EntropyOrder::Shannon => 1.0,
        }
    }

    fn validated(self) -> Result<Self> {
        match self {
            EntropyOrder::Alpha(a) => EntropyOrder::new(a),
            EntropyOrder::Shannon => Ok(self),
        }
    }
}

/// Kernel width and entropy order used by every estimator call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    sigma: f64,
    order: EntropyOrder,
}

impl KernelConfig {
    pub fn new(sigma: f64, alpha: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self {
            sigma,
            order: EntropyOrder::new(alpha)?,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn order(&self) -> EntropyOrder {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.order.value()
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            order: EntropyOrder::Alpha(1.01),
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(PmimError::InvalidParameter(format!(
            "kernel width must be positive and finite, got {sigma}"
        )))
    }
}

/// Trace-one symmetric kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGram {
    entries: DMatrix<f64>,
}

impl NormalizedGram {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Eigenvalues of a normalized Gram matrix, descending, clipped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenspectrum {
    values: Vec<f64>,
}

impl Eigenspectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entropy of the spectrum at the given order, in bits.
    pub fn entropy(&self, order: EntropyOrder) -> f64 {
        let h = match order {
            EntropyOrder::Shannon => -self
                .values
                .iter()
                .filter(|&&l| l > 0.0)
                .map(|&l| l * l.log2())
                .sum::<f64>(),
            EntropyOrder::Alpha(alpha) => {
                // 0^α := 0 for every α, including α < 1
                let s: f64 = self
                    .values
                    .iter()
                    .filter(|&&l| l > 0.0)
                    .map(|&l| l.powf(alpha))
                    .sum();
                s.log2() / (1.0 - alpha)
            }
        };
        h.max(0.0)
    }
}

/// RBF Gram matrix `K[i][j] = exp(-(x[i] - x[j])² / (2σ²))`.
pub fn rbf_gram(x: &[f64], sigma: f64) -> Result<DMatrix<f64>> {
    check_sigma(sigma)?;
    if x.len() < 2 {
        return Err(PmimError::WindowTooSmall {
            needed: 2,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(PmimError::InvalidData("sample contains non-finite values".into()));
    }
    let w = x.len();
    let scale = -1.0 / (2.0 * sigma * sigma);
    let mut k = DMatrix::from_element(w, w, 1.0);
    for j in 0..w {
        for i in (j + 1)..w {
            let d = x[i] - x[j];
            let v = (d * d * scale).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Scales a symmetric kernel matrix to unit trace.
pub fn normalize_gram(k: &DMatrix<f64>) -> Result<NormalizedGram> {
    if k.nrows() != k.ncols() {
        return Err(PmimError::shape(
            "square matrix",
            format!("{}x{}", k.nrows(), k.ncols()),
        ));
    }
    let trace = k.trace();
    if !(trace.is_finite() && trace > 0.0) {
        return Err(PmimError::DegenerateKernel { trace });
    }
    Ok(NormalizedGram {
        entries: k / trace,
    })
}

/// Normalized RBF Gram of one variable's window.
pub fn normalized_rbf_gram(x: &[f64], sigma: f64) -> Result<NormalizedGram> {
    normalize_gram(&rbf_gram(x, sigma)?)
}

/// Descending eigenvalues of `A`. Round-off negatives are clipped to zero and
/// the spectrum is renormalized to unit sum when clipping moved it.
pub fn eigenspectrum(a: &NormalizedGram) -> Result<Eigenspectrum> {
    let mut values = linalg::sym_eigenvalues_desc(&a.entries)?;
    let total: f64 = values.iter().sum();
    let floor = -NEGATIVE_EIGEN_TOLERANCE * total.abs().max(1.0);
    if let Some(&min) = values.last() {
        if min < floor {
            return Err(PmimError::Numerical(format!(
                "kernel matrix is not positive semidefinite (eigenvalue {min:e})"
            )));
        }
    }
    // Eigenvalues below the solver's resolution are roundoff; for α < 1 their
    // powers would otherwise dominate a zero entropy.
    let resolution = values.len() as f64 * f64::EPSILON * values.first().map_or(0.0, |v| v.abs());
    let mut clipped = false;
    for v in values.iter_mut() {
        if *v < 0.0 || v.abs() <= resolution {
            *v = 0.0;
            clipped = true;
        }
    }
    if clipped {
        let sum: f64 = values.iter().sum();
        if (sum - total).abs() > TRACE_TOLERANCE && sum > 0.0 {
            values.iter_mut().for_each(|v| *v /= sum);
        }
    }
    Ok(Eigenspectrum { values })
}

/// Matrix-based Rényi entropy of `A` in bits.
pub fn renyi_entropy(a: &NormalizedGram, order: EntropyOrder) -> Result<f64> {
    let order = order.validated()?;
    Ok(eigenspectrum(a)?.entropy(order))
}

/// Unit-trace Hadamard product `A∘B / tr(A∘B)`.
pub fn hadamard_normalized(a: &NormalizedGram, b: &NormalizedGram) -> Result<NormalizedGram> {
    if a.size() != b.size() {
        return Err(PmimError::shape(
            format!("{0}x{0}", a.size()),
            format!("{0}x{0}", b.size()),
        ));
    }
    normalize_gram(&a.entries.component_mul(&b.entries))
}

/// Joint entropy `H_α(A∘B / tr(A∘B))` in bits.
pub fn joint_entropy(a: &NormalizedGram, b: &NormalizedGram, order: EntropyOrder) -> Result<f64> {
    let order = order.validated()?;
    renyi_entropy(&hadamard_normalized(a, b)?, order)
}

/// Matrix-based mutual information between two equally long samples, in bits.
pub fn matrix_mi(x: &[f64], y: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if x.len() != y.len() {
        return Err(PmimError::shape(x.len(), y.len()));
    }
    let a = normalized_rbf_gram(x, cfg.sigma)?;
    let b = normalized_rbf_gram(y, cfg.sigma)?;
    let ha = renyi_entropy(&a, cfg.order)?;
    let hb = renyi_entropy(&b, cfg.order)?;
    let hab = joint_entropy(&a, &b, cfg.order)?;
    Ok(ha + hb - hab)
}

fn bin_indices(x: &[f64], n_bins: usize) -> Vec<usize> {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0; x.len()];
    }
    x.iter()
        .map(|&v| (((v - lo) / range * n_bins as f64) as usize).min(n_bins - 1))
        .collect()
}

fn plugin_entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

fn check_binned(x: &[f64], n_bins: usize) -> Result<()> {
    if n_bins < 2 {
        return Err(PmimError::InvalidParameter(format!(
            "need at least 2 bins, got {n_bins}"
        )));
    }
    if x.is_empty() {
        return Err(PmimError::WindowTooSmall { needed: 1, got: 0 });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(PmimError::InvalidData("sample contains non-finite values".into()));
    }
    Ok(())
}

/// Plug-in Shannon entropy (bits) over `n_bins` equal-width bins spanning the
/// sample's own range.
pub fn shannon_entropy_binned(x: &[f64], n_bins: usize) -> Result<f64> {
    check_binned(x, n_bins)?;
    let mut counts = vec![0usize; n_bins];
    for b in bin_indices(x, n_bins) {
        counts[b] += 1;
    }
    Ok(plugin_entropy(&counts, x.len()))
}

/// Plug-in Shannon mutual information (bits) from an equal-width joint
/// histogram. A constant variable occupies a single bin and yields 0.
pub fn shannon_mi_binned(x: &[f64], y: &[f64], n_bins: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(PmimError::shape(x.len(), y.len()));
    }
    check_binned(x, n_bins)?;
    check_binned(y, n_bins)?;
    let bx = bin_indices(x, n_bins);
    let by = bin_indices(y, n_bins);
    let mut cx = vec![0usize; n_bins];
    let mut cy = vec![0usize; n_bins];
    let mut cxy = vec![0usize; n_bins * n_bins];
    for (&i, &j) in bx.iter().zip(&by) {
        cx[i] += 1;
        cy[j] += 1;
        cxy[i * n_bins + j] += 1;
    }
    let n = x.len();
    let mi = plugin_entropy(&cx, n) + plugin_entropy(&cy, n) - plugin_entropy(&cxy, n);
    Ok(mi.max(0.0))
}
