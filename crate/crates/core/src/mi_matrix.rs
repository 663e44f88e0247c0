//! Series handling (normalization, sliding windows) and per-window dependence
//! matrices: the Rényi MI matrix, its binned Shannon counterpart, and the
//! sample covariance used by the covariance baseline.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{self, KernelConfig, NormalizedGram};
use crate::error::{PmimError, Result};

/// Multivariate time series: rows are time instants, columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMatrix {
    data: DMatrix<f64>,
    names: Vec<String>,
}

impl SeriesMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let names = (1..=data.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(data, names)
    }

    pub fn with_names(data: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(PmimError::InvalidData("series must have at least one row and column".into()));
        }
        if names.len() != data.ncols() {
            return Err(PmimError::shape(
                format!("{} column names", data.ncols()),
                names.len(),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % data.nrows(), pos / data.nrows());
            return Err(PmimError::InvalidData(format!(
                "non-finite value at row {}, column {}",
                r + 1,
                c + 1
            )));
        }
        Ok(Self { data, names })
    }

    /// Builds a series from row-major samples.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != m) {
            return Err(PmimError::shape(format!("{m} values per row"), format!("row {}", bad + 1)));
        }
        Self::new(DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]))
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }

    /// Rows `start..end` (0-based, half-open) as a new series.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_samples() {
            return Err(PmimError::InvalidParameter(format!(
                "row range {start}..{end} outside 0..{}",
                self.n_samples()
            )));
        }
        Ok(Self {
            data: self.data.rows(start, end - start).into_owned(),
            names: self.names.clone(),
        })
    }
}

/// Per-variable min–max scaling learned on training data, followed by
/// subtraction of the scaled training mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub scaled_mean: Vec<f64>,
}

impl Normalizer {
    pub fn n_vars(&self) -> usize {
        self.min.len()
    }

    /// Indices of variables that were constant on the training data.
    pub fn constant_variables(&self) -> Vec<usize> {
        (0..self.n_vars()).filter(|&j| self.max[j] <= self.min[j]).collect()
    }

    fn range(&self, j: usize) -> f64 {
        let r = self.max[j] - self.min[j];
        if r > 0.0 {
            r
        } else {
            1.0
        }
    }

    /// Inverse of [`apply_normalizer`].
    pub fn denormalize(&self, series: &SeriesMatrix) -> Result<SeriesMatrix> {
        self.check(series)?;
        let d = series.data();
        let out = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| {
            (d[(i, j)] + self.scaled_mean[j]) * self.range(j) + self.min[j]
        });
        SeriesMatrix::with_names(out, series.names().to_vec())
    }

    fn check(&self, series: &SeriesMatrix) -> Result<()> {
        if series.n_vars() != self.n_vars() {
            return Err(PmimError::shape(
                format!("{} variables", self.n_vars()),
                format!("{} variables", series.n_vars()),
            ));
        }
        Ok(())
    }
}

pub fn fit_normalizer(train: &SeriesMatrix) -> Result<Normalizer> {
    if train.n_samples() < 2 {
        return Err(PmimError::WindowTooSmall {
            needed: 2,
            got: train.n_samples(),
        });
    }
    let m = train.n_vars();
    let mut min = Vec::with_capacity(m);
    let mut max = Vec::with_capacity(m);
    let mut scaled_mean = Vec::with_capacity(m);
    for col in train.data().column_iter() {
        let lo = col.min();
        let hi = col.max();
        let range = if hi > lo { hi - lo } else { 1.0 };
        let mean = col.iter().map(|&v| (v - lo) / range).sum::<f64>() / col.len() as f64;
        min.push(lo);
        max.push(hi);
        scaled_mean.push(mean);
    }
    Ok(Normalizer {
        min,
        max,
        scaled_mean,
    })
}

/// `(x - min) / (max - min) - scaled_mean`, affine and unclipped.
pub fn apply_normalizer(norm: &Normalizer, series: &SeriesMatrix) -> Result<SeriesMatrix> {
    norm.check(series)?;
    let d = series.data();
    let out = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| {
        (d[(i, j)] - norm.min[j]) / norm.range(j) - norm.scaled_mean[j]
    });
    SeriesMatrix::with_names(out, series.names().to_vec())
}

/// `w` consecutive samples ending at 1-based time index `end_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    pub data: DMatrix<f64>,
    pub end_index: usize,
}

impl SampleWindow {
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn n_vars(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let w = self.data.nrows();
        &self.data.as_slice()[j * w..(j + 1) * w]
    }
}

/// Window of rows `k - w + 1 ..= k` (1-based).
pub fn window_at(series: &SeriesMatrix, k: usize, w: usize) -> Result<SampleWindow> {
    if w == 0 {
        return Err(PmimError::WindowTooSmall { needed: 1, got: 0 });
    }
    if k < w || k > series.n_samples() {
        return Err(PmimError::InsufficientHistory { index: k, window: w });
    }
    Ok(SampleWindow {
        data: series.data().rows(k - w, w).into_owned(),
        end_index: k,
    })
}

/// Which dependence measure filled an [`MIMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSource {
    Renyi,
    ShannonBinned,
    Covariance,
}

/// Symmetric `m×m` dependence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MIMatrix {
    pub entries: DMatrix<f64>,
    pub source: MatrixSource,
}

impl MIMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Mean of the off-diagonal entries of each row.
    pub fn row_means(&self) -> Vec<f64> {
        let m = self.dim();
        if m < 2 {
            return vec![0.0; m];
        }
        (0..m)
            .map(|i| {
                let s: f64 = (0..m).filter(|&j| j != i).map(|j| self.entries[(i, j)]).sum();
                s / (m - 1) as f64
            })
            .collect()
    }
}

/// Counts Gram constructions and eigensolves performed while filling an MI matrix.
#[derive(Debug, Default)]
pub struct SolveCounter {
    pub marginal_grams: AtomicUsize,
    pub marginal_solves: AtomicUsize,
    pub joint_solves: AtomicUsize,
}

impl SolveCounter {
    pub fn snapshot(&self) -> (usize, usize, usize) {
        (
            self.marginal_grams.load(Ordering::Relaxed),
            self.marginal_solves.load(Ordering::Relaxed),
            self.joint_solves.load(Ordering::Relaxed),
        )
    }
}

/// Rényi MI matrix of a window: marginal entropies on the diagonal, pairwise
/// matrix-based MI off the diagonal.
pub fn mi_matrix_renyi(win: &SampleWindow, cfg: &KernelConfig) -> Result<MIMatrix> {
    mi_matrix_renyi_counted(win, cfg, None)
}

/// As [`mi_matrix_renyi`], recording work into `counter` when given.
pub fn mi_matrix_renyi_counted(
    win: &SampleWindow,
    cfg: &KernelConfig,
    counter: Option<&SolveCounter>,
) -> Result<MIMatrix> {
    let m = win.n_vars();
    let bump = |f: fn(&SolveCounter) -> &AtomicUsize| {
        if let Some(c) = counter {
            f(c).fetch_add(1, Ordering::Relaxed);
        }
    };

    let marginals: Vec<(NormalizedGram, f64)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let gram = entropy::normalized_rbf_gram(win.column(i), cfg.sigma())
                .map_err(|e| pair_err(i, i, e))?;
            bump(|c| &c.marginal_grams);
            let h = entropy::eigenspectrum(&gram)
                .map_err(|e| pair_err(i, i, e))?
                .entropy(cfg.order());
            bump(|c| &c.marginal_solves);
            Ok((gram, h))
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect();
    let mi: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let joint = entropy::hadamard_normalized(&marginals[i].0, &marginals[j].0)
                .and_then(|g| entropy::eigenspectrum(&g))
                .map_err(|e| pair_err(i, j, e))?;
            bump(|c| &c.joint_solves);
            Ok(marginals[i].1 + marginals[j].1 - joint.entropy(cfg.order()))
        })
        .collect::<Result<_>>()?;

    let mut entries = DMatrix::zeros(m, m);
    for (i, (_, h)) in marginals.iter().enumerate() {
        entries[(i, i)] = *h;
    }
    for (&(i, j), &v) in pairs.iter().zip(&mi) {
        entries[(i, j)] = v;
        entries[(j, i)] = v;
    }
    Ok(MIMatrix {
        entries,
        source: MatrixSource::Renyi,
    })
}

fn pair_err(i: usize, j: usize, e: PmimError) -> PmimError {
    PmimError::Pair {
        i,
        j,
        source: Box::new(e),
    }
}

/// Binned Shannon MI matrix (binned marginal entropies on the diagonal).
pub fn mi_matrix_shannon(win: &SampleWindow, n_bins: usize) -> Result<MIMatrix> {
    let m = win.n_vars();
    let mut entries = DMatrix::zeros(m, m);
    for i in 0..m {
        entries[(i, i)] = entropy::shannon_entropy_binned(win.column(i), n_bins)?;
        for j in (i + 1)..m {
            let v = entropy::shannon_mi_binned(win.column(i), win.column(j), n_bins)
                .map_err(|e| pair_err(i, j, e))?;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(MIMatrix {
        entries,
        source: MatrixSource::ShannonBinned,
    })
}

/// `C = XᵀX / (w - 1)` over the window as given (no re-centering).
pub fn covariance_matrix(win: &SampleWindow) -> Result<MIMatrix> {
    let w = win.len();
    if w < 2 {
        return Err(PmimError::WindowTooSmall { needed: 2, got: w });
    }
    let x = &win.data;
    let c = x.tr_mul(x) / (w - 1) as f64;
    Ok(MIMatrix {
        entries: crate::linalg::symmetrize(&c),
        source: MatrixSource::Covariance,
    })
}
