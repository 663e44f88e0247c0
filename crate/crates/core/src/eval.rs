//! Detection metrics, PCA-style baselines and hyperparameter sweeps.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{self, DetectionTrace, DetectorConfig, TracePoint};
use crate::entropy::KernelConfig;
use crate::error::{PmimError, Result};
use crate::linalg;
use crate::mi_matrix::{self, apply_normalizer, fit_normalizer, Normalizer, SampleWindow, SeriesMatrix};
use crate::tcsa;

/// FDR / FAR / TFDR of a detection trace relative to a fault onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Alarm fraction over windows made only of faulted samples.
    pub fdr: f64,
    /// Alarm fraction over windows made only of normal samples.
    pub far: f64,
    /// Alarm fraction over windows straddling the onset.
    pub tfdr: f64,
    /// Samples from the onset to the first alarmed window, counting both ends.
    pub detection_delay: Option<usize>,
    pub alarms: usize,
    pub evaluated_windows: usize,
    pub faulted_windows: usize,
    pub normal_windows: usize,
    pub transition_windows: usize,
}

fn fraction(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Scores a trace of windows of length `w`. `onset` is the 1-based index of
/// the first faulted sample; a window ending at `k` is normal when `k < onset`,
/// faulted when `k - w + 1 >= onset`, and transitional otherwise.
pub fn score(trace: &DetectionTrace, onset: usize, w: usize) -> Result<MetricsReport> {
    let (first, last) = match (trace.points.first(), trace.points.last()) {
        (Some(f), Some(l)) => (f.index, l.index),
        _ => return Err(PmimError::InvalidParameter("empty detection trace".into())),
    };
    if w == 0 {
        return Err(PmimError::InvalidParameter("window length must be positive".into()));
    }
    if onset < 1 || onset > last {
        return Err(PmimError::InvalidParameter(format!(
            "onset {onset} outside trace range {}..={last}",
            first.saturating_sub(w - 1).max(1)
        )));
    }
    let (mut fa, mut fn_, mut na, mut nn, mut ta, mut tn) = (0, 0, 0, 0, 0, 0);
    let mut delay = None;
    for p in &trace.points {
        if p.index < onset {
            nn += 1;
            na += usize::from(p.alarm);
        } else {
            if p.alarm && delay.is_none() {
                delay = Some(p.index - onset + 1);
            }
            if p.index + 1 >= onset + w {
                fn_ += 1;
                fa += usize::from(p.alarm);
            } else {
                tn += 1;
                ta += usize::from(p.alarm);
            }
        }
    }
    Ok(MetricsReport {
        fdr: fraction(fa, fn_),
        far: fraction(na, nn),
        tfdr: fraction(ta, tn),
        detection_delay: delay,
        alarms: trace.points.iter().filter(|p| p.alarm).count(),
        evaluated_windows: trace.points.len(),
        faulted_windows: fn_,
        normal_windows: nn,
        transition_windows: tn,
    })
}

/// Matrix whose eigenbasis defines the principal subspace of a PCA baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaMatrix {
    Covariance,
    MiShannonBinned,
    MiRenyi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaStatistic {
    T2,
    Spe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcaConfig {
    /// Cumulative fraction of the positive-eigenvalue sum to retain, in (0, 1].
    pub cpv: f64,
    pub matrix: PcaMatrix,
    pub eta: f64,
    pub n_bins: usize,
    pub kernel: KernelConfig,
    /// Cap on training rows used for the Rényi MI matrix (evenly spaced
    /// subsample); its Gram matrices are `n × n`.
    pub max_renyi_samples: usize,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self {
            cpv: 0.9,
            matrix: PcaMatrix::Covariance,
            eta: 0.05,
            n_bins: 5,
            kernel: KernelConfig::default(),
            max_renyi_samples: 500,
        }
    }
}

/// Global (non-windowed) PCA monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub normalizer: Normalizer,
    pub eigenvalues: Vec<f64>,
    /// `m × k` retained eigenvectors.
    pub loadings: DMatrix<f64>,
    pub t2_limit: f64,
    pub spe_limit: f64,
}

impl PcaModel {
    pub fn retained(&self) -> usize {
        self.loadings.ncols()
    }

    /// `(T², SPE)` for every row of an already normalized matrix.
    fn statistics(&self, z: &DMatrix<f64>) -> Vec<(f64, f64)> {
        let scores = z * &self.loadings;
        let recon = &scores * self.loadings.transpose();
        (0..z.nrows())
            .map(|r| {
                let t2 = (0..self.retained())
                    .map(|c| scores[(r, c)] * scores[(r, c)] / self.eigenvalues[c])
                    .sum();
                let spe = (0..z.ncols())
                    .map(|c| {
                        let e = z[(r, c)] - recon[(r, c)];
                        e * e
                    })
                    .sum();
                (t2, spe)
            })
            .collect()
    }
}

/// Number of leading positive eigenvalues whose cumulative share of the
/// positive-eigenvalue sum first reaches `cpv`.
pub fn retained_components(eigenvalues_desc: &[f64], cpv: f64) -> usize {
    let positive: Vec<f64> = eigenvalues_desc.iter().copied().filter(|&v| v > 0.0).collect();
    let total: f64 = positive.iter().sum();
    if positive.is_empty() || !(total > 0.0) {
        return 0;
    }
    let mut acc = 0.0;
    for (i, v) in positive.iter().enumerate() {
        acc += v;
        if acc / total >= cpv - 1e-12 {
            return i + 1;
        }
    }
    positive.len()
}

pub fn fit_pca(train: &SeriesMatrix, cfg: &PcaConfig) -> Result<PcaModel> {
    if !(cfg.cpv > 0.0 && cfg.cpv <= 1.0) {
        return Err(PmimError::InvalidParameter(format!("cpv must lie in (0, 1], got {}", cfg.cpv)));
    }
    let normalizer = fit_normalizer(train)?;
    let z = apply_normalizer(&normalizer, train)?;
    let n = z.n_samples();
    let whole = SampleWindow {
        data: z.data().clone(),
        end_index: n,
    };
    let matrix = match cfg.matrix {
        PcaMatrix::Covariance => mi_matrix::covariance_matrix(&whole)?,
        PcaMatrix::MiShannonBinned => mi_matrix::mi_matrix_shannon(&whole, cfg.n_bins)?,
        PcaMatrix::MiRenyi => {
            let take = n.min(cfg.max_renyi_samples.max(2));
            let rows: Vec<usize> = (0..take).map(|i| i * n / take).collect();
            let sub = SampleWindow {
                data: DMatrix::from_fn(take, z.n_vars(), |i, j| z.data()[(rows[i], j)]),
                end_index: n,
            };
            mi_matrix::mi_matrix_renyi(&sub, &cfg.kernel)?
        }
    };
    let basis = tcsa::eigenproject(&matrix)?;
    let k = retained_components(&basis.values, cfg.cpv);
    if k == 0 {
        return Err(PmimError::Numerical("dependence matrix has no positive eigenvalues".into()));
    }
    let mut model = PcaModel {
        normalizer,
        eigenvalues: basis.values[..k].to_vec(),
        loadings: basis.vectors.columns(0, k).into_owned(),
        t2_limit: 0.0,
        spe_limit: 0.0,
    };
    let stats = model.statistics(z.data());
    let t2: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let spe: Vec<f64> = stats.iter().map(|s| s.1).collect();
    model.t2_limit = tcsa::control_limit(&t2, cfg.eta)?;
    model.spe_limit = tcsa::control_limit(&spe, cfg.eta)?;
    Ok(model)
}

/// Per-sample monitoring trace of a fitted PCA model.
pub fn pca_detect(model: &PcaModel, test: &SeriesMatrix, statistic: PcaStatistic) -> Result<DetectionTrace> {
    let z = apply_normalizer(&model.normalizer, test)?;
    let limit = match statistic {
        PcaStatistic::T2 => model.t2_limit,
        PcaStatistic::Spe => model.spe_limit,
    };
    let points = model
        .statistics(z.data())
        .into_iter()
        .enumerate()
        .map(|(r, (t2, spe))| {
            let d = match statistic {
                PcaStatistic::T2 => t2,
                PcaStatistic::Spe => spe,
            };
            TracePoint {
                index: r + 1,
                d,
                alarm: d >= limit,
                root_cause: None,
            }
        })
        .collect();
    Ok(DetectionTrace { points, d_cl: limit })
}

pub fn pca_baseline(
    train: &SeriesMatrix,
    test: &SeriesMatrix,
    cfg: &PcaConfig,
    statistic: PcaStatistic,
) -> Result<DetectionTrace> {
    pca_detect(&fit_pca(train, cfg)?, test, statistic)
}

/// Hotelling-style distance `xᵀ C⁻¹ x` of each normalized row under the
/// training covariance.
pub fn mahalanobis_sq(model_cov: &DMatrix<f64>, x: &DVector<f64>) -> Option<f64> {
    let chol = model_cov.clone().cholesky()?;
    Some(x.dot(&chol.solve(x)))
}

/// Axes of a detector hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub windows: Vec<usize>,
}

impl SweepGrid {
    /// Entropy orders around the recommended range.
    pub fn alpha_preset() -> Vec<f64> {
        vec![
            0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 2.0, 3.0, 5.0,
        ]
    }

    pub fn sigma_preset() -> Vec<f64> {
        vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 5.0, 10.0, 24.0, 50.0, 100.0]
    }

    pub fn window_preset() -> Vec<usize> {
        vec![80, 100, 120, 150, 180, 200]
    }

    fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.sigmas.is_empty() || self.windows.is_empty() {
            return Err(PmimError::InvalidParameter("sweep grid axes must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub sigma: f64,
    pub window: usize,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: SweepGrid,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, alpha: f64, sigma: f64, window: usize) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.alpha == alpha && c.sigma == sigma && c.window == window)
    }

    /// Flat CSV, one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "alpha,sigma,window,fdr,far,tfdr,detection_delay,alarms,evaluated_windows,error\n",
        );
        for c in &self.cells {
            match &c.metrics {
                Some(m) => out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},\n",
                    c.alpha,
                    c.sigma,
                    c.window,
                    m.fdr,
                    m.far,
                    m.tfdr,
                    m.detection_delay.map(|d| d.to_string()).unwrap_or_default(),
                    m.alarms,
                    m.evaluated_windows
                )),
                None => out.push_str(&format!(
                    "{},{},{},,,,,,,\"{}\"\n",
                    c.alpha,
                    c.sigma,
                    c.window,
                    c.error.as_deref().unwrap_or("").replace('"', "'")
                )),
            }
        }
        out
    }
}

/// Trains, runs and scores one detector.
pub fn run_cell(
    train: &SeriesMatrix,
    test: &SeriesMatrix,
    onset: usize,
    cfg: &DetectorConfig,
) -> Result<MetricsReport> {
    let model = detector::train(train, cfg)?;
    let trace = detector::detect(&model, test)?;
    score(&trace, onset, cfg.window)
}

/// Evaluates every `(alpha, sigma, window)` combination on one train/test
/// pair; other settings come from `base`. Cell failures are recorded, not
/// propagated.
pub fn sweep(
    train: &SeriesMatrix,
    test: &SeriesMatrix,
    onset: usize,
    grid: &SweepGrid,
    base: &DetectorConfig,
) -> Result<SweepResult> {
    grid.validate()?;
    let mut combos = Vec::new();
    for &alpha in &grid.alphas {
        for &sigma in &grid.sigmas {
            for &window in &grid.windows {
                combos.push((alpha, sigma, window));
            }
        }
    }
    let cells = combos
        .par_iter()
        .map(|&(alpha, sigma, window)| {
            let outcome = KernelConfig::new(sigma, alpha).and_then(|kernel| {
                let cfg = DetectorConfig {
                    kernel,
                    window,
                    ..*base
                };
                run_cell(train, test, onset, &cfg)
            });
            let (metrics, error) = match outcome {
                Ok(m) => (Some(m), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepCell {
                alpha,
                sigma,
                window,
                metrics,
                error,
            }
        })
        .collect();
    Ok(SweepResult {
        grid: grid.clone(),
        cells,
    })
}

/// Ordering helper for sorted medians of per-seed metrics.
pub fn median(values: &[f64]) -> f64 {
    linalg::quantile_sorted(&linalg::sorted_copy(values), 0.5)
}
