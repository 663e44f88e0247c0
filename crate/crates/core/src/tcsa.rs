//! Transform-component statistics: eigenprojection of a window onto its
//! dependence-matrix basis, four-moment detection index, standardized
//! similarity index and the empirical control limit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PmimError, Result};
use crate::linalg;
use crate::mi_matrix::{MIMatrix, SampleWindow};

/// Floor applied to per-component standard deviations and to every entry of
/// the detection-index scale vector.
pub const VAR_FLOOR: f64 = 1e-12;

/// Minimum number of training similarity values needed to place a control limit.
pub const MIN_CALIBRATION_SAMPLES: usize = 20;

/// Orthonormal eigenbasis, columns ordered by descending eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBasis {
    pub vectors: DMatrix<f64>,
    pub values: Vec<f64>,
}

impl ProjectionBasis {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn eigenproject(m: &MIMatrix) -> Result<ProjectionBasis> {
    let (values, vectors) = linalg::sym_eigen_desc(&m.entries)?;
    Ok(ProjectionBasis { vectors, values })
}

/// Window expressed in a projection basis, `T = X·P`.
#[derive(Debug, Clone, PartialEq)]
pub struct TCWindow {
    pub data: DMatrix<f64>,
    pub basis: ProjectionBasis,
}

impl TCWindow {
    /// Recovers the window as `T·Pᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.data * self.basis.vectors.transpose()
    }
}

pub fn transform(win: &SampleWindow, basis: &ProjectionBasis) -> Result<TCWindow> {
    if win.n_vars() != basis.dim() {
        return Err(PmimError::shape(
            format!("{} variables", basis.dim()),
            format!("{} variables", win.n_vars()),
        ));
    }
    Ok(TCWindow {
        data: &win.data * &basis.vectors,
        basis: basis.clone(),
    })
}

/// Per-component mean, variance, skewness and excess kurtosis of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionIndex {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub skewness: Vec<f64>,
    pub kurtosis: Vec<f64>,
}

impl DetectionIndex {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Concatenated `[μ | ν | ζ | γ]`, length `4m`.
    pub fn theta(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.dim());
        out.extend(&self.mean);
        out.extend(&self.variance);
        out.extend(&self.skewness);
        out.extend(&self.kurtosis);
        out
    }
}

/// Window moments with `1/w` weighting.
///
/// Without `center` the higher moments are taken about each component's own
/// window mean. With `center` they are taken about the supplied vector, while
/// the reported mean stays the raw window mean.
pub fn window_stats(tc: &TCWindow, center: Option<&[f64]>) -> Result<DetectionIndex> {
    moments(&tc.data, center)
}

pub(crate) fn moments(t: &DMatrix<f64>, center: Option<&[f64]>) -> Result<DetectionIndex> {
    let (w, m) = t.shape();
    if w < 4 {
        return Err(PmimError::WindowTooSmall { needed: 4, got: w });
    }
    if let Some(c) = center {
        if c.len() != m {
            return Err(PmimError::shape(format!("center of length {m}"), c.len()));
        }
    }
    let wf = w as f64;
    let mut idx = DetectionIndex {
        mean: Vec::with_capacity(m),
        variance: Vec::with_capacity(m),
        skewness: Vec::with_capacity(m),
        kurtosis: Vec::with_capacity(m),
    };
    for (j, col) in t.column_iter().enumerate() {
        let mean = col.sum() / wf;
        let c = center.map_or(mean, |c| c[j]);
        let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
        for &v in col.iter() {
            let d = v - c;
            let d2 = d * d;
            s2 += d2;
            s3 += d2 * d;
            s4 += d2 * d2;
        }
        let var = s2 / wf;
        let sd = var.sqrt();
        let (skew, kurt) = if sd < VAR_FLOOR {
            (0.0, 0.0)
        } else {
            (s3 / wf / (sd * var), s4 / wf / (var * var) - 3.0)
        };
        idx.mean.push(mean);
        idx.variance.push(var);
        idx.skewness.push(skew);
        idx.kurtosis.push(kurt);
    }
    Ok(idx)
}

/// Norm used to scalarize the standardized detection index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormP {
    L2,
    Linf,
}

impl std::str::FromStr for NormP {
    type Err = PmimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(NormP::L2),
            "linf" => Ok(NormP::Linf),
            other => Err(PmimError::InvalidParameter(format!(
                "unknown norm '{other}' (expected l2 or linf)"
            ))),
        }
    }
}

impl std::fmt::Display for NormP {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormP::L2 => "l2",
            NormP::Linf => "linf",
        })
    }
}

/// Trained reference statistics of the detection index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub mu_star: Vec<f64>,
    pub theta_mu: Vec<f64>,
    pub theta_sigma: Vec<f64>,
    pub d_cl: f64,
    pub eta: f64,
    pub norm_p: NormP,
}

impl Calibration {
    /// Reference mean and floored standard deviation (sample, `n - 1`) of a
    /// set of training detection indices. The control limit is left at zero.
    pub fn from_thetas(thetas: &[Vec<f64>], mu_star: Vec<f64>, eta: f64, norm_p: NormP) -> Result<Self> {
        let n = thetas.len();
        if n < 2 {
            return Err(PmimError::Calibration(format!(
                "need at least 2 training windows, got {n}"
            )));
        }
        let dim = thetas[0].len();
        if thetas.iter().any(|t| t.len() != dim) {
            return Err(PmimError::Calibration("detection indices differ in length".into()));
        }
        let mut theta_mu = vec![0.0; dim];
        for t in thetas {
            for (acc, v) in theta_mu.iter_mut().zip(t) {
                *acc += v;
            }
        }
        theta_mu.iter_mut().for_each(|v| *v /= n as f64);
        let mut theta_sigma = vec![0.0; dim];
        for t in thetas {
            for ((acc, v), mu) in theta_sigma.iter_mut().zip(t).zip(&theta_mu) {
                *acc += (v - mu) * (v - mu);
            }
        }
        theta_sigma
            .iter_mut()
            .for_each(|v| *v = (*v / (n - 1) as f64).sqrt().max(VAR_FLOOR));
        Ok(Self {
            mu_star,
            theta_mu,
            theta_sigma,
            d_cl: 0.0,
            eta,
            norm_p,
        })
    }

    pub fn similarity_theta(&self, theta: &[f64]) -> f64 {
        let z = theta
            .iter()
            .zip(&self.theta_mu)
            .zip(&self.theta_sigma)
            .map(|((t, mu), sd)| ((t - mu) / sd).abs());
        match self.norm_p {
            NormP::L2 => z.map(|v| v * v).sum::<f64>().sqrt(),
            NormP::Linf => z.fold(0.0, f64::max),
        }
    }
}

/// `D = ‖Θ_σ⁻¹(Θ − Θ_μ)‖_p`.
pub fn similarity(theta: &DetectionIndex, cal: &Calibration) -> Result<f64> {
    let t = theta.theta();
    if t.len() != cal.theta_mu.len() {
        return Err(PmimError::shape(cal.theta_mu.len(), t.len()));
    }
    Ok(cal.similarity_theta(&t))
}

/// Empirical `(1 - eta)` quantile of training similarity values.
pub fn control_limit(train_d: &[f64], eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(PmimError::InvalidParameter(format!(
            "significance level must lie in (0, 1), got {eta}"
        )));
    }
    if train_d.len() < MIN_CALIBRATION_SAMPLES {
        return Err(PmimError::Calibration(format!(
            "need at least {MIN_CALIBRATION_SAMPLES} training values, got {}",
            train_d.len()
        )));
    }
    if train_d.iter().any(|v| !v.is_finite()) {
        return Err(PmimError::Calibration("non-finite training statistic".into()));
    }
    Ok(linalg::quantile_sorted(&linalg::sorted_copy(train_d), 1.0 - eta))
}
