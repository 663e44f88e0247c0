//! End-to-end detector: training (calibration of the similarity index),
//! online detection, root-cause ranking and model persistence.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::KernelConfig;
use crate::error::{PmimError, Result};
use crate::linalg;
use crate::mi_matrix::{
    self, apply_normalizer, fit_normalizer, MIMatrix, MatrixSource, Normalizer, SampleWindow,
    SeriesMatrix,
};
use crate::tcsa::{self, Calibration, DetectionIndex, NormP};

pub const MODEL_VERSION: u32 = 1;

/// Floor for the training IQR used to standardize root-cause scores.
pub const IQR_FLOOR: f64 = 1e-12;

/// Centering used for the higher moments of training windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainCentering {
    /// About each window's own mean.
    #[default]
    WindowMean,
    /// About the overall training TC mean μ*, as at test time.
    MuStar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub kernel: KernelConfig,
    pub window: usize,
    pub eta: f64,
    pub norm_p: NormP,
    pub matrix_source: MatrixSource,
    /// Spacing of training windows; 1 evaluates every instant.
    pub train_stride: usize,
    pub train_centering: TrainCentering,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::default(),
            window: 100,
            eta: 0.05,
            norm_p: NormP::L2,
            matrix_source: MatrixSource::Renyi,
            train_stride: 1,
            train_centering: TrainCentering::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 4 {
            return Err(PmimError::InvalidParameter(format!(
                "window must be at least 4, got {}",
                self.window
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(PmimError::InvalidParameter(format!(
                "eta must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if self.train_stride == 0 {
            return Err(PmimError::InvalidParameter("train stride must be positive".into()));
        }
        if self.matrix_source == MatrixSource::ShannonBinned {
            return Err(PmimError::InvalidParameter(
                "detector matrix source must be renyi or covariance".into(),
            ));
        }
        Ok(())
    }
}

/// Robust location/scale of each variable's off-diagonal MI row mean over
/// the training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCauseBaseline {
    pub median: Vec<f64>,
    pub iqr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCauseEntry {
    /// 0-based variable index.
    pub variable: usize,
    pub score: f64,
    pub outlier: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub config: DetectorConfig,
    pub normalizer: Normalizer,
    pub calibration: Calibration,
    pub root_cause_baseline: RootCauseBaseline,
}

/// One evaluated window.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    /// 1-based index of the window's last sample.
    pub index: usize,
    pub d: f64,
    pub alarm: bool,
    pub root_cause: Option<Vec<RootCauseEntry>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTrace {
    pub points: Vec<TracePoint>,
    pub d_cl: f64,
}

impl DetectionTrace {
    pub fn alarm_fraction(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.iter().filter(|p| p.alarm).count() as f64 / self.points.len() as f64
    }
}

/// Summary of a training run besides the model itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub windows: usize,
    pub train_d: Vec<f64>,
    pub train_alarm_fraction: f64,
}

fn dependence_matrix(win: &SampleWindow, cfg: &DetectorConfig) -> Result<MIMatrix> {
    match cfg.matrix_source {
        MatrixSource::Renyi => mi_matrix::mi_matrix_renyi(win, &cfg.kernel),
        MatrixSource::Covariance => mi_matrix::covariance_matrix(win),
        MatrixSource::ShannonBinned => mi_matrix::mi_matrix_shannon(win, 5),
    }
}

/// Dependence matrix of a (normalized) window and the window projected onto
/// that matrix's eigenbasis.
pub fn project_window(win: &SampleWindow, cfg: &DetectorConfig) -> Result<(MIMatrix, DMatrix<f64>)> {
    let m = dependence_matrix(win, cfg)?;
    let basis = tcsa::eigenproject(&m)?;
    let t = tcsa::transform(win, &basis)?;
    Ok((m, t.data))
}

pub fn train(train_series: &SeriesMatrix, cfg: &DetectorConfig) -> Result<DetectorModel> {
    train_with_report(train_series, cfg).map(|(m, _)| m)
}

pub fn train_with_report(
    train_series: &SeriesMatrix,
    cfg: &DetectorConfig,
) -> Result<(DetectorModel, TrainingReport)> {
    cfg.validate()?;
    let w = cfg.window;
    let n = train_series.n_samples();
    if n < w + tcsa::MIN_CALIBRATION_SAMPLES {
        return Err(PmimError::Calibration(format!(
            "need at least {} training samples for window {w}, got {n}",
            w + tcsa::MIN_CALIBRATION_SAMPLES
        )));
    }
    let normalizer = fit_normalizer(train_series)?;
    if normalizer.constant_variables().len() == normalizer.n_vars() {
        return Err(PmimError::Calibration("every training variable is constant".into()));
    }
    let z = apply_normalizer(&normalizer, train_series)?;
    let m = z.n_vars();

    let ends: Vec<usize> = (w..=n).step_by(cfg.train_stride).collect();
    let projected: Vec<(Vec<f64>, DMatrix<f64>)> = ends
        .par_iter()
        .map(|&k| {
            let win = mi_matrix::window_at(&z, k, w)?;
            let (mi, t) = project_window(&win, cfg)?;
            Ok((mi.row_means(), t))
        })
        .collect::<Result<_>>()?;

    let mut mu_star = vec![0.0; m];
    for (_, t) in &projected {
        for (acc, col) in mu_star.iter_mut().zip(t.column_iter()) {
            *acc += col.mean();
        }
    }
    mu_star.iter_mut().for_each(|v| *v /= projected.len() as f64);

    let center = match cfg.train_centering {
        TrainCentering::MuStar => Some(mu_star.as_slice()),
        TrainCentering::WindowMean => None,
    };
    let thetas: Vec<Vec<f64>> = projected
        .iter()
        .map(|(_, t)| tcsa::moments(t, center).map(|d| d.theta()))
        .collect::<Result<_>>()?;

    let mut calibration = Calibration::from_thetas(&thetas, mu_star, cfg.eta, cfg.norm_p)?;
    let train_d: Vec<f64> = thetas.iter().map(|t| calibration.similarity_theta(t)).collect();
    calibration.d_cl = tcsa::control_limit(&train_d, cfg.eta)?;
    if !(calibration.d_cl > 0.0) {
        return Err(PmimError::Calibration(format!(
            "control limit is not positive ({})",
            calibration.d_cl
        )));
    }

    let mut median = Vec::with_capacity(m);
    let mut iqr = Vec::with_capacity(m);
    for j in 0..m {
        let col: Vec<f64> = projected.iter().map(|(rm, _)| rm[j]).collect();
        let (med, spread) = linalg::median_iqr(&col);
        median.push(med);
        iqr.push(spread);
    }

    let alarms = train_d.iter().filter(|&&d| d >= calibration.d_cl).count();
    let report = TrainingReport {
        windows: train_d.len(),
        train_alarm_fraction: alarms as f64 / train_d.len() as f64,
        train_d,
    };
    let model = DetectorModel {
        config: *cfg,
        normalizer,
        calibration,
        root_cause_baseline: RootCauseBaseline { median, iqr },
    };
    Ok((model, report))
}

/// Result of scoring a single normalized window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowScore {
    pub d: f64,
    pub alarm: bool,
    pub index: DetectionIndex,
    pub matrix: MIMatrix,
}

impl DetectorModel {
    pub fn n_vars(&self) -> usize {
        self.normalizer.n_vars()
    }

    /// Scores a window that has already been normalized with this model's normalizer.
    pub fn score_window(&self, win: &SampleWindow) -> Result<WindowScore> {
        if win.n_vars() != self.n_vars() {
            return Err(PmimError::shape(
                format!("{} variables", self.n_vars()),
                format!("{} variables", win.n_vars()),
            ));
        }
        let (matrix, t) = project_window(win, &self.config)?;
        let index = tcsa::moments(&t, Some(&self.calibration.mu_star))?;
        let d = tcsa::similarity(&index, &self.calibration)?;
        Ok(WindowScore {
            d,
            alarm: d >= self.calibration.d_cl,
            index,
            matrix,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&ModelFile::from(self))
            .map_err(|e| PmimError::InvalidData(format!("model serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| PmimError::ModelLoad(format!("malformed model file: {e}")))?;
        match probe.get("version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(MODEL_VERSION) => {}
            Some(v) => {
                return Err(PmimError::ModelLoad(format!(
                    "unsupported model version {v} (expected {MODEL_VERSION})"
                )))
            }
            None => return Err(PmimError::ModelLoad("model file has no version field".into())),
        }
        let file: ModelFile = serde_json::from_value(probe)
            .map_err(|e| PmimError::ModelLoad(format!("invalid model file: {e}")))?;
        file.into_model()
    }
}

/// Runs the trained detector over every window of `test_series`, from the
/// first full window to the end.
pub fn detect(model: &DetectorModel, test_series: &SeriesMatrix) -> Result<DetectionTrace> {
    let w = model.config.window;
    let z = apply_normalizer(&model.normalizer, test_series)?;
    let n = z.n_samples();
    if n < w {
        return Err(PmimError::InsufficientHistory { index: n, window: w });
    }
    let points = (w..=n)
        .into_par_iter()
        .map(|k| {
            let win = mi_matrix::window_at(&z, k, w)?;
            let s = model.score_window(&win)?;
            let root_cause = s.alarm.then(|| root_cause(model, &s.matrix));
            Ok(TracePoint {
                index: k,
                d: s.d,
                alarm: s.alarm,
                root_cause,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DetectionTrace {
        points,
        d_cl: model.calibration.d_cl,
    })
}

/// Ranks variables by how far their off-diagonal MI row mean departs from the
/// training median, in units of training IQR. Outliers follow the 1.5×IQR
/// boxplot rule applied across the test row means.
pub fn root_cause(model: &DetectorModel, m_test: &MIMatrix) -> Vec<RootCauseEntry> {
    let means = m_test.row_means();
    let base = &model.root_cause_baseline;
    let sorted = linalg::sorted_copy(&means);
    let q1 = linalg::quantile_sorted(&sorted, 0.25);
    let q3 = linalg::quantile_sorted(&sorted, 0.75);
    let fence = 1.5 * (q3 - q1);
    let (lo, hi) = (q1 - fence, q3 + fence);

    let mut ranked: Vec<RootCauseEntry> = means
        .iter()
        .enumerate()
        .map(|(j, &v)| RootCauseEntry {
            variable: j,
            score: (v - base.median[j]).abs() / base.iqr[j].max(IQR_FLOOR),
            outlier: v < lo || v > hi,
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.variable.cmp(&b.variable)));
    ranked
}

/// Element-wise mean of several MI matrices (e.g. all alarmed windows of a
/// fault segment) for segment-level root-cause analysis.
pub fn average_matrix(matrices: &[MIMatrix]) -> Result<MIMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| PmimError::InvalidParameter("no matrices to average".into()))?;
    let mut acc = DMatrix::zeros(first.dim(), first.dim());
    for m in matrices {
        if m.dim() != first.dim() {
            return Err(PmimError::shape(first.dim(), m.dim()));
        }
        acc += &m.entries;
    }
    Ok(MIMatrix {
        entries: acc / matrices.len() as f64,
        source: first.source,
    })
}

/// Root-cause ranking from the averaged MI matrix of every alarmed window in
/// `trace` whose end index is at least `from_index`.
pub fn segment_root_cause(
    model: &DetectorModel,
    test_series: &SeriesMatrix,
    trace: &DetectionTrace,
    from_index: usize,
) -> Result<Vec<RootCauseEntry>> {
    let w = model.config.window;
    let z = apply_normalizer(&model.normalizer, test_series)?;
    let matrices = trace
        .points
        .par_iter()
        .filter(|p| p.alarm && p.index >= from_index)
        .map(|p| Ok(project_window(&mi_matrix::window_at(&z, p.index, w)?, &model.config)?.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(root_cause(model, &average_matrix(&matrices)?))
}

pub fn save_model(model: &DetectorModel, destination: impl AsRef<Path>) -> Result<()> {
    std::fs::write(destination, model.to_json()?)?;
    Ok(())
}

pub fn load_model(source: impl AsRef<Path>) -> Result<DetectorModel> {
    DetectorModel::from_json(&std::fs::read_to_string(source)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    config: ConfigFile,
    normalizer: Normalizer,
    calibration: CalibrationFile,
    root_cause_baseline: RootCauseBaseline,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    alpha: f64,
    sigma: f64,
    w: usize,
    eta: f64,
    norm_p: NormP,
    matrix_source: MatrixSource,
    #[serde(default = "default_stride")]
    train_stride: usize,
    #[serde(default)]
    train_centering: TrainCentering,
}

fn default_stride() -> usize {
    1
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    mu_star: Vec<f64>,
    theta_mu: Vec<f64>,
    theta_sigma: Vec<f64>,
    d_cl: f64,
}

impl From<&DetectorModel> for ModelFile {
    fn from(m: &DetectorModel) -> Self {
        let c = &m.config;
        ModelFile {
            version: MODEL_VERSION,
            config: ConfigFile {
                alpha: c.kernel.alpha(),
                sigma: c.kernel.sigma(),
                w: c.window,
                eta: c.eta,
                norm_p: c.norm_p,
                matrix_source: c.matrix_source,
                train_stride: c.train_stride,
                train_centering: c.train_centering,
            },
            normalizer: m.normalizer.clone(),
            calibration: CalibrationFile {
                mu_star: m.calibration.mu_star.clone(),
                theta_mu: m.calibration.theta_mu.clone(),
                theta_sigma: m.calibration.theta_sigma.clone(),
                d_cl: m.calibration.d_cl,
            },
            root_cause_baseline: m.root_cause_baseline.clone(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<DetectorModel> {
        let bad = |msg: String| PmimError::ModelLoad(msg);
        let c = self.config;
        let config = DetectorConfig {
            kernel: KernelConfig::new(c.sigma, c.alpha).map_err(|e| bad(e.to_string()))?,
            window: c.w,
            eta: c.eta,
            norm_p: c.norm_p,
            matrix_source: c.matrix_source,
            train_stride: c.train_stride,
            train_centering: c.train_centering,
        };
        config.validate().map_err(|e| bad(e.to_string()))?;
        let m = self.normalizer.min.len();
        let cal = self.calibration;
        let lens = [
            ("normalizer.max", self.normalizer.max.len(), m),
            ("normalizer.scaled_mean", self.normalizer.scaled_mean.len(), m),
            ("calibration.mu_star", cal.mu_star.len(), m),
            ("calibration.theta_mu", cal.theta_mu.len(), 4 * m),
            ("calibration.theta_sigma", cal.theta_sigma.len(), 4 * m),
            ("root_cause_baseline.median", self.root_cause_baseline.median.len(), m),
            ("root_cause_baseline.iqr", self.root_cause_baseline.iqr.len(), m),
        ];
        if m == 0 {
            return Err(bad("model has no variables".into()));
        }
        for (name, got, want) in lens {
            if got != want {
                return Err(bad(format!("{name} has length {got}, expected {want}")));
            }
        }
        if !(cal.d_cl.is_finite() && cal.d_cl > 0.0) {
            return Err(bad(format!("control limit must be positive, got {}", cal.d_cl)));
        }
        if cal.theta_sigma.iter().any(|&s| !(s >= tcsa::VAR_FLOOR)) {
            return Err(bad("theta_sigma entries must be at least the variance floor".into()));
        }
        Ok(DetectorModel {
            calibration: Calibration {
                mu_star: cal.mu_star,
                theta_mu: cal.theta_mu,
                theta_sigma: cal.theta_sigma,
                d_cl: cal.d_cl,
                eta: config.eta,
                norm_p: config.norm_p,
            },
            config,
            normalizer: self.normalizer,
            root_cause_baseline: self.root_cause_baseline,
        })
    }
}
