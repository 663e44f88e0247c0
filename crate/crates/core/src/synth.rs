//! Seeded simulator for the five-sensor nonlinear dynamic benchmark process
//! and its four fault archetypes.
//!
//! Three independent Gaussian innovations `v` are passed through a moving
//! average filter to produce time-correlated sources
//! `s_i(k) = Σ_j β[i][j] · v_i(k - j + 1)`, which are observed through a
//! fixed mixing of the nonlinear features `(s₁², s₂s₃, s₃³)` plus Gaussian
//! sensor noise.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PmimError, Result};
use crate::mi_matrix::SeriesMatrix;

pub const N_SOURCES: usize = 3;
pub const N_SENSORS: usize = 5;
/// Moving-average lag order (columns of β).
pub const LAG: usize = 5;

pub const DEFAULT_MIXING: [[f64; N_SOURCES]; N_SENSORS] = [
    [0.2183, -0.1693, 0.2063],
    [-0.1972, 0.2376, 0.1736],
    [0.9037, -0.1530, 0.6373],
    [0.1146, 0.9528, -0.2624],
    [0.4173, -0.2458, 0.8325],
];

pub const DEFAULT_BETA: [[f64; LAG]; N_SOURCES] = [
    [0.6699, 0.0812, 0.5308, 0.4527, 0.2931],
    [0.4071, 0.8758, 0.2158, -0.0902, 0.1122],
    [0.3035, 0.5675, 0.3064, 0.1316, 0.6889],
];

pub const DEFAULT_SOURCE_MEAN: [f64; N_SOURCES] = [0.3, 2.0, 3.1];
pub const DEFAULT_SOURCE_STD: [f64; N_SOURCES] = [1.0, 2.0, 0.8];
pub const DEFAULT_NOISE_STD: [f64; N_SENSORS] = [0.061, 0.063, 0.198, 0.176, 0.170];
pub const DEFAULT_DELTA_BETA3: [f64; LAG] = [-0.825, 0.061, 0.662, -0.820, 0.835];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub mixing: [[f64; N_SOURCES]; N_SENSORS],
    pub beta: [[f64; LAG]; N_SOURCES],
    pub source_mean: [f64; N_SOURCES],
    pub source_std: [f64; N_SOURCES],
    pub noise_std: [f64; N_SENSORS],
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            mixing: DEFAULT_MIXING,
            beta: DEFAULT_BETA,
            source_mean: DEFAULT_SOURCE_MEAN,
            source_std: DEFAULT_SOURCE_STD,
            noise_std: DEFAULT_NOISE_STD,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// One simulated run with every intermediate signal kept so faults acting on
/// the sources or on the filter can be replayed against identical noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    /// `n × 3` Gaussian innovations.
    pub innovations: DMatrix<f64>,
    /// `n × 3` filtered sources.
    pub sources: DMatrix<f64>,
    /// `n × 5` sensor noise.
    pub noise: DMatrix<f64>,
    /// `n × 5` observed measurements.
    pub observations: DMatrix<f64>,
}

impl Realization {
    pub fn len(&self) -> usize {
        self.observations.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.nrows() == 0
    }

    pub fn series(&self) -> SeriesMatrix {
        SeriesMatrix::new(self.observations.clone()).expect("simulated values are finite")
    }

    pub fn source_series(&self) -> SeriesMatrix {
        SeriesMatrix::with_names(
            self.sources.clone(),
            (1..=N_SOURCES).map(|i| format!("s{i}")).collect(),
        )
        .expect("simulated values are finite")
    }
}

fn filter_sources(
    innovations: &DMatrix<f64>,
    beta_at: impl Fn(usize) -> [[f64; LAG]; N_SOURCES],
) -> DMatrix<f64> {
    let n = innovations.nrows();
    DMatrix::from_fn(n, N_SOURCES, |k, i| {
        let beta = beta_at(k);
        (0..LAG)
            .filter(|&j| j <= k)
            .map(|j| beta[i][j] * innovations[(k - j, i)])
            .sum()
    })
}

fn mix(cfg: &SynthConfig, sources: &DMatrix<f64>, noise: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sources.nrows();
    DMatrix::from_fn(n, N_SENSORS, |k, r| {
        let (s1, s2, s3) = (sources[(k, 0)], sources[(k, 1)], sources[(k, 2)]);
        let features = [s1 * s1, s2 * s3, s3 * s3 * s3];
        let a = &cfg.mixing[r];
        a[0] * features[0] + a[1] * features[1] + a[2] * features[2] + noise[(k, r)]
    })
}

/// Simulates `n` samples. The filter history before the first sample is zero.
pub fn generate(cfg: &SynthConfig, n: usize) -> Result<Realization> {
    if n < LAG {
        return Err(PmimError::InvalidParameter(format!(
            "need at least {LAG} samples, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut innovations = DMatrix::zeros(n, N_SOURCES);
    let mut noise = DMatrix::zeros(n, N_SENSORS);
    for k in 0..n {
        for i in 0..N_SOURCES {
            let z: f64 = StandardNormal.sample(&mut rng);
            innovations[(k, i)] = cfg.source_mean[i] + cfg.source_std[i] * z;
        }
        for r in 0..N_SENSORS {
            let z: f64 = StandardNormal.sample(&mut rng);
            noise[(k, r)] = cfg.noise_std[r] * z;
        }
    }
    let sources = filter_sources(&innovations, |_| cfg.beta);
    let observations = mix(cfg, &sources, &noise);
    Ok(Realization {
        innovations,
        sources,
        noise,
        observations,
    })
}

/// The four fault archetypes with their magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultKind {
    /// `x₁ ← x₁ + base + U[0, noise_width]`, redrawn per sample.
    SensorBias { base: f64, noise_width: f64 },
    /// `x₁ ← gain · x₁`.
    GainDegradation { gain: f64 },
    /// `s₁ ← s₁ + offset`, then re-mixed.
    AdditiveProcess { offset: f64 },
    /// Third row of β replaced by `β₃ + delta_beta3`.
    DynamicChange { delta_beta3: [f64; LAG] },
}

impl FaultKind {
    pub fn sensor_bias() -> Self {
        FaultKind::SensorBias {
            base: 5.6,
            noise_width: 1.0,
        }
    }

    pub fn gain_degradation() -> Self {
        FaultKind::GainDegradation { gain: 0.6 }
    }

    pub fn additive_process() -> Self {
        FaultKind::AdditiveProcess { offset: 1.2 }
    }

    pub fn dynamic_change() -> Self {
        FaultKind::DynamicChange {
            delta_beta3: DEFAULT_DELTA_BETA3,
        }
    }

    /// Default-parameter fault by type number 1–4 or by name
    /// (`type1`…`type4`, `sensor_bias`, `gain_degradation`,
    /// `additive_process`, `dynamic_change`).
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "1" | "type1" | "i" | "sensor_bias" => Ok(Self::sensor_bias()),
            "2" | "type2" | "ii" | "gain_degradation" => Ok(Self::gain_degradation()),
            "3" | "type3" | "iii" | "additive_process" => Ok(Self::additive_process()),
            "4" | "type4" | "iv" | "dynamic_change" => Ok(Self::dynamic_change()),
            other => Err(PmimError::InvalidParameter(format!("unknown fault kind '{other}'"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FaultKind::SensorBias { .. } => "type1",
            FaultKind::GainDegradation { .. } => "type2",
            FaultKind::AdditiveProcess { .. } => "type3",
            FaultKind::DynamicChange { .. } => "type4",
        }
    }
}

/// Fault kind plus its onset: the 1-based index of the first faulted sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub onset: usize,
    /// Seed for the per-sample bias noise of sensor-bias faults.
    pub seed: u64,
}

impl FaultSpec {
    pub fn new(kind: FaultKind, onset: usize) -> Self {
        Self {
            kind,
            onset,
            seed: 0,
        }
    }
}

/// Applies a fault to a clean realization, returning the faulted realization.
/// Samples before `onset` are bit-identical to the clean run.
pub fn inject(cfg: &SynthConfig, clean: &Realization, spec: &FaultSpec) -> Result<Realization> {
    let n = clean.len();
    if spec.onset < 1 || spec.onset > n {
        return Err(PmimError::InvalidParameter(format!(
            "fault onset {} outside 1..={n}",
            spec.onset
        )));
    }
    let start = spec.onset - 1;
    let mut out = clean.clone();
    match &spec.kind {
        FaultKind::SensorBias { base, noise_width } => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for k in start..n {
                let e: f64 = rng.random::<f64>() * noise_width;
                out.observations[(k, 0)] += base + e;
            }
        }
        FaultKind::GainDegradation { gain } => {
            for k in start..n {
                out.observations[(k, 0)] *= gain;
            }
        }
        FaultKind::AdditiveProcess { offset } => {
            for k in start..n {
                out.sources[(k, 0)] += offset;
            }
            let tail = mix(
                cfg,
                &out.sources.rows(start, n - start).into_owned(),
                &out.noise.rows(start, n - start).into_owned(),
            );
            out.observations.rows_mut(start, n - start).copy_from(&tail);
        }
        FaultKind::DynamicChange { delta_beta3 } => {
            let mut faulted = cfg.beta;
            for (b, d) in faulted[2].iter_mut().zip(delta_beta3) {
                *b += d;
            }
            let sources = filter_sources(&clean.innovations, |k| {
                if k >= start {
                    faulted
                } else {
                    cfg.beta
                }
            });
            for k in start..n {
                for i in 0..N_SOURCES {
                    out.sources[(k, i)] = sources[(k, i)];
                }
            }
            let tail = mix(
                cfg,
                &out.sources.rows(start, n - start).into_owned(),
                &out.noise.rows(start, n - start).into_owned(),
            );
            out.observations.rows_mut(start, n - start).copy_from(&tail);
        }
    }
    Ok(out)
}

/// Clean training series and a test series that is faulted from `onset` on.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub train: SeriesMatrix,
    pub test: SeriesMatrix,
    pub clean_test: SeriesMatrix,
    pub onset: usize,
    pub fault: FaultSpec,
    pub config: SynthConfig,
}

/// Sizes of a simulated train/test pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSize {
    pub n_train: usize,
    pub n_test: usize,
    pub onset: usize,
}

impl ScenarioSize {
    /// 10 000 training and 4 000 test samples, fault after sample 1 000.
    pub const FULL: Self = Self {
        n_train: 10_000,
        n_test: 4_000,
        onset: 1_001,
    };
    /// 3 000 training and 2 000 test samples, fault after sample 500.
    pub const DESK: Self = Self {
        n_train: 3_000,
        n_test: 2_000,
        onset: 501,
    };
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random()
}

/// Builds a scenario from a base config. Training and test data come from
/// independent random streams derived from `cfg.seed`; the filter warm-up
/// (`LAG - 1` samples) is simulated and discarded for both.
pub fn scenario(cfg: &SynthConfig, size: ScenarioSize, kind: FaultKind) -> Result<Scenario> {
    if size.n_train < LAG || size.n_test < 1 {
        return Err(PmimError::InvalidParameter("scenario sizes too small".into()));
    }
    if size.onset < 1 || size.onset > size.n_test {
        return Err(PmimError::InvalidParameter(format!(
            "onset {} must lie within the test series (1..={})",
            size.onset, size.n_test
        )));
    }
    let warm = LAG - 1;
    let train_cfg = SynthConfig {
        seed: derive_seed(cfg.seed, 1),
        ..cfg.clone()
    };
    let test_cfg = SynthConfig {
        seed: derive_seed(cfg.seed, 2),
        ..cfg.clone()
    };
    let train = generate(&train_cfg, size.n_train + warm)?;
    let test = generate(&test_cfg, size.n_test + warm)?;
    let fault = FaultSpec {
        kind,
        onset: size.onset,
        seed: derive_seed(cfg.seed, 3),
    };
    let faulted = inject(
        &test_cfg,
        &test,
        &FaultSpec {
            onset: size.onset + warm,
            ..fault.clone()
        },
    )?;
    let drop_warm = |r: &Realization| -> Result<SeriesMatrix> {
        r.series().slice_rows(warm, r.len())
    };
    Ok(Scenario {
        train: drop_warm(&train)?,
        test: drop_warm(&faulted)?,
        clean_test: drop_warm(&test)?,
        onset: size.onset,
        fault,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let cfg = SynthConfig::with_seed(42);
        assert_eq!(generate(&cfg, 50).unwrap(), generate(&cfg, 50).unwrap());
        assert_ne!(
            generate(&cfg, 50).unwrap().observations,
            generate(&SynthConfig::with_seed(43), 50).unwrap().observations
        );
    }

    #[test]
    fn too_short_rejected() {
        assert!(generate(&SynthConfig::default(), LAG - 1).is_err());
    }

    #[test]
    fn noiseless_run_is_deterministic_mixture() {
        let cfg = SynthConfig {
            source_std: [0.0; 3],
            noise_std: [0.0; 5],
            ..SynthConfig::default()
        };
        let r = generate(&cfg, 12).unwrap();
        let s: Vec<f64> = (0..3)
            .map(|i| DEFAULT_BETA[i].iter().sum::<f64>() * DEFAULT_SOURCE_MEAN[i])
            .collect();
        let f = [s[0] * s[0], s[1] * s[2], s[2] * s[2] * s[2]];
        for r_idx in 0..N_SENSORS {
            let expected: f64 = (0..3).map(|c| DEFAULT_MIXING[r_idx][c] * f[c]).sum();
            for k in LAG..12 {
                assert!((r.observations[(k, r_idx)] - expected).abs() < 1e-9);
            }
        }
        // zero-padded history: first sample sees only the first lag
        assert!((r.sources[(0, 0)] - DEFAULT_BETA[0][0] * 0.3).abs() < 1e-15);
    }

    #[test]
    fn gain_fault_from_first_sample() {
        let cfg = SynthConfig::with_seed(3);
        let clean = generate(&cfg, 40).unwrap();
        let f = inject(&cfg, &clean, &FaultSpec::new(FaultKind::gain_degradation(), 1)).unwrap();
        for k in 0..40 {
            assert_eq!(f.observations[(k, 0)], 0.6 * clean.observations[(k, 0)]);
            for r in 1..N_SENSORS {
                assert_eq!(f.observations[(k, r)], clean.observations[(k, r)]);
            }
        }
    }

    #[test]
    fn faults_leave_pre_onset_untouched() {
        let cfg = SynthConfig::with_seed(9);
        let clean = generate(&cfg, 200).unwrap();
        for kind in [
            FaultKind::sensor_bias(),
            FaultKind::gain_degradation(),
            FaultKind::additive_process(),
            FaultKind::dynamic_change(),
        ] {
            let f = inject(&cfg, &clean, &FaultSpec::new(kind.clone(), 120)).unwrap();
            assert_eq!(f.observations.rows(0, 119), clean.observations.rows(0, 119), "{kind:?}");
            assert_ne!(f.observations.rows(119, 81), clean.observations.rows(119, 81), "{kind:?}");
        }
    }

    #[test]
    fn sensor_bias_is_local_and_bounded() {
        let cfg = SynthConfig::with_seed(5);
        let clean = generate(&cfg, 100).unwrap();
        let f = inject(&cfg, &clean, &FaultSpec::new(FaultKind::sensor_bias(), 30)).unwrap();
        for k in 29..100 {
            let d = f.observations[(k, 0)] - clean.observations[(k, 0)];
            assert!((5.6..=6.6).contains(&d), "{d}");
        }
        assert_eq!(f.observations.columns(1, 4), clean.observations.columns(1, 4));
    }

    #[test]
    fn onset_validation() {
        let cfg = SynthConfig::default();
        let clean = generate(&cfg, 10).unwrap();
        assert!(inject(&cfg, &clean, &FaultSpec::new(FaultKind::sensor_bias(), 0)).is_err());
        assert!(inject(&cfg, &clean, &FaultSpec::new(FaultKind::sensor_bias(), 11)).is_err());
        let size = ScenarioSize {
            n_train: 100,
            n_test: 100,
            onset: 200,
        };
        assert!(scenario(&cfg, size, FaultKind::sensor_bias()).is_err());
    }

    #[test]
    fn fault_names() {
        assert_eq!(FaultKind::from_name("type2").unwrap(), FaultKind::gain_degradation());
        assert_eq!(FaultKind::from_name("IV").unwrap(), FaultKind::dynamic_change());
        assert!(FaultKind::from_name("type5").is_err());
    }
}
