mod common;

use nalgebra::DMatrix;
use pmim::detector::{self, DetectorConfig};
use pmim::eval::{self, PcaConfig, PcaMatrix, PcaStatistic, SweepGrid};
use pmim::synth::{self, FaultKind, ScenarioSize, SynthConfig};
use pmim::{KernelConfig, SeriesMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn correlated(n: usize, seed: u64) -> SeriesMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let c: f64 = rng.sample(StandardNormal);
        let d: f64 = rng.sample(StandardNormal);
        rows.push(vec![a, 0.8 * a + 0.3 * b, -0.5 * b + 0.4 * c, c + 0.1 * a + 0.2 * d]);
    }
    SeriesMatrix::from_rows(&rows).unwrap()
}

/// Min-max scaling followed by centering on the training mean.
fn normalize(train: &[Vec<f64>], x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = train[0].len();
    let lo: Vec<f64> = (0..m).map(|j| train.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..m).map(|j| train.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let mean: Vec<f64> = (0..m)
        .map(|j| train.iter().map(|r| (r[j] - lo[j]) / (hi[j] - lo[j])).sum::<f64>() / train.len() as f64)
        .collect();
    x.iter()
        .map(|r| (0..m).map(|j| (r[j] - lo[j]) / (hi[j] - lo[j]) - mean[j]).collect())
        .collect()
}

fn rows(s: &SeriesMatrix) -> Vec<Vec<f64>> {
    s.data().row_iter().map(|r| r.iter().copied().collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn full_rank_t2_is_mahalanobis(seed in any::<u64>()) {
        let train = correlated(300, seed);
        let test = correlated(40, seed.wrapping_add(1));
        let cfg = PcaConfig { cpv: 1.0, ..PcaConfig::default() };
        let trace = eval::pca_baseline(&train, &test, &cfg, PcaStatistic::T2).unwrap();
        let tr = rows(&train);
        let expected = common::mahalanobis_sq(&normalize(&tr, &tr), &normalize(&tr, &rows(&test)));
        for (p, e) in trace.points.iter().zip(&expected) {
            prop_assert!((p.d - e).abs() <= 1e-8 * e.max(1.0), "{} vs {}", p.d, e);
        }
    }

    #[test]
    fn retained_components_reach_the_target(
        mut eigs in prop::collection::vec(0.0f64..10.0, 1..12),
        cpv in 0.05f64..=1.0,
    ) {
        eigs.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(eigs[0] > 0.0);
        let k = eval::retained_components(&eigs, cpv);
        let total: f64 = eigs.iter().sum();
        let share = |k: usize| eigs[..k].iter().sum::<f64>() / total;
        prop_assert!(k >= 1 && k <= eigs.len());
        prop_assert!(share(k) >= cpv - 1e-9);
        prop_assert!(k == 1 || share(k - 1) < cpv);
    }
}

#[test]
fn single_direction_data_keeps_one_component() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let t: f64 = rng.sample(StandardNormal);
            vec![t, 2.0 * t + 1.0, -t]
        })
        .collect();
    let train = SeriesMatrix::from_rows(&rows).unwrap();
    let model = eval::fit_pca(&train, &PcaConfig::default()).unwrap();
    assert_eq!(model.retained(), 1);
}

#[test]
fn pca_on_its_training_data_alarms_at_eta() {
    let train = correlated(2000, 4);
    for matrix in [PcaMatrix::Covariance, PcaMatrix::MiShannonBinned, PcaMatrix::MiRenyi] {
        let cfg = PcaConfig {
            matrix,
            ..PcaConfig::default()
        };
        for stat in [PcaStatistic::T2, PcaStatistic::Spe] {
            let trace = eval::pca_baseline(&train, &train, &cfg, stat).unwrap();
            let rate = trace.alarm_fraction();
            assert!((rate - 0.05).abs() <= 0.005, "{matrix:?} {stat:?}: {rate}");
        }
    }
}

#[test]
fn mahalanobis_helper_matches_oracle() {
    let data = rows(&correlated(100, 8));
    let cov = DMatrix::from_fn(4, 4, |i, j| data.iter().map(|r| r[i] * r[j]).sum::<f64>() / 99.0);
    let expected = common::mahalanobis_sq(&data, &data[..5]);
    for (r, e) in data[..5].iter().zip(&expected) {
        let got = eval::mahalanobis_sq(&cov, &nalgebra::DVector::from_vec(r.clone())).unwrap();
        assert!((got - e).abs() <= 1e-9 * e.max(1.0));
    }
}

#[test]
fn single_cell_sweep_equals_a_direct_run() {
    let size = ScenarioSize {
        n_train: 300,
        n_test: 200,
        onset: 101,
    };
    let scen = synth::scenario(&SynthConfig::with_seed(6), size, FaultKind::gain_degradation()).unwrap();
    let base = DetectorConfig {
        window: 30,
        ..DetectorConfig::default()
    };
    let grid = SweepGrid {
        alphas: vec![1.01],
        sigmas: vec![0.5],
        windows: vec![30],
    };
    let result = eval::sweep(&scen.train, &scen.test, scen.onset, &grid, &base).unwrap();
    let model = detector::train(&scen.train, &base).unwrap();
    let direct = eval::score(&detector::detect(&model, &scen.test).unwrap(), scen.onset, 30).unwrap();
    assert_eq!(result.cells.len(), 1);
    assert_eq!(result.cell(1.01, 0.5, 30).unwrap().metrics.as_ref(), Some(&direct));
}

#[test]
fn sweep_records_invalid_cells_without_failing() {
    let size = ScenarioSize {
        n_train: 200,
        n_test: 100,
        onset: 51,
    };
    let scen = synth::scenario(&SynthConfig::with_seed(7), size, FaultKind::sensor_bias()).unwrap();
    let grid = SweepGrid {
        alphas: vec![1.01, -1.0],
        sigmas: vec![0.5],
        windows: vec![20, 2],
    };
    let result = eval::sweep(&scen.train, &scen.test, scen.onset, &grid, &DetectorConfig::default()).unwrap();
    assert_eq!(result.cells.len(), 4);
    let ok: Vec<_> = result.cells.iter().filter(|c| c.metrics.is_some()).collect();
    assert_eq!(ok.len(), 1);
    assert_eq!((ok[0].alpha, ok[0].window), (1.01, 20));
    assert!(result.cells.iter().all(|c| c.metrics.is_some() != c.error.is_some()));
    let csv = result.to_csv();
    assert_eq!(csv.lines().count(), 5);
    assert!(KernelConfig::new(0.5, -1.0).is_err());
}
