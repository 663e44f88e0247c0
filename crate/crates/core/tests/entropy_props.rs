mod common;

use pmim::entropy::{
    eigenspectrum, joint_entropy, matrix_mi, normalized_rbf_gram, renyi_entropy, shannon_mi_binned,
    EntropyOrder, KernelConfig,
};
use pmim::synth::{self, FaultKind, ScenarioSize, SynthConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const ORDERS: [f64; 4] = [0.5, 1.01, 2.0, 5.0];

fn sample(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len)
}

fn paired(len: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    len.prop_flat_map(|w| (prop::collection::vec(-3.0f64..3.0, w), prop::collection::vec(-3.0f64..3.0, w)))
}

/// Points at least `gap` apart so the Gram spectrum has distinct eigenvalues.
fn spread(w: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(0.3f64..1.0, w), any::<u64>()).prop_map(|(gaps, seed)| {
        let mut acc = -1.5;
        let mut xs: Vec<f64> = gaps
            .iter()
            .map(|g| {
                acc += g;
                acc
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..xs.len()).rev() {
            xs.swap(i, rng.random_range(0..=i));
        }
        xs
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_within_zero_and_log_w(x in sample(2..40), sigma in 0.1f64..3.0) {
        let a = normalized_rbf_gram(&x, sigma).unwrap();
        let upper = (x.len() as f64).log2();
        for alpha in ORDERS {
            let h = renyi_entropy(&a, EntropyOrder::new(alpha).unwrap()).unwrap();
            prop_assert!(h >= 0.0 && h <= upper + 1e-9, "alpha={} h={} bound={}", alpha, h, upper);
        }
    }

    #[test]
    fn spectrum_is_a_distribution(x in sample(2..40), sigma in 0.1f64..3.0) {
        let spec = eigenspectrum(&normalized_rbf_gram(&x, sigma).unwrap()).unwrap();
        let total: f64 = spec.values().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        prop_assert!(spec.values().iter().all(|&v| v >= 0.0));
        prop_assert!(spec.values().windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn shannon_limit_is_continuous(x in sample(2..40), sigma in 0.2f64..2.0) {
        let a = normalized_rbf_gram(&x, sigma).unwrap();
        let shannon = renyi_entropy(&a, EntropyOrder::Shannon).unwrap();
        for alpha in [0.999, 1.001] {
            let h = renyi_entropy(&a, EntropyOrder::new(alpha).unwrap()).unwrap();
            prop_assert!((h - shannon).abs() <= 1e-3, "alpha={} diff={}", alpha, h - shannon);
        }
    }

    #[test]
    fn entropy_invariant_to_permutation_and_shift(x in sample(3..30), shift in -50.0f64..50.0, seed in any::<u64>()) {
        let mut perm = x.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
        for alpha in ORDERS {
            let order = EntropyOrder::new(alpha).unwrap();
            let h = renyi_entropy(&normalized_rbf_gram(&x, 0.5).unwrap(), order).unwrap();
            let hp = renyi_entropy(&normalized_rbf_gram(&perm, 0.5).unwrap(), order).unwrap();
            let hs = renyi_entropy(&normalized_rbf_gram(&shifted, 0.5).unwrap(), order).unwrap();
            prop_assert!((h - hp).abs() <= 1e-9);
            prop_assert!((h - hs).abs() <= 1e-8);
        }
    }

    #[test]
    fn mi_is_symmetric_and_nonnegative((x, y) in paired(3..40), sigma in 0.2f64..2.0) {
        for alpha in ORDERS {
            let cfg = KernelConfig::new(sigma, alpha).unwrap();
            let xy = matrix_mi(&x, &y, &cfg).unwrap();
            let yx = matrix_mi(&y, &x, &cfg).unwrap();
            prop_assert!((xy - yx).abs() <= 1e-10);
        }
        // non-negativity only holds empirically for orders up to about 1.1
        for alpha in [0.5, 1.01] {
            let mi = matrix_mi(&x, &y, &KernelConfig::new(sigma, alpha).unwrap()).unwrap();
            prop_assert!(mi >= -1e-8, "alpha={} mi={}", alpha, mi);
        }
    }

    #[test]
    fn joint_entropy_bounds((x, y) in paired(3..40)) {
        let a = normalized_rbf_gram(&x, 0.5).unwrap();
        let b = normalized_rbf_gram(&y, 0.5).unwrap();
        for alpha in ORDERS {
            let order = EntropyOrder::new(alpha).unwrap();
            let hab = joint_entropy(&a, &b, order).unwrap();
            let ha = renyi_entropy(&a, order).unwrap();
            let hb = renyi_entropy(&b, order).unwrap();
            prop_assert!(hab + 1e-9 >= ha.max(hb));
            prop_assert!(hab <= ha + hb + 1e-9);
        }
    }

    #[test]
    fn small_windows_match_characteristic_polynomial(
        (x, y) in (2usize..=4).prop_flat_map(|w| (spread(w), spread(w))),
        sigma in 0.3f64..1.5,
    ) {
        // polynomial roots are only well conditioned for separated eigenvalues
        let a = common::unit_trace(&common::gram(&x, sigma));
        let b = common::unit_trace(&common::gram(&y, sigma));
        let joint = common::unit_trace(&common::hadamard(&a, &b));
        for m in [&a, &b, &joint] {
            let ev = common::eigenvalues(m);
            prop_assume!(ev.windows(2).all(|p| p[0] - p[1] > 1e-3));
        }
        let lib = eigenspectrum(&normalized_rbf_gram(&x, sigma).unwrap()).unwrap();
        let oracle = common::eigenvalues(&common::unit_trace(&common::gram(&x, sigma)));
        for (a, b) in lib.values().iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-8, "{:?} vs {:?}", lib.values(), oracle);
        }
        for alpha in ORDERS {
            let order = EntropyOrder::new(alpha).unwrap();
            let h = renyi_entropy(&normalized_rbf_gram(&x, sigma).unwrap(), order).unwrap();
            prop_assert!((h - common::entropy(&x, sigma, alpha)).abs() <= 1e-8);
            let cfg = KernelConfig::new(sigma, alpha).unwrap();
            let mi = matrix_mi(&x, &y, &cfg).unwrap();
            prop_assert!((mi - common::mutual_information(&x, &y, sigma, alpha)).abs() <= 1e-8);
        }
    }
}

#[test]
fn independent_normals_have_small_mi() {
    let cfg = KernelConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut small = 0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        if matrix_mi(&x, &y, &cfg).unwrap() <= 0.25 {
            small += 1;
        }
    }
    assert!(small >= 95, "{small}/100 trials below 0.25 bits");
}

#[test]
fn binned_mi_of_independent_uniforms_is_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
    let y: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
    let mi = shannon_mi_binned(&x, &y, 10).unwrap();
    assert!(mi <= 0.01, "{mi}");
}

#[test]
fn mi_can_be_negative_above_order_one() {
    // exact value -6.2245281145e-8 confirmed with 50-digit arithmetic
    let x = [0.0, 0.0, -0.005254647520936639];
    let y = [0.0, 1.1488545584827015, 0.8499984334760627];
    let cfg = KernelConfig::new(1.8787711640291487, 2.0).unwrap();
    let mi = matrix_mi(&x, &y, &cfg).unwrap();
    assert!((mi + 6.224_528_114_5e-8).abs() < 1e-12, "{mi:e}");
}

fn max_eigen_change(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let sa = eigenspectrum(&normalized_rbf_gram(a, sigma).unwrap()).unwrap();
    let sb = eigenspectrum(&normalized_rbf_gram(b, sigma).unwrap()).unwrap();
    sa.values().iter().zip(sb.values()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

#[test]
fn bias_on_half_a_unit_variance_series_moves_the_eigenspectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
    let biased: Vec<f64> = x.iter().enumerate().map(|(i, v)| if i >= 50 { v + 5.6 } else { *v }).collect();
    let change = max_eigen_change(&x, &biased, 0.5);
    assert!(change > 0.01, "{change}");
}

#[test]
fn simulated_sensor_bias_moves_the_eigenspectrum() {
    // x1 standardized to unit variance, then the injected bias added on top
    let scen = synth::scenario(&SynthConfig::with_seed(3), ScenarioSize::DESK, FaultKind::sensor_bias()).unwrap();
    let clean = scen.clean_test.column(0);
    let faulty = scen.test.column(0);
    let n = clean.len() as f64;
    let mean = clean.iter().sum::<f64>() / n;
    let sd = (clean.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let unit: Vec<f64> = clean.iter().map(|v| v / sd).collect();
    let biased: Vec<f64> = unit.iter().zip(clean.iter().zip(&faulty)).map(|(u, (c, f))| u + (f - c)).collect();
    let o = scen.onset;
    let change = max_eigen_change(&unit[o - 51..o + 49], &biased[o - 51..o + 49], 0.5);
    assert!(change >= 0.01, "largest eigenvalue change {change}");
}
