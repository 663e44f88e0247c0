//! Reference computations that share no code with the library: Gram
//! matrices from explicit loops, eigenvalues as characteristic-polynomial
//! roots, Mahalanobis distances by Gauss-Jordan inversion.

#![allow(dead_code)]

use num_complex::Complex64;

pub type Mat = Vec<Vec<f64>>;

pub fn gram(x: &[f64], sigma: f64) -> Mat {
    x.iter()
        .map(|a| x.iter().map(|b| (-(a - b).powi(2) / (2.0 * sigma * sigma)).exp()).collect())
        .collect()
}

pub fn unit_trace(k: &Mat) -> Mat {
    let tr: f64 = (0..k.len()).map(|i| k[i][i]).sum();
    k.iter().map(|r| r.iter().map(|v| v / tr).collect()).collect()
}

pub fn hadamard(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x * y).collect())
        .collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// Coefficients `c[0..=n]` of `det(λI - A) = Σ c[k] λ^k` by Faddeev-LeVerrier.
pub fn char_poly(a: &Mat) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m: Mat = vec![vec![0.0; n]; n];
    for k in 1..=n {
        let mut next = matmul(a, &m);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += c[n - k + 1];
        }
        m = next;
        let am = matmul(a, &m);
        let tr: f64 = (0..n).map(|i| am[i][i]).sum();
        c[n - k] = -tr / k as f64;
    }
    c
}

fn eval(c: &[f64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &v| acc * z + v)
}

fn eval_real(c: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &v in c.iter().rev() {
        dp = dp * x + p;
        p = p * x + v;
    }
    (p, dp)
}

/// Real parts of the roots of a monic polynomial (Durand-Kerner, then
/// Newton polishing), sorted descending.
pub fn real_roots(c: &[f64]) -> Vec<f64> {
    let n = c.len() - 1;
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            let step = eval(c, z[i]) / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-18 {
            break;
        }
    }
    let mut roots: Vec<f64> = z
        .iter()
        .map(|r| {
            let mut x = r.re;
            for _ in 0..50 {
                let (p, dp) = eval_real(c, x);
                if dp == 0.0 {
                    break;
                }
                let step = p / dp;
                x -= step;
                if step.abs() < 1e-18 {
                    break;
                }
            }
            x
        })
        .collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

/// Eigenvalues of a symmetric matrix, descending. The matrix is centered at
/// its mean eigenvalue and scaled to unit Frobenius norm first so that
/// clustered spectra still give well-conditioned polynomial roots.
pub fn eigenvalues(a: &Mat) -> Vec<f64> {
    let n = a.len();
    let shift = (0..n).map(|i| a[i][i]).sum::<f64>() / n as f64;
    let centered: Mat = (0..n)
        .map(|i| (0..n).map(|j| a[i][j] - if i == j { shift } else { 0.0 }).collect())
        .collect();
    let scale = centered.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return vec![shift; n];
    }
    let unit: Mat = centered.iter().map(|r| r.iter().map(|v| v / scale).collect()).collect();
    real_roots(&char_poly(&unit)).into_iter().map(|r| shift + scale * r).collect()
}

pub fn entropy_of_spectrum(values: &[f64], alpha: f64) -> f64 {
    let pos: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    if (alpha - 1.0).abs() < 1e-6 {
        -pos.iter().map(|l| l * l.log2()).sum::<f64>()
    } else {
        pos.iter().map(|l| l.powf(alpha)).sum::<f64>().log2() / (1.0 - alpha)
    }
}

pub fn entropy(x: &[f64], sigma: f64, alpha: f64) -> f64 {
    entropy_of_spectrum(&eigenvalues(&unit_trace(&gram(x, sigma))), alpha)
}

pub fn mutual_information(x: &[f64], y: &[f64], sigma: f64, alpha: f64) -> f64 {
    let a = unit_trace(&gram(x, sigma));
    let b = unit_trace(&gram(y, sigma));
    let joint = entropy_of_spectrum(&eigenvalues(&unit_trace(&hadamard(&a, &b))), alpha);
    entropy_of_spectrum(&eigenvalues(&a), alpha) + entropy_of_spectrum(&eigenvalues(&b), alpha) - joint
}

/// Inverse by Gauss-Jordan with partial pivoting.
pub fn invert(a: &Mat) -> Mat {
    let n = a.len();
    let mut aug: Mat = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Squared Mahalanobis distance of each test row under the sample covariance
/// (divisor n - 1) of `train` rows, both taken as already centered.
pub fn mahalanobis_sq(train: &[Vec<f64>], test: &[Vec<f64>]) -> Vec<f64> {
    let m = train[0].len();
    let n = train.len() as f64;
    let cov: Mat = (0..m)
        .map(|i| (0..m).map(|j| train.iter().map(|r| r[i] * r[j]).sum::<f64>() / (n - 1.0)).collect())
        .collect();
    let inv = invert(&cov);
    test.iter()
        .map(|x| (0..m).map(|i| (0..m).map(|j| x[i] * inv[i][j] * x[j]).sum::<f64>()).sum())
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
