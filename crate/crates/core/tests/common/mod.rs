//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use leoem::{Complex64, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    // Box-Muller, unit total variance
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    let r = (-u1.ln()).sqrt();
    let a = 2.0 * std::f64::consts::PI * u2;
    c(r * a.cos(), r * a.sin())
}

/// Orthonormal polynomial basis on s = 0..len-1 by twice-applied classical
/// Gram-Schmidt over monomials of the centred, scaled index; columns are
/// signed so the value at s = len-1 is positive.
pub fn gram_schmidt_basis(len: usize, order: usize) -> DMatrix<f64> {
    let x: Vec<f64> = (0..len)
        .map(|s| (2.0 * s as f64 - (len as f64 - 1.0)) / (len as f64 - 1.0))
        .collect();
    let mut q = DMatrix::<f64>::zeros(len, order);
    for d in 0..order {
        let mut v: Vec<f64> = x.iter().map(|xi| xi.powi(d as i32)).collect();
        for _pass in 0..2 {
            for p in 0..d {
                let dot: f64 = (0..len).map(|s| q[(s, p)] * v[s]).sum();
                for s in 0..len {
                    v[s] -= dot * q[(s, p)];
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let sign = if v[len - 1] < 0.0 { -1.0 } else { 1.0 };
        for s in 0..len {
            q[(s, d)] = sign * v[s] / norm;
        }
    }
    q
}

/// Least-squares fit of `series` onto the columns of `basis` via the
/// normal equations, evaluated back on the grid.
pub fn ls_projection(basis: &DMatrix<f64>, series: &[Complex64]) -> Vec<Complex64> {
    let b = basis.map(|v| c(v, 0.0));
    let y = DMatrix::from_column_slice(series.len(), 1, series);
    let gram = b.adjoint() * &b;
    let coef = gram
        .lu()
        .solve(&(b.adjoint() * y))
        .expect("full-rank basis");
    (b * coef).iter().cloned().collect()
}

/// Largest |x - y| over paired entries.
pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_diff_mat(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Index of the alphabet point closest to `x`.
pub fn nearest(alphabet: &[Complex64], x: Complex64) -> usize {
    let mut best = 0;
    for (n, p) in alphabet.iter().enumerate() {
        if (x - p).norm() < (x - alphabet[best]).norm() {
            best = n;
        }
    }
    best
}
