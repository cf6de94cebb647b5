//! Uplink frame construction, received-signal synthesis and stream
//! de-mixing.
//!
//! A frame is `n_pilots` Zadoff-Chu pilot symbols followed by `n_data`
//! data symbols. The satellite observes `Y = (G ∘ X)ᵀ A + Z` (S×M) and
//! separates the users with the pseudo-inverse of the array response,
//! `Ỹ = Y A†` (S×K).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::config::{Constellation, SystemConfig};
use crate::error::{config_err, size_err, Error, Result};
use crate::geometry::{ArrayResponseMatrix, EffectiveChannelMatrix};
use crate::metrics::sigma2_for_signal;
use crate::rng::{complex_normal, stream_rng, Stream};

/// Unit-energy constellation points in a fixed order.
pub fn alphabet(constellation: Constellation) -> Vec<Complex64> {
    match constellation {
        Constellation::Qam16 => {
            let scale = 1.0 / 10f64.sqrt();
            let levels = [-3.0, -1.0, 1.0, 3.0];
            levels
                .iter()
                .flat_map(|&re| levels.iter().map(move |&im| Complex64::new(re, im) * scale))
                .collect()
        }
        Constellation::Qpsk => {
            let a = std::f64::consts::FRAC_1_SQRT_2;
            vec![
                Complex64::new(a, a),
                Complex64::new(-a, a),
                Complex64::new(-a, -a),
                Complex64::new(a, -a),
            ]
        }
    }
}

/// Index of the nearest alphabet point.
pub fn slice(alphabet: &[Complex64], x: Complex64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in alphabet.iter().enumerate() {
        let d = (x - p).norm_sqr();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn is_prime(n: usize) -> bool {
    n >= 2
        && (2..)
            .take_while(|d| d * d <= n)
            .all(|d| !n.is_multiple_of(d))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Largest prime below `len` that is coprime to it, or 1 when none exists.
pub fn zadoff_chu_root(len: usize) -> usize {
    (2..len)
        .rev()
        .find(|&u| is_prime(u) && gcd(u, len) == 1)
        .unwrap_or(1)
}

/// Zadoff-Chu sequence of the given root and length.
pub fn zadoff_chu(root: usize, len: usize) -> Vec<Complex64> {
    let n_f = len as f64;
    let u = root as f64;
    (0..len)
        .map(|n| {
            let n = n as f64;
            let arg = if len.is_multiple_of(2) {
                n * n
            } else {
                n * (n + 1.0)
            };
            Complex64::cis(-PI * u * arg / n_f)
        })
        .collect()
}

/// Length-K pilot sequence of user `k`: the root sequence cyclically
/// shifted by `k`.
pub fn user_pilot_sequence(n_users: usize, k: usize) -> Vec<Complex64> {
    let z = zadoff_chu(zadoff_chu_root(n_users), n_users);
    (0..n_users).map(|n| z[(n + k) % n_users]).collect()
}

/// Transmitted K×S symbols. Pilots occupy the first `pilot_count` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    pub x: DMatrix<Complex64>,
    pub pilot_count: usize,
    pub constellation: Constellation,
    /// K×S_data alphabet indices of the data symbols.
    pub data_index: DMatrix<usize>,
}

impl SymbolMatrix {
    pub fn n_users(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_symbols(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_data(&self) -> usize {
        self.x.ncols() - self.pilot_count
    }

    pub fn data(&self) -> DMatrix<Complex64> {
        self.x.columns(self.pilot_count, self.n_data()).into_owned()
    }
}

pub fn build_symbol_matrix(cfg: &SystemConfig, rng_seed: u64) -> Result<SymbolMatrix> {
    build_symbol_matrix_with(cfg, &mut stream_rng(rng_seed, Stream::Symbols))
}

pub(crate) fn build_symbol_matrix_with<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<SymbolMatrix> {
    if cfg.n_pilots == 0 || cfg.n_data == 0 {
        return Err(config_err(
            "frame needs at least one pilot and one data symbol",
        ));
    }
    let k_users = cfg.n_users;
    let n_sym = cfg.n_symbols();
    let points = alphabet(cfg.constellation);
    let pilots: Vec<Vec<Complex64>> = (0..k_users)
        .map(|k| user_pilot_sequence(k_users, k))
        .collect();

    // row-major draw order keeps realizations independent of matrix layout
    let mut data_index = DMatrix::<usize>::zeros(k_users, cfg.n_data);
    for k in 0..k_users {
        for s in 0..cfg.n_data {
            data_index[(k, s)] = rng.gen_range(0..points.len());
        }
    }
    let x = DMatrix::from_fn(k_users, n_sym, |k, s| {
        if s < cfg.n_pilots {
            pilots[k][s % k_users]
        } else {
            points[data_index[(k, s - cfg.n_pilots)]]
        }
    });
    Ok(SymbolMatrix {
        x,
        pilot_count: cfg.n_pilots,
        constellation: cfg.constellation,
        data_index,
    })
}

/// Received frame, raw and de-mixed.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    /// S×M antenna-domain observations.
    pub y_raw: DMatrix<Complex64>,
    /// S×K per-user streams, `y_raw · A†`.
    pub y_demixed: DMatrix<Complex64>,
    pub noise_variance: f64,
    pub snr_db: f64,
}

impl FrameObservation {
    /// De-mixed observations of the data phase, transposed to K×S_data.
    pub fn data_streams(&self, pilot_count: usize) -> DMatrix<Complex64> {
        let n = self.y_demixed.nrows() - pilot_count;
        self.y_demixed.rows(pilot_count, n).transpose()
    }
}

/// Moore-Penrose pseudo-inverse (M×K) of a full-row-rank K×M response.
pub fn pseudo_inverse(array: &ArrayResponseMatrix) -> Result<DMatrix<Complex64>> {
    let a = &array.a;
    if a.nrows() == 0 || a.nrows() > a.ncols() {
        return Err(Error::DegenerateGeometry(format!(
            "{} users cannot be separated by {} antennas",
            a.nrows(),
            a.ncols()
        )));
    }
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min.is_nan() || min <= 1e-8 * max {
        return Err(Error::DegenerateGeometry(format!(
            "array response is rank deficient (singular values {min:e} .. {max:e})"
        )));
    }
    let x = svd
        .pseudo_inverse(1e-12 * max)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    // One Newton-Schulz step, X(2I - AX). The SVD occasionally stops
    // with ~1e-10 residual; the step stays in the row space of A.
    let two = DMatrix::<Complex64>::identity(a.nrows(), a.nrows()) * Complex64::new(2.0, 0.0);
    Ok(&x * (two - a * &x))
}

/// Y · A†.
pub fn demix(
    y_raw: &DMatrix<Complex64>,
    array: &ArrayResponseMatrix,
) -> Result<DMatrix<Complex64>> {
    if y_raw.ncols() != array.n_antennas() {
        return Err(size_err(format!(
            "observation has {} antennas, array has {}",
            y_raw.ncols(),
            array.n_antennas()
        )));
    }
    Ok(y_raw * pseudo_inverse(array)?)
}

/// Noise-free antenna-domain signal `(G ∘ X)ᵀ A`.
pub fn noiseless_signal(
    effective: &EffectiveChannelMatrix,
    symbols: &SymbolMatrix,
    array: &ArrayResponseMatrix,
) -> Result<DMatrix<Complex64>> {
    let (k, s) = effective.g.shape();
    if symbols.x.shape() != (k, s) || array.n_users() != k {
        return Err(size_err(format!(
            "channel {k}x{s}, symbols {:?}, array {} users",
            symbols.x.shape(),
            array.n_users()
        )));
    }
    Ok(effective.g.component_mul(&symbols.x).transpose() * &array.a)
}

/// Unit-variance complex Gaussian S×M matrix, drawn row by row.
pub fn unit_noise(n_symbols: usize, n_antennas: usize, rng_seed: u64) -> DMatrix<Complex64> {
    let mut rng = stream_rng(rng_seed, Stream::Noise);
    let mut z = DMatrix::zeros(n_symbols, n_antennas);
    for s in 0..n_symbols {
        for m in 0..n_antennas {
            z[(s, m)] = complex_normal(&mut rng);
        }
    }
    z
}

/// Synthesizes one received frame at the requested SNR. Noise is added in
/// the antenna domain before de-mixing.
pub fn synthesize_observation(
    effective: &EffectiveChannelMatrix,
    symbols: &SymbolMatrix,
    array: &ArrayResponseMatrix,
    snr_db: f64,
    rng_seed: u64,
) -> Result<FrameObservation> {
    let pinv = pseudo_inverse(array)?;
    let signal = noiseless_signal(effective, symbols, array)?;
    let noise = unit_noise(signal.nrows(), signal.ncols(), rng_seed);
    observe(&signal, &noise, &pinv, snr_db)
}

/// Scales `unit_noise` to the SNR-implied variance, adds it to `signal`
/// and de-mixes with the precomputed pseudo-inverse.
pub fn observe(
    signal: &DMatrix<Complex64>,
    unit_noise: &DMatrix<Complex64>,
    pinv: &DMatrix<Complex64>,
    snr_db: f64,
) -> Result<FrameObservation> {
    let noise_variance = sigma2_for_signal(signal, snr_db)?;
    let y_raw = if noise_variance > 0.0 {
        signal + unit_noise * Complex64::new(noise_variance.sqrt(), 0.0)
    } else {
        signal.clone()
    };
    let y_demixed = &y_raw * pinv;
    Ok(FrameObservation {
        y_raw,
        y_demixed,
        noise_variance,
        snr_db,
    })
}
