//! Channel NMSE, one-tap detection with SER counting, and the SNR ↔ noise
//! variance mapping.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::NOISELESS_SNR_DB;
use crate::error::{config_err, size_err, Error, Result};
use crate::estimators::{ChannelEstimate, Method};
use crate::frame::{noiseless_signal, slice, SymbolMatrix};
use crate::geometry::{ArrayResponseMatrix, EffectiveChannelMatrix};

/// Smallest channel magnitude the equalizer will divide by.
pub const EQUALIZER_FLOOR: f64 = 1e-12;

/// Per-method outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialMetrics {
    pub nmse: f64,
    pub ser: f64,
    pub snr_db: f64,
    pub method: Method,
    pub n_em: usize,
    pub d_order: usize,
}

/// ‖ref − est‖² / ‖ref‖² over the K×S_data data phase.
pub fn nmse(reference: &DMatrix<Complex64>, estimate: &ChannelEstimate) -> Result<f64> {
    nmse_matrix(reference, &estimate.h_hat)
}

pub fn nmse_matrix(reference: &DMatrix<Complex64>, estimate: &DMatrix<Complex64>) -> Result<f64> {
    if reference.shape() != estimate.shape() {
        return Err(size_err(format!(
            "reference {:?} vs estimate {:?}",
            reference.shape(),
            estimate.shape()
        )));
    }
    let energy = reference.norm_squared();
    if energy == 0.0 {
        return Err(Error::UndefinedMetric(
            "reference channel has zero energy".into(),
        ));
    }
    Ok((reference - estimate).norm_squared() / energy)
}

/// Hard decisions and the resulting symbol error rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// K×S_data alphabet indices.
    pub decisions: DMatrix<usize>,
    pub ser: f64,
}

/// One-tap zero-forcing `ỹ/ĥ` followed by nearest-neighbour slicing.
///
/// `streams` and `estimate` are K×S_data; `truth` holds the transmitted
/// alphabet indices.
pub fn equalize_detect(
    streams: &DMatrix<Complex64>,
    estimate: &DMatrix<Complex64>,
    alphabet: &[Complex64],
    truth: &DMatrix<usize>,
) -> Result<Detection> {
    if streams.shape() != estimate.shape() || streams.shape() != truth.shape() {
        return Err(size_err(format!(
            "streams {:?}, estimate {:?}, truth {:?}",
            streams.shape(),
            estimate.shape(),
            truth.shape()
        )));
    }
    let (n_users, n_data) = streams.shape();
    let mut decisions = DMatrix::<usize>::zeros(n_users, n_data);
    let mut errors = 0usize;
    for k in 0..n_users {
        for s in 0..n_data {
            let h = estimate[(k, s)];
            if h.norm().is_nan() || h.norm() < EQUALIZER_FLOOR {
                return Err(Error::EqualizationSingularity { user: k, symbol: s });
            }
            let d = slice(alphabet, streams[(k, s)] / h);
            decisions[(k, s)] = d;
            errors += usize::from(d != truth[(k, s)]);
        }
    }
    let total = n_users * n_data;
    let ser = if total == 0 {
        0.0
    } else {
        errors as f64 / total as f64
    };
    Ok(Detection { decisions, ser })
}

/// Noise variance that puts `signal` (S×M, noise-free) at `snr_db`.
/// Returns exactly zero above the noiseless threshold.
pub fn sigma2_for_signal(signal: &DMatrix<Complex64>, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(config_err(format!("SNR must be finite, got {snr_db}")));
    }
    if snr_db > NOISELESS_SNR_DB {
        return Ok(0.0);
    }
    let entries = (signal.nrows() * signal.ncols()) as f64;
    Ok(signal.norm_squared() / (entries * 10f64.powf(snr_db / 10.0)))
}

/// σ² = ‖vec((G∘X)ᵀA)‖² / (S·M·10^(SNR/10)).
pub fn snr_to_sigma2(
    effective: &EffectiveChannelMatrix,
    symbols: &SymbolMatrix,
    array: &ArrayResponseMatrix,
    snr_db: f64,
) -> Result<f64> {
    sigma2_for_signal(&noiseless_signal(effective, symbols, array)?, snr_db)
}

/// Mean and median of per-trial values.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// 95 % normal-approximation half-width of the sample mean.
pub fn ci_half_width(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    1.96 * (var / n as f64).sqrt()
}
