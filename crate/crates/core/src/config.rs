//! Simulation configuration.
//!
//! The configuration file is a flat list of `key = value` lines (TOML
//! syntax, no tables). Every key is optional; missing keys take the
//! reference-scenario defaults below. Units are part of the key names.
//!
//! ```text
//! carrier_hz = 2e9
//! n_users = 10
//! snr_db = 10.0
//! ```

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Mean Earth radius, m.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// SNR above which the noise variance is taken to be exactly zero.
pub const NOISELESS_SNR_DB: f64 = 300.0;

/// Data-symbol constellation. Both alphabets are normalized to unit
/// average energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constellation {
    #[serde(rename = "16qam")]
    Qam16,
    #[serde(rename = "qpsk")]
    Qpsk,
}

impl Constellation {
    pub fn order(self) -> usize {
        match self {
            Constellation::Qam16 => 16,
            Constellation::Qpsk => 4,
        }
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constellation::Qam16 => "16qam",
            Constellation::Qpsk => "qpsk",
        })
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "16qam" | "qam16" => Ok(Constellation::Qam16),
            "qpsk" => Ok(Constellation::Qpsk),
            other => Err(config_err(format!("unknown constellation `{other}`"))),
        }
    }
}

/// System and simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub n_subcarriers: usize,
    pub n_users: usize,
    pub array_mx: usize,
    pub array_my: usize,
    pub altitude_m: f64,
    pub max_sat_doppler_hz: f64,
    pub min_elevation_deg: f64,
    /// Largest |a_iᴴ a_j| allowed between co-scheduled users; 1 disables
    /// the separation rule.
    pub max_user_correlation: f64,
    /// Multipath delay spread. Zero disables multipath delay.
    pub delay_spread_s: f64,
    /// Residual user Doppler bound. Zero gives a static residual channel.
    pub max_user_doppler_hz: f64,
    pub max_paths: usize,
    pub n_pilots: usize,
    pub n_data: usize,
    pub constellation: Constellation,
    pub n_cp: usize,
    /// Linear Rician factor.
    pub rician_kappa: f64,
    pub n_em: usize,
    pub bem_order: usize,
    /// 1-based subcarrier index `f`; the baseband offset is `f - (N_sc + 1)/2`.
    pub subcarrier: usize,
    pub snr_db: f64,
    pub trials: usize,
    pub base_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            carrier_hz: 2.0e9,
            bandwidth_hz: 15.36e6,
            subcarrier_spacing_hz: 60.0e3,
            n_subcarriers: 256,
            n_users: 10,
            array_mx: 16,
            array_my: 16,
            altitude_m: 600.0e3,
            max_sat_doppler_hz: 48.0e3,
            min_elevation_deg: 10.0,
            max_user_correlation: 0.5,
            delay_spread_s: 250.0e-9,
            max_user_doppler_hz: 200.0,
            max_paths: 5,
            n_pilots: 5,
            n_data: 50,
            constellation: Constellation::Qam16,
            n_cp: 16,
            rician_kappa: 10.0,
            n_em: 10,
            bem_order: 3,
            subcarrier: 128,
            snr_db: 10.0,
            trials: 500,
            base_seed: 1,
        }
    }
}

impl SystemConfig {
    /// Reads a flat `key = value` file and validates the result.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        let cfg = Self::from_str(&text)?;
        Ok(cfg)
    }

    pub fn to_config_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("subcarrier_spacing_hz", self.subcarrier_spacing_hz),
            ("altitude_m", self.altitude_m),
            ("max_sat_doppler_hz", self.max_sat_doppler_hz),
            ("rician_kappa", self.rician_kappa),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_err(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("delay_spread_s", self.delay_spread_s),
            ("max_user_doppler_hz", self.max_user_doppler_hz),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(config_err(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        let counts = [
            ("n_subcarriers", self.n_subcarriers),
            ("n_users", self.n_users),
            ("array_mx", self.array_mx),
            ("array_my", self.array_my),
            ("max_paths", self.max_paths),
            ("n_pilots", self.n_pilots),
            ("n_data", self.n_data),
            ("n_em", self.n_em),
            ("bem_order", self.bem_order),
            ("trials", self.trials),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(config_err(format!("{name} must be at least 1")));
            }
        }
        if !(self.min_elevation_deg > 0.0 && self.min_elevation_deg <= 90.0) {
            return Err(config_err(format!(
                "min_elevation_deg must lie in (0, 90], got {}",
                self.min_elevation_deg
            )));
        }
        if !(self.max_user_correlation > 0.0 && self.max_user_correlation <= 1.0) {
            return Err(config_err(format!(
                "max_user_correlation must lie in (0, 1], got {}",
                self.max_user_correlation
            )));
        }
        if self.bem_order > self.n_data {
            return Err(config_err(format!(
                "bem_order {} exceeds n_data {}",
                self.bem_order, self.n_data
            )));
        }
        if self.subcarrier == 0 || self.subcarrier > self.n_subcarriers {
            return Err(config_err(format!(
                "subcarrier must lie in 1..={}, got {}",
                self.n_subcarriers, self.subcarrier
            )));
        }
        if self.cp_duration_s() <= self.delay_spread_s {
            return Err(config_err(format!(
                "cyclic prefix ({:.3e} s) must exceed the delay spread ({:.3e} s)",
                self.cp_duration_s(),
                self.delay_spread_s
            )));
        }
        if self.snr_db.is_nan() {
            return Err(config_err("snr_db is NaN"));
        }
        Ok(())
    }

    /// Largest direction-cosine radius seen from a nadir-pointing array:
    /// the off-nadir angle of a terminal at the minimum elevation.
    pub fn max_direction_cosine(&self) -> f64 {
        EARTH_RADIUS_M / (EARTH_RADIUS_M + self.altitude_m)
            * self.min_elevation_deg.to_radians().cos()
    }

    pub fn n_antennas(&self) -> usize {
        self.array_mx * self.array_my
    }

    /// Frame length S = pilots + data.
    pub fn n_symbols(&self) -> usize {
        self.n_pilots + self.n_data
    }

    /// T_s = 1/(2B).
    pub fn sampling_period_s(&self) -> f64 {
        1.0 / (2.0 * self.bandwidth_hz)
    }

    pub fn cp_duration_s(&self) -> f64 {
        self.n_cp as f64 * self.sampling_period_s()
    }

    /// OFDM symbol duration including the cyclic prefix.
    pub fn symbol_duration_s(&self) -> f64 {
        self.n_subcarriers as f64 * self.sampling_period_s() + self.cp_duration_s()
    }

    /// Time increment between consecutive symbols in the compensation
    /// phase ramp. The cyclic prefix is counted once, inside the symbol
    /// duration.
    pub fn symbol_step_s(&self) -> f64 {
        self.symbol_duration_s()
    }

    /// Baseband subcarrier offset c = f - (N_sc + 1)/2.
    pub fn subcarrier_offset(&self) -> f64 {
        self.subcarrier as f64 - 0.5 * (self.n_subcarriers as f64 + 1.0)
    }

    /// Frequency argument c·f_s used in the channel model.
    pub fn subcarrier_frequency_hz(&self) -> f64 {
        self.subcarrier_offset() * self.subcarrier_spacing_hz
    }
}

impl FromStr for SystemConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let cfg: SystemConfig =
            toml::from_str(text).map_err(|e| config_err(format!("parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
