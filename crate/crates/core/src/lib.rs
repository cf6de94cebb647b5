//! Link-level Monte Carlo simulator for uplink channel estimation in
//! massive-MIMO LEO satellite OFDM systems with imperfect Doppler
//! compensation.
//!
//! The pipeline for one trial:
//!
//! 1. [`geometry`]: draw user angles, ranges, Rician multipath and Doppler
//!    terms; build the planar-array response and the post-compensation
//!    effective channel.
//! 2. [`frame`]: Zadoff-Chu pilots + QAM data, antenna-domain synthesis
//!    with calibrated AWGN, pseudo-inverse de-mixing.
//! 3. [`estimators`]: pilot LS, genie pilot-phase baseline, and EM with a
//!    discrete Legendre subspace projection ([`bem`]).
//! 4. [`metrics`]: NMSE over the data phase and one-tap detection SER.
//!
//! [`harness`] runs seeded trials in parallel and aggregates sweeps;
//! [`results`] writes them to CSV.

pub mod bem;
pub mod config;
pub mod error;
pub mod estimators;
pub mod frame;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod results;
pub mod rng;

pub use bem::{build_basis, coefficients, project, BasisMatrix};
pub use config::{Constellation, SystemConfig};
pub use error::{Error, Result};
pub use estimators::{
    em_estimate, em_estimate_unprojected, em_posterior, pb_genie_estimate, pls_initial_estimate,
    ChannelEstimate, EmOptions, Method, SymbolHypothesisSet,
};
pub use frame::{
    build_symbol_matrix, demix, pseudo_inverse, synthesize_observation, FrameObservation,
    SymbolMatrix,
};
pub use geometry::{
    channel_sample, compensation_matrix, effective_channel, sample_user_states, upa_response,
    ArrayGeometry, ArrayResponseMatrix, CompensationMatrix, EffectiveChannelMatrix,
    UserChannelState, UserGeometry,
};
pub use harness::{
    run_trial, sweep_bem_order, sweep_em_iterations, sweep_snr, RunOptions, TrialRealization,
};
pub use metrics::{equalize_detect, nmse, snr_to_sigma2, TrialMetrics};
pub use results::{emit_results, read_results, MethodSummary, SweepAxis, SweepPoint, SweepResult};

pub use nalgebra::DMatrix;
pub use num_complex::Complex64;
