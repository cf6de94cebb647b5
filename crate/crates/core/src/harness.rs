//! Seeded Monte Carlo orchestration.
//!
//! A trial draws one channel/symbol/noise realization from its seed
//! (`base_seed + index`) and scores every requested estimator on it, so
//! methods are always compared on identical data. Trials run on a rayon
//! pool; results are gathered by trial index and reduced sequentially,
//! which makes the aggregate independent of thread count.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bem::{build_basis, BasisMatrix};
use crate::config::SystemConfig;
use crate::error::{config_err, Error, Result};
use crate::estimators::{
    em_iterate, pb_genie_estimate, pls_initial_estimate, ChannelEstimate, EmOptions, Method,
    SymbolHypothesisSet,
};
use crate::frame::{
    build_symbol_matrix_with, noiseless_signal, observe, pseudo_inverse, unit_noise,
    FrameObservation, SymbolMatrix,
};
use crate::geometry::{
    effective_channel, sample_user_states_with, upa_response, ArrayGeometry, ArrayResponseMatrix,
    EffectiveChannelMatrix, UserChannelState,
};
use crate::metrics::{ci_half_width, equalize_detect, mean, median, nmse_matrix, TrialMetrics};
use crate::results::{MethodSummary, SweepAxis, SweepPoint, SweepResult};
use crate::rng::{stream_rng, Stream};

/// Extra attempts with a perturbed seed when the drawn user angles make
/// the array response rank deficient.
pub const MAX_GEOMETRY_RETRIES: u64 = 3;

/// One channel, symbol and unit-noise draw. Observations at any SNR are
/// derived from the same draw.
#[derive(Debug, Clone)]
pub struct TrialRealization {
    pub seed: u64,
    pub states: Vec<UserChannelState>,
    pub array: ArrayResponseMatrix,
    pub pinv: DMatrix<Complex64>,
    pub effective: EffectiveChannelMatrix,
    pub symbols: SymbolMatrix,
    pub signal: DMatrix<Complex64>,
    pub unit_noise: DMatrix<Complex64>,
}

impl TrialRealization {
    pub fn generate(cfg: &SystemConfig, trial_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut last = None;
        for attempt in 0..=MAX_GEOMETRY_RETRIES {
            let seed = trial_seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            match Self::generate_once(cfg, seed) {
                Err(e @ Error::DegenerateGeometry(_)) => last = Some(e),
                other => return other,
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn generate_once(cfg: &SystemConfig, seed: u64) -> Result<Self> {
        let states = sample_user_states_with(cfg, &mut stream_rng(seed, Stream::Channel))?;
        let geometry = ArrayGeometry::from_config(cfg)?;
        let users: Vec<_> = states.iter().map(|s| s.geometry).collect();
        let array = upa_response(&geometry, &users);
        let pinv = pseudo_inverse(&array)?;
        let effective = effective_channel(&states, cfg);
        let symbols = build_symbol_matrix_with(cfg, &mut stream_rng(seed, Stream::Symbols))?;
        let signal = noiseless_signal(&effective, &symbols, &array)?;
        let unit_noise = unit_noise(signal.nrows(), signal.ncols(), seed);
        Ok(TrialRealization {
            seed,
            states,
            array,
            pinv,
            effective,
            symbols,
            signal,
            unit_noise,
        })
    }

    pub fn observe(&self, snr_db: f64) -> Result<FrameObservation> {
        observe(&self.signal, &self.unit_noise, &self.pinv, snr_db)
    }

    /// True effective channel over the data phase, K×S_data.
    pub fn reference(&self) -> DMatrix<Complex64> {
        self.effective.columns_from(self.symbols.pilot_count)
    }
}

/// Per-method (NMSE, SER) scores on one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub nmse: f64,
    pub ser: f64,
}

struct Evaluator<'a> {
    real: &'a TrialRealization,
    obs: FrameObservation,
    reference: DMatrix<Complex64>,
    streams: DMatrix<Complex64>,
    hyp: &'a SymbolHypothesisSet,
}

impl<'a> Evaluator<'a> {
    fn new(real: &'a TrialRealization, snr_db: f64, hyp: &'a SymbolHypothesisSet) -> Result<Self> {
        let obs = real.observe(snr_db)?;
        let streams = obs.data_streams(real.symbols.pilot_count);
        Ok(Evaluator {
            real,
            reference: real.reference(),
            obs,
            streams,
            hyp,
        })
    }

    fn score(&self, h_hat: &DMatrix<Complex64>) -> Result<Score> {
        let nmse = nmse_matrix(&self.reference, h_hat)?;
        let det = equalize_detect(
            &self.streams,
            h_hat,
            self.hyp.alphabet(),
            &self.real.symbols.data_index,
        )?;
        Ok(Score { nmse, ser: det.ser })
    }

    fn pls(&self) -> Result<ChannelEstimate> {
        pls_initial_estimate(&self.obs, &self.real.symbols)
    }

    fn pb(&self) -> Result<ChannelEstimate> {
        pb_genie_estimate(&self.real.effective, self.real.symbols.pilot_count)
    }

    /// Scores of the EM iterates at each requested iteration count.
    fn em_at(&self, basis: Option<&BasisMatrix>, checkpoints: &[usize]) -> Result<Vec<Score>> {
        let last = checkpoints.iter().copied().max().unwrap_or(0);
        if last == 0 {
            return Err(config_err("EM iteration counts must be >= 1"));
        }
        let init = self.pls()?;
        let mut snapshots: Vec<(usize, DMatrix<Complex64>)> = Vec::new();
        em_iterate(
            &self.streams,
            self.obs.noise_variance,
            &init,
            basis.map(|b| b.projector()),
            self.hyp,
            EmOptions::fixed(last),
            |it, h| {
                if checkpoints.contains(&it) {
                    snapshots.push((it, h.clone()));
                }
            },
        )?;
        checkpoints
            .iter()
            .map(|c| {
                let h = &snapshots
                    .iter()
                    .find(|(it, _)| it == c)
                    .expect("checkpoint recorded")
                    .1;
                self.score(h)
            })
            .collect()
    }

    fn method(&self, method: Method, basis: &BasisMatrix, n_em: usize) -> Result<Score> {
        match method {
            Method::Pb => self.score(&self.pb()?.h_hat),
            Method::Pls => self.score(&self.pls()?.h_hat),
            Method::Em => Ok(self.em_at(Some(basis), &[n_em])?[0]),
        }
    }
}

/// Full pipeline for one seed at `cfg.snr_db`, `cfg.n_em` and
/// `cfg.bem_order`; one entry per method in PB, P-LS, EM order.
pub fn run_trial(cfg: &SystemConfig, trial_seed: u64) -> Result<Vec<TrialMetrics>> {
    let real = TrialRealization::generate(cfg, trial_seed)?;
    let basis = build_basis(cfg.n_data, cfg.bem_order)?;
    let hyp = SymbolHypothesisSet::new(cfg.constellation);
    let ev = Evaluator::new(&real, cfg.snr_db, &hyp)?;
    Method::ALL
        .iter()
        .map(|&m| {
            let s = ev.method(m, &basis, cfg.n_em)?;
            Ok(TrialMetrics {
                nmse: s.nmse,
                ser: s.ser,
                snr_db: cfg.snr_db,
                method: m,
                n_em: cfg.n_em,
                d_order: cfg.bem_order,
            })
        })
        .collect()
}

/// Trial count, seeding and parallelism for a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub trials: usize,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl RunOptions {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        RunOptions {
            trials: cfg.trials,
            base_seed: cfg.base_seed,
            methods: Method::ALL.to_vec(),
            workers: None,
        }
    }

    pub fn with_methods(mut self, methods: &[Method]) -> Self {
        self.methods = methods.to_vec();
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("at least one trial is required"));
        }
        if self.methods.is_empty() {
            return Err(config_err("no methods selected"));
        }
        Ok(())
    }
}

pub fn trial_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_add(index as u64)
}

/// Scores indexed `[axis point][method]` for one trial.
type TrialGrid = Vec<Vec<Score>>;

fn run_trials<F>(opts: &RunOptions, per_trial: F) -> Result<Vec<TrialGrid>>
where
    F: Fn(u64) -> Result<TrialGrid> + Sync,
{
    let job = || {
        (0..opts.trials)
            .into_par_iter()
            .map(|i| per_trial(trial_seed(opts.base_seed, i)))
            .collect::<Result<Vec<_>>>()
    };
    match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| config_err(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

fn aggregate(
    axis: SweepAxis,
    values: &[f64],
    opts: &RunOptions,
    grids: &[TrialGrid],
) -> SweepResult {
    let points = values
        .iter()
        .enumerate()
        .map(|(vi, &value)| {
            let methods = opts
                .methods
                .iter()
                .enumerate()
                .map(|(mi, &method)| {
                    let nmse: Vec<f64> = grids.iter().map(|g| g[vi][mi].nmse).collect();
                    let ser: Vec<f64> = grids.iter().map(|g| g[vi][mi].ser).collect();
                    MethodSummary {
                        method,
                        mean_nmse: mean(&nmse),
                        mean_ser: mean(&ser),
                        median_nmse: median(&nmse),
                        median_ser: median(&ser),
                        ci_nmse: ci_half_width(&nmse),
                        ci_ser: ci_half_width(&ser),
                        trials: grids.len(),
                    }
                })
                .collect();
            SweepPoint { value, methods }
        })
        .collect();
    SweepResult {
        axis,
        seed: opts.base_seed,
        points,
    }
}

fn setup(cfg: &SystemConfig, opts: &RunOptions, grid_len: usize) -> Result<SymbolHypothesisSet> {
    cfg.validate()?;
    opts.validate()?;
    if grid_len == 0 {
        return Err(config_err("sweep grid is empty"));
    }
    Ok(SymbolHypothesisSet::new(cfg.constellation))
}

/// NMSE/SER versus SNR at `cfg.n_em` iterations and order `cfg.bem_order`.
pub fn sweep_snr(cfg: &SystemConfig, snr_grid: &[f64], opts: &RunOptions) -> Result<SweepResult> {
    let hyp = setup(cfg, opts, snr_grid.len())?;
    let basis = build_basis(cfg.n_data, cfg.bem_order)?;
    let grids = run_trials(opts, |seed| {
        let real = TrialRealization::generate(cfg, seed)?;
        snr_grid
            .iter()
            .map(|&snr| {
                let ev = Evaluator::new(&real, snr, &hyp)?;
                opts.methods
                    .iter()
                    .map(|&m| ev.method(m, &basis, cfg.n_em))
                    .collect()
            })
            .collect()
    })?;
    Ok(aggregate(SweepAxis::Snr, snr_grid, opts, &grids))
}

/// EM NMSE versus iteration count, one result per SNR. Non-EM methods do
/// not depend on the iteration count and repeat the same value.
pub fn sweep_em_iterations(
    cfg: &SystemConfig,
    iter_grid: &[usize],
    snr_list: &[f64],
    opts: &RunOptions,
) -> Result<Vec<(f64, SweepResult)>> {
    let hyp = setup(cfg, opts, iter_grid.len().min(snr_list.len()))?;
    if iter_grid.contains(&0) {
        return Err(config_err("EM iteration counts must be >= 1"));
    }
    let basis = build_basis(cfg.n_data, cfg.bem_order)?;
    let values: Vec<f64> = iter_grid.iter().map(|&i| i as f64).collect();
    snr_list
        .iter()
        .map(|&snr| {
            let grids = run_trials(opts, |seed| {
                let real = TrialRealization::generate(cfg, seed)?;
                let ev = Evaluator::new(&real, snr, &hyp)?;
                let em = ev.em_at(Some(&basis), iter_grid)?;
                let others: Vec<Option<Score>> = opts
                    .methods
                    .iter()
                    .map(|&m| match m {
                        Method::Em => Ok(None),
                        m => ev.method(m, &basis, cfg.n_em).map(Some),
                    })
                    .collect::<Result<_>>()?;
                Ok(em
                    .iter()
                    .map(|e| others.iter().map(|o| o.unwrap_or(*e)).collect())
                    .collect())
            })?;
            Ok((snr, aggregate(SweepAxis::EmIter, &values, opts, &grids)))
        })
        .collect()
}

/// EM NMSE versus basis order D at `cfg.snr_db`.
pub fn sweep_bem_order(
    cfg: &SystemConfig,
    d_grid: &[usize],
    opts: &RunOptions,
) -> Result<SweepResult> {
    let hyp = setup(cfg, opts, d_grid.len())?;
    let bases = d_grid
        .iter()
        .map(|&d| build_basis(cfg.n_data, d))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = d_grid.iter().map(|&d| d as f64).collect();
    let grids = run_trials(opts, |seed| {
        let real = TrialRealization::generate(cfg, seed)?;
        let ev = Evaluator::new(&real, cfg.snr_db, &hyp)?;
        bases
            .iter()
            .map(|b| {
                opts.methods
                    .iter()
                    .map(|&m| ev.method(m, b, cfg.n_em))
                    .collect()
            })
            .collect()
    })?;
    Ok(aggregate(SweepAxis::BemOrder, &values, opts, &grids))
}
