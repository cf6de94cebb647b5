//! Channel estimators: the pilot least-squares initializer (P-LS), the
//! genie pilot-phase baseline (PB), and the data-aided EM estimator with
//! discrete Legendre subspace regularization.
//!
//! All estimates cover the data phase only (K×S_data). P-LS and PB hold a
//! single per-user value over the whole data phase, which is exactly what
//! ages under residual user Doppler. EM re-estimates every data symbol from
//! soft symbol posteriors and then projects each user's series onto the
//! first D Legendre basis vectors.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bem::{project_into, BasisMatrix};
use crate::config::Constellation;
use crate::error::{config_err, size_err, Error, Result};
use crate::frame::{alphabet, FrameObservation, SymbolMatrix};
use crate::geometry::EffectiveChannelMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Pb,
    Pls,
    Em,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pb, Method::Pls, Method::Em];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pb => "pb",
            Method::Pls => "pls",
            Method::Em => "em",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pb" => Ok(Method::Pb),
            "pls" | "p-ls" => Ok(Method::Pls),
            "em" => Ok(Method::Em),
            other => Err(config_err(format!("unknown method `{other}`"))),
        }
    }
}

/// K×S_data channel estimate over the data phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: DMatrix<Complex64>,
    pub method: Method,
    pub iterations_used: usize,
}

/// Candidate transmit symbols for the E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolHypothesisSet {
    alphabet: Vec<Complex64>,
}

impl SymbolHypothesisSet {
    pub fn new(constellation: Constellation) -> Self {
        SymbolHypothesisSet {
            alphabet: alphabet(constellation),
        }
    }

    /// Custom alphabet; must be non-empty with unit average energy.
    pub fn from_points(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(config_err("empty hypothesis alphabet"));
        }
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
        if (energy - 1.0).abs() > 1e-9 {
            return Err(config_err(format!("alphabet energy {energy} is not unit")));
        }
        Ok(SymbolHypothesisSet { alphabet: points })
    }

    pub fn alphabet(&self) -> &[Complex64] {
        &self.alphabet
    }

    pub fn n_hypotheses(&self) -> usize {
        self.alphabet.len()
    }
}

fn replicate(per_user: &[Complex64], n_data: usize, method: Method) -> ChannelEstimate {
    ChannelEstimate {
        h_hat: DMatrix::from_fn(per_user.len(), n_data, |k, _| per_user[k]),
        method,
        iterations_used: 0,
    }
}

/// Pilot LS: per user, the mean of `ỹ/x` over the pilot symbols, held
/// constant over the data phase.
pub fn pls_initial_estimate(
    obs: &FrameObservation,
    symbols: &SymbolMatrix,
) -> Result<ChannelEstimate> {
    let n_p = symbols.pilot_count;
    if n_p == 0 {
        return Err(config_err("P-LS needs at least one pilot"));
    }
    if obs.y_demixed.shape() != (symbols.n_symbols(), symbols.n_users()) {
        return Err(size_err(format!(
            "observation {:?} vs symbols {:?}",
            obs.y_demixed.shape(),
            symbols.x.shape()
        )));
    }
    let per_user = (0..symbols.n_users())
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..n_p {
                let x = symbols.x[(k, s)];
                if x.norm_sqr() == 0.0 {
                    return Err(Error::Numerical(format!(
                        "zero pilot at user {k}, symbol {s}"
                    )));
                }
                acc += obs.y_demixed[(s, k)] / x;
            }
            Ok(acc / n_p as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(replicate(&per_user, symbols.n_data(), Method::Pls))
}

/// Genie baseline: true effective channel averaged over the pilot phase.
pub fn pb_genie_estimate(
    effective: &EffectiveChannelMatrix,
    pilot_count: usize,
) -> Result<ChannelEstimate> {
    let s = effective.n_symbols();
    if pilot_count == 0 || pilot_count >= s {
        return Err(config_err(format!(
            "pilot count {pilot_count} for a {s}-symbol frame"
        )));
    }
    let per_user: Vec<Complex64> = (0..effective.n_users())
        .map(|k| effective.g.row(k).columns(0, pilot_count).sum() / pilot_count as f64)
        .collect();
    Ok(replicate(&per_user, s - pilot_count, Method::Pb))
}

/// Symbol posterior given one observation and channel value; `sigma2 = 0`
/// gives the hard-decision limit.
fn posterior_into(
    y: Complex64,
    h: Complex64,
    sigma2: f64,
    alphabet: &[Complex64],
    out: &mut [f64],
) {
    if sigma2 > 0.0 {
        let mut max = f64::NEG_INFINITY;
        for (o, xi) in out.iter_mut().zip(alphabet) {
            *o = -(y - h * xi).norm_sqr() / sigma2;
            max = max.max(*o);
        }
        let mut sum = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            sum += *o;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
    } else {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (n, xi) in alphabet.iter().enumerate() {
            let d = (y - h * xi).norm_sqr();
            if d < best_d {
                best_d = d;
                best = n;
            }
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        out[best] = 1.0;
    }
}

/// Posterior probability of each hypothesis, a softmax over
/// `-|y - ĥ ξ_n|²/σ²`.
pub fn em_posterior(
    y: Complex64,
    h_hat: Complex64,
    sigma2: f64,
    hypotheses: &SymbolHypothesisSet,
) -> Result<Vec<f64>> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Parameter(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let mut out = vec![0.0; hypotheses.n_hypotheses()];
    posterior_into(y, h_hat, sigma2, hypotheses.alphabet(), &mut out);
    if out.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical("non-finite posterior".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub iterations: usize,
    /// Stop early once ‖Ĥ⁽ⁱ⁺¹⁾ − Ĥ⁽ⁱ⁾‖ / ‖Ĥ⁽ⁱ⁾‖ drops below this value.
    pub tolerance: Option<f64>,
}

impl EmOptions {
    pub fn fixed(iterations: usize) -> Self {
        EmOptions {
            iterations,
            tolerance: None,
        }
    }
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions::fixed(10)
    }
}

/// One E-step + raw M-step for every (user, symbol) pair.
fn m_step_raw(
    streams: &DMatrix<Complex64>,
    h_hat: &DMatrix<Complex64>,
    sigma2: f64,
    alphabet: &[Complex64],
    post: &mut [f64],
) -> Result<DMatrix<Complex64>> {
    let (n_users, n_data) = streams.shape();
    let mut raw = DMatrix::zeros(n_users, n_data);
    for k in 0..n_users {
        for s in 0..n_data {
            let y = streams[(k, s)];
            posterior_into(y, h_hat[(k, s)], sigma2, alphabet, post);
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = 0.0;
            for (p, xi) in post.iter().zip(alphabet) {
                num += y * xi.conj() * *p;
                den += p * xi.norm_sqr();
            }
            if den.is_nan() || den <= 0.0 {
                return Err(Error::Numerical(format!(
                    "M-step denominator vanished at user {k}, symbol {s}"
                )));
            }
            let h = num / den;
            if !(h.re.is_finite() && h.im.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite estimate at user {k}, symbol {s}"
                )));
            }
            raw[(k, s)] = h;
        }
    }
    Ok(raw)
}

fn project_rows(projector: &DMatrix<f64>, raw: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (n_users, n_data) = raw.shape();
    let mut out = DMatrix::zeros(n_users, n_data);
    let mut row = vec![Complex64::new(0.0, 0.0); n_data];
    let mut proj = row.clone();
    for k in 0..n_users {
        for (s, r) in row.iter_mut().enumerate() {
            *r = raw[(k, s)];
        }
        project_into(projector, &row, &mut proj);
        for (s, p) in proj.iter().enumerate() {
            out[(k, s)] = *p;
        }
    }
    out
}

/// Runs EM and hands every iterate to `on_iterate(iteration, estimate)`.
///
/// `streams` are the de-mixed data-phase observations (K×S_data). With no
/// projector the raw M-step output is used unmodified.
pub fn em_iterate(
    streams: &DMatrix<Complex64>,
    sigma2: f64,
    init: &ChannelEstimate,
    projector: Option<&DMatrix<f64>>,
    hypotheses: &SymbolHypothesisSet,
    options: EmOptions,
    mut on_iterate: impl FnMut(usize, &DMatrix<Complex64>),
) -> Result<ChannelEstimate> {
    if options.iterations == 0 {
        return Err(config_err("EM needs at least one iteration"));
    }
    if init.h_hat.shape() != streams.shape() {
        return Err(size_err(format!(
            "initial estimate {:?} vs data streams {:?}",
            init.h_hat.shape(),
            streams.shape()
        )));
    }
    if let Some(p) = projector {
        if p.nrows() != streams.ncols() {
            return Err(size_err(format!(
                "basis length {} vs {} data symbols",
                p.nrows(),
                streams.ncols()
            )));
        }
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::Parameter(format!("invalid noise variance {sigma2}")));
    }
    let alphabet = hypotheses.alphabet();
    let mut post = vec![0.0; alphabet.len()];
    let mut h_hat = init.h_hat.clone();
    let mut used = 0;
    for it in 1..=options.iterations {
        let raw = m_step_raw(streams, &h_hat, sigma2, alphabet, &mut post)?;
        let next = match projector {
            Some(p) => project_rows(p, &raw),
            None => raw,
        };
        used = it;
        on_iterate(it, &next);
        let converged = options.tolerance.is_some_and(|tol| {
            let base = h_hat.norm();
            base > 0.0 && (&next - &h_hat).norm() / base < tol
        });
        h_hat = next;
        if converged {
            break;
        }
    }
    Ok(ChannelEstimate {
        h_hat,
        method: Method::Em,
        iterations_used: used,
    })
}

/// EM with DLP-BEM regularization.
pub fn em_estimate(
    streams: &DMatrix<Complex64>,
    sigma2: f64,
    init: &ChannelEstimate,
    basis: &BasisMatrix,
    hypotheses: &SymbolHypothesisSet,
    options: EmOptions,
) -> Result<ChannelEstimate> {
    em_iterate(
        streams,
        sigma2,
        init,
        Some(basis.projector()),
        hypotheses,
        options,
        |_, _| {},
    )
}

/// EM without the subspace projection.
pub fn em_estimate_unprojected(
    streams: &DMatrix<Complex64>,
    sigma2: f64,
    init: &ChannelEstimate,
    hypotheses: &SymbolHypothesisSet,
    options: EmOptions,
) -> Result<ChannelEstimate> {
    em_iterate(streams, sigma2, init, None, hypotheses, options, |_, _| {})
}
