//! User geometry, planar-array responses and the time-varying Rician
//! channel with satellite/user Doppler and multipath delay.
//!
//! Each user terminal sees
//!
//! ```text
//! h_k(t, f) = sqrt(beta/(kappa+1)) exp(j2π t ν_sat)
//!             · [ sqrt(kappa) exp(j2π(t ν_los − f τ_los))
//!               + sqrt(1/P) Σ_p g_p exp(j2π(t ν_p − f (τ_los + τ_p))) ]
//! ```
//!
//! The satellite Doppler and the LoS delay are pre-compensated at the
//! terminal through a pure phase (`compensation_matrix`); the user-side
//! Doppler terms stay in the effective channel that the receiver has to
//! track.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::config::{SystemConfig, EARTH_RADIUS_M, SPEED_OF_LIGHT};
use crate::error::{config_err, Error, Result};
use crate::rng::complex_normal;

/// Uniform planar array with `m_x × m_y` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayGeometry {
    m_x: usize,
    m_y: usize,
}

impl ArrayGeometry {
    pub fn new(m_x: usize, m_y: usize) -> Result<Self> {
        if m_x == 0 || m_y == 0 {
            return Err(config_err(format!(
                "array dimensions must be >= 1, got {m_x}x{m_y}"
            )));
        }
        Ok(ArrayGeometry { m_x, m_y })
    }

    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        Self::new(cfg.array_mx, cfg.array_my)
    }

    pub fn m_x(&self) -> usize {
        self.m_x
    }

    pub fn m_y(&self) -> usize {
        self.m_y
    }

    pub fn m(&self) -> usize {
        self.m_x * self.m_y
    }
}

/// Per-user angles and range. Angles are in radians, elevation in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserGeometry {
    pub theta_x: f64,
    pub theta_y: f64,
    pub distance: f64,
    pub elevation: f64,
}

/// Slant range from a terminal at `elevation_deg` to a satellite at
/// `altitude_m` over a spherical Earth.
pub fn slant_range(altitude_m: f64, elevation_deg: f64) -> f64 {
    let r = EARTH_RADIUS_M;
    let e = elevation_deg.to_radians();
    ((r + altitude_m).powi(2) - (r * e.cos()).powi(2)).sqrt() - r * e.sin()
}

/// Free-space path loss in dB. Not used as a linear gain: simulations run
/// with unit large-scale gain and set the operating point through the SNR.
pub fn path_loss_db(distance_m: f64, carrier_hz: f64) -> f64 {
    20.0 * (4.0 * PI * distance_m * carrier_hz / SPEED_OF_LIGHT).log10()
}

/// One user's channel parameters for a single frame.
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannelState {
    pub geometry: UserGeometry,
    pub rician_kappa: f64,
    pub num_paths: usize,
    pub path_gains: Vec<Complex64>,
    pub tau_los: f64,
    /// Excess multipath delays; the NLoS delay of path p is `tau_los + tau_mp[p]`.
    pub tau_mp: Vec<f64>,
    pub nu_sat: f64,
    pub nu_ut_los: f64,
    pub nu_ut_nlos: Vec<f64>,
    pub beta: f64,
}

impl UserChannelState {
    pub fn delay_spread(&self) -> f64 {
        let max = self.tau_mp.iter().cloned().fold(0.0, f64::max);
        let min = self.tau_mp.iter().cloned().fold(0.0, f64::min);
        max - min
    }
}

/// Off-nadir direction cosines drawn per user before the separation rule
/// gives up and reports a degenerate geometry.
const MAX_PLACEMENT_DRAWS: usize = 10_000;

/// Draws K user states. Deterministic for a given seed.
///
/// Users are placed uniformly over the visible footprint in
/// direction-cosine coordinates `(sin θy cos θx, cos θy)`, bounded by the
/// minimum elevation. A candidate whose array response correlates more
/// than `max_user_correlation` with an already placed user is redrawn,
/// which models co-scheduling of spatially separated terminals.
pub fn sample_user_states(cfg: &SystemConfig, rng_seed: u64) -> Result<Vec<UserChannelState>> {
    cfg.validate()?;
    let mut rng = crate::rng::stream_rng(rng_seed, crate::rng::Stream::Channel);
    sample_user_states_with(cfg, &mut rng)
}

fn place_user<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> UserGeometry {
    let r_max = cfg.max_direction_cosine();
    let r = r_max * rng.gen::<f64>().sqrt();
    let phi = rng.gen_range(0.0..2.0 * PI);
    let (dx, dy) = (r * phi.cos(), r * phi.sin());
    let theta_y = dy.acos();
    let theta_x = (dx / theta_y.sin()).clamp(-1.0, 1.0).acos();
    // sin(off-nadir) = r; cos(elevation) = (R + h)/R · sin(off-nadir)
    let cos_el = ((EARTH_RADIUS_M + cfg.altitude_m) / EARTH_RADIUS_M * r).min(1.0);
    let elevation = cos_el.acos().to_degrees().max(cfg.min_elevation_deg);
    UserGeometry {
        theta_x,
        theta_y,
        distance: slant_range(cfg.altitude_m, elevation),
        elevation,
    }
}

fn place_users<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Vec<UserGeometry>> {
    let array = ArrayGeometry::from_config(cfg)?;
    let mut users: Vec<UserGeometry> = Vec::with_capacity(cfg.n_users);
    let mut rows: Vec<Vec<Complex64>> = Vec::with_capacity(cfg.n_users);
    for k in 0..cfg.n_users {
        let mut draws = 0;
        loop {
            draws += 1;
            let cand = place_user(cfg, rng);
            if cfg.max_user_correlation >= 1.0 {
                users.push(cand);
                break;
            }
            let row = response_row(&array, &cand);
            let separated = rows.iter().all(|other| {
                let c: Complex64 = other.iter().zip(&row).map(|(a, b)| a.conj() * b).sum();
                c.norm() <= cfg.max_user_correlation
            });
            if separated {
                users.push(cand);
                rows.push(row);
                break;
            }
            if draws >= MAX_PLACEMENT_DRAWS {
                return Err(Error::DegenerateGeometry(format!(
                    "could not place user {k} with correlation <= {}",
                    cfg.max_user_correlation
                )));
            }
        }
    }
    Ok(users)
}

pub(crate) fn sample_user_states_with<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<Vec<UserChannelState>> {
    let symmetric = |rng: &mut R, bound: f64| -> f64 {
        if bound > 0.0 {
            rng.gen_range(-bound..=bound)
        } else {
            0.0
        }
    };
    let users = place_users(cfg, rng)?;
    Ok(users
        .into_iter()
        .map(|geometry| {
            let num_paths = rng.gen_range(1..=cfg.max_paths);
            let path_gains = (0..num_paths).map(|_| complex_normal(rng)).collect();
            let tau_mp = (0..num_paths)
                .map(|_| {
                    if cfg.delay_spread_s > 0.0 {
                        rng.gen_range(0.0..=cfg.delay_spread_s)
                    } else {
                        0.0
                    }
                })
                .collect();
            let nu_sat = symmetric(rng, cfg.max_sat_doppler_hz);
            let nu_ut_los = symmetric(rng, cfg.max_user_doppler_hz);
            let nu_ut_nlos = (0..num_paths)
                .map(|_| symmetric(rng, cfg.max_user_doppler_hz))
                .collect();
            UserChannelState {
                tau_los: geometry.distance / SPEED_OF_LIGHT,
                geometry,
                rician_kappa: cfg.rician_kappa,
                num_paths,
                path_gains,
                tau_mp,
                nu_sat,
                nu_ut_los,
                nu_ut_nlos,
                beta: 1.0,
            }
        })
        .collect())
}

/// Steering vector of one array axis, `exp(-jπ m D)/sqrt(M_d)` for m = 0..M_d.
fn steering(len: usize, direction: f64) -> impl Iterator<Item = Complex64> {
    let scale = 1.0 / (len as f64).sqrt();
    (0..len).map(move |m| Complex64::from_polar(scale, -PI * m as f64 * direction))
}

/// K×M matrix whose rows are the users' planar-array responses.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayResponseMatrix {
    pub a: DMatrix<Complex64>,
}

impl ArrayResponseMatrix {
    pub fn n_users(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_antennas(&self) -> usize {
        self.a.ncols()
    }
}

/// `v_x(sin θy cos θx) ⊗ v_y(cos θy)` for one user.
fn response_row(geometry: &ArrayGeometry, u: &UserGeometry) -> Vec<Complex64> {
    let dx = u.theta_y.sin() * u.theta_x.cos();
    let dy = u.theta_y.cos();
    let vy: Vec<Complex64> = steering(geometry.m_y(), dy).collect();
    steering(geometry.m_x(), dx)
        .flat_map(|vx| vy.iter().map(move |vy| vx * vy))
        .collect()
}

/// Row k is the planar-array response of user k.
pub fn upa_response(geometry: &ArrayGeometry, users: &[UserGeometry]) -> ArrayResponseMatrix {
    let mut a = DMatrix::zeros(users.len(), geometry.m());
    for (k, u) in users.iter().enumerate() {
        for (m, v) in response_row(geometry, u).into_iter().enumerate() {
            a[(k, m)] = v;
        }
    }
    ArrayResponseMatrix { a }
}

/// Scalar channel of one user at time `t` and frequency `f`, excluding
/// the array response.
pub fn channel_sample(state: &UserChannelState, t: f64, f: f64) -> Complex64 {
    let kappa = state.rician_kappa;
    let los = Complex64::from_polar(
        kappa.sqrt(),
        2.0 * PI * (t * state.nu_ut_los - f * state.tau_los),
    );
    let nlos: Complex64 = state
        .path_gains
        .iter()
        .zip(&state.tau_mp)
        .zip(&state.nu_ut_nlos)
        .map(|((g, tau_mp), nu)| {
            g * Complex64::cis(2.0 * PI * (t * nu - f * (state.tau_los + tau_mp)))
        })
        .sum::<Complex64>()
        / (state.num_paths as f64).sqrt();
    let outer = Complex64::from_polar(
        (state.beta / (kappa + 1.0)).sqrt(),
        2.0 * PI * t * state.nu_sat,
    );
    outer * (los + nlos)
}

/// Unit-modulus K×S matrix of satellite-Doppler and LoS-delay
/// pre-compensation phases.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensationMatrix {
    pub omega: DMatrix<Complex64>,
}

/// `Ω[k][s] = exp(-j2π(s·T_step·ν_sat,k − (c/T_sl)·τ_los,k))` for s = 1..S.
pub fn compensation_matrix(
    states: &[UserChannelState],
    cfg: &SystemConfig,
    subcarrier_offset: f64,
) -> CompensationMatrix {
    let n_sym = cfg.n_symbols();
    let step = cfg.symbol_step_s();
    let t_sl = cfg.symbol_duration_s();
    let omega = DMatrix::from_fn(states.len(), n_sym, |k, s| {
        let t = (s + 1) as f64 * step;
        let st = &states[k];
        Complex64::cis(-2.0 * PI * (t * st.nu_sat - subcarrier_offset / t_sl * st.tau_los))
    });
    CompensationMatrix { omega }
}

/// Effective (post-compensation) K×S channel; the estimation target.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannelMatrix {
    pub g: DMatrix<Complex64>,
    pub subcarrier_index: usize,
}

impl EffectiveChannelMatrix {
    pub fn n_users(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_symbols(&self) -> usize {
        self.g.ncols()
    }

    /// Columns `from..` as a new K×(S−from) matrix.
    pub fn columns_from(&self, from: usize) -> DMatrix<Complex64> {
        self.g.columns(from, self.g.ncols() - from).into_owned()
    }
}

/// `g[k][s] = h_k(s·T_sl, c·f_s) · Ω[k][s]` for symbols s = 1..S.
pub fn effective_channel(
    states: &[UserChannelState],
    cfg: &SystemConfig,
) -> EffectiveChannelMatrix {
    let c = cfg.subcarrier_offset();
    let f = cfg.subcarrier_frequency_hz();
    let t_sl = cfg.symbol_duration_s();
    let omega = compensation_matrix(states, cfg, c);
    let g = DMatrix::from_fn(states.len(), cfg.n_symbols(), |k, s| {
        channel_sample(&states[k], (s + 1) as f64 * t_sl, f) * omega.omega[(k, s)]
    });
    EffectiveChannelMatrix {
        g,
        subcarrier_index: cfg.subcarrier,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn user(theta_x: f64, theta_y: f64) -> UserGeometry {
        UserGeometry {
            theta_x,
            theta_y,
            distance: 1.0e6,
            elevation: 45.0,
        }
    }

    fn static_state(kappa: f64, gain: Complex64) -> UserChannelState {
        UserChannelState {
            geometry: user(0.0, 0.0),
            rician_kappa: kappa,
            num_paths: 1,
            path_gains: vec![gain],
            tau_los: 0.0,
            tau_mp: vec![0.0],
            nu_sat: 0.0,
            nu_ut_los: 0.0,
            nu_ut_nlos: vec![0.0],
            beta: 1.0,
        }
    }

    #[test]
    fn slant_range_limits() {
        assert!((slant_range(600e3, 90.0) - 600e3).abs() < 1e-6);
        let low = slant_range(600e3, 10.0);
        assert!(low > 1.9e6 && low < 2.0e6, "{low}");
    }

    #[test]
    fn path_loss_reference_value() {
        // 600 km at 2 GHz ≈ 154 dB
        let pl = path_loss_db(600e3, 2e9);
        assert!((pl - 154.03).abs() < 0.05, "{pl}");
    }

    #[test]
    fn single_element_array() {
        let g = ArrayGeometry::new(1, 1).unwrap();
        let a = upa_response(&g, &[user(0.3, 1.2), user(2.0, 0.1)]);
        for v in a.a.iter() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn broadside_row_is_flat() {
        let g = ArrayGeometry::new(4, 8).unwrap();
        let a = upa_response(&g, &[user(FRAC_PI_2, FRAC_PI_2)]);
        let expect = 1.0 / 32f64.sqrt();
        for v in a.a.iter() {
            assert!((v.re - expect).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn zero_array_dimension_rejected() {
        assert!(ArrayGeometry::new(0, 4).is_err());
    }

    #[test]
    fn los_only_limit() {
        let s = static_state(1e12, Complex64::new(0.3, -0.2));
        let h = channel_sample(&s, 0.0, 0.0);
        assert!((h - Complex64::new(1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn vanishing_nlos_term() {
        let s = static_state(1.0, Complex64::new(0.0, 0.0));
        let h = channel_sample(&s, 0.0, 0.0);
        assert!((h - Complex64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_compensation_is_all_ones() {
        let cfg = SystemConfig {
            n_users: 2,
            ..SystemConfig::default()
        };
        let states = vec![static_state(10.0, Complex64::new(1.0, 0.0)); 2];
        let om = compensation_matrix(&states, &cfg, cfg.subcarrier_offset());
        assert!(om
            .omega
            .iter()
            .all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn compensation_is_a_linear_phase_ramp() {
        let cfg = SystemConfig::default();
        let mut st = static_state(10.0, Complex64::new(1.0, 0.0));
        st.nu_sat = 31_234.5;
        let om = compensation_matrix(&[st], &cfg, cfg.subcarrier_offset()).omega;
        assert!((om[(0, 1)] - om[(0, 0)] * om[(0, 0)]).norm() < 1e-12);
        for v in om.iter() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn worst_case_sat_doppler_phase_step() {
        let cfg = SystemConfig::default();
        let mut st = static_state(10.0, Complex64::new(1.0, 0.0));
        st.nu_sat = 48_000.0;
        let om = compensation_matrix(&[st], &cfg, 0.0).omega;
        // hand value: T_sl = 272 / 30.72 MHz
        let step = 2.0 * PI * 48_000.0 * (272.0 / 30.72e6);
        let measured = (om[(0, 1)] * om[(0, 0)].conj()).arg();
        let expected = (-step).rem_euclid(2.0 * PI);
        let expected = if expected > PI {
            expected - 2.0 * PI
        } else {
            expected
        };
        assert!(
            (measured - expected).abs() < 1e-9,
            "{measured} vs {expected}"
        );
    }

    #[test]
    fn static_effective_channel_is_constant() {
        let cfg = SystemConfig {
            n_users: 1,
            ..SystemConfig::default()
        };
        let mut st = static_state(10.0, Complex64::new(0.0, 0.0));
        st.nu_sat = 12_000.0;
        st.tau_los = 2.1e-3;
        let g = effective_channel(&[st], &cfg).g;
        for s in 1..g.ncols() {
            assert!((g[(0, s)] - g[(0, 0)]).norm() < 1e-9);
        }
    }

    #[test]
    fn residual_los_phase_drift() {
        let cfg = SystemConfig {
            n_users: 1,
            ..SystemConfig::default()
        };
        let mut st = static_state(1e12, Complex64::new(0.0, 0.0));
        st.nu_sat = -40_000.0;
        st.nu_ut_los = 200.0;
        let g = effective_channel(&[st], &cfg).g;
        // rotation across 50 symbol steps
        let rot = (g[(0, 54)] * g[(0, 4)].conj()).arg();
        let expect = 2.0 * PI * 200.0 * 50.0 * cfg.symbol_duration_s();
        assert!((rot - expect).abs() < 1e-6, "{rot} vs {expect}");
    }

    #[test]
    fn sampled_states_respect_bounds() {
        let cfg = SystemConfig::default();
        let states = sample_user_states(&cfg, 42).unwrap();
        assert_eq!(states.len(), 10);
        for s in &states {
            assert!((1..=5).contains(&s.num_paths));
            assert_eq!(s.path_gains.len(), s.num_paths);
            assert!(s.delay_spread() <= cfg.delay_spread_s);
            assert!(s
                .tau_mp
                .iter()
                .all(|&t| (0.0..=cfg.delay_spread_s).contains(&t)));
            assert!(s.nu_sat.abs() <= 48e3);
            assert!(s.nu_ut_los.abs() <= 200.0);
            assert!(s.nu_ut_nlos.iter().all(|n| n.abs() <= 200.0));
            assert!(s.geometry.elevation >= 10.0);
            let d = slant_range(cfg.altitude_m, s.geometry.elevation);
            assert!((s.geometry.distance - d).abs() <= 0.01 * d);
            assert!(s.rician_kappa > 0.0 && s.beta > 0.0);
        }
        assert_eq!(states, sample_user_states(&cfg, 42).unwrap());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = SystemConfig {
            max_sat_doppler_hz: 0.0,
            ..SystemConfig::default()
        };
        assert!(sample_user_states(&cfg, 1).is_err());
    }

    #[test]
    fn separation_rule_holds() {
        let cfg = SystemConfig::default();
        let array = ArrayGeometry::from_config(&cfg).unwrap();
        for seed in 0..20 {
            let states = sample_user_states(&cfg, seed).unwrap();
            let users: Vec<_> = states.iter().map(|s| s.geometry).collect();
            let a = upa_response(&array, &users).a;
            let gram = &a * a.adjoint();
            for i in 0..10 {
                for j in 0..i {
                    assert!(gram[(i, j)].norm() <= 0.5 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn overcrowded_footprint_is_degenerate() {
        let cfg = SystemConfig {
            n_users: 40,
            array_mx: 2,
            array_my: 2,
            max_user_correlation: 0.05,
            ..SystemConfig::default()
        };
        assert!(matches!(
            sample_user_states(&cfg, 0),
            Err(Error::DegenerateGeometry(_))
        ));
    }
}
