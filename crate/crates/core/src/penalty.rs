//! Two-layer penalty method for joint hybrid beamforming and RIS design.
//!
//! Auxiliary variables `t[k][j]` stand in for the received amplitudes
//! `h_eff_k w_j`, which moves the SINR constraints onto `t` and leaves the
//! coupling as a quadratic penalty
//!
//! ```text
//! D sum_k ||w_k||^2 + rho/2 sum_{k,j} |h_eff_k w_j - t[k][j]|^2
//! ```
//!
//! The inner layer cycles through exact/descent updates of `W`, the RIS
//! coefficients, the analog phases and `t` until the penalized objective
//! stalls; the outer layer then grows `rho <- rho / c`. The method stops once
//! the largest squared coupling violation `xi` drops below `eps2`.
//!
//! The solver works on a rescaled copy of the channels: each user channel is
//! divided by its noise standard deviation and all channels share one gain
//! factor chosen so the average cascaded per-path gain is one. SINR is
//! invariant under this change of units, so the solution maps back to the
//! physical channels by scaling `W`. `xi`, `rho` and the objective values in
//! [`Diagnostics`] are reported in the rescaled units.

use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{complex_gaussian, ChannelSet};
use crate::error::{Error, Result};
use crate::manifold::{rcg_minimize, QuadraticUnitModulusObjective, RcgOptions};
use crate::system::{
    cascade, effective_rows, random_phases, sinr_all, stack_x, unstack_x, BeamformingSolution, SystemConfig,
};
use crate::{CMat, CVec};

const BISECTION_ITERS: usize = 200;
const CONE_TOL: f64 = 1e-12;

/// Auxiliary variables and penalty bookkeeping.
#[derive(Debug, Clone)]
pub struct PenaltyState {
    /// `t[(k, j)]` approximates `h_eff_k w_j`.
    pub t: CMat,
    pub rho: f64,
    pub xi: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    /// Penalized objective after every inner pass.
    pub objective_trace: Vec<f64>,
}

impl PenaltyState {
    pub fn new(t: CMat, rho: f64) -> Self {
        Self { t, rho, xi: f64::INFINITY, inner_iters: 0, outer_iters: 0, objective_trace: Vec::new() }
    }
}

/// One line of the convergence trace, written after every inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterRecord {
    pub outer_iter: usize,
    /// Penalty factor the inner loop ran with.
    pub rho: f64,
    pub objective: f64,
    pub xi: f64,
    pub inner_iters: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub records: Vec<OuterRecord>,
    pub total_inner_iters: usize,
    /// Largest relative increase of the penalized objective caused by any
    /// single block update (should stay at round-off level).
    pub max_block_increase: f64,
    /// Amplitude factor applied to the channels internally; physical
    /// `W = scale * W_internal`.
    pub channel_scale: f64,
}

impl Diagnostics {
    pub fn xi_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.xi).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Run the RIS block update; when false the RIS stays at its initial value.
    pub optimize_ris: bool,
    /// Start (or, with `optimize_ris = false`, fixed) RIS coefficients.
    /// Uniform random phases when `None`.
    pub initial_ris: Option<CVec>,
    pub rcg: RcgOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            optimize_ris: true,
            initial_ris: None,
            rcg: RcgOptions { max_iters: 50, grad_tol: 1e-8, ..RcgOptions::default() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Solution on the physical channels.
    pub solution: BeamformingSolution,
    /// Final penalty state, in internal units.
    pub state: PenaltyState,
    pub diagnostics: Diagnostics,
    /// `xi < eps2` was reached within the outer-iteration cap.
    pub converged: bool,
    /// Achieved SINR per user on the physical channels, linear.
    pub sinr: Vec<f64>,
}

/// `h_eff_k w_j` for all `(k, j)`.
pub fn received_amplitudes(channels: &ChannelSet, sol: &BeamformingSolution) -> CMat {
    effective_rows(channels, sol) * &sol.w
}

/// `D sum ||w_k||^2 + rho/2 sum |h_eff_k w_j - t[k][j]|^2`.
pub fn penalized_objective(channels: &ChannelSet, sol: &BeamformingSolution, state: &PenaltyState) -> f64 {
    let mismatch = received_amplitudes(channels, sol) - &state.t;
    sol.transmit_power() + 0.5 * state.rho * mismatch.norm_squared()
}

/// `max_{k,j} |h_eff_k w_j - t[k][j]|^2`.
pub fn stopping_indicator(channels: &ChannelSet, sol: &BeamformingSolution, state: &PenaltyState) -> f64 {
    (received_amplitudes(channels, sol) - &state.t).iter().map(|z| z.norm_sqr()).fold(0.0, f64::max)
}

/// Exact minimizer over `W`: `(2D I + rho H^H H) w_k = rho sum_j h_eff_j^H t[j][k]`.
pub fn update_digital(channels: &ChannelSet, sol: &BeamformingSolution, state: &PenaltyState) -> CMat {
    let h = effective_rows(channels, sol);
    let n = h.ncols();
    let rho = Complex::from(state.rho);
    let a = CMat::identity(n, n) * Complex::from(2.0 * sol.d() as f64) + h.ad_mul(&h) * rho;
    let rhs = h.ad_mul(&state.t) * rho;
    a.cholesky().expect("2D I + rho H^H H is positive definite").solve(&rhs)
}

/// RIS block: minimizes `sum |x^H c[k][j] - t[k][j]|^2` over `x = conj(ris)`
/// with `c[k][j] = diag(h_k^H) G V w_j`, warm-started at the current RIS.
pub fn update_theta(channels: &ChannelSet, sol: &BeamformingSolution, state: &PenaltyState, opts: &RcgOptions) -> Result<CVec> {
    let k = channels.num_users();
    let f = channels.num_cells();
    let gvw = &channels.g * (sol.analog() * &sol.w); // F x K
    let mut coeffs = CMat::zeros(f, k * k);
    let mut targets = CVec::zeros(k * k);
    for u in 0..k {
        for j in 0..k {
            let col = u * k + j;
            for cell in 0..f {
                coeffs[(cell, col)] = channels.h[u][cell].conj() * gvw[(cell, j)];
            }
            targets[col] = state.t[(u, j)];
        }
    }
    let obj = QuadraticUnitModulusObjective::from_columns(coeffs, &targets)?;
    let out = rcg_minimize(&obj, &sol.ris.conjugate(), opts)?;
    Ok(out.point.conjugate())
}

/// Analog block: minimizes `sum |d[k][j] x - t[k][j]|^2` over the stacked
/// phases `x`, with `d[k][j] = ris^T diag(h_k^H) G Z_j`.
pub fn update_analog(channels: &ChannelSet, sol: &BeamformingSolution, state: &PenaltyState, opts: &RcgOptions) -> Result<Vec<CVec>> {
    let k = channels.num_users();
    let d = sol.d();
    let casc = cascade(channels, &sol.ris);
    let m = casc.ncols();
    let mut coeffs = CMat::zeros(m, k * k);
    let mut targets = CVec::zeros(k * k);
    for u in 0..k {
        for j in 0..k {
            let col = u * k + j;
            for a in 0..m {
                coeffs[(a, col)] = (casc[(u, a)] * sol.w[(a / d, j)]).conj();
            }
            // the objective is written in conjugated form: |x^H d^H - conj(t)|
            targets[col] = state.t[(u, j)].conj();
        }
    }
    let obj = QuadraticUnitModulusObjective::from_columns(coeffs, &targets)?;
    let out = rcg_minimize(&obj, &stack_x(&sol.v_blocks), opts)?;
    Ok(unstack_x(&out.point, sol.v_blocks.len()))
}

/// Projection of one user's amplitude row onto its SINR cone.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeProjection {
    pub t: Vec<Complex<f64>>,
    /// KKT multiplier in `[0, 1]`; 0 when the input was already feasible.
    pub multiplier: f64,
}

/// Euclidean projection of `a` onto
/// `{t : |t_k|^2 >= gamma (sum_{j != k} |t_j|^2 + sigma2)}`.
///
/// Stationarity gives `t_j = a_j / (1 + lambda gamma)` for `j != k` and
/// `t_k = a_k / (1 - lambda)`. The active constraint is solved for `r = |t_k|`
/// by bisection on `[|a_k|, sqrt(gamma (sum |a_j|^2 + sigma2))]`, where it is
/// monotone, with `lambda = 1 - |a_k| / r`. A zero `a_k` takes phase 0.
pub fn project_sinr_cone(a: &[Complex<f64>], k: usize, gamma: f64, sigma2: f64) -> Result<ConeProjection> {
    let ak = a[k].norm();
    let interference: f64 = a.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, z)| z.norm_sqr()).sum();
    let bound = gamma * (interference + sigma2);
    if ak * ak >= bound {
        return Ok(ConeProjection { t: a.to_vec(), multiplier: 0.0 });
    }
    let phase = if ak > 0.0 { a[k] / ak } else { Complex::new(1.0, 0.0) };

    let residual = |r: f64| {
        let shrink = 1.0 + gamma - gamma * ak / r;
        r * r - gamma * (interference / (shrink * shrink) + sigma2)
    };
    let r = if ak == 0.0 {
        (gamma * (interference / ((1.0 + gamma) * (1.0 + gamma)) + sigma2)).sqrt()
    } else {
        let (mut lo, mut hi) = (ak, bound.sqrt());
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let res = residual(r).abs() / bound;
    if !(res <= CONE_TOL) {
        return Err(Error::ProjectionFailed { user: k, residual: res });
    }

    let multiplier = 1.0 - ak / r;
    let shrink = 1.0 + multiplier * gamma;
    let t = a.iter().enumerate().map(|(j, z)| if j == k { phase * r } else { z / shrink }).collect();
    Ok(ConeProjection { t, multiplier })
}

/// Projects every row of the current amplitudes onto its user's SINR cone.
pub fn update_t(channels: &ChannelSet, sol: &BeamformingSolution, gamma: &[f64]) -> Result<CMat> {
    project_rows(&received_amplitudes(channels, sol), gamma, &channels.noise_powers)
}

pub(crate) fn project_rows(amplitudes: &CMat, gamma: &[f64], noise: &[f64]) -> Result<CMat> {
    let k = amplitudes.nrows();
    let mut t = CMat::zeros(k, amplitudes.ncols());
    for u in 0..k {
        let row: Vec<_> = amplitudes.row(u).iter().copied().collect();
        let proj = project_sinr_cone(&row, u, gamma[u], noise[u])?;
        for (j, z) in proj.t.into_iter().enumerate() {
            t[(u, j)] = z;
        }
    }
    Ok(t)
}

/// Rescales the channels so every noise power is one and the average
/// per-path cascaded gain `mean_k sum_f |h_kf|^2 ||G_f||^2` is one.
///
/// Returns the rescaled set and the amplitude factor `s` such that a
/// precoder `W` designed on the rescaled set achieves the same SINRs on the
/// original channels as `s W`.
pub fn normalize_channels(channels: &ChannelSet) -> (ChannelSet, f64) {
    let row_gain: Vec<f64> = channels.g.row_iter().map(|r| r.norm_squared()).collect();
    let mean_gain = channels
        .h
        .iter()
        .zip(&channels.noise_powers)
        .map(|(hk, s2)| hk.iter().zip(&row_gain).map(|(z, g)| z.norm_sqr() * g).sum::<f64>() / s2)
        .sum::<f64>()
        / channels.num_users() as f64;
    let scale = if mean_gain > 0.0 && mean_gain.is_finite() { mean_gain.sqrt() } else { 1.0 };
    let h = channels
        .h
        .iter()
        .zip(&channels.noise_powers)
        .map(|(hk, s2)| hk * Complex::from(1.0 / (scale * s2.sqrt())))
        .collect();
    let normalized = ChannelSet {
        g: channels.g.clone(),
        h,
        noise_powers: vec![1.0; channels.num_users()],
        user_positions: channels.user_positions.clone(),
    };
    (normalized, 1.0 / scale)
}

/// Penalty solver with default options.
pub fn solve(config: &SystemConfig, channels: &ChannelSet, init_seed: u64) -> Result<SolveOutcome> {
    solve_with(config, channels, init_seed, &SolveOptions::default())
}

pub fn solve_with(config: &SystemConfig, channels: &ChannelSet, init_seed: u64, opts: &SolveOptions) -> Result<SolveOutcome> {
    config.validate()?;
    channels.validate()?;
    if channels.num_users() != config.k || channels.num_cells() != config.f() || channels.num_antennas() != config.m {
        return Err(Error::DimensionMismatch(format!(
            "channels are {} users / {} cells / {} antennas, config expects {} / {} / {}",
            channels.num_users(),
            channels.num_cells(),
            channels.num_antennas(),
            config.k,
            config.f(),
            config.m
        )));
    }
    let (work, scale) = normalize_channels(channels);
    let k = config.k;
    let d = config.d();
    let mut rng = ChaCha8Rng::seed_from_u64(init_seed);

    let ris = match &opts.initial_ris {
        Some(r) if r.len() != config.f() => {
            return Err(Error::DimensionMismatch(format!("initial RIS has {} entries, expected {}", r.len(), config.f())))
        }
        Some(r) => r.clone(),
        None => random_phases(config.f(), &mut rng),
    };
    let v_blocks: Vec<CVec> = (0..config.n).map(|_| random_phases(d, &mut rng)).collect();
    let t0 = CMat::from_fn(k, k, |_, _| complex_gaussian(&mut rng, 1.0));
    let mut sol = BeamformingSolution { w: CMat::zeros(config.n, k), v_blocks, ris };
    let mut state = PenaltyState::new(project_rows(&t0, &config.gamma, &work.noise_powers)?, config.rho0);
    sol.w = update_digital(&work, &sol, &state);

    let mut diag = Diagnostics { channel_scale: scale, ..Default::default() };
    let mut converged = false;
    let mut objective = penalized_objective(&work, &sol, &state);

    let track = |before: f64, after: f64, diag: &mut Diagnostics| {
        let rel = (after - before) / before.abs().max(f64::MIN_POSITIVE);
        diag.max_block_increase = diag.max_block_increase.max(rel);
        after
    };

    for outer in 0..config.outer_cap {
        let mut inner_count = 0;
        for _ in 0..config.inner_cap {
            let start = objective;

            sol.w = update_digital(&work, &sol, &state);
            let mut current = track(start, penalized_objective(&work, &sol, &state), &mut diag);

            if opts.optimize_ris {
                sol.ris = update_theta(&work, &sol, &state, &opts.rcg)?;
                current = track(current, penalized_objective(&work, &sol, &state), &mut diag);
            }

            sol.v_blocks = update_analog(&work, &sol, &state, &opts.rcg)?;
            current = track(current, penalized_objective(&work, &sol, &state), &mut diag);

            state.t = update_t(&work, &sol, &config.gamma)?;
            current = track(current, penalized_objective(&work, &sol, &state), &mut diag);

            objective = current;
            inner_count += 1;
            state.objective_trace.push(objective);
            if start - current < config.eps1 * start.abs() {
                break;
            }
        }
        state.inner_iters += inner_count;
        state.outer_iters = outer + 1;
        state.xi = stopping_indicator(&work, &sol, &state);
        diag.total_inner_iters += inner_count;
        diag.records.push(OuterRecord { outer_iter: outer + 1, rho: state.rho, objective, xi: state.xi, inner_iters: inner_count });
        if state.xi < config.eps2 {
            converged = true;
            break;
        }
        state.rho /= config.c;
        objective = penalized_objective(&work, &sol, &state);
    }

    sol.w *= Complex::from(scale);
    let sinr = sinr_all(&sol, channels);
    Ok(SolveOutcome { solution: sol, state, diagnostics: diag, converged, sinr })
}
