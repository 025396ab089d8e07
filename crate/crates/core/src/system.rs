//! System configuration, the hybrid beamforming solution and the
//! physical-layer quantities evaluated on it (transmit power, SINR,
//! effective channels).
//!
//! Conventions:
//! * `ris` holds the RIS reflection coefficients `b_f = e^{j theta_f}` and
//!   `Theta = diag(ris)`.
//! * User channels `h_k` are stored unconjugated; user `k` receives through
//!   the row `h_k^H Theta G V`.
//! * RF chain `n` drives antennas `n*D .. (n+1)*D` of the row-major BS array.
//! * SINR targets and noise powers are linear; dB only appears at the
//!   configuration boundary.

use std::f64::consts::PI;

use nalgebra::Complex;
use rand::Rng;

use crate::channel::{ArrayGeometry, ChannelSet, ClusterSpec, PathLossModel, Position};
use crate::error::{Error, Result};
use crate::{CMat, CVec};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

/// Node placement. The BS sits at the origin, the RIS at
/// `(ris_distance, ris_height)`, users uniformly in a disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub ris_height: f64,
    pub user_center: Position,
    pub user_radius: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { ris_height: 10.0, user_center: Position { x: 100.0, y: 0.0 }, user_radius: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// BS antennas.
    pub m: usize,
    /// RF chains.
    pub n: usize,
    /// Users.
    pub k: usize,
    /// RIS rows and columns, `F = f1 * f2`.
    pub f1: usize,
    pub f2: usize,
    /// BS planar array rows and columns, `bs_rows * bs_cols = m`.
    pub bs_rows: usize,
    pub bs_cols: usize,
    /// Per-user SINR targets, linear.
    pub gamma: Vec<f64>,
    /// Per-user noise powers, watts.
    pub sigma2: Vec<f64>,
    /// Horizontal RIS position, metres.
    pub ris_distance: f64,
    /// Initial penalty factor.
    pub rho0: f64,
    /// Penalty scaling, `rho <- rho / c` after every inner loop.
    pub c: f64,
    /// Inner (relative objective decrease) and outer (stopping indicator) tolerances.
    pub eps1: f64,
    pub eps2: f64,
    pub outer_cap: usize,
    pub inner_cap: usize,
    /// Codebook oversampling for the individual design.
    pub codebook_oversampling: usize,
    pub geometry: Geometry,
    pub path_loss: PathLossModel,
    pub bs_ris_clusters: ClusterSpec,
    pub ris_user_clusters: ClusterSpec,
}

impl SystemConfig {
    /// 6x6 BS with 6 RF chains, 6x6 RIS, three users at 10 dB / -85 dBm.
    pub fn full_scale_defaults() -> Self {
        let k = 3;
        Self {
            m: 36,
            n: 6,
            k,
            f1: 6,
            f2: 6,
            bs_rows: 6,
            bs_cols: 6,
            gamma: vec![db_to_linear(10.0); k],
            sigma2: vec![dbm_to_watts(-85.0); k],
            ris_distance: 50.0,
            rho0: 1e-3,
            c: 0.9,
            eps1: 1e-4,
            eps2: 1e-7,
            outer_cap: 500,
            inner_cap: 50,
            codebook_oversampling: 2,
            geometry: Geometry::default(),
            path_loss: PathLossModel::default(),
            bs_ris_clusters: ClusterSpec::default(),
            ris_user_clusters: ClusterSpec::default(),
        }
    }

    /// Reduced scenario: 4x4 BS with 4 RF chains and a 4x4 RIS.
    pub fn desk_defaults() -> Self {
        Self { m: 16, n: 4, f1: 4, f2: 4, bs_rows: 4, bs_cols: 4, ..Self::full_scale_defaults() }
    }

    /// Antennas per RF chain.
    pub fn d(&self) -> usize {
        self.m / self.n.max(1)
    }

    /// RIS cells.
    pub fn f(&self) -> usize {
        self.f1 * self.f2
    }

    pub fn bs_array(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::half_wavelength(self.bs_rows, self.bs_cols)
    }

    pub fn ris_array(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::half_wavelength(self.f1, self.f2)
    }

    /// Sets the same SINR target (dB) for every user.
    pub fn with_gamma_db(mut self, gamma_db: f64) -> Self {
        self.gamma = vec![db_to_linear(gamma_db); self.k];
        self
    }

    /// Fully digital counterpart: one RF chain per antenna.
    pub fn fully_digital(&self) -> Self {
        Self { n: self.m, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m == 0 || self.n == 0 || self.k == 0 || self.f1 == 0 || self.f2 == 0 {
            return bad("m, n, k, f1 and f2 must all be positive".into());
        }
        if self.m % self.n != 0 {
            return bad(format!("m = {} is not a multiple of n = {}", self.m, self.n));
        }
        if self.k > self.n {
            return bad(format!("k = {} users exceeds n = {} RF chains", self.k, self.n));
        }
        if self.bs_rows * self.bs_cols != self.m {
            return bad(format!("BS array {}x{} does not have m = {} elements", self.bs_rows, self.bs_cols, self.m));
        }
        if self.gamma.len() != self.k || self.sigma2.len() != self.k {
            return bad(format!("need {} SINR targets and noise powers", self.k));
        }
        if self.gamma.iter().chain(&self.sigma2).any(|x| !(*x > 0.0) || !x.is_finite()) {
            return bad("SINR targets and noise powers must be positive".into());
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return bad(format!("penalty scale c = {} must lie in (0, 1)", self.c));
        }
        if !(self.rho0 > 0.0) || !(self.eps1 > 0.0) || !(self.eps2 > 0.0) {
            return bad("rho0, eps1 and eps2 must be positive".into());
        }
        if !(self.ris_distance.is_finite()) {
            return bad("ris_distance must be finite".into());
        }
        if self.outer_cap == 0 || self.inner_cap == 0 || self.codebook_oversampling == 0 {
            return bad("iteration caps and codebook oversampling must be positive".into());
        }
        Ok(())
    }
}

/// Digital precoder, sub-connected analog phases and RIS coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    /// `N x K` digital precoder, column `k` serves user `k`.
    pub w: CMat,
    /// One unit-modulus phase vector of length `D` per RF chain.
    pub v_blocks: Vec<CVec>,
    /// RIS reflection coefficients.
    pub ris: CVec,
}

impl BeamformingSolution {
    pub fn d(&self) -> usize {
        self.v_blocks.first().map_or(0, |v| v.len())
    }

    pub fn transmit_power(&self) -> f64 {
        transmit_power(&self.w, self.d())
    }

    pub fn analog(&self) -> CMat {
        assemble_analog(&self.v_blocks)
    }

    /// Largest `| |z| - 1 |` over analog and RIS entries.
    pub fn max_modulus_error(&self) -> f64 {
        self.v_blocks
            .iter()
            .flat_map(|v| v.iter())
            .chain(self.ris.iter())
            .map(|z| (z.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `D * sum_k ||w_k||^2`.
pub fn transmit_power(w: &CMat, d: usize) -> f64 {
    d as f64 * w.norm_squared()
}

/// Block-diagonal `M x N` analog beamformer.
pub fn assemble_analog(v_blocks: &[CVec]) -> CMat {
    let n = v_blocks.len();
    let d = v_blocks.first().map_or(0, |v| v.len());
    let mut v = CMat::zeros(n * d, n);
    for (i, block) in v_blocks.iter().enumerate() {
        v.view_mut((i * d, i), (d, 1)).copy_from(block);
    }
    v
}

/// Concatenation of the analog blocks.
pub fn stack_x(v_blocks: &[CVec]) -> CVec {
    let d = v_blocks.first().map_or(0, |v| v.len());
    CVec::from_fn(v_blocks.len() * d, |i, _| v_blocks[i / d][i % d])
}

/// Inverse of [`stack_x`].
pub fn unstack_x(x: &CVec, n: usize) -> Vec<CVec> {
    let d = x.len() / n;
    (0..n).map(|i| x.rows(i * d, d).into_owned()).collect()
}

/// `Z_j = diag(w_{j,1} I_D, ..., w_{j,N} I_D)` so that `V w_j = Z_j x`.
pub fn z_matrix(w_j: &CVec, d: usize) -> CMat {
    CMat::from_diagonal(&CVec::from_fn(w_j.len() * d, |i, _| w_j[i / d]))
}

/// Rows `h_k^H Theta G` (`K x M`) for RIS coefficients `ris`.
pub fn cascade(channels: &ChannelSet, ris: &CVec) -> CMat {
    let k = channels.num_users();
    let f = channels.num_cells();
    // row k of `weights` is (ris .* conj(h_k))^T
    let weights = CMat::from_fn(k, f, |u, c| ris[c] * channels.h[u][c].conj());
    weights * &channels.g
}

/// Effective user channels `h_k^H Theta G V` as rows of a `K x N` matrix.
pub fn effective_rows(channels: &ChannelSet, sol: &BeamformingSolution) -> CMat {
    cascade(channels, &sol.ris) * sol.analog()
}

/// Cached per-solution coefficients used by the block updates.
///
/// With `x = conj(ris)` (the RIS vector in conjugated form),
/// `x^H c[k][j] = h_eff_k w_j = d[k][j] . stack_x(v_blocks)`.
#[derive(Debug, Clone)]
pub struct EffectiveChannels {
    /// `K x N`, row `k` is `h_k^H Theta G V`.
    pub h_eff: CMat,
    /// `c[k][j] = diag(h_k^H) G V w_j`, length `F`.
    pub c_coeffs: Vec<Vec<CVec>>,
    /// Entries of the row `d[k][j] = ris^T diag(h_k^H) G Z_j`, length `M`.
    pub d_coeffs: Vec<Vec<CVec>>,
}

impl EffectiveChannels {
    pub fn compute(channels: &ChannelSet, sol: &BeamformingSolution) -> Self {
        let k = channels.num_users();
        let d = sol.d();
        let casc = cascade(channels, &sol.ris);
        let v = sol.analog();
        let h_eff = &casc * &v;
        let gv = &channels.g * &v;
        let c_coeffs = (0..k)
            .map(|u| {
                (0..k)
                    .map(|j| {
                        let gvw = &gv * sol.w.column(j);
                        CVec::from_fn(gvw.len(), |f, _| channels.h[u][f].conj() * gvw[f])
                    })
                    .collect()
            })
            .collect();
        let d_coeffs = (0..k)
            .map(|u| {
                (0..k)
                    .map(|j| CVec::from_fn(casc.ncols(), |m, _| casc[(u, m)] * sol.w[(m / d, j)]))
                    .collect()
            })
            .collect();
        Self { h_eff, c_coeffs, d_coeffs }
    }
}

fn sinr_from_products(products: &CMat, k: usize, noise: f64) -> f64 {
    let signal = products[(k, k)].norm_sqr();
    let interference: f64 = (0..products.ncols()).filter(|&j| j != k).map(|j| products[(k, j)].norm_sqr()).sum();
    signal / (interference + noise)
}

/// SINR of user `k`.
pub fn sinr(k: usize, sol: &BeamformingSolution, channels: &ChannelSet) -> f64 {
    let products = effective_rows(channels, sol) * &sol.w;
    sinr_from_products(&products, k, channels.noise_powers[k])
}

/// SINR of every user.
pub fn sinr_all(sol: &BeamformingSolution, channels: &ChannelSet) -> Vec<f64> {
    let products = effective_rows(channels, sol) * &sol.w;
    (0..channels.num_users()).map(|k| sinr_from_products(&products, k, channels.noise_powers[k])).collect()
}

/// SINR of every user for a fully digital `M x K` precoder (analog stage bypassed).
pub fn sinr_fully_digital(channels: &ChannelSet, ris: &CVec, precoder: &CMat) -> Vec<f64> {
    let products = cascade(channels, ris) * precoder;
    (0..channels.num_users()).map(|k| sinr_from_products(&products, k, channels.noise_powers[k])).collect()
}

/// Worst-user SINR margin over target, dB (negative when a target is missed).
pub fn min_sinr_margin_db(sinrs: &[f64], gamma: &[f64]) -> f64 {
    sinrs.iter().zip(gamma).map(|(s, g)| linear_to_db(*s) - linear_to_db(*g)).fold(f64::INFINITY, f64::min)
}

/// Independent uniform phases on the unit circle.
pub fn random_phases<R: Rng + ?Sized>(len: usize, rng: &mut R) -> CVec {
    CVec::from_fn(len, |_, _| Complex::from_polar(1.0, rng.random::<f64>() * 2.0 * PI))
}

/// Keeps the phases, forces unit magnitude. Zero entries map to 1.
pub fn to_unit_modulus(z: &CVec) -> CVec {
    z.map(|c| {
        let r = c.norm();
        if r > 0.0 {
            c / r
        } else {
            Complex::new(1.0, 0.0)
        }
    })
}
