//! Clustered (Saleh-Valenzuela) mmWave channels between a BS, an RIS and
//! single-antenna users.
//!
//! Both ends of a link are uniform planar arrays. Ray gains are circularly
//! symmetric complex Gaussian with variance `10^(-PL/10)`, so distance
//! dependent path loss and log-normal shadowing are folded directly into the
//! ray gains. A single-antenna endpoint is just a 1x1 array whose response is
//! the scalar 1.
//!
//! Angles are drawn statistically: every cluster gets a uniform azimuth in
//! `[0, 2pi)` and a uniform elevation in `[0, pi)` at each end, and the rays of
//! a cluster scatter around the centre with Laplacian offsets.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::Complex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::system::SystemConfig;
use crate::{CMat, CVec};

/// Uniform planar array with `rows x cols` elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in wavelengths.
    pub spacing_over_wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(rows: usize, cols: usize, spacing_over_wavelength: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig(format!(
                "array must have at least one element, got {rows}x{cols}"
            )));
        }
        if !(spacing_over_wavelength > 0.0) || !spacing_over_wavelength.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "element spacing must be positive, got {spacing_over_wavelength}"
            )));
        }
        Ok(Self { rows, cols, spacing_over_wavelength })
    }

    /// Half-wavelength array.
    pub fn half_wavelength(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, 0.5)
    }

    /// Single isotropic antenna.
    pub fn single() -> Self {
        Self { rows: 1, cols: 1, spacing_over_wavelength: 0.5 }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Array response towards azimuth `phi` and elevation `delta` (radians).
///
/// Entry `o * cols + p` (row `o` major, column `p` minor) is
/// `exp(j 2pi d/lambda (o sin(phi) sin(delta) + p cos(delta))) / sqrt(rows cols)`.
pub fn upa_response(phi: f64, delta: f64, geom: &ArrayGeometry) -> CVec {
    let n = geom.len();
    let scale = 1.0 / (n as f64).sqrt();
    let k = 2.0 * PI * geom.spacing_over_wavelength;
    let row_phase = k * phi.sin() * delta.sin();
    let col_phase = k * delta.cos();
    CVec::from_fn(n, |idx, _| {
        let o = (idx / geom.cols) as f64;
        let p = (idx % geom.cols) as f64;
        Complex::from_polar(scale, o * row_phase + p * col_phase)
    })
}

/// Cluster/ray structure of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSpec {
    pub num_clusters: usize,
    pub rays_per_cluster: usize,
    /// Standard deviation of the Laplacian intra-cluster angle offset, degrees.
    pub angular_spread_deg: f64,
}

impl ClusterSpec {
    pub fn new(num_clusters: usize, rays_per_cluster: usize) -> Result<Self> {
        if num_clusters == 0 || rays_per_cluster == 0 {
            return Err(Error::InvalidConfig(format!(
                "need at least one cluster and one ray, got {num_clusters} x {rays_per_cluster}"
            )));
        }
        Ok(Self { num_clusters, rays_per_cluster, angular_spread_deg: 5.0 })
    }

    pub fn total_rays(&self) -> usize {
        self.num_clusters * self.rays_per_cluster
    }
}

impl Default for ClusterSpec {
    fn default() -> Self {
        Self { num_clusters: 2, rays_per_cluster: 5, angular_spread_deg: 5.0 }
    }
}

/// Angles of arrival/departure (azimuth, elevation) of a single ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub gain: Complex<f64>,
    pub rx_angles: (f64, f64),
    pub tx_angles: (f64, f64),
}

/// Builds `sqrt(N_rx N_tx / L) * sum_l gain_l a_rx(l) a_tx(l)^H` for the given rays.
pub fn cluster_channel(tx: &ArrayGeometry, rx: &ArrayGeometry, rays: &[Ray]) -> CMat {
    let scale = ((tx.len() * rx.len()) as f64 / rays.len().max(1) as f64).sqrt();
    let mut out = CMat::zeros(rx.len(), tx.len());
    for ray in rays {
        let a_rx = upa_response(ray.rx_angles.0, ray.rx_angles.1, rx);
        let a_tx = upa_response(ray.tx_angles.0, ray.tx_angles.1, tx);
        out += (a_rx * a_tx.adjoint()) * (ray.gain * scale);
    }
    out
}

fn laplace<R: Rng + ?Sized>(rng: &mut R, std_dev: f64) -> f64 {
    let b = std_dev / SQRT_2;
    let u: f64 = rng.random::<f64>() - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

/// Circularly symmetric complex Gaussian with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex<f64> {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(re * s, im * s)
}

/// Draws the rays of one link. The number of random draws depends only on
/// the cluster spec, never on the array sizes.
pub fn draw_rays<R: Rng + ?Sized>(spec: &ClusterSpec, gain_variance: f64, rng: &mut R) -> Vec<Ray> {
    let spread = spec.angular_spread_deg.to_radians();
    let mut rays = Vec::with_capacity(spec.total_rays());
    for _ in 0..spec.num_clusters {
        let rx_c = (rng.random::<f64>() * 2.0 * PI, rng.random::<f64>() * PI);
        let tx_c = (rng.random::<f64>() * 2.0 * PI, rng.random::<f64>() * PI);
        for _ in 0..spec.rays_per_cluster {
            let rx_angles = (rx_c.0 + laplace(rng, spread), rx_c.1 + laplace(rng, spread));
            let tx_angles = (tx_c.0 + laplace(rng, spread), tx_c.1 + laplace(rng, spread));
            let gain = complex_gaussian(rng, gain_variance);
            rays.push(Ray { gain, rx_angles, tx_angles });
        }
    }
    rays
}

/// Samples an `rx.len() x tx.len()` clustered channel whose ray gains are
/// `CN(0, gain_variance)`.
pub fn sample_cluster_channel<R: Rng + ?Sized>(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    spec: &ClusterSpec,
    gain_variance: f64,
    rng: &mut R,
) -> Result<CMat> {
    if !(gain_variance > 0.0) || !gain_variance.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "ray gain variance must be positive, got {gain_variance}"
        )));
    }
    let rays = draw_rays(spec, gain_variance, rng);
    Ok(cluster_channel(tx, rx, &rays))
}

/// Log-distance path loss with log-normal shadowing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub intercept_db: f64,
    pub slope: f64,
    pub shadowing_std_db: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self { intercept_db: 72.0, slope: 2.92, shadowing_std_db: 8.7 }
    }
}

pub fn path_loss_db(distance_m: f64, model: &PathLossModel, shadowing_db: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::NonPositiveDistance(distance_m));
    }
    Ok(model.intercept_db + 10.0 * model.slope * distance_m.log10() + shadowing_db)
}

/// Linear power gain `10^(-PL/10)`.
pub fn db_to_gain(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Point in the horizontal plane, metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One channel realization: BS->RIS matrix and RIS->user vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `F x M` BS->RIS channel.
    pub g: CMat,
    /// RIS->user channels, unconjugated: user `k` sees the row `h[k]^H`.
    pub h: Vec<CVec>,
    /// Receiver noise powers, linear watts.
    pub noise_powers: Vec<f64>,
    pub user_positions: Vec<Position>,
}

impl ChannelSet {
    pub fn num_users(&self) -> usize {
        self.h.len()
    }

    pub fn num_cells(&self) -> usize {
        self.g.nrows()
    }

    pub fn num_antennas(&self) -> usize {
        self.g.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.num_cells();
        if self.noise_powers.len() != self.h.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} user channels but {} noise powers",
                self.h.len(),
                self.noise_powers.len()
            )));
        }
        for (k, hk) in self.h.iter().enumerate() {
            if hk.len() != f {
                return Err(Error::DimensionMismatch(format!(
                    "user {k} channel has length {} but RIS has {f} cells",
                    hk.len()
                )));
            }
        }
        let finite = self.g.iter().chain(self.h.iter().flat_map(|v| v.iter())).all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite || self.noise_powers.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig("channel set has non-finite entries or noise".into()));
        }
        Ok(())
    }

    /// Scales the BS->RIS channel by `amplitude` and every noise power by
    /// `amplitude^2`.
    pub fn scaled(&self, amplitude: f64) -> Self {
        Self {
            g: &self.g * Complex::from(amplitude),
            h: self.h.clone(),
            noise_powers: self.noise_powers.iter().map(|s| s * amplitude * amplitude).collect(),
            user_positions: self.user_positions.clone(),
        }
    }
}

/// Draws users, shadowing and both links for one realization.
///
/// Draw order is fixed (user positions, shadowing, BS->RIS rays, RIS->user
/// rays) and none of the draw counts depend on the array sizes or the RIS
/// position, so sweeps over those parameters see the same underlying
/// randomness at a given seed.
pub fn generate_scenario(config: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geo = &config.geometry;

    let user_positions: Vec<Position> = (0..config.k)
        .map(|_| {
            let r = geo.user_radius * rng.random::<f64>().sqrt();
            let a = rng.random::<f64>() * 2.0 * PI;
            Position { x: geo.user_center.x + r * a.cos(), y: geo.user_center.y + r * a.sin() }
        })
        .collect();
    let mut shadow = || -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * config.path_loss.shadowing_std_db
    };
    let bs_ris_shadow = shadow();
    let user_shadows: Vec<f64> = (0..config.k).map(|_| shadow()).collect();

    let bs = Position { x: 0.0, y: 0.0 };
    let ris = Position { x: config.ris_distance, y: geo.ris_height };

    let bs_geom = config.bs_array()?;
    let ris_geom = config.ris_array()?;

    let pl = path_loss_db(bs.distance(&ris), &config.path_loss, bs_ris_shadow)?;
    let g = sample_cluster_channel(&bs_geom, &ris_geom, &config.bs_ris_clusters, db_to_gain(pl), &mut rng)?;

    let user = ArrayGeometry::single();
    let mut h = Vec::with_capacity(config.k);
    for (pos, sh) in user_positions.iter().zip(&user_shadows) {
        let pl = path_loss_db(ris.distance(pos), &config.path_loss, *sh)?;
        // 1 x F row h_k^H; store the conjugate transpose
        let row = sample_cluster_channel(&ris_geom, &user, &config.ris_user_clusters, db_to_gain(pl), &mut rng)?;
        h.push(row.adjoint().column(0).into_owned());
    }

    Ok(ChannelSet { g, h, noise_powers: config.sigma2.clone(), user_positions })
}
