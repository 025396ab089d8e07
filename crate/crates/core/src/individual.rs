//! Sequential low-complexity design: RIS phases first, then the analog
//! beamformer, then the digital precoder, with no alternation between them.
//!
//! 1. RIS: maximize the weakest user's cascaded gain `min_k ||h_k^H Theta G||^2`.
//!    Solved by manifold ascent on a log-sum-exp smoothed minimum whose
//!    sharpness is raised over a few continuation rounds.
//! 2. Analog: orthogonal matching pursuit against the zero-forcing fully
//!    digital precoder, choosing one oversampled-grid codeword per RF chain
//!    restricted to that chain's antennas.
//! 3. Digital: minimum power precoder meeting every SINR target for the
//!    fixed effective channels, via uplink-downlink duality.

use std::f64::consts::PI;

use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{upa_response, ArrayGeometry, ChannelSet};
use crate::error::{Error, Result};
use crate::manifold::{rcg_minimize, RcgOptions, UnitModulusCost};
use crate::penalty::normalize_channels;
use crate::system::{cascade, random_phases, to_unit_modulus, BeamformingSolution, SystemConfig};
use crate::{CMat, CVec};

/// Label recorded with every individual-design result.
pub const RIS_METHOD: &str = "smoothed-min manifold ascent (continuation)";

const FIXED_POINT_ITERS: usize = 20_000;
const FIXED_POINT_TOL: f64 = 1e-10;
// changes below this that stop shrinking are round-off
const FIXED_POINT_FLOOR: f64 = 1e-8;
const FLOOR_PATIENCE: usize = 100;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct MaxMinOptions {
    /// Smoothing sharpness per continuation round, relative to the mean gain.
    pub sharpness: Vec<f64>,
    /// Random unit-modulus candidates screened for start points.
    pub random_candidates: usize,
    /// Best candidates refined by continuation.
    pub starts: usize,
    pub seed: u64,
    pub rcg: RcgOptions,
}

impl Default for MaxMinOptions {
    fn default() -> Self {
        Self {
            sharpness: vec![1.0, 10.0, 100.0],
            random_candidates: 16,
            starts: 3,
            seed: 0,
            rcg: RcgOptions { max_iters: 300, grad_tol: 1e-10, ..RcgOptions::default() },
        }
    }
}

/// Per-user maps `x -> h_k^H diag(x) G` as `M x F` matrices.
fn gain_maps(channels: &ChannelSet) -> Vec<CMat> {
    let g_t = channels.g.transpose();
    channels
        .h
        .iter()
        .map(|hk| {
            let mut p = g_t.clone();
            for (f, mut col) in p.column_iter_mut().enumerate() {
                col *= hk[f].conj();
            }
            p
        })
        .collect()
}

/// Cascaded gains `||h_k^H diag(ris) G||^2` for every user.
pub fn cascaded_gains(channels: &ChannelSet, ris: &CVec) -> Vec<f64> {
    cascade(channels, ris).row_iter().map(|r| r.norm_squared()).collect()
}

/// `min_k ||h_k^H diag(ris) G||^2`.
pub fn min_gain(channels: &ChannelSet, ris: &CVec) -> f64 {
    cascaded_gains(channels, ris).into_iter().fold(f64::INFINITY, f64::min)
}

/// Negated smoothed minimum, `(1/tau) log sum_k exp(-tau g_k)`.
struct SmoothedMinCost<'a> {
    maps: &'a [CMat],
    tau: f64,
}

impl SmoothedMinCost<'_> {
    fn gains(&self, x: &CVec) -> (Vec<CVec>, Vec<f64>) {
        let v: Vec<CVec> = self.maps.iter().map(|p| p * x).collect();
        let g = v.iter().map(|vk| vk.norm_squared()).collect();
        (v, g)
    }

    fn weights(&self, g: &[f64]) -> (f64, Vec<f64>) {
        let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
        let e: Vec<f64> = g.iter().map(|gk| (-self.tau * (gk - lo)).exp()).collect();
        let s: f64 = e.iter().sum();
        (lo - s.ln() / self.tau, e.into_iter().map(|ek| ek / s).collect())
    }
}

impl UnitModulusCost for SmoothedMinCost<'_> {
    fn dim(&self) -> usize {
        self.maps[0].ncols()
    }

    fn cost(&self, x: &CVec) -> f64 {
        let (_, g) = self.gains(x);
        -self.weights(&g).0
    }

    fn euclidean_grad(&self, x: &CVec) -> CVec {
        let (v, g) = self.gains(x);
        let (_, pi) = self.weights(&g);
        let mut grad = CVec::zeros(x.len());
        for ((p, vk), w) in self.maps.iter().zip(&v).zip(&pi) {
            grad -= p.ad_mul(vk) * Complex::from(2.0 * w);
        }
        grad
    }
}

fn principal_direction(q: &CMat) -> CVec {
    let eig = q.clone().symmetric_eigen();
    let (idx, _) = eig.eigenvalues.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &l)| if l > acc.1 { (i, l) } else { acc });
    to_unit_modulus(&eig.eigenvectors.column(idx).into_owned())
}

/// RIS coefficients approximately maximizing the weakest user's cascaded gain.
///
/// Start points are the unit-modulus projections of each user's (and the
/// users' summed) dominant gain direction plus seeded random phases; the best
/// few are refined by continuation and the best true worst-user gain wins.
pub fn ris_max_min(channels: &ChannelSet, opts: &MaxMinOptions) -> Result<CVec> {
    channels.validate()?;
    if channels.num_users() == 0 {
        return Err(Error::InvalidConfig("max-min RIS design needs at least one user".into()));
    }
    // global rescaling leaves the maximizer unchanged
    let (work, _) = normalize_channels(channels);
    let maps = gain_maps(&work);
    let f = work.num_cells();

    let mut candidates: Vec<CVec> = Vec::new();
    let mut total = CMat::zeros(f, f);
    for p in &maps {
        let q = p.ad_mul(p);
        candidates.push(principal_direction(&q));
        total += q;
    }
    if maps.len() > 1 {
        candidates.push(principal_direction(&total));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    candidates.extend((0..opts.random_candidates).map(|_| random_phases(f, &mut rng)));

    let mut scored: Vec<(f64, CVec)> = candidates.into_iter().map(|x| (min_gain(&work, &x), x)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut best = scored[0].clone();
    for (_, start) in scored.into_iter().take(opts.starts.max(1)) {
        let mut x = start;
        for &sharp in &opts.sharpness {
            let gains = cascaded_gains(&work, &x);
            let mean = gains.iter().sum::<f64>() / gains.len() as f64;
            if !(mean > 0.0) {
                break;
            }
            let cost = SmoothedMinCost { maps: &maps, tau: sharp / mean };
            x = rcg_minimize(&cost, &x, &opts.rcg)?.point;
            let score = min_gain(&work, &x);
            if score > best.0 {
                best = (score, x.clone());
            }
        }
    }
    Ok(best.1)
}

/// Fully digital zero-forcing precoder hitting every SINR target with equality.
#[derive(Debug, Clone)]
pub struct ZfReference {
    /// `M x K`.
    pub f_opt: CMat,
}

/// `F_opt = H^+ diag(sqrt(gamma_k sigma_k^2))` with `H` the `K x M` cascaded channel.
pub fn zf_reference(channels: &ChannelSet, ris: &CVec, gamma: &[f64], sigma2: &[f64]) -> Result<ZfReference> {
    let h = cascade(channels, ris);
    let sv = h.clone().svd(false, false).singular_values;
    let hi = sv.max();
    let lo = sv.min();
    if !(hi > 0.0) || lo / hi < RANK_TOL || sv.len() < h.nrows() {
        return Err(Error::RankDeficient(if hi > 0.0 { lo / hi } else { 0.0 }));
    }
    let gram = &h * h.adjoint();
    let chol = gram.cholesky().ok_or(Error::RankDeficient(lo / hi))?;
    let scales = CVec::from_fn(h.nrows(), |k, _| Complex::from((gamma[k] * sigma2[k]).sqrt()));
    let f_opt = h.adjoint() * chol.solve(&CMat::from_diagonal(&scales));
    Ok(ZfReference { f_opt })
}

/// Oversampled grid of BS array responses.
#[derive(Debug, Clone)]
pub struct Codebook {
    pub mu: usize,
    pub ny: usize,
    pub nz: usize,
    /// `M x (mu^2 ny nz)`; column `i * mu nz + j` points at `(psi_i, phi_j)`.
    pub columns: CMat,
}

/// Codewords `a(psi_i, phi_j)` with `psi_i = 2 pi i / (mu ny)` and
/// `phi_j = 2 pi j / (mu nz)`.
pub fn build_codebook(mu: usize, ny: usize, nz: usize, bs_geom: &ArrayGeometry) -> Result<Codebook> {
    if mu == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidConfig(format!("codebook needs positive mu, ny, nz (got {mu}, {ny}, {nz})")));
    }
    if ny * nz != bs_geom.len() {
        return Err(Error::DimensionMismatch(format!("codebook grid {ny}x{nz} does not match {} BS antennas", bs_geom.len())));
    }
    let (gy, gz) = (mu * ny, mu * nz);
    let mut columns = CMat::zeros(bs_geom.len(), gy * gz);
    for i in 0..gy {
        let psi = 2.0 * PI * i as f64 / gy as f64;
        for j in 0..gz {
            let phi = 2.0 * PI * j as f64 / gz as f64;
            columns.set_column(i * gz + j, &upa_response(psi, phi, bs_geom));
        }
    }
    Ok(Codebook { mu, ny, nz, columns })
}

#[derive(Debug, Clone)]
pub struct OmpOutcome {
    pub v_blocks: Vec<CVec>,
    /// Codeword chosen for each RF chain.
    pub selected: Vec<usize>,
    /// Least-squares baseband factor against the masked selected codewords.
    pub f_bb: CMat,
    /// `||F_opt - A_sel F_bb||_F` before any selection and after each one.
    pub residual_trace: Vec<f64>,
}

/// Sub-connected OMP: RF chain `t` picks the codeword whose segment on the
/// chain's `d` antennas correlates best with the current residual there;
/// after each pick the baseband factor is refit by least squares.
pub fn omp_analog(f_opt: &CMat, codebook: &Codebook, n: usize, d: usize) -> Result<OmpOutcome> {
    let m = f_opt.nrows();
    if codebook.columns.nrows() != m || n * d != m {
        return Err(Error::DimensionMismatch(format!(
            "F_opt has {m} rows, codebook {}, and {n} chains x {d} antennas",
            codebook.columns.nrows()
        )));
    }
    let k = f_opt.ncols();
    let a = &codebook.columns;
    let mut selected = Vec::with_capacity(n);
    let mut a_sel = CMat::zeros(m, 0);
    let mut residual = f_opt.clone();
    let mut f_bb = CMat::zeros(0, k);
    let mut residual_trace = vec![residual.norm()];

    for chain in 0..n {
        let rows = chain * d;
        let res_rows = residual.rows(rows, d);
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..a.ncols() {
            let seg = a.view((rows, i), (d, 1));
            let corr = (seg.adjoint() * &res_rows).norm();
            if corr > best.1 {
                best = (i, corr);
            }
        }
        selected.push(best.0);
        let mut col = CVec::zeros(m);
        col.rows_mut(rows, d).copy_from(&a.view((rows, best.0), (d, 1)));
        a_sel = a_sel.insert_column(chain, Complex::new(0.0, 0.0));
        a_sel.set_column(chain, &col);

        let gram = a_sel.ad_mul(&a_sel);
        let rhs = a_sel.ad_mul(f_opt);
        f_bb = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => gram.pseudo_inverse(1e-14).map_err(|e| Error::InvalidConfig(e.to_string()))? * rhs,
        };
        residual = f_opt - &a_sel * &f_bb;
        residual_trace.push(residual.norm());
    }

    let v_blocks = selected
        .iter()
        .enumerate()
        .map(|(chain, &i)| to_unit_modulus(&a.column(i).rows(chain * d, d).into_owned()))
        .collect();
    Ok(OmpOutcome { v_blocks, selected, f_bb, residual_trace })
}

/// Minimum-power precoder for fixed effective channel rows (`K x N`) meeting
/// `SINR_k >= gamma_k` with equality.
///
/// Dual uplink powers follow the fixed point
/// `q_k <- 1 / ((1 + 1/gamma_k) g_k^H (I + sum_j q_j g_j g_j^H)^{-1} g_k)`
/// with noise-normalized `g_k`; the MMSE receivers of the converged uplink are
/// the downlink beam directions, and downlink powers solve the linear system
/// that makes every SINR constraint tight.
pub fn power_min_precoder(h_eff: &CMat, gamma: &[f64], sigma2: &[f64]) -> Result<CMat> {
    let (k, n) = h_eff.shape();
    let g: Vec<CVec> = (0..k).map(|u| h_eff.row(u).adjoint() / Complex::from(sigma2[u].sqrt())).collect();
    let ident = CMat::identity(n, n);
    let cov = |q: &[f64]| {
        let mut s = ident.clone();
        for (gu, qu) in g.iter().zip(q) {
            s += gu * gu.adjoint() * Complex::from(*qu);
        }
        s
    };

    let mut q = vec![0.0; k];
    let mut converged = false;
    let (mut best_change, mut stalled) = (f64::INFINITY, 0);
    for _ in 0..FIXED_POINT_ITERS {
        let chol = cov(&q).cholesky().ok_or(Error::Infeasible)?;
        let next: Vec<f64> = (0..k)
            .map(|u| {
                let quad = g[u].dotc(&chol.solve(&g[u])).re;
                1.0 / ((1.0 + 1.0 / gamma[u]) * quad)
            })
            .collect();
        if next.iter().any(|x| !x.is_finite() || *x > 1e300) {
            return Err(Error::Infeasible);
        }
        let change = next.iter().zip(&q).map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
        q = next;
        if change < best_change {
            best_change = change;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if change < FIXED_POINT_TOL || (best_change < FIXED_POINT_FLOOR && stalled >= FLOOR_PATIENCE) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Infeasible);
    }

    let chol = cov(&q).cholesky().ok_or(Error::Infeasible)?;
    let u: Vec<CVec> = g.iter().map(|gu| chol.solve(gu).normalize()).collect();
    let coupling = nalgebra::DMatrix::<f64>::from_fn(k, k, |a, b| {
        let x = g[a].dotc(&u[b]).norm_sqr();
        if a == b {
            x / gamma[a]
        } else {
            -x
        }
    });
    let p = coupling.lu().solve(&nalgebra::DVector::from_element(k, 1.0)).ok_or(Error::Infeasible)?;
    if p.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::Infeasible);
    }
    let mut w = CMat::zeros(n, k);
    for b in 0..k {
        w.set_column(b, &(&u[b] * Complex::from(p[b].sqrt())));
    }
    Ok(w)
}

/// Digital precoder for fixed RIS and analog beamformer.
pub fn digital_power_min(channels: &ChannelSet, ris: &CVec, v_blocks: &[CVec], gamma: &[f64], sigma2: &[f64]) -> Result<CMat> {
    let h_eff = cascade(channels, ris) * crate::system::assemble_analog(v_blocks);
    power_min_precoder(&h_eff, gamma, sigma2)
}

#[derive(Debug, Clone)]
pub struct IndividualOutcome {
    pub solution: BeamformingSolution,
    pub omp: OmpOutcome,
    /// Worst-user cascaded gain of the chosen RIS (physical units).
    pub min_gain: f64,
    pub ris_method: &'static str,
}

/// RIS by max-min gain, analog by OMP against zero forcing, digital by
/// SINR-constrained power minimization.
pub fn individual_solve(config: &SystemConfig, channels: &ChannelSet, opts: &MaxMinOptions) -> Result<IndividualOutcome> {
    config.validate()?;
    let (work, scale) = normalize_channels(channels);
    let ris = ris_max_min(&work, opts)?;
    let codebook = build_codebook(config.codebook_oversampling, config.bs_rows, config.bs_cols, &config.bs_array()?)?;
    let zf = zf_reference(&work, &ris, &config.gamma, &work.noise_powers)?;
    let omp = omp_analog(&zf.f_opt, &codebook, config.n, config.d())?;
    let w = digital_power_min(&work, &ris, &omp.v_blocks, &config.gamma, &work.noise_powers)?;
    let solution = BeamformingSolution { w: w * Complex::from(scale), v_blocks: omp.v_blocks.clone(), ris };
    let min_gain = min_gain(channels, &solution.ris);
    Ok(IndividualOutcome { solution, omp, min_gain, ris_method: RIS_METHOD })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use crate::system::{assemble_analog, sinr_all, sinr_fully_digital};
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn random_channels(rng: &mut ChaCha8Rng, k: usize, f: usize, m: usize) -> ChannelSet {
        ChannelSet {
            g: CMat::from_fn(f, m, |_, _| complex_gaussian(rng, 1.0)),
            h: (0..k).map(|_| CVec::from_fn(f, |_, _| complex_gaussian(rng, 1.0))).collect(),
            noise_powers: vec![1.0; k],
            user_positions: vec![],
        }
    }

    #[test]
    fn single_cell_gain_is_phase_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = random_channels(&mut rng, 2, 1, 4);
        let ris = ris_max_min(&ch, &MaxMinOptions::default()).unwrap();
        assert!((ris[0].norm() - 1.0).abs() < 1e-12);
        let at_one = min_gain(&ch, &CVec::from_element(1, c(1.0, 0.0)));
        assert!((min_gain(&ch, &ris) - at_one).abs() <= 1e-12 * at_one);
    }

    #[test]
    fn rank_one_single_user_reaches_cophasing_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ris_geom = ArrayGeometry::half_wavelength(2, 3).unwrap();
        let bs_geom = ArrayGeometry::half_wavelength(2, 2).unwrap();
        let a_r = upa_response(0.7, 1.1, &ris_geom);
        let a_b = upa_response(-0.4, 2.0, &bs_geom);
        let scale = 3.0;
        let g = &a_r * a_b.adjoint() * Complex::from(scale);
        let h = CVec::from_fn(6, |_, _| complex_gaussian(&mut rng, 1.0));
        let bound = h.iter().zip(a_r.iter()).map(|(x, y)| x.norm() * y.norm()).sum::<f64>().powi(2) * a_b.norm_squared() * scale * scale;
        let ch = ChannelSet { g, h: vec![h], noise_powers: vec![1.0], user_positions: vec![] };
        let ris = ris_max_min(&ch, &MaxMinOptions::default()).unwrap();
        assert!(min_gain(&ch, &ris) >= 0.99 * bound, "{} vs {bound}", min_gain(&ch, &ris));
    }

    #[test]
    fn max_min_beats_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let ch = random_channels(&mut rng, 3, 8, 4);
            let ris = ris_max_min(&ch, &MaxMinOptions::default()).unwrap();
            assert!(ris.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            let best_random = (0..100).map(|_| min_gain(&ch, &random_phases(8, &mut rng))).fold(0.0, f64::max);
            assert!(min_gain(&ch, &ris) >= best_random);
        }
    }

    #[test]
    fn zf_single_user_axis() {
        let mut g = CMat::zeros(1, 3);
        g[(0, 0)] = c(1.0, 0.0);
        let ch = ChannelSet { g, h: vec![CVec::from_element(1, c(1.0, 0.0))], noise_powers: vec![1.0], user_positions: vec![] };
        let zf = zf_reference(&ch, &CVec::from_element(1, c(1.0, 0.0)), &[1.0], &[1.0]).unwrap();
        assert!((zf.f_opt.column(0) - CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])).norm() < 1e-14);
    }

    #[test]
    fn zf_hits_targets_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let ch = random_channels(&mut rng, 2, 6, 5);
            let ris = random_phases(6, &mut rng);
            let gamma = [rng.random_range(0.5..20.0), rng.random_range(0.5..20.0)];
            let zf = zf_reference(&ch, &ris, &gamma, &ch.noise_powers).unwrap();
            let prod = cascade(&ch, &ris) * &zf.f_opt;
            for a in 0..2 {
                for b in 0..2 {
                    let want = if a == b { gamma[a].sqrt() } else { 0.0 };
                    assert!((prod[(a, b)] - c(want, 0.0)).norm() < 1e-8);
                }
            }
            let s = sinr_fully_digital(&ch, &ris, &zf.f_opt);
            for (x, g) in s.iter().zip(&gamma) {
                assert!((x - g).abs() < 1e-6 * g);
            }
        }
    }

    #[test]
    fn zf_rejects_rank_deficient_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ch = random_channels(&mut rng, 2, 4, 4);
        ch.h[1] = ch.h[0].clone();
        let ris = random_phases(4, &mut rng);
        assert!(matches!(zf_reference(&ch, &ris, &[1.0, 1.0], &[1.0, 1.0]), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn codebook_shapes() {
        let one = build_codebook(1, 1, 1, &ArrayGeometry::single()).unwrap();
        assert_eq!(one.columns.shape(), (1, 1));
        assert!((one.columns[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        let cb = build_codebook(2, 2, 2, &ArrayGeometry::half_wavelength(2, 2).unwrap()).unwrap();
        assert_eq!(cb.columns.ncols(), 16);
        assert!(cb.columns.column_iter().all(|col| (col.norm() - 1.0).abs() < 1e-12));
        assert!(build_codebook(2, 3, 2, &ArrayGeometry::half_wavelength(2, 2).unwrap()).is_err());
    }

    #[test]
    fn omp_single_chain_picks_best_codeword() {
        let geom = ArrayGeometry::half_wavelength(2, 2).unwrap();
        let cb = build_codebook(2, 2, 2, &geom).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f_opt = CMat::from_fn(4, 2, |_, _| complex_gaussian(&mut rng, 1.0));
        let out = omp_analog(&f_opt, &cb, 1, 4).unwrap();
        let best = (0..cb.columns.ncols())
            .map(|i| (cb.columns.column(i).adjoint() * &f_opt).norm())
            .enumerate()
            .fold((0, 0.0), |acc, (i, x)| if x > acc.1 { (i, x) } else { acc });
        assert_eq!(out.selected, vec![best.0]);
        assert!(out.v_blocks[0].iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn omp_residual_never_grows() {
        let geom = ArrayGeometry::half_wavelength(4, 4).unwrap();
        let cb = build_codebook(2, 4, 4, &geom).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let f_opt = CMat::from_fn(16, 3, |_, _| complex_gaussian(&mut rng, 1.0));
            let out = omp_analog(&f_opt, &cb, 4, 4).unwrap();
            assert!(out.residual_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            assert!(out.v_blocks.iter().flat_map(|v| v.iter()).all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn single_user_power_min_is_mrt() {
        let h = CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(1.0, 0.0)]);
        let w = power_min_precoder(&h, &[1.0], &[1.0]).unwrap();
        assert!((w.norm_squared() - 0.5).abs() < 1e-12);
        let dir = w.column(0) / Complex::from(w.column(0).norm());
        let mrt = h.row(0).adjoint().normalize();
        assert!((dir.dotc(&mrt).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_targets_need_vanishing_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = CMat::from_fn(2, 3, |_, _| complex_gaussian(&mut rng, 1.0));
        let w = power_min_precoder(&h, &[1e-9, 1e-9], &[1.0, 1.0]).unwrap();
        assert!(w.norm_squared() < 1e-7);
    }

    #[test]
    fn power_min_constraints_are_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let ch = random_channels(&mut rng, 3, 5, 8);
            let ris = random_phases(5, &mut rng);
            let blocks: Vec<CVec> = (0..4).map(|_| random_phases(2, &mut rng)).collect();
            let gamma = [2.0, 3.0, 1.5];
            let w = digital_power_min(&ch, &ris, &blocks, &gamma, &ch.noise_powers).unwrap();
            let sol = BeamformingSolution { w, v_blocks: blocks.clone(), ris };
            for (s, g) in sinr_all(&sol, &ch).iter().zip(&gamma) {
                assert!((s - g).abs() < 1e-6 * g, "{s} vs {g}");
            }
            assert_eq!(assemble_analog(&blocks).shape(), (8, 4));
        }
    }

    #[test]
    fn infeasible_targets_are_reported() {
        // two users with identical channels cannot both reach 0 dB
        let row = [c(1.0, 0.0), c(0.5, -0.5)];
        let h = CMat::from_row_slice(2, 2, &[row[0], row[1], row[0], row[1]]);
        assert!(matches!(power_min_precoder(&h, &[1.0, 1.0], &[1.0, 1.0]), Err(Error::Infeasible)));
    }

    #[test]
    fn individual_design_meets_targets() {
        let cfg = SystemConfig::desk_defaults();
        let ch = crate::channel::generate_scenario(&cfg, 3).unwrap();
        let out = individual_solve(&cfg, &ch, &MaxMinOptions::default()).unwrap();
        let s = sinr_all(&out.solution, &ch);
        for (x, g) in s.iter().zip(&cfg.gamma) {
            assert!(crate::system::linear_to_db(*x) >= crate::system::linear_to_db(*g) - 0.1);
        }
        let again = individual_solve(&cfg, &ch, &MaxMinOptions::default()).unwrap();
        assert_eq!(out.solution, again.solution);
        assert_eq!(out.ris_method, RIS_METHOD);
    }
}
