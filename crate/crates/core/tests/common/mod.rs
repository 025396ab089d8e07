//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use ris_hybrid::CMat;

pub fn cgauss(rng: &mut ChaCha8Rng) -> Complex<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let n: f64 = rng.sample(rand_distr::StandardNormal);
    let m: f64 = rng.sample(rand_distr::StandardNormal);
    Complex::new(s * n, s * m)
}

pub fn cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| cgauss(rng))
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Minimum of `sum ||w_k||^2` subject to `SINR_k >= gamma_k` for rows `h`
/// (`K x N`), solved as a second-order cone program by an interior-point
/// solver. Returns `None` unless the solver reports success.
pub fn socp_power_min(h: &CMat, gamma: &[f64], sigma2: &[f64]) -> Option<f64> {
    let (k, n) = h.shape();
    let nv = 2 * n * k + 1;
    let re = |i: usize, j: usize| j * n + i;
    let im = |i: usize, j: usize| n * k + j * n + i;
    let tau = nv - 1;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();

    // Im(h_k w_k) = 0 fixes the free common phase of each beam
    for u in 0..k {
        let mut row = vec![0.0; nv];
        for i in 0..n {
            row[re(i, u)] = h[(u, i)].im;
            row[im(i, u)] = h[(u, i)].re;
        }
        rows.push(row.iter().map(|x| -x).collect());
        b.push(0.0);
    }
    cones.push(SupportedConeT::ZeroConeT(k));

    // sqrt(1 + 1/gamma_k) Re(h_k w_k) >= ||(h_k w_1, ..., h_k w_K, sigma_k)||
    for u in 0..k {
        let head = (1.0 + 1.0 / gamma[u]).sqrt();
        let mut row = vec![0.0; nv];
        for i in 0..n {
            row[re(i, u)] = -head * h[(u, i)].re;
            row[im(i, u)] = head * h[(u, i)].im;
        }
        rows.push(row);
        b.push(0.0);
        for j in 0..k {
            let mut row_re = vec![0.0; nv];
            let mut row_im = vec![0.0; nv];
            for i in 0..n {
                row_re[re(i, j)] = -h[(u, i)].re;
                row_re[im(i, j)] = h[(u, i)].im;
                row_im[re(i, j)] = -h[(u, i)].im;
                row_im[im(i, j)] = -h[(u, i)].re;
            }
            rows.push(row_re);
            rows.push(row_im);
            b.push(0.0);
            b.push(0.0);
        }
        rows.push(vec![0.0; nv]);
        b.push(sigma2[u].sqrt());
        cones.push(SupportedConeT::SecondOrderConeT(2 * k + 2));
    }

    // tau >= ||vec W||
    let mut head = vec![0.0; nv];
    head[tau] = -1.0;
    rows.push(head);
    b.push(0.0);
    for v in 0..tau {
        let mut row = vec![0.0; nv];
        row[v] = -1.0;
        rows.push(row);
        b.push(0.0);
    }
    cones.push(SupportedConeT::SecondOrderConeT(tau + 1));

    let a = CscMatrix::from(&rows);
    let p = CscMatrix::<f64>::zeros((nv, nv));
    let mut q = vec![0.0; nv];
    q[tau] = 1.0;
    let settings = DefaultSettings::<f64> {
        verbose: false,
        tol_gap_abs: 1e-12,
        tol_gap_rel: 1e-12,
        tol_feas: 1e-12,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).ok()?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Some(solver.solution.x[tau].powi(2)),
        _ => None,
    }
}

/// Projection onto `{t : |t_k|^2 >= gamma (sum_{j != k} |t_j|^2 + sigma2)}`
/// by direct search over `r = |t_k|`: for fixed `r` the best interference
/// entries are `s a_j` with the largest admissible `s <= 1`, leaving a
/// one-dimensional problem that is scanned on a dense grid and refined by
/// golden-section search.
pub fn cone_projection_oracle(a: &[Complex<f64>], k: usize, gamma: f64, sigma2: f64) -> Vec<Complex<f64>> {
    let ak = a[k].norm();
    let others: f64 = a.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, z)| z.norm_sqr()).sum();
    if ak * ak >= gamma * (others + sigma2) {
        return a.to_vec();
    }
    let shrink = |r: f64| -> f64 {
        let room = (r * r / gamma - sigma2).max(0.0);
        if others == 0.0 {
            1.0
        } else {
            (room / others).sqrt().min(1.0)
        }
    };
    let dist = |r: f64| -> f64 {
        let s = shrink(r);
        (r - ak).powi(2) + others * (1.0 - s).powi(2)
    };
    let lo = ak.max((gamma * sigma2).sqrt());
    let hi = (gamma * (others + sigma2)).sqrt();
    let grid = 20_000;
    let step = (hi - lo) / grid as f64;
    let best = (0..=grid).map(|i| lo + step * i as f64).min_by(|x, y| dist(*x).total_cmp(&dist(*y))).unwrap();
    let (mut x0, mut x1) = ((best - step).max(lo), (best + step).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = x1 - phi * (x1 - x0);
        let d = x0 + phi * (x1 - x0);
        if dist(c) < dist(d) {
            x1 = d;
        } else {
            x0 = c;
        }
    }
    let r = 0.5 * (x0 + x1);
    let s = shrink(r);
    let phase = if ak > 0.0 { a[k] / ak } else { Complex::new(1.0, 0.0) };
    a.iter().enumerate().map(|(j, z)| if j == k { phase * r } else { z * s }).collect()
}

/// `SINR_k` from explicit sums over antennas, cells and RF chains.
pub fn brute_sinr(
    g: &CMat,
    h: &[ris_hybrid::CVec],
    ris: &ris_hybrid::CVec,
    v: &CMat,
    w: &CMat,
    sigma2: &[f64],
    k: usize,
) -> f64 {
    let amp = |j: usize| {
        let mut total = Complex::new(0.0, 0.0);
        for f in 0..g.nrows() {
            for m in 0..g.ncols() {
                for n in 0..v.ncols() {
                    total += h[k][f].conj() * ris[f] * g[(f, m)] * v[(m, n)] * w[(n, j)];
                }
            }
        }
        total.norm_sqr()
    };
    let signal = amp(k);
    let interference: f64 = (0..w.ncols()).filter(|&j| j != k).map(amp).sum();
    signal / (interference + sigma2[k])
}
