//! Riemannian conjugate gradient on the complex circle manifold
//! `{x in C^L : |x_l| = 1}`.
//!
//! Gradients follow the `2 d/dx*` convention, so the directional derivative of
//! a real cost along `d` is `Re(grad^H d)`. The tangent space at `x` is
//! `{z : Re(z .* conj(x)) = 0}`, vector transport is the tangent projection at
//! the new point, and the retraction normalizes every entry back to modulus 1.
//!
//! The search direction uses the Polak-Ribiere coefficient clamped at zero,
//! with a reset to steepest descent whenever the combined direction stops
//! being a descent direction and every `restart_period` iterations. Steps are
//! chosen by Armijo backtracking, which makes the cost monotone.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::{CMat, CVec};

const MODULUS_TOL: f64 = 1e-8;
const MAX_BACKTRACKS: usize = 60;

/// Smooth real cost on the circle manifold.
pub trait UnitModulusCost {
    fn dim(&self) -> usize;
    fn cost(&self, x: &CVec) -> f64;
    /// Euclidean gradient, `2 df/dx*`.
    fn euclidean_grad(&self, x: &CVec) -> CVec;
}

/// `f(x) = sum_i |x^H c_i - t_i|^2`.
///
/// Coefficients are stored column-wise, so with `s = C^H x - conj(t)` the cost
/// is `||s||^2` and the gradient `2 C s`.
#[derive(Debug, Clone)]
pub struct QuadraticUnitModulusObjective {
    coeffs: CMat,
    targets_conj: CVec,
}

impl QuadraticUnitModulusObjective {
    pub fn new(terms: &[(CVec, Complex<f64>)]) -> Result<Self> {
        let dim = terms.first().map_or(0, |(c, _)| c.len());
        if let Some((i, (c, _))) = terms.iter().enumerate().find(|(_, (c, _))| c.len() != dim) {
            return Err(Error::DimensionMismatch(format!("term {i} has length {} but expected {dim}", c.len())));
        }
        let coeffs = CMat::from_fn(dim, terms.len(), |r, col| terms[col].0[r]);
        let targets_conj = CVec::from_fn(terms.len(), |i, _| terms[i].1.conj());
        Ok(Self { coeffs, targets_conj })
    }

    /// Builds the objective directly from an `L x T` coefficient matrix and `T` targets.
    pub fn from_columns(coeffs: CMat, targets: &CVec) -> Result<Self> {
        if coeffs.ncols() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficient columns but {} targets",
                coeffs.ncols(),
                targets.len()
            )));
        }
        Ok(Self { coeffs, targets_conj: targets.conjugate() })
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.ncols()
    }

    fn residual(&self, x: &CVec) -> CVec {
        self.coeffs.ad_mul(x) - &self.targets_conj
    }
}

impl UnitModulusCost for QuadraticUnitModulusObjective {
    fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    fn cost(&self, x: &CVec) -> f64 {
        self.residual(x).norm_squared()
    }

    fn euclidean_grad(&self, x: &CVec) -> CVec {
        (&self.coeffs * self.residual(x)) * Complex::from(2.0)
    }
}

/// Rule used for the conjugate-direction coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaRule {
    /// Polak-Ribiere, clamped at zero.
    PolakRibierePlus,
    /// Plain steepest descent.
    SteepestDescent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcgOptions {
    pub max_iters: usize,
    /// Stop once the Riemannian gradient norm falls below this.
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    /// First trial step is `initial_step / ||grad||`.
    pub initial_step: f64,
    pub beta_rule: BetaRule,
    /// Force a steepest-descent restart every this many iterations; 0 uses the dimension.
    pub restart_period: usize,
}

impl Default for RcgOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-10,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            initial_step: 1.0,
            beta_rule: BetaRule::PolakRibierePlus,
            restart_period: 0,
        }
    }
}

impl RcgOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.grad_tol > 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.armijo_shrink > 0.0
            && self.armijo_shrink < 1.0
            && self.initial_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid RCG options {self:?}")))
        }
    }
}

/// Result of a run, with per-iteration health checks.
#[derive(Debug, Clone)]
pub struct RcgOutcome {
    pub point: CVec,
    pub cost: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Cost at the start point followed by the cost after every accepted step.
    pub cost_trace: Vec<f64>,
    /// Number of times the conjugate direction was replaced by steepest descent
    /// because it was not a descent direction.
    pub direction_resets: usize,
    /// Largest `| |x_l| - 1 |` over all iterates.
    pub max_modulus_error: f64,
    /// Largest `|Re(grad .* conj(x))|` over all iterates.
    pub max_tangency_error: f64,
    pub converged: bool,
}

/// `<a, b> = Re(a^H b)`.
pub fn real_inner(a: &CVec, b: &CVec) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub fn check_unit_modulus(x: &CVec, tol: f64) -> Result<()> {
    match x.iter().enumerate().find(|(_, z)| (z.norm() - 1.0).abs() > tol) {
        Some((index, z)) => Err(Error::NotUnitModulus { index, modulus: z.norm() }),
        None => Ok(()),
    }
}

fn project_unchecked(x: &CVec, z: &CVec) -> CVec {
    CVec::from_fn(x.len(), |i, _| {
        let along = z[i].re * x[i].re + z[i].im * x[i].im;
        z[i] - x[i] * along
    })
}

/// Orthogonal projection of `z` onto the tangent space at `x`:
/// `z - Re(z .* conj(x)) .* x`.
pub fn tangent_project(x: &CVec, z: &CVec) -> Result<CVec> {
    check_unit_modulus(x, MODULUS_TOL)?;
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch(format!("point has length {} but vector {}", x.len(), z.len())));
    }
    Ok(project_unchecked(x, z))
}

/// Riemannian gradient of `cost` at `x`.
pub fn riemannian_grad<C: UnitModulusCost + ?Sized>(cost: &C, x: &CVec) -> CVec {
    project_unchecked(x, &cost.euclidean_grad(x))
}

/// `x_l <- (x + step d)_l / |(x + step d)_l|`.
pub fn retract(x: &CVec, d: &CVec, step: f64) -> CVec {
    CVec::from_fn(x.len(), |i, _| {
        let y = x[i] + d[i] * step;
        let r = y.norm();
        if r > 0.0 {
            y / r
        } else {
            x[i]
        }
    })
}

fn tangency_error(x: &CVec, g: &CVec) -> f64 {
    x.iter().zip(g.iter()).map(|(a, b)| (a.re * b.re + a.im * b.im).abs()).fold(0.0, f64::max)
}

fn modulus_error(x: &CVec) -> f64 {
    x.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
}

fn normalize(x: &CVec) -> CVec {
    x.map(|z| z / z.norm())
}

/// Returns `d` if it is a descent direction for gradient `g`, otherwise
/// `-g`; the flag reports the reset.
pub fn descent_direction(g: &CVec, d: CVec) -> (CVec, bool) {
    if real_inner(g, &d) < 0.0 {
        (d, false)
    } else {
        (-g, true)
    }
}

/// Minimizes `cost` over the circle manifold starting from `x0`.
///
/// The returned point never has a higher cost than `x0`.
pub fn rcg_minimize<C: UnitModulusCost + ?Sized>(cost: &C, x0: &CVec, opts: &RcgOptions) -> Result<RcgOutcome> {
    opts.validate()?;
    if x0.len() != cost.dim() {
        return Err(Error::DimensionMismatch(format!("start point has length {} but cost has dimension {}", x0.len(), cost.dim())));
    }
    check_unit_modulus(x0, MODULUS_TOL)?;
    let restart_period = if opts.restart_period == 0 { x0.len().max(1) } else { opts.restart_period };

    let mut x = normalize(x0);
    let mut f = cost.cost(&x);
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut g = riemannian_grad(cost, &x);
    let mut g_norm = g.norm();

    let mut out = RcgOutcome {
        point: x.clone(),
        cost: f,
        iterations: 0,
        gradient_norm: g_norm,
        cost_trace: vec![f],
        direction_resets: 0,
        max_modulus_error: modulus_error(&x),
        max_tangency_error: tangency_error(&x, &g),
        converged: false,
    };
    if g_norm < opts.grad_tol {
        out.converged = true;
        return Ok(out);
    }

    let mut d = -g.clone();
    let mut since_restart = 0;
    for iter in 0..opts.max_iters {
        let (dir, reset) = descent_direction(&g, d);
        d = dir;
        if reset {
            out.direction_resets += 1;
            since_restart = 0;
        }
        let slope = real_inner(&g, &d);

        let mut step = opts.initial_step / g_norm;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = retract(&x, &d, step);
            let f_trial = cost.cost(&trial);
            if !f_trial.is_finite() {
                return Err(Error::NonFiniteObjective);
            }
            if f_trial <= f + opts.armijo_c * step * slope {
                accepted = Some((trial, f_trial));
                break;
            }
            step *= opts.armijo_shrink;
        }
        let Some((x_new, f_new)) = accepted else {
            // no representable decrease left along a descent direction
            break;
        };

        let g_new = riemannian_grad(cost, &x_new);
        let g_new_norm = g_new.norm();
        let d_transported = project_unchecked(&x_new, &d);
        since_restart += 1;

        let beta = match opts.beta_rule {
            BetaRule::SteepestDescent => 0.0,
            BetaRule::PolakRibierePlus if since_restart >= restart_period => {
                since_restart = 0;
                0.0
            }
            BetaRule::PolakRibierePlus => {
                let g_transported = project_unchecked(&x_new, &g);
                let num = real_inner(&g_new, &(&g_new - &g_transported));
                (num / (g_norm * g_norm)).max(0.0)
            }
        };

        x = x_new;
        f = f_new;
        g = g_new;
        g_norm = g_new_norm;
        d = -&g + d_transported * Complex::from(beta);

        out.iterations = iter + 1;
        out.cost_trace.push(f);
        out.max_modulus_error = out.max_modulus_error.max(modulus_error(&x));
        out.max_tangency_error = out.max_tangency_error.max(tangency_error(&x, &g));

        if g_norm < opts.grad_tol {
            out.converged = true;
            break;
        }
    }

    out.point = x;
    out.cost = f;
    out.gradient_norm = g_norm;
    Ok(out)
}
