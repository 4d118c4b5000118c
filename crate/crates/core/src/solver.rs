//! Alternating reconstruction of the attenuation `a` and the source `f`.
//!
//! Each outer iteration `k` solves
//!
//! ```text
//! a <- argmin ||R[a]f - d||^2 + alpha M(a) + lambda TV_c(a) + ||a - a_k||^2 / (2 xi)
//! f <- argmin ||R[a]f - d||^2 + eta TV_c(f) + ||f - f_k||^2 / (2 xi)
//! ```
//!
//! approximately, both by ADMM on the splitting `y = Dx` with the Lagrangian
//! `... + mu^T (y - Dx) + beta/2 ||y - Dx||^2` and the multiplier step
//! `mu <- mu + beta (y - Dx)`. In the attenuation update the
//! `x` block is a proximal-gradient loop through the multi-bang prox; in the
//! source update it is a linear solve.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::forward::{Projector, Sinogram, SystemMatrix};
use crate::grid::Image;
use crate::math::sqrt;
use crate::regularizer::{
    apply_d_into, apply_dt_into, multibang_penalty, tv_gradient, tv_smoothed, AdmissibleSet,
    GradientField,
};
use crate::{Error, Result};

/// Objective values above this are reported as the infinite sentinel.
pub const OBJECTIVE_SENTINEL: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxGradient {
    Ista,
    /// Accelerated, with restart whenever the objective goes up.
    Fista,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YSolver {
    /// Exact solve of the radial scalar equation by safeguarded Newton.
    Newton,
    /// Fixed-step gradient descent with step `1 / (beta + weight / sqrt(c))`.
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub admissible: AdmissibleSet,
    pub alpha: f64,
    pub lambda: f64,
    pub eta: f64,
    /// Proximal coupling weight; `f64::INFINITY` drops the coupling terms.
    pub xi: f64,
    /// Proximal-gradient step `t`; `alpha * t` must lie in `(0, 1/2)`.
    pub step: f64,
    pub beta0: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub nu: f64,
    /// TV smoothing `c`.
    pub smoothing: f64,
    /// `delta_1`: successive-iterate distance in the proximal-gradient loop.
    pub tol_x: f64,
    /// `delta_2`: primal residual.
    pub tol_primal: f64,
    /// `delta_3`: dual residual.
    pub tol_dual: f64,
    /// `delta_4`: relative stationarity of the source update.
    pub tol_stationarity: f64,
    /// `delta_5`: outer iterate change.
    pub tol_outer: f64,
    /// Residual tolerance for each `y_i` equation.
    pub y_tol: f64,
    /// Relative residual for conjugate-gradient solves.
    pub cg_tol: f64,
    /// A pixel counts as multi-bang within this distance of a level.
    pub mb_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub max_x_iters: usize,
    pub max_cg_iters: usize,
    pub prox_gradient: ProxGradient,
    pub y_solver: YSolver,
    /// Clamp the source at zero after each linear solve.
    pub nonnegative_f: bool,
}

impl SolverConfig {
    pub fn new(admissible: AdmissibleSet) -> Self {
        SolverConfig {
            admissible,
            alpha: 0.2,
            lambda: 0.1,
            eta: 0.1,
            xi: 50.0,
            step: 1.0,
            beta0: 0.1,
            tau_plus: 2.0,
            tau_minus: 2.0,
            nu: 10.0,
            smoothing: 1e-3,
            tol_x: 1e-3,
            tol_primal: 1e-3,
            tol_dual: 1e-3,
            tol_stationarity: 1e-3,
            tol_outer: 1e-3,
            y_tol: 1e-8,
            cg_tol: 1e-8,
            mb_tol: 1e-6,
            max_inner: 500,
            max_outer: 200,
            max_x_iters: 200,
            max_cg_iters: 500,
            prox_gradient: ProxGradient::Fista,
            y_solver: YSolver::Newton,
            nonnegative_f: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("step", self.step),
            ("beta0", self.beta0),
            ("smoothing", self.smoothing),
            ("tol_x", self.tol_x),
            ("tol_primal", self.tol_primal),
            ("tol_dual", self.tol_dual),
            ("tol_stationarity", self.tol_stationarity),
            ("tol_outer", self.tol_outer),
            ("y_tol", self.y_tol),
            ("cg_tol", self.cg_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive and finite")));
            }
        }
        for (name, v) in [("lambda", self.lambda), ("eta", self.eta), ("mb_tol", self.mb_tol)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be non-negative")));
            }
        }
        if !(self.xi > 0.0) || self.xi.is_nan() {
            return Err(Error::invalid("xi must be positive (infinity allowed)"));
        }
        let w = self.alpha * self.step;
        if !(w > 0.0 && w < 0.5) {
            return Err(Error::invalid("alpha * step must lie in (0, 1/2)"));
        }
        if !(self.tau_plus > 1.0 && self.tau_minus > 1.0 && self.nu > 1.0) {
            return Err(Error::invalid("tau_plus, tau_minus and nu must exceed 1"));
        }
        if self.max_inner == 0 || self.max_outer == 0 || self.max_x_iters == 0 || self.max_cg_iters == 0 {
            return Err(Error::invalid("iteration caps must be positive"));
        }
        Ok(())
    }

    fn inv_xi(&self) -> f64 {
        if self.xi.is_infinite() {
            0.0
        } else {
            1.0 / self.xi
        }
    }
}

/// Residual-balancing penalty update.
pub fn beta_update(r: f64, s_res: f64, beta: f64, cfg: &SolverConfig) -> f64 {
    if r > cfg.nu * s_res {
        cfg.tau_plus * beta
    } else if s_res > cfg.nu * r {
        beta / cfg.tau_minus
    } else {
        beta
    }
}

/// Fraction of pixels within `tol` of an admissible level.
pub fn multibang_proportion(a: &Image, set: &AdmissibleSet, tol: f64) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let levels = set.levels();
    let hits = a
        .values()
        .iter()
        .filter(|&&v| (v - levels[set.nearest(v)]).abs() <= tol)
        .count();
    hits as f64 / a.len() as f64
}

/// Iterates of the ADMM attenuation update.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: Image,
    pub y: GradientField,
    pub mu: GradientField,
    pub beta: f64,
    /// `||y - Dx||`.
    pub r: f64,
    /// `||beta D^T (y_new - y_old)||`.
    pub s_res: f64,
    /// Current proximal-gradient step; only ever shrinks from `cfg.step`.
    pub step: f64,
}

impl AdmmState {
    /// Starts at `x` with `y = Dx`, `mu = 0` and `beta = beta0`.
    pub fn start(x: Image, cfg: &SolverConfig) -> Self {
        let grid = *x.grid();
        let mut y = GradientField::zeros(grid);
        apply_d_into(x.values(), grid.size(), y.vectors_mut());
        AdmmState {
            x,
            y,
            mu: GradientField::zeros(grid),
            beta: cfg.beta0,
            r: 0.0,
            s_res: 0.0,
            step: cfg.step,
        }
    }
}

/// Fixed data of one attenuation update.
#[derive(Debug, Clone, Copy)]
pub struct AProblem<'a> {
    pub projector: &'a Projector,
    pub f: &'a Image,
    pub d: &'a Sinogram,
    pub a_prev: &'a Image,
}

impl AProblem<'_> {
    fn check(&self) -> Result<()> {
        self.projector.check(self.f)?;
        self.projector.check(self.a_prev)?;
        self.projector.check_data(self.d)
    }
}

struct Smooth<'a, 'b> {
    prob: &'a AProblem<'b>,
    state: &'a AdmmState,
    inv_xi: f64,
    m: usize,
    dx: Vec<[f64; 2]>,
    field: Vec<[f64; 2]>,
    back: Vec<f64>,
}

impl<'a, 'b> Smooth<'a, 'b> {
    fn new(prob: &'a AProblem<'b>, state: &'a AdmmState, cfg: &SolverConfig) -> Self {
        let m = prob.a_prev.grid().size();
        let n = state.y.len();
        Smooth {
            prob,
            state,
            inv_xi: cfg.inv_xi(),
            m,
            dx: vec![[0.0; 2]; n],
            field: vec![[0.0; 2]; n],
            back: vec![0.0; m * m],
        }
    }

    // h(x) = ||R[x]f - d||^2 + beta/2 ||y - Dx||^2 + mu^T (y - Dx) + ||x - a_prev||^2 / (2 xi)
    fn eval(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let p = self.prob;
        let st = self.state;
        let (f, d, a_prev) = (p.f.values(), p.d.values(), p.a_prev.values());
        apply_d_into(x, self.m, &mut self.dx);
        let beta = st.beta;
        let mut value = 0.0;
        for (((o, dxi), yi), mi) in self
            .field
            .iter_mut()
            .zip(&self.dx)
            .zip(st.y.vectors())
            .zip(st.mu.vectors())
        {
            let e = [yi[0] - dxi[0], yi[1] - dxi[1]];
            value += 0.5 * beta * (e[0] * e[0] + e[1] * e[1]) + mi[0] * e[0] + mi[1] * e[1];
            *o = [-mi[0] - beta * e[0], -mi[1] - beta * e[1]];
        }
        if self.inv_xi > 0.0 {
            value += 0.5
                * self.inv_xi
                * x.iter().zip(a_prev).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
        }
        match grad {
            None => value + p.projector.misfit_raw(x, f, d),
            Some(g) => {
                let misfit = p.projector.misfit_gradient_raw(x, f, d, g);
                apply_dt_into(&self.field, self.m, &mut self.back);
                for ((gi, bi), (xi, ai)) in g.iter_mut().zip(&self.back).zip(x.iter().zip(a_prev)) {
                    *gi += bi + self.inv_xi * (xi - ai);
                }
                value + misfit
            }
        }
    }
}

/// Outcome of one proximal-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XStepReport {
    pub iterations: usize,
    pub converged: bool,
}

/// Approximately minimizes `h(x) + alpha M(x)` by ISTA or FISTA, starting at
/// `state.x`, and stores the result in `state.x`.
///
/// Each iteration is `x <- prox_{alpha t m}(z - t grad h(z))`; `t` is halved
/// whenever the quadratic upper bound on `h` fails, which keeps every
/// accepted step a descent step.
pub fn x_step(prob: &AProblem<'_>, state: &mut AdmmState, cfg: &SolverConfig) -> Result<XStepReport> {
    cfg.validate()?;
    prob.check()?;
    let set = &cfg.admissible;
    let penalty = |x: &[f64]| -> f64 { x.iter().map(|&v| set.penalty(v)).sum() };
    let n = state.x.len();
    let mut x: Vec<f64> = state.x.values().to_vec();
    let mut x_old = x.clone();
    let mut step = state.step;
    let mut report = XStepReport { iterations: 0, converged: false };
    {
        let mut smooth = Smooth::new(prob, state, cfg);
        let mut obj = smooth.eval(&x, None) + cfg.alpha * penalty(&x);
        if !obj.is_finite() {
            return Err(Error::Solver(format!("non-finite x-step objective {obj} at start")));
        }
        let mut momentum = 1.0_f64;
        let mut z = vec![0.0; n];
        let mut grad = vec![0.0; n];
        let mut trial = vec![0.0; n];
        for it in 1..=cfg.max_x_iters {
            report.iterations = it;
            let next_momentum = 0.5 * (1.0 + sqrt(1.0 + 4.0 * momentum * momentum));
            let coef = match cfg.prox_gradient {
                ProxGradient::Fista => (momentum - 1.0) / next_momentum,
                ProxGradient::Ista => 0.0,
            };
            for i in 0..n {
                z[i] = x[i] + coef * (x[i] - x_old[i]);
            }
            let hz = smooth.eval(&z, Some(&mut grad));
            let h_trial = loop {
                let w = cfg.alpha * step;
                for i in 0..n {
                    trial[i] = set.prox_unchecked(z[i] - step * grad[i], w);
                }
                let h_trial = smooth.eval(&trial, None);
                let mut lin = 0.0;
                let mut dist2 = 0.0;
                for i in 0..n {
                    let dz = trial[i] - z[i];
                    lin += grad[i] * dz;
                    dist2 += dz * dz;
                }
                let bound = hz + lin + dist2 / (2.0 * step);
                if h_trial <= bound + 1e-12 * (1.0 + hz.abs()) {
                    break h_trial;
                }
                step *= 0.5;
                if step < 1e-14 * cfg.step {
                    return Err(Error::Solver(format!(
                        "x-step backtracking collapsed (h = {hz}, iteration {it})"
                    )));
                }
            };
            let obj_trial = h_trial + cfg.alpha * penalty(&trial);
            if !obj_trial.is_finite() {
                return Err(Error::Solver(format!(
                    "non-finite x-step objective at iteration {it}"
                )));
            }
            if obj_trial > obj && coef != 0.0 {
                // Momentum overshot: restart from the last accepted iterate.
                momentum = 1.0;
                x_old.copy_from_slice(&x);
                continue;
            }
            let mut change2 = 0.0;
            for i in 0..n {
                let dv = trial[i] - x[i];
                change2 += dv * dv;
            }
            x_old.copy_from_slice(&x);
            x.copy_from_slice(&trial);
            obj = obj_trial;
            momentum = next_momentum;
            if sqrt(change2) < cfg.tol_x {
                report.converged = true;
                break;
            }
        }
    }
    state.step = step;
    state.x = Image::new(*state.x.grid(), x)?;
    Ok(report)
}

/// Solves `weight y_i / sqrt(|y_i|^2 + c) - mu_i + beta (y_i - D_i x) = 0`
/// for every `i`.
///
/// The ADMM loops keep their multiplier with the opposite sign and pass
/// `-mu` here.
pub fn y_step(
    x: &Image,
    mu: &GradientField,
    beta: f64,
    weight: f64,
    cfg: &SolverConfig,
) -> Result<GradientField> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta must be positive"));
    }
    let grid = *x.grid();
    let m = grid.size();
    let mut dx = vec![[0.0; 2]; mu.len()];
    apply_d_into(x.values(), m, &mut dx);
    let c = cfg.smoothing;
    let mut out = GradientField::zeros(grid);
    for ((o, dxi), mi) in out.vectors_mut().iter_mut().zip(&dx).zip(mu.vectors()) {
        let b = [mi[0] + beta * dxi[0], mi[1] + beta * dxi[1]];
        *o = match cfg.y_solver {
            YSolver::Newton => y_newton(b, beta, weight, c, cfg.y_tol),
            YSolver::GradientDescent => y_descent(b, beta, weight, c, cfg.y_tol),
        };
    }
    Ok(out)
}

// The equation reads weight y / sqrt(|y|^2 + c) + beta y = b, so y = rho b/|b|
// with phi(rho) = weight rho / sqrt(rho^2 + c) + beta rho - |b| = 0. phi is
// increasing and concave on rho >= 0; Newton from the left converges
// monotonically.
fn y_newton(b: [f64; 2], beta: f64, weight: f64, c: f64, tol: f64) -> [f64; 2] {
    let nb = sqrt(b[0] * b[0] + b[1] * b[1]);
    if nb == 0.0 {
        return [0.0, 0.0];
    }
    if weight == 0.0 {
        return [b[0] / beta, b[1] / beta];
    }
    let mut rho = nb / (beta + weight / sqrt(c));
    for _ in 0..100 {
        let q = sqrt(rho * rho + c);
        let phi = weight * rho / q + beta * rho - nb;
        if phi.abs() <= 0.1 * tol {
            break;
        }
        let dphi = weight * c / (q * q * q) + beta;
        let next = rho - phi / dphi;
        if next == rho {
            break;
        }
        rho = next;
    }
    [rho * b[0] / nb, rho * b[1] / nb]
}

fn y_descent(b: [f64; 2], beta: f64, weight: f64, c: f64, tol: f64) -> [f64; 2] {
    let step = 1.0 / (beta + weight / sqrt(c));
    let mut y = [b[0] / beta, b[1] / beta];
    for _ in 0..1_000_000 {
        let q = sqrt(y[0] * y[0] + y[1] * y[1] + c);
        let g = [
            weight * y[0] / q + beta * y[0] - b[0],
            weight * y[1] / q + beta * y[1] - b[1],
        ];
        if sqrt(g[0] * g[0] + g[1] * g[1]) <= 0.1 * tol {
            break;
        }
        y = [y[0] - step * g[0], y[1] - step * g[1]];
    }
    y
}

fn negated(mu: &GradientField) -> GradientField {
    let mut out = mu.clone();
    out.vectors_mut().iter_mut().for_each(|v| *v = [-v[0], -v[1]]);
    out
}

/// Result of an attenuation update.
#[derive(Debug, Clone, PartialEq)]
pub struct AUpdate {
    pub a: Image,
    pub state: AdmmState,
    pub iterations: usize,
    pub x_iterations: usize,
    /// False when the iteration cap was hit before `r < delta_2`, `s < delta_3`.
    pub converged: bool,
}

/// ADMM for the attenuation subproblem, started at `a_prev`.
pub fn a_update(
    projector: &Projector,
    a_prev: &Image,
    f: &Image,
    d: &Sinogram,
    cfg: &SolverConfig,
) -> Result<AUpdate> {
    cfg.validate()?;
    let prob = AProblem { projector, f, d, a_prev };
    prob.check()?;
    let grid = *a_prev.grid();
    let m = grid.size();
    let mut state = AdmmState::start(a_prev.clone(), cfg);
    let mut dx = vec![[0.0; 2]; state.y.len()];
    let mut back = vec![0.0; grid.pixel_count()];
    let mut dy = vec![[0.0; 2]; state.y.len()];
    let mut out = AUpdate {
        a: a_prev.clone(),
        state: state.clone(),
        iterations: 0,
        x_iterations: 0,
        converged: false,
    };
    for l in 1..=cfg.max_inner {
        let rep = x_step(&prob, &mut state, cfg)?;
        out.x_iterations += rep.iterations;
        let y_new = y_step(&state.x, &negated(&state.mu), state.beta, cfg.lambda, cfg)?;
        apply_d_into(state.x.values(), m, &mut dx);
        let beta = state.beta;
        let mut r2 = 0.0;
        for (((yn, yo), dxi), (mu, dyi)) in y_new
            .vectors()
            .iter()
            .zip(state.y.vectors())
            .zip(&dx)
            .zip(state.mu.vectors_mut().iter_mut().zip(dy.iter_mut()))
        {
            let e = [yn[0] - dxi[0], yn[1] - dxi[1]];
            r2 += e[0] * e[0] + e[1] * e[1];
            mu[0] += beta * e[0];
            mu[1] += beta * e[1];
            *dyi = [yn[0] - yo[0], yn[1] - yo[1]];
        }
        apply_dt_into(&dy, m, &mut back);
        state.r = sqrt(r2);
        state.s_res = beta * sqrt(back.iter().map(|v| v * v).sum::<f64>());
        state.y = y_new;
        out.iterations = l;
        if !(state.r.is_finite() && state.s_res.is_finite()) {
            return Err(Error::Solver(format!("non-finite ADMM residuals at inner iteration {l}")));
        }
        if state.r < cfg.tol_primal && state.s_res < cfg.tol_dual {
            out.converged = true;
            break;
        }
        state.beta = beta_update(state.r, state.s_res, state.beta, cfg);
    }
    out.a = state.x.clone();
    out.state = state;
    Ok(out)
}

/// Result of a source update.
#[derive(Debug, Clone, PartialEq)]
pub struct FUpdate {
    pub f: Image,
    pub iterations: usize,
    pub r: f64,
    pub s_res: f64,
    /// Norm of the gradient of the smoothed source objective at `f`.
    pub stationarity: f64,
    pub converged: bool,
}

// A^T A-type operator of the source subproblem:
// f -> 2 R^T R f + beta D^T D f + (1/xi + ridge) f.
struct SourceOperator<'a> {
    r: &'a SystemMatrix,
    beta: f64,
    diag: f64,
    m: usize,
    buf_rays: Vec<f64>,
    buf_d: Vec<[f64; 2]>,
    buf_px: Vec<f64>,
}

impl SourceOperator<'_> {
    fn apply(&mut self, x: &[f64], out: &mut [f64]) {
        matvec(self.r, x, &mut self.buf_rays);
        matvec_t(self.r, &self.buf_rays, out);
        for v in out.iter_mut() {
            *v *= 2.0;
        }
        if self.beta != 0.0 {
            apply_d_into(x, self.m, &mut self.buf_d);
            apply_dt_into(&self.buf_d, self.m, &mut self.buf_px);
            for (o, b) in out.iter_mut().zip(&self.buf_px) {
                *o += self.beta * b;
            }
        }
        for (o, xi) in out.iter_mut().zip(x) {
            *o += self.diag * xi;
        }
    }
}

fn matvec(r: &SystemMatrix, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..r.rows()).map(|i| {
        let (cols, vals) = r.row(i);
        cols.iter().zip(vals).map(|(&c, &v)| x[c] * v).sum::<f64>()
    }));
}

fn matvec_t(r: &SystemMatrix, y: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, &yi) in y.iter().enumerate() {
        let (cols, vals) = r.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            out[c] += v * yi;
        }
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    sqrt(dot(u, u))
}

fn distance(u: &[f64], v: &[f64]) -> f64 {
    sqrt(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum())
}

// Conjugate gradients for the SPD system op(x) = rhs, warm-started at x.
fn conjugate_gradient(
    op: &mut SourceOperator<'_>,
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> usize {
    let n = rhs.len();
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    let target = tol * norm(rhs).max(f64::MIN_POSITIVE);
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        if sqrt(rr) <= target {
            return it;
        }
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return it;
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_new = dot(&r, &r);
        let ratio = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + ratio * p[i];
        }
    }
    max_iter
}

const LS_RIDGE: f64 = 1e-10;

/// Least-squares source for fixed `a`: minimizes
/// `||R[a]f - d||^2 + 1e-10 ||f||^2` by conjugate gradients.
pub fn least_squares_source(
    projector: &Projector,
    a: &Image,
    d: &Sinogram,
    cfg: &SolverConfig,
) -> Result<Image> {
    projector.check_data(d)?;
    let r = projector.assemble(a)?;
    let n = a.len();
    let mut rhs = vec![0.0; n];
    matvec_t(&r, d.values(), &mut rhs);
    rhs.iter_mut().for_each(|v| *v *= 2.0);
    let mut op = SourceOperator {
        r: &r,
        beta: 0.0,
        diag: 2.0 * LS_RIDGE,
        m: a.grid().size(),
        buf_rays: Vec::new(),
        buf_d: Vec::new(),
        buf_px: vec![0.0; n],
    };
    let mut f = vec![0.0; n];
    conjugate_gradient(&mut op, &rhs, &mut f, cfg.cg_tol, cfg.max_cg_iters);
    Image::new(*a.grid(), f)
}

fn source_gradient(
    r: &SystemMatrix,
    f: &Image,
    f_prev: &Image,
    d: &Sinogram,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let mut resid = Vec::new();
    matvec(r, f.values(), &mut resid);
    for (ri, di) in resid.iter_mut().zip(d.values()) {
        *ri -= di;
    }
    let mut g = vec![0.0; f.len()];
    matvec_t(r, &resid, &mut g);
    g.iter_mut().for_each(|v| *v *= 2.0);
    if cfg.eta > 0.0 {
        let tv = tv_gradient(f, cfg.smoothing)?;
        for (gi, ti) in g.iter_mut().zip(tv.values()) {
            *gi += cfg.eta * ti;
        }
    }
    let inv_xi = cfg.inv_xi();
    for ((gi, a), b) in g.iter_mut().zip(f.values()).zip(f_prev.values()) {
        *gi += inv_xi * (a - b);
    }
    Ok(g)
}

/// ADMM for the source subproblem with `a` fixed, started at `f_prev`.
pub fn f_update(
    projector: &Projector,
    a: &Image,
    f_prev: &Image,
    d: &Sinogram,
    cfg: &SolverConfig,
) -> Result<FUpdate> {
    cfg.validate()?;
    projector.check(a)?;
    projector.check(f_prev)?;
    projector.check_data(d)?;
    let grid = *a.grid();
    let m = grid.size();
    let n = grid.pixel_count();
    let r = projector.assemble(a)?;
    let inv_xi = cfg.inv_xi();
    let mut base_rhs = vec![0.0; n];
    matvec_t(&r, d.values(), &mut base_rhs);
    for (b, fp) in base_rhs.iter_mut().zip(f_prev.values()) {
        *b = 2.0 * *b + inv_xi * fp;
    }
    let mut f = f_prev.values().to_vec();
    let mut op = SourceOperator {
        r: &r,
        beta: 0.0,
        diag: inv_xi + 2.0 * LS_RIDGE,
        m,
        buf_rays: Vec::new(),
        buf_d: vec![[0.0; 2]; n.saturating_sub(1)],
        buf_px: vec![0.0; n],
    };

    if cfg.eta == 0.0 {
        conjugate_gradient(&mut op, &base_rhs, &mut f, cfg.cg_tol, cfg.max_cg_iters);
        if cfg.nonnegative_f {
            f.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        let f = Image::new(grid, f)?;
        let g = source_gradient(&r, &f, f_prev, d, cfg)?;
        let stationarity = norm(&g);
        return Ok(FUpdate {
            converged: stationarity <= cfg.tol_stationarity * (1.0 + norm(f.values())),
            f,
            iterations: 1,
            r: 0.0,
            s_res: 0.0,
            stationarity,
        });
    }

    let mut y = vec![[0.0; 2]; n - 1];
    apply_d_into(&f, m, &mut y);
    let mut mu = GradientField::zeros(grid);
    let mut beta = cfg.beta0;
    let mut rhs = vec![0.0; n];
    let mut back = vec![0.0; n];
    let mut field = vec![[0.0; 2]; n - 1];
    let mut dx = vec![[0.0; 2]; n - 1];
    let mut out = FUpdate {
        f: f_prev.clone(),
        iterations: 0,
        r: 0.0,
        s_res: 0.0,
        stationarity: f64::INFINITY,
        converged: false,
    };
    for l in 1..=cfg.max_inner {
        // x block: (2 R^T R + beta D^T D + 1/xi) f = 2 R^T d + D^T (beta y + mu) + f_prev / xi
        for ((o, yi), mi) in field.iter_mut().zip(&y).zip(mu.vectors()) {
            *o = [beta * yi[0] + mi[0], beta * yi[1] + mi[1]];
        }
        apply_dt_into(&field, m, &mut back);
        for i in 0..n {
            rhs[i] = base_rhs[i] + back[i];
        }
        op.beta = beta;
        conjugate_gradient(&mut op, &rhs, &mut f, cfg.cg_tol, cfg.max_cg_iters);
        if cfg.nonnegative_f {
            f.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        let f_img = Image::new(grid, f.clone())?;
        let y_new = y_step(&f_img, &negated(&mu), beta, cfg.eta, cfg)?;
        apply_d_into(&f, m, &mut dx);
        let mut r2 = 0.0;
        for (((yn, yo), dxi), (mi, dyi)) in y_new
            .vectors()
            .iter()
            .zip(&y)
            .zip(&dx)
            .zip(mu.vectors_mut().iter_mut().zip(field.iter_mut()))
        {
            let e = [yn[0] - dxi[0], yn[1] - dxi[1]];
            r2 += e[0] * e[0] + e[1] * e[1];
            mi[0] += beta * e[0];
            mi[1] += beta * e[1];
            *dyi = [yn[0] - yo[0], yn[1] - yo[1]];
        }
        apply_dt_into(&field, m, &mut back);
        out.r = sqrt(r2);
        out.s_res = beta * norm(&back);
        y.copy_from_slice(y_new.vectors());
        out.iterations = l;
        if !(out.r.is_finite() && out.s_res.is_finite()) {
            return Err(Error::Solver(format!("non-finite source ADMM residuals at iteration {l}")));
        }
        if out.r < cfg.tol_primal && out.s_res < cfg.tol_dual {
            let g = source_gradient(&r, &f_img, f_prev, d, cfg)?;
            out.stationarity = norm(&g);
            if out.stationarity <= cfg.tol_stationarity * (1.0 + norm(&f)) {
                out.converged = true;
                out.f = f_img;
                return Ok(out);
            }
        }
        beta = beta_update(out.r, out.s_res, beta, cfg);
    }
    let f_img = Image::new(grid, f)?;
    out.stationarity = norm(&source_gradient(&r, &f_img, f_prev, d, cfg)?);
    out.f = f_img;
    Ok(out)
}

/// `||R[a]f - d||^2 + alpha M(a) + lambda TV_c(a) + eta TV_c(f)`.
///
/// Returns the value and whether it is finite; an infinite value (some
/// pixel outside `[a_0, a_n]`) is reported as [`OBJECTIVE_SENTINEL`].
pub fn objective(
    projector: &Projector,
    a: &Image,
    f: &Image,
    d: &Sinogram,
    cfg: &SolverConfig,
) -> Result<(f64, bool)> {
    let misfit = projector.misfit(a, f, d)?;
    let mb = multibang_penalty(a, &cfg.admissible);
    if mb.is_infinite() {
        return Ok((OBJECTIVE_SENTINEL, false));
    }
    let mut value = misfit + cfg.alpha * mb;
    if cfg.lambda > 0.0 {
        value += cfg.lambda * tv_smoothed(a, cfg.smoothing)?;
    }
    if cfg.eta > 0.0 {
        value += cfg.eta * tv_smoothed(f, cfg.smoothing)?;
    }
    Ok((value, value.is_finite()))
}

/// One row of the convergence history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub k: usize,
    pub objective: f64,
    /// Final primal residual of the attenuation ADMM.
    pub r: f64,
    /// Final dual residual of the attenuation ADMM.
    pub s: f64,
    pub beta: f64,
    pub mb_proportion: f64,
    pub delta_a: f64,
    pub delta_f: f64,
    /// Whether both ADMM loops met their tolerances.
    pub inner_converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconState {
    pub a: Image,
    pub f: Image,
    pub k: usize,
    pub history: Vec<HistoryRow>,
    pub converged: bool,
}

/// Alternating reconstruction from `a0`, with `f0` the least-squares source
/// for `a0`.
pub fn joint_reconstruct(
    projector: &Projector,
    d: &Sinogram,
    cfg: &SolverConfig,
    a0: &Image,
) -> Result<ReconState> {
    cfg.validate()?;
    let f0 = least_squares_source(projector, a0, d, cfg)?;
    joint_reconstruct_from(projector, d, cfg, a0, &f0, |_| {})
}

/// Alternating reconstruction from `(a0, f0)`. `observe` sees each history
/// row as soon as it is produced.
pub fn joint_reconstruct_from(
    projector: &Projector,
    d: &Sinogram,
    cfg: &SolverConfig,
    a0: &Image,
    f0: &Image,
    mut observe: impl FnMut(&HistoryRow),
) -> Result<ReconState> {
    cfg.validate()?;
    projector.check(a0)?;
    projector.check(f0)?;
    projector.check_data(d)?;
    let set = &cfg.admissible;
    if a0.values().iter().any(|&v| v < set.min() || v > set.max()) {
        return Err(Error::invalid("initial attenuation must lie within [a_0, a_n]"));
    }
    let mut state = ReconState { a: a0.clone(), f: f0.clone(), k: 0, history: Vec::new(), converged: false };
    for k in 1..=cfg.max_outer {
        let au = a_update(projector, &state.a, &state.f, d, cfg)?;
        let fu = f_update(projector, &au.a, &state.f, d, cfg)?;
        let delta_a = distance(au.a.values(), state.a.values());
        let delta_f = distance(fu.f.values(), state.f.values());
        let (obj, finite) = objective(projector, &au.a, &fu.f, d, cfg)?;
        if !finite || !fu.f.values().iter().all(|v| v.is_finite()) {
            return Err(Error::Solver(format!(
                "objective diverged at outer iteration {k}: value {obj}, last delta_a {delta_a}, \
                 delta_f {delta_f}, beta {}",
                au.state.beta
            )));
        }
        let row = HistoryRow {
            k,
            objective: obj,
            r: au.state.r,
            s: au.state.s_res,
            beta: au.state.beta,
            mb_proportion: multibang_proportion(&au.a, set, cfg.mb_tol),
            delta_a,
            delta_f,
            inner_converged: au.converged && fu.converged,
        };
        observe(&row);
        state.history.push(row);
        state.a = au.a;
        state.f = fu.f;
        state.k = k;
        if delta_a < cfg.tol_outer && delta_f < cfg.tol_outer {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}
