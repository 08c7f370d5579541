//! Limited-memory BFGS with Armijo backtracking.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{invalid, Result};
use crate::estimators::Objective;
use crate::numeric::{dot, inf_norm};
use crate::sampling::RngStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchConfig {
    pub sufficient_decrease: f64,
    pub shrink: f64,
    pub max_steps: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            sufficient_decrease: 1e-4,
            shrink: 0.5,
            max_steps: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimConfig {
    pub max_iterations: usize,
    /// Stop when the infinity norm of the gradient falls to this value.
    pub gradient_tolerance: f64,
    pub memory: usize,
    pub line_search: LineSearchConfig,
    pub restarts: usize,
    pub init_scale: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            memory: 10,
            line_search: LineSearchConfig::default(),
            restarts: 1,
            init_scale: 0.1,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        if self.max_iterations == 0 || self.memory == 0 || self.restarts == 0 || ls.max_steps == 0 {
            return Err(invalid("iteration, memory, restart and step counts must be positive"));
        }
        if !(self.gradient_tolerance > 0.0) || !(self.init_scale > 0.0) {
            return Err(invalid("gradient tolerance and init scale must be positive"));
        }
        if !(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease < 0.5) {
            return Err(invalid("sufficient decrease must lie in (0, 1/2)"));
        }
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(invalid("shrink factor must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptimStatus {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

impl OptimStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max_iters",
            Self::LineSearchFailure => "line_search_failure",
        }
    }
}

impl fmt::Display for OptimStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: OptimStatus,
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Two-loop recursion: returns `−H g`.
fn direction(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Tries the minimizer of the quadratic through `f`, `slope` and `(t, f_t)`
/// when it differs noticeably from `t`, keeping whichever point is lower.
/// `x_new`/`g_new` hold the point at `t` on entry and the kept point on exit.
#[allow(clippy::too_many_arguments)]
fn refine_step<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    d: &[f64],
    f: f64,
    slope: f64,
    t: f64,
    f_t: f64,
    x_new: &mut [f64],
    g_new: &mut [f64],
) -> f64 {
    let curvature = f_t - f - slope * t;
    if !(curvature > 0.0) {
        return f_t;
    }
    let t_star = -slope * t * t / (2.0 * curvature);
    if !t_star.is_finite() || (t_star / t - 1.0).abs() <= 1e-3 {
        return f_t;
    }
    let x_star: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + t_star * di).collect();
    let mut g_star = vec![0.0; x.len()];
    let f_star = obj.evaluate(&x_star, &mut g_star);
    if f_star.is_finite() && all_finite(&g_star) && f_star < f_t {
        x_new.copy_from_slice(&x_star);
        g_new.copy_from_slice(&g_star);
        f_star
    } else {
        f_t
    }
}

/// Minimizes `obj` from `theta0`.
///
/// Accepted iterates never increase the objective. A non-finite value or
/// gradient is treated as a failed trial step; if it occurs at `theta0` the
/// start point is returned with status `LineSearchFailure`.
pub fn minimize<O: Objective + ?Sized>(obj: &O, theta0: &[f64], config: &OptimConfig) -> OptimResult {
    let dim = theta0.len();
    let mut x = theta0.to_vec();
    let mut g = vec![0.0; dim];
    let mut f = obj.evaluate(&x, &mut g);
    let result = |x: Vec<f64>, f: f64, g: &[f64], iterations: usize, status: OptimStatus| OptimResult {
        theta: x,
        value: f,
        grad_norm: inf_norm(g),
        iterations,
        status,
    };
    if !f.is_finite() || !all_finite(&g) {
        return result(x, f, &g, 0, OptimStatus::LineSearchFailure);
    }

    let ls = config.line_search;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut x_new = vec![0.0; dim];
    let mut g_new = vec![0.0; dim];
    for iter in 0..config.max_iterations {
        if inf_norm(&g) <= config.gradient_tolerance {
            return result(x, f, &g, iter, OptimStatus::Converged);
        }
        let mut d = direction(&g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) || !all_finite(&d) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }

        let mut accepted = None;
        for attempt in 0..2 {
            let mut t = if history.is_empty() { 1.0 / inf_norm(&g).max(1.0) } else { 1.0 };
            for _ in 0..ls.max_steps {
                for ((xn, xi), di) in x_new.iter_mut().zip(&x).zip(&d) {
                    *xn = xi + t * di;
                }
                let f_new = obj.evaluate(&x_new, &mut g_new);
                if f_new.is_finite() && all_finite(&g_new) && f_new <= f + ls.sufficient_decrease * t * slope {
                    accepted = Some(refine_step(obj, &x, &d, f, slope, t, f_new, &mut x_new, &mut g_new));
                    break;
                }
                t *= ls.shrink;
            }
            if accepted.is_some() || attempt == 1 || history.is_empty() {
                break;
            }
            // quasi-Newton direction failed; retry once along the negative gradient
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let Some(f_new) = accepted else {
            return result(x, f, &g, iter, OptimStatus::LineSearchFailure);
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
    }
    let status = if inf_norm(&g) <= config.gradient_tolerance {
        OptimStatus::Converged
    } else {
        OptimStatus::MaxIterations
    };
    result(x, f, &g, config.max_iterations, status)
}

/// Runs `config.restarts` minimizations: the first from `theta0`, the rest
/// from `theta0` plus Gaussian perturbations of scale `init_scale`. Returns
/// the run with the lowest finite value (earliest on ties).
pub fn minimize_with_restarts<O: Objective + ?Sized>(
    obj: &O,
    theta0: &[f64],
    config: &OptimConfig,
    rng: &mut RngStream,
) -> OptimResult {
    let mut best = minimize(obj, theta0, config);
    for _ in 1..config.restarts {
        let start: Vec<f64> = theta0
            .iter()
            .map(|v| v + config.init_scale * rng.standard_normal())
            .collect();
        let run = minimize(obj, &start, config);
        if run.value.is_finite() && !(best.value <= run.value) {
            best = run;
        }
    }
    best
}

/// Central differences of `obj` with step `h`.
pub fn finite_diff_grad<O: Objective + ?Sized>(obj: &O, theta: &[f64], h: f64) -> Vec<f64> {
    finite_diff_grad_fn(&|t: &[f64]| obj.value(t), theta, h)
}

/// Central differences of a closure with step `h`.
pub fn finite_diff_grad_fn<F: Fn(&[f64]) -> f64 + ?Sized>(f: &F, theta: &[f64], h: f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            t[i] = theta[i] + h;
            let up = f(&t);
            t[i] = theta[i] - h;
            let down = f(&t);
            t[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
