//! Convex generators, the Bregman divergence, and loss pairs (S₀, S₁).
//!
//! A strictly convex, differentiable generator Ψ induces the divergence
//! `d_Ψ(a, b) = Ψ(a) − Ψ(b) − Ψ′(b)(a − b)`. For scalar functions the
//! cost that remains after dropping terms constant in the fitted function is
//! `∫ S₀(g) − S₁(g) f dμ` with
//!
//! ```text
//! S₀(g) = −Ψ(g) + Ψ′(g) g,    S₁(g) = Ψ′(g)
//! ```
//!
//! and any pair with `S₀′(g) / S₁′(g) = g` and `S₁′ > 0` yields a valid
//! estimator. Objectives evaluate pairs on log-ratios `G = ln g`, which is
//! what [`LogSPair`] provides.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::numeric::{linear_grid, log_grid, sigmoid, softplus};

/// Shared scalar function.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

fn scalar_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

/// Relative tolerance for closed-form identity checks.
pub const EPS_REL: f64 = 1e-9;
/// Absolute tolerance for closed-form identity checks.
pub const EPS_ABS: f64 = 1e-12;

/// Open interval `(lower, upper)`; bounds may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(invalid(format!("empty interval ({lower}, {upper})")));
        }
        Ok(Self { lower, upper })
    }

    pub const fn real_line() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub const fn positive() -> Self {
        Self {
            lower: 0.0,
            upper: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    pub fn check(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                value: x,
                lower: self.lower,
                upper: self.upper,
            })
        }
    }

    /// Validation grid: logarithmic over `[1e-3, 1e3]` for the positive
    /// half-line, linear over `[-30, 30]` for the real line, and a linear
    /// interior grid for bounded intervals.
    pub fn default_grid(&self) -> Vec<f64> {
        if *self == Self::positive() {
            log_grid(1e-3, 1e3, 61)
        } else if *self == Self::real_line() {
            linear_grid(-30.0, 30.0, 61)
        } else {
            let lo = if self.lower.is_finite() { self.lower } else { self.upper - 60.0 };
            let hi = if self.upper.is_finite() { self.upper } else { self.lower + 60.0 };
            let pad = (hi - lo) * 1e-3;
            linear_grid(lo + pad, hi - pad, 61)
        }
    }
}

/// Strictly convex scalar generator Ψ on an open interval.
///
/// The second and third derivatives are optional; they are needed only by
/// score-function matching (and used when available to build exact S-pairs).
#[derive(Clone)]
pub struct ConvexGenerator {
    name: String,
    domain: Interval,
    value: ScalarFn,
    derivative: ScalarFn,
    second: Option<ScalarFn>,
    third: Option<ScalarFn>,
}

impl fmt::Debug for ConvexGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexGenerator")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl ConvexGenerator {
    pub fn new(
        name: impl Into<String>,
        domain: Interval,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            value: scalar_fn(value),
            derivative: scalar_fn(derivative),
            second: None,
            third: None,
        }
    }

    pub fn with_second_derivative(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.second = Some(scalar_fn(f));
        self
    }

    pub fn with_third_derivative(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.third = Some(scalar_fn(f));
        self
    }

    /// Ψ(u) = u².
    pub fn square() -> Self {
        Self::new("square", Interval::real_line(), |u| u * u, |u| 2.0 * u)
            .with_second_derivative(|_| 2.0)
            .with_third_derivative(|_| 0.0)
    }

    /// Ψ(u) = u²/2, the generator behind score matching and ratio matching.
    pub fn half_square() -> Self {
        Self::new("half_square", Interval::real_line(), |u| 0.5 * u * u, |u| u)
            .with_second_derivative(|_| 1.0)
            .with_third_derivative(|_| 0.0)
    }

    /// Ψ(u) = u ln u − (1 + u) ln(1 + u), the noise-contrastive generator.
    pub fn noise_contrastive() -> Self {
        Self::new(
            "noise_contrastive",
            Interval::positive(),
            |u| u * u.ln() - (1.0 + u) * u.ln_1p(),
            |u| u.ln() - u.ln_1p(),
        )
        .with_second_derivative(|u| 1.0 / (u * (1.0 + u)))
        .with_third_derivative(|u| -(1.0 + 2.0 * u) / (u * u * (1.0 + u) * (1.0 + u)))
    }

    /// Ψ(u) = u ln u − u, which induces the importance-sampled likelihood pair.
    pub fn entropy() -> Self {
        Self::new("entropy", Interval::positive(), |u| u * u.ln() - u, |u| u.ln())
            .with_second_derivative(|u| 1.0 / u)
            .with_third_derivative(|u| -1.0 / (u * u))
    }

    /// Ψ(u) = √(1 + u²), strictly convex on the real line with bounded Ψ′.
    pub fn pseudo_huber() -> Self {
        Self::new(
            "pseudo_huber",
            Interval::real_line(),
            |u| (1.0 + u * u).sqrt(),
            |u| u / (1.0 + u * u).sqrt(),
        )
        .with_second_derivative(|u| (1.0 + u * u).powf(-1.5))
        .with_third_derivative(|u| -3.0 * u * (1.0 + u * u).powf(-2.5))
    }

    /// All generators shipped with the crate.
    pub fn builtins() -> Vec<Self> {
        vec![
            Self::square(),
            Self::half_square(),
            Self::noise_contrastive(),
            Self::entropy(),
            Self::pseudo_huber(),
        ]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn value(&self, u: f64) -> f64 {
        (self.value)(u)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        (self.derivative)(u)
    }

    pub fn second_derivative(&self, u: f64) -> Option<f64> {
        self.second.as_ref().map(|f| f(u))
    }

    pub fn third_derivative(&self, u: f64) -> Option<f64> {
        self.third.as_ref().map(|f| f(u))
    }

    /// Ψ″ from the closed form when present, else by central differences
    /// kept inside the domain.
    fn second_or_numeric(&self, u: f64) -> f64 {
        if let Some(f) = &self.second {
            return f(u);
        }
        let mut h = 1e-4 * u.abs().max(1e-3);
        while !(self.domain.contains(u - h) && self.domain.contains(u + h)) {
            h *= 0.5;
        }
        (self.derivative(u + h) - self.derivative(u - h)) / (2.0 * h)
    }

    /// True iff Ψ′ is strictly increasing along the sorted grid.
    pub fn derivative_is_increasing(&self, grid: &[f64]) -> bool {
        let mut pts: Vec<f64> = grid.iter().copied().filter(|u| self.domain.contains(*u)).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts.windows(2).all(|w| self.derivative(w[0]) < self.derivative(w[1]))
    }
}

/// Scalar Bregman divergence `Ψ(a) − Ψ(b) − Ψ′(b)(a − b)`.
pub fn bregman_divergence(psi: &ConvexGenerator, a: f64, b: f64) -> Result<f64> {
    psi.domain.check(a)?;
    psi.domain.check(b)?;
    Ok(psi.value(a) - psi.value(b) - psi.derivative(b) * (a - b))
}

/// Vector divergence for a separable generator Ψ(u) = Σᵢ ψ(uᵢ).
pub fn separable_bregman_divergence(psi: &ConvexGenerator, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid(format!("length mismatch {} vs {}", a.len(), b.len())));
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| bregman_divergence(psi, x, y))
        .sum()
}

/// Loss pair (S₀, S₁) with derivatives, defined on a subset of the positive reals.
#[derive(Clone)]
pub struct SPair {
    name: String,
    domain: Interval,
    s0: ScalarFn,
    s1: ScalarFn,
    s0_deriv: ScalarFn,
    s1_deriv: ScalarFn,
    log_form: Option<LogSPair>,
}

impl fmt::Debug for SPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SPair")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("closed_log_form", &self.log_form.is_some())
            .finish_non_exhaustive()
    }
}

impl SPair {
    pub fn new(
        name: impl Into<String>,
        domain: Interval,
        s0: impl Fn(f64) -> f64 + Send + Sync + 'static,
        s1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        s0_deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        s1_deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            s0: scalar_fn(s0),
            s1: scalar_fn(s1),
            s0_deriv: scalar_fn(s0_deriv),
            s1_deriv: scalar_fn(s1_deriv),
            log_form: None,
        }
    }

    fn with_log_form(mut self, log_form: LogSPair) -> Self {
        self.log_form = Some(log_form);
        self
    }

    /// S₀(u) = ln(1 + u), S₁(u) = ln u − ln(1 + u).
    pub fn noise_contrastive() -> Self {
        Self::new(
            "nce",
            Interval::positive(),
            |u| u.ln_1p(),
            |u| u.ln() - u.ln_1p(),
            |u| 1.0 / (1.0 + u),
            |u| 1.0 / (u * (1.0 + u)),
        )
        .with_log_form(LogSPair::new(softplus, softplus, sigmoid, sigmoid))
    }

    /// S₀(u) = u²/2, S₁(u) = u.
    pub fn quadratic() -> Self {
        Self::new(
            "quadratic",
            Interval::positive(),
            |u| 0.5 * u * u,
            |u| u,
            |u| u,
            |_| 1.0,
        )
        .with_log_form(LogSPair::new(
            |g| 0.5 * (2.0 * g).exp(),
            |g| -(-g).exp(),
            |g| (2.0 * g).exp(),
            |g| (-g).exp(),
        ))
    }

    /// S₀(u) = u, S₁(u) = ln u.
    pub fn log() -> Self {
        Self::new(
            "log",
            Interval::positive(),
            |u| u,
            |u| u.ln(),
            |_| 1.0,
            |u| 1.0 / u,
        )
        .with_log_form(LogSPair::new(f64::exp, |g| g, f64::exp, |_| 1.0))
    }

    pub fn builtins() -> Vec<Self> {
        vec![Self::noise_contrastive(), Self::quadratic(), Self::log()]
    }

    /// Looks up a builtin pair by its name (`nce`, `quadratic`, `log`).
    pub fn by_name(name: &str) -> Option<Self> {
        Self::builtins().into_iter().find(|p| p.name == name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn s0(&self, u: f64) -> f64 {
        (self.s0)(u)
    }

    pub fn s1(&self, u: f64) -> f64 {
        (self.s1)(u)
    }

    pub fn s0_deriv(&self, u: f64) -> f64 {
        (self.s0_deriv)(u)
    }

    pub fn s1_deriv(&self, u: f64) -> f64 {
        (self.s1_deriv)(u)
    }
}

/// Builds (S₀, S₁) from Ψ via `S₀ = −Ψ(g) + Ψ′(g) g` and `S₁ = Ψ′(g)`.
pub fn s_pair_from_generator(psi: &ConvexGenerator) -> Result<SPair> {
    let domain = psi.domain();
    if domain.lower < 0.0 {
        return Err(Error::Construction(format!(
            "generator {} must live on a positive domain, got ({}, {})",
            psi.name, domain.lower, domain.upper
        )));
    }
    for u in domain.default_grid() {
        let d = psi.derivative(u);
        let d2 = psi.second_or_numeric(u);
        if !d.is_finite() || !d2.is_finite() {
            return Err(Error::Construction(format!(
                "derivative of {} unavailable at {u}",
                psi.name
            )));
        }
    }
    let (p0, p1, p2, p3) = (psi.clone(), psi.clone(), psi.clone(), psi.clone());
    Ok(SPair::new(
        format!("from_{}", psi.name),
        domain,
        move |g| -p0.value(g) + p0.derivative(g) * g,
        move |g| p1.derivative(g),
        move |g| p2.second_or_numeric(g) * g,
        move |g| p3.second_or_numeric(g),
    ))
}

/// Outcome of checking `S₀′(g) = g S₁′(g)` and `S₁′(g) > 0` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SPairReport {
    /// Largest `|S₀′ − g S₁′| / (|S₀′| + |g S₁′|)` over the grid.
    pub max_violation: f64,
    /// Grid point at which `max_violation` occurs.
    pub worst_point: f64,
    pub s1_deriv_positive: bool,
}

impl SPairReport {
    pub fn is_valid(&self, tolerance: f64) -> bool {
        self.s1_deriv_positive && self.max_violation <= tolerance
    }
}

pub fn validate_s_pair(pair: &SPair, grid: &[f64]) -> Result<SPairReport> {
    if grid.is_empty() {
        return Err(invalid("empty validation grid"));
    }
    let mut report = SPairReport {
        max_violation: 0.0,
        worst_point: grid[0],
        s1_deriv_positive: true,
    };
    for &g in grid {
        pair.domain.check(g)?;
        let d0 = pair.s0_deriv(g);
        let gd1 = g * pair.s1_deriv(g);
        if !(pair.s1_deriv(g) > 0.0) {
            report.s1_deriv_positive = false;
        }
        let scale = d0.abs() + gd1.abs();
        let violation = if scale == 0.0 { 0.0 } else { (d0 - gd1).abs() / scale };
        if !(violation <= report.max_violation) {
            report.max_violation = violation;
            report.worst_point = g;
        }
    }
    Ok(report)
}

/// Loss pair on log-ratios: `S̃₀(G) = S₀(e^G)`, `S̃₁(G) = −S₁(e^{−G})`.
///
/// With these, `ν E[S₀(g(y))] − E[S₁(g(x))] = ν E[S̃₀(G(y))] + E[S̃₁(−G(x))]`
/// for `G = ln g`, and the pair satisfies `S̃₀′(G) / S̃₁′(−G) = e^G`.
#[derive(Clone)]
pub struct LogSPair {
    ls0: ScalarFn,
    ls1: ScalarFn,
    ls0_deriv: ScalarFn,
    ls1_deriv: ScalarFn,
}

impl fmt::Debug for LogSPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("LogSPair { .. }")
    }
}

impl LogSPair {
    pub fn new(
        ls0: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ls1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ls0_deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ls1_deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            ls0: scalar_fn(ls0),
            ls1: scalar_fn(ls1),
            ls0_deriv: scalar_fn(ls0_deriv),
            ls1_deriv: scalar_fn(ls1_deriv),
        }
    }

    #[inline]
    pub fn ls0(&self, g: f64) -> f64 {
        (self.ls0)(g)
    }

    #[inline]
    pub fn ls1(&self, g: f64) -> f64 {
        (self.ls1)(g)
    }

    #[inline]
    pub fn ls0_deriv(&self, g: f64) -> f64 {
        (self.ls0_deriv)(g)
    }

    #[inline]
    pub fn ls1_deriv(&self, g: f64) -> f64 {
        (self.ls1_deriv)(g)
    }

    /// Largest relative deviation of `S̃₀′(G) / S̃₁′(−G)` from `e^G` over the grid.
    pub fn tilde_violation(&self, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&g| {
                let ratio = self.ls0_deriv(g) / self.ls1_deriv(-g);
                (ratio / g.exp() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Log-domain form of a pair. Builtin pairs carry overflow-safe closed
/// forms; other pairs are composed with `exp` directly.
pub fn logit_boost_transform(pair: &SPair) -> LogSPair {
    if let Some(form) = &pair.log_form {
        return form.clone();
    }
    let (a, b, c, d) = (pair.clone(), pair.clone(), pair.clone(), pair.clone());
    LogSPair::new(
        move |g| a.s0(g.exp()),
        move |g| -b.s1((-g).exp()),
        move |g| {
            let u = g.exp();
            c.s0_deriv(u) * u
        },
        move |g| {
            let u = (-g).exp();
            d.s1_deriv(u) * u
        },
    )
}
