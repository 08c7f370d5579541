//! Product-Bernoulli noise and its mixtures on `{−1,+1}ⁿ`.

use super::{DomainKind, NoiseModel};
use crate::error::{invalid, Result};
use crate::numeric::log_sum_exp;
use crate::sample::Sample;
use crate::sampling::RngStream;

/// Independent coordinates with `P(xᵢ = +1) = pᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliNoise {
    probs: Vec<f64>,
}

impl BernoulliNoise {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(invalid("Bernoulli probabilities must lie in (0, 1)"));
        }
        Ok(Self { probs })
    }

    /// Equal success probability ½ in every coordinate.
    pub fn uniform(n: usize) -> Self {
        Self { probs: vec![0.5; n] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

fn product_log_mass(probs: &[f64], u: &[f64]) -> f64 {
    probs
        .iter()
        .zip(u)
        .map(|(p, &v)| if v > 0.0 { p.ln() } else { (1.0 - p).ln() })
        .sum()
}

fn draw_product(probs: &[f64], rng: &mut RngStream, out: &mut Vec<f64>) {
    for p in probs {
        out.push(if rng.uniform() < *p { 1.0 } else { -1.0 });
    }
}

impl NoiseModel for BernoulliNoise {
    fn dim(&self) -> usize {
        self.probs.len()
    }

    fn domain(&self) -> DomainKind {
        DomainKind::BinaryHypercube
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        product_log_mass(&self.probs, u)
    }

    fn sample(&self, rng: &mut RngStream, count: usize) -> Sample {
        let mut data = Vec::with_capacity(count * self.dim());
        for _ in 0..count {
            draw_product(&self.probs, rng, &mut data);
        }
        Sample::from_flat(self.dim(), data).expect("valid draws")
    }

    fn describe(&self) -> String {
        format!("bernoulli(n={})", self.dim())
    }
}

/// Mixture of product-Bernoulli components.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliMixture {
    weights: Vec<f64>,
    probs: Vec<Vec<f64>>,
}

impl BernoulliMixture {
    pub fn new(weights: Vec<f64>, probs: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != probs.len() {
            return Err(invalid("need one probability vector per mixture weight"));
        }
        let n = probs[0].len();
        if n == 0 || probs.iter().any(|p| p.len() != n) {
            return Err(invalid("components must share one positive dimension"));
        }
        if probs.iter().flatten().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(invalid("component probabilities must lie in (0, 1)"));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
            return Err(invalid("mixture weights must be nonnegative with positive sum"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { weights, probs })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn component_probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    fn component_log_terms(&self, u: &[f64], out: &mut [f64]) {
        for (k, (w, p)) in self.weights.iter().zip(&self.probs).enumerate() {
            out[k] = w.ln() + product_log_mass(p, u);
        }
    }
}

impl NoiseModel for BernoulliMixture {
    fn dim(&self) -> usize {
        self.probs[0].len()
    }

    fn domain(&self) -> DomainKind {
        DomainKind::BinaryHypercube
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        let mut terms = vec![0.0; self.weights.len()];
        self.component_log_terms(u, &mut terms);
        log_sum_exp(&terms)
    }

    fn sample(&self, rng: &mut RngStream, count: usize) -> Sample {
        let mut data = Vec::with_capacity(count * self.dim());
        let last = self.weights.len() - 1;
        for _ in 0..count {
            let u = rng.uniform();
            let mut acc = 0.0;
            let mut k = last;
            for (j, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = j;
                    break;
                }
            }
            draw_product(&self.probs[k], rng, &mut data);
        }
        Sample::from_flat(self.dim(), data).expect("valid draws")
    }

    fn describe(&self) -> String {
        format!("bernoulli_mixture(n={}, components={})", self.dim(), self.weights.len())
    }
}

/// Settings for fitting a Bernoulli mixture by EM.
#[derive(Clone, Debug, PartialEq)]
pub struct EmConfig {
    pub components: usize,
    pub max_iterations: usize,
    /// Stop once the relative change of the log-likelihood falls below this.
    pub tolerance: f64,
    /// Probabilities are kept inside `[clamp, 1 − clamp]`.
    pub clamp: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            components: 4,
            max_iterations: 200,
            tolerance: 1e-8,
            clamp: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MixtureFit {
    pub mixture: BernoulliMixture,
    /// Mean log-likelihood of the data before each M-step, then of the final fit.
    pub log_likelihood: Vec<f64>,
}

/// Fits a product-Bernoulli mixture to ±1 data by expectation maximization.
///
/// Components start at the empirical frequencies with independent uniform
/// perturbations drawn from `rng`.
pub fn fit_bernoulli_mixture(data: &Sample, config: &EmConfig, rng: &mut RngStream) -> Result<MixtureFit> {
    if config.components == 0 {
        return Err(invalid("need at least one mixture component"));
    }
    if !data.is_binary() {
        return Err(invalid("mixture fitting needs ±1 data"));
    }
    let n = data.dim();
    let kc = config.components;
    let clamp = |p: f64| p.clamp(config.clamp, 1.0 - config.clamp);

    let freq: Vec<f64> = (0..n).map(|i| data.expectation(|x| (x[i] > 0.0) as u8 as f64)).collect();
    // a single component starts (and ends) at the empirical frequencies;
    // several components start at independent perturbations of them
    let probs_init = |rng: &mut RngStream| -> Vec<f64> {
        freq.iter()
            .map(|&f| {
                if kc == 1 {
                    clamp(f)
                } else {
                    clamp((f + 0.4 * (rng.uniform() - 0.5)).clamp(0.02, 0.98))
                }
            })
            .collect()
    };
    let mut probs: Vec<Vec<f64>> = (0..kc).map(|_| probs_init(rng)).collect();
    let mut weights = vec![1.0 / kc as f64; kc];

    let mut trace = Vec::new();
    let mut resp = vec![0.0; data.len() * kc];
    let mut terms = vec![0.0; kc];
    for _ in 0..config.max_iterations {
        let mixture = BernoulliMixture { weights: weights.clone(), probs: probs.clone() };
        let mut ll = 0.0;
        for (t, (w, x)) in data.iter().enumerate() {
            mixture.component_log_terms(x, &mut terms);
            let lse = log_sum_exp(&terms);
            ll += w * lse;
            for k in 0..kc {
                resp[t * kc + k] = (terms[k] - lse).exp();
            }
        }
        let converged = trace
            .last()
            .is_some_and(|prev: &f64| (ll - prev).abs() <= config.tolerance * prev.abs().max(1e-300));
        trace.push(ll);
        if converged {
            break;
        }
        // M-step
        for k in 0..kc {
            let mass: f64 = data.iter().enumerate().map(|(t, (w, _))| w * resp[t * kc + k]).sum();
            weights[k] = mass.max(1e-10);
            for i in 0..n {
                let ones: f64 = data
                    .iter()
                    .enumerate()
                    .filter(|(_, (_, x))| x[i] > 0.0)
                    .map(|(t, (w, _))| w * resp[t * kc + k])
                    .sum();
                probs[k][i] = if mass > 0.0 { clamp(ones / mass) } else { 0.5 };
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }
    let mixture = BernoulliMixture::new(weights, probs)?;
    let final_ll = data.expectation(|x| mixture.log_density(x));
    trace.push(final_ll);
    Ok(MixtureFit {
        mixture,
        log_likelihood: trace,
    })
}
