//! Fully visible Boltzmann machine on `{−1,+1}ⁿ`.
//!
//! `ln p_m(x) = ½ xᵀ M x + bᵀ x + c` with `M` symmetric and zero on the
//! diagonal. The parameter vector is laid out as the upper-triangular
//! couplings in row order `(0,1), (0,2), …, (n−2,n−1)`, then `b`, then `c`.

use nalgebra::DMatrix;

use super::{DomainKind, UnnormalizedModel};
use crate::error::{invalid, Result};
use crate::estimators::Objective;
use crate::numeric::{log_sigmoid, log_sum_exp, sigmoid};
use crate::sample::Sample;
use crate::sampling::{enumerate_states, RngStream};

pub(crate) fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of coupling `(i, j)`, `i < j`, in the flattened upper triangle.
#[inline]
pub(crate) fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoltzmannParams {
    n: usize,
    /// Free entries of `M` above the diagonal.
    pub coupling: Vec<f64>,
    pub bias: Vec<f64>,
    /// Stands in for the negative log partition function.
    pub c: f64,
}

impl BoltzmannParams {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            coupling: vec![0.0; pair_count(n)],
            bias: vec![0.0; n],
            c: 0.0,
        }
    }

    pub fn new(n: usize, coupling: Vec<f64>, bias: Vec<f64>, c: f64) -> Result<Self> {
        if coupling.len() != pair_count(n) || bias.len() != n {
            return Err(invalid(format!(
                "n = {n} needs {} couplings and {n} biases, got {} and {}",
                pair_count(n),
                coupling.len(),
                bias.len()
            )));
        }
        Ok(Self { n, coupling, bias, c })
    }

    /// Couplings and biases i.i.d. `N(0, std²)`, `c = 0`.
    pub fn random(n: usize, std: f64, rng: &mut RngStream) -> Self {
        let coupling = (0..pair_count(n)).map(|_| std * rng.standard_normal()).collect();
        let bias = (0..n).map(|_| std * rng.standard_normal()).collect();
        Self { n, coupling, bias, c: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn param_dim(&self) -> usize {
        pair_count(self.n) + self.n + 1
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_dim());
        v.extend_from_slice(&self.coupling);
        v.extend_from_slice(&self.bias);
        v.push(self.c);
        v
    }

    pub fn from_vec(n: usize, theta: &[f64]) -> Result<Self> {
        let p = pair_count(n);
        if theta.len() != p + n + 1 {
            return Err(invalid(format!("expected {} parameters, got {}", p + n + 1, theta.len())));
        }
        Ok(Self {
            n,
            coupling: theta[..p].to_vec(),
            bias: theta[p..p + n].to_vec(),
            c: theta[p + n],
        })
    }

    /// Symmetric, zero-diagonal coupling matrix.
    pub fn coupling_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i + 1..self.n {
                let v = self.coupling[pair_index(self.n, i, j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Energy term `½ xᵀMx + bᵀx` without `c`; `x` is not validated.
    pub fn energy(&self, x: &[f64]) -> f64 {
        energy(self.n, &self.coupling, &self.bias, x)
    }

    pub fn exact_log_partition(&self) -> Result<f64> {
        boltzmann_exact_log_partition(&self.coupling, &self.bias)
    }

    /// Copy with `c = −ln Z(M, b)`, i.e. the normalized pmf.
    pub fn normalized(&self) -> Result<Self> {
        let mut p = self.clone();
        p.c = -self.exact_log_partition()?;
        Ok(p)
    }
}

fn energy(n: usize, coupling: &[f64], bias: &[f64], x: &[f64]) -> f64 {
    let mut e = 0.0;
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            e += coupling[k] * x[i] * x[j];
            k += 1;
        }
    }
    e + bias.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

fn check_binary(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(invalid(format!("state has {} coordinates, expected {n}", x.len())));
    }
    if let Some(v) = x.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(invalid(format!("coordinate {v} is not ±1")));
    }
    Ok(())
}

/// `½ xᵀMx + bᵀx + c` for a ±1 state.
pub fn boltzmann_log_unnorm(x: &[f64], params: &BoltzmannParams) -> Result<f64> {
    check_binary(x, params.n)?;
    Ok(params.energy(x) + params.c)
}

/// `ln Σ_x exp(½ xᵀMx + bᵀx)` by enumerating all 2ⁿ states.
pub fn boltzmann_exact_log_partition(coupling: &[f64], bias: &[f64]) -> Result<f64> {
    let n = bias.len();
    if coupling.len() != pair_count(n) {
        return Err(invalid(format!("n = {n} needs {} couplings", pair_count(n))));
    }
    let states = enumerate_states(n)?;
    let energies: Vec<f64> = states.iter().map(|x| energy(n, coupling, bias, x)).collect();
    Ok(log_sum_exp(&energies))
}

/// The Boltzmann machine as an [`UnnormalizedModel`]; θ = (couplings, b, c).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoltzmannModel {
    n: usize,
}

impl BoltzmannModel {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl UnnormalizedModel for BoltzmannModel {
    fn input_dim(&self) -> usize {
        self.n
    }

    fn param_dim(&self) -> usize {
        pair_count(self.n) + self.n + 1
    }

    fn domain(&self) -> DomainKind {
        DomainKind::BinaryHypercube
    }

    fn log_unnorm(&self, x: &[f64], theta: &[f64]) -> f64 {
        let p = pair_count(self.n);
        energy(self.n, &theta[..p], &theta[p..p + self.n], x) + theta[p + self.n]
    }

    fn add_grad_theta(&self, x: &[f64], _theta: &[f64], scale: f64, grad: &mut [f64]) {
        let n = self.n;
        let mut k = 0;
        for i in 0..n {
            let sx = scale * x[i];
            for xj in &x[i + 1..n] {
                grad[k] += sx * xj;
                k += 1;
            }
        }
        for i in 0..n {
            grad[k + i] += scale * x[i];
        }
        grad[k + n] += scale;
    }

    fn describe(&self) -> String {
        format!("boltzmann(n={})", self.n)
    }
}

/// Negative mean log pseudolikelihood over the binary sample.
///
/// θ = (couplings, b); `c` has no role because every conditional
/// `p(xᵢ | x₋ᵢ) = σ(2 xᵢ aᵢ)` with `aᵢ = Σ_{j≠i} M_ij x_j + bᵢ` is normalized.
#[derive(Clone, Debug)]
pub struct PseudolikelihoodObjective {
    n: usize,
    data: Sample,
}

pub fn pseudolikelihood_objective(data: &Sample) -> Result<PseudolikelihoodObjective> {
    if !data.is_binary() {
        return Err(invalid("pseudolikelihood needs ±1 data"));
    }
    Ok(PseudolikelihoodObjective {
        n: data.dim(),
        data: data.clone(),
    })
}

impl PseudolikelihoodObjective {
    /// Estimate with `c` filled by the exact log partition of `(M̂, b̂)`.
    pub fn to_params(&self, theta: &[f64]) -> Result<BoltzmannParams> {
        let p = pair_count(self.n);
        BoltzmannParams::new(self.n, theta[..p].to_vec(), theta[p..].to_vec(), 0.0)?.normalized()
    }

    fn fields(&self, x: &[f64], theta: &[f64], a: &mut [f64]) {
        let n = self.n;
        let p = pair_count(n);
        a.copy_from_slice(&theta[p..p + n]);
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                a[i] += theta[k] * x[j];
                a[j] += theta[k] * x[i];
                k += 1;
            }
        }
    }
}

impl Objective for PseudolikelihoodObjective {
    fn param_dim(&self) -> usize {
        pair_count(self.n) + self.n
    }

    fn evaluate(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.n;
        let p = pair_count(n);
        grad.fill(0.0);
        let mut a = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut value = 0.0;
        for (w, x) in self.data.iter() {
            self.fields(x, theta, &mut a);
            for i in 0..n {
                let z = 2.0 * x[i] * a[i];
                value -= w * log_sigmoid(z);
                q[i] = -w * 2.0 * x[i] * sigmoid(-z);
            }
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    grad[k] += q[i] * x[j] + q[j] * x[i];
                    k += 1;
                }
            }
            for i in 0..n {
                grad[p + i] += q[i];
            }
        }
        value
    }

    fn describe(&self) -> String {
        format!("pseudolikelihood(n={})", self.n)
    }
}
