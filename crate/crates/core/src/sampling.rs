//! Reproducible randomness, state enumeration, and exact samplers.

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::numeric::log_sum_exp;
use crate::sample::Sample;

/// Largest dimension for which all 2ⁿ binary states are enumerated.
pub const MAX_ENUMERATION_DIM: usize = 20;

/// Seeded ChaCha20 stream. Identical `(seed, stream_id)` pairs produce
/// identical sequences on every platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    /// Stream whose id is derived from a path such as `[trial, purpose, index]`.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let id = path
            .iter()
            .fold(0x5851_f42d_4c95_7f2d_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)));
        Self::new(seed, id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Unit-variance Laplace draw, density `(1/√2) e^{−√2|s|}`.
    pub fn laplace(&mut self) -> f64 {
        // u uniform on (-1/2, 1/2); inverse cdf for scale 1/√2
        let mut u = self.uniform() - 0.5;
        while u == -0.5 {
            u = self.uniform() - 0.5;
        }
        -u.signum() * (1.0 - 2.0 * u.abs()).ln() / std::f64::consts::SQRT_2
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Unit-variance Laplace cdf.
pub fn laplace_cdf(x: f64) -> f64 {
    let s = std::f64::consts::SQRT_2;
    if x < 0.0 {
        0.5 * (s * x).exp()
    } else {
        1.0 - 0.5 * (-s * x).exp()
    }
}

fn check_enumerable(n: usize) -> Result<()> {
    if n > MAX_ENUMERATION_DIM {
        return Err(Error::EnumerationLimit {
            n,
            limit: MAX_ENUMERATION_DIM,
        });
    }
    if n == 0 {
        return Err(invalid("dimension must be positive"));
    }
    Ok(())
}

/// The `index`-th state of `{−1,+1}ⁿ`: bit `i` of `index` sets coordinate `i`.
pub fn state_from_index(index: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if (index >> i) & 1 == 1 { 1.0 } else { -1.0 })
        .collect()
}

/// Index of a ±1 state in the canonical order.
pub fn index_of_state(x: &[f64]) -> usize {
    x.iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .fold(0, |acc, (i, _)| acc | (1 << i))
}

/// All 2ⁿ binary states in canonical order.
pub fn enumerate_states(n: usize) -> Result<Vec<Vec<f64>>> {
    check_enumerable(n)?;
    Ok((0..1usize << n).map(|k| state_from_index(k, n)).collect())
}

/// Exact expectation over `{−1,+1}ⁿ` under the pmf proportional to
/// `exp(log_weight(x))`, packaged as a weighted sample.
pub fn enumerated_distribution(n: usize, mut log_weight: impl FnMut(&[f64]) -> f64) -> Result<Sample> {
    let states = enumerate_states(n)?;
    let logw: Vec<f64> = states.iter().map(|s| log_weight(s)).collect();
    let lz = log_sum_exp(&logw);
    if !lz.is_finite() {
        return Err(invalid("log weights do not define a distribution"));
    }
    let weights = logw.iter().map(|l| (l - lz).exp()).collect();
    Sample::weighted(n, states.concat(), weights)
}

/// Draws `count` indices i.i.d. from the distribution proportional to
/// `exp(log_weights)` by inverse-cdf search.
pub fn sample_discrete_exact(log_weights: &[f64], rng: &mut RngStream, count: usize) -> Result<Vec<usize>> {
    if log_weights.is_empty() {
        return Err(invalid("no states to sample from"));
    }
    if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(invalid("log weights must be finite or -inf"));
    }
    let lz = log_sum_exp(log_weights);
    if lz == f64::NEG_INFINITY {
        return Err(invalid("all log weights are -inf"));
    }
    let mut cdf = Vec::with_capacity(log_weights.len());
    let mut acc = 0.0;
    for w in log_weights {
        acc += (w - lz).exp();
        cdf.push(acc);
    }
    let total = acc;
    let last_positive = log_weights
        .iter()
        .rposition(|w| *w > f64::NEG_INFINITY)
        .expect("at least one finite weight");
    Ok((0..count)
        .map(|_| {
            let u = rng.uniform() * total;
            let k = cdf.partition_point(|&c| c <= u);
            k.min(last_positive)
        })
        .collect())
}

/// Draws `count` binary states from the pmf ∝ `exp(log_weight(x))` on `{−1,+1}ⁿ`.
pub fn sample_binary_states(
    n: usize,
    log_weight: impl FnMut(&[f64]) -> f64,
    rng: &mut RngStream,
    count: usize,
) -> Result<Sample> {
    let states = enumerate_states(n)?;
    let logw: Vec<f64> = states.iter().map(|s| s.as_slice()).map(log_weight).collect();
    let idx = sample_discrete_exact(&logw, rng, count)?;
    let mut data = Vec::with_capacity(count * n);
    for k in idx {
        data.extend_from_slice(&states[k]);
    }
    Sample::from_flat(n, data)
}

/// Checks that a square matrix is invertible and returns its condition number
/// (ratio of extreme singular values).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub(crate) fn require_invertible(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(invalid(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    let cond = condition_number(m);
    if !(cond < 1e12) {
        return Err(Error::Singular { condition: cond });
    }
    Ok(())
}

/// Draws from the ICA model whose experts are the columns of `mixing`:
/// sources `s` with i.i.d. unit-variance Laplace coordinates, and `x`
/// solving `mixingᵀ x = s`.
pub fn sample_ica(mixing: &DMatrix<f64>, rng: &mut RngStream, count: usize) -> Result<Sample> {
    require_invertible(mixing)?;
    let n = mixing.nrows();
    let lu = mixing.transpose().lu();
    let mut data = Vec::with_capacity(count * n);
    for _ in 0..count {
        let s = nalgebra::DVector::from_fn(n, |_, _| rng.laplace());
        let x = lu.solve(&s).ok_or(Error::Singular { condition: f64::INFINITY })?;
        data.extend(x.iter());
    }
    Sample::from_flat(n, data)
}
