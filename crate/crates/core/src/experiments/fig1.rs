//! Fully visible Boltzmann machine study: estimation error against sample
//! size for noise-contrastive estimation with two noise distributions,
//! pseudolikelihood, and ratio matching.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use super::config::{set, set_list, KeyValues};
use super::metrics::param_error_boltzmann;
use super::{mean, TrialRecord};
use crate::bregman::SPair;
use crate::error::{invalid, Result};
use crate::estimators::{nce_family_objective, noise_sample_size, ratio_matching_objective};
use crate::models::{
    fit_bernoulli_mixture, pseudolikelihood_objective, BernoulliNoise, BoltzmannModel, BoltzmannParams, EmConfig,
    NoiseModel, UnnormalizedModel,
};
use crate::optimize::{minimize, OptimConfig, OptimResult};
use crate::sample::Sample;
use crate::sampling::{sample_binary_states, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoltzmannMethod {
    NceBernoulli,
    NceMixture,
    Pseudolikelihood,
    RatioMatching,
}

impl BoltzmannMethod {
    pub const ALL: [Self; 4] = [
        Self::NceBernoulli,
        Self::NceMixture,
        Self::Pseudolikelihood,
        Self::RatioMatching,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NceBernoulli => "nce_bernoulli",
            Self::NceMixture => "nce_mixture",
            Self::Pseudolikelihood => "pseudolikelihood",
            Self::RatioMatching => "ratio_matching",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }

    /// Whether the estimator determines `c`; otherwise `c` is filled with the
    /// exact negative log partition of the estimated couplings and biases.
    pub fn identifies_c(self) -> bool {
        matches!(self, Self::NceBernoulli | Self::NceMixture)
    }
}

impl fmt::Display for BoltzmannMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoltzmannMethod {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig1Config {
    pub n: usize,
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub nu: f64,
    pub methods: Vec<BoltzmannMethod>,
    pub param_std: f64,
    pub master_seed: u64,
    pub mixture_components: usize,
    pub optim: OptimConfig,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self {
            n: 5,
            sample_sizes: vec![500, 2000, 8000, 32000],
            trials: 20,
            nu: 10.0,
            methods: BoltzmannMethod::ALL.to_vec(),
            param_std: 0.5,
            master_seed: 1,
            mixture_components: 4,
            optim: OptimConfig::default(),
        }
    }
}

impl Fig1Config {
    /// Overrides fields from configuration keys (`n`, `sample_sizes`,
    /// `trials`, `nu`, `methods`, `param_std`, `seed`, `mixture_components`,
    /// `max_iterations`, `gradient_tolerance`, `init_scale`, `restarts`).
    pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
        set(kv, "n", &mut self.n)?;
        set_list(kv, "sample_sizes", &mut self.sample_sizes)?;
        set(kv, "trials", &mut self.trials)?;
        set(kv, "nu", &mut self.nu)?;
        set_list(kv, "methods", &mut self.methods)?;
        set(kv, "param_std", &mut self.param_std)?;
        set(kv, "seed", &mut self.master_seed)?;
        set(kv, "mixture_components", &mut self.mixture_components)?;
        super::apply_optim(kv, &mut self.optim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > crate::sampling::MAX_ENUMERATION_DIM {
            return Err(invalid(format!("n must be in 1..=20, got {}", self.n)));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) || self.sample_sizes[0] == 0 {
            return Err(invalid("sample sizes must be positive and strictly increasing"));
        }
        if self.trials == 0 {
            return Err(invalid("need at least one trial"));
        }
        if !(self.nu > 0.0) || !(self.param_std >= 0.0) {
            return Err(invalid("nu must be positive and param_std nonnegative"));
        }
        if self.methods.is_empty() {
            return Err(invalid("need at least one method"));
        }
        if self.mixture_components == 0 {
            return Err(invalid("need at least one mixture component"));
        }
        self.optim.validate()
    }
}

/// Estimated parameters (with `c` filled where the method leaves it open)
/// and the optimizer outcome.
#[derive(Clone, Debug)]
pub struct BoltzmannEstimate {
    pub params: BoltzmannParams,
    pub optim: OptimResult,
}

fn initial_theta(dim: usize, with_c: bool, scale: f64, rng: &mut RngStream) -> Vec<f64> {
    let mut theta: Vec<f64> = (0..dim).map(|_| scale * rng.standard_normal()).collect();
    if with_c {
        theta.push(0.0);
    }
    theta
}

/// Fits a Boltzmann machine to binary `data` with one of the study's
/// methods. `rng` supplies the initialization, the noise sample and, for
/// `nce_mixture`, the EM starting point.
pub fn estimate_boltzmann(
    method: BoltzmannMethod,
    data: &Sample,
    nu: f64,
    mixture_components: usize,
    optim: &OptimConfig,
    rng: &mut RngStream,
) -> Result<BoltzmannEstimate> {
    let n = data.dim();
    let model = BoltzmannModel::new(n);
    let free = model.param_dim() - 1;
    let td = data.count().unwrap_or(data.len());
    let nce = |noise: &dyn NoiseModel, rng: &mut RngStream| -> Result<BoltzmannEstimate> {
        let y = noise.sample(rng, noise_sample_size(nu, td)).compress();
        let obj = nce_family_objective(model, noise, data, &y, &SPair::noise_contrastive(), nu)?;
        let theta0 = initial_theta(free, true, optim.init_scale, rng);
        let res = minimize(&obj, &theta0, optim);
        Ok(BoltzmannEstimate {
            params: BoltzmannParams::from_vec(n, &res.theta)?,
            optim: res,
        })
    };
    match method {
        BoltzmannMethod::NceBernoulli => nce(&BernoulliNoise::uniform(n), rng),
        BoltzmannMethod::NceMixture => {
            let em = EmConfig {
                components: mixture_components,
                ..EmConfig::default()
            };
            let fit = fit_bernoulli_mixture(data, &em, rng)?;
            nce(&fit.mixture, rng)
        }
        BoltzmannMethod::Pseudolikelihood => {
            let obj = pseudolikelihood_objective(data)?;
            let theta0 = initial_theta(free, false, optim.init_scale, rng);
            let res = minimize(&obj, &theta0, optim);
            Ok(BoltzmannEstimate {
                params: obj.to_params(&res.theta)?,
                optim: res,
            })
        }
        BoltzmannMethod::RatioMatching => {
            let obj = ratio_matching_objective(model, data)?;
            // c is inert here; hold it at 0 and fill it afterwards
            let theta0 = initial_theta(free, true, optim.init_scale, rng);
            let res = minimize(&obj, &theta0, optim);
            let params = BoltzmannParams::from_vec(n, &res.theta)?.normalized()?;
            Ok(BoltzmannEstimate { params, optim: res })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig1Summary {
    pub method: BoltzmannMethod,
    pub sample_size: usize,
    /// Trials whose optimizer converged; only these enter the means.
    pub n_ok: usize,
    pub mean_error: f64,
    pub log10_mean_error: f64,
    pub mean_log10_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig1Result {
    pub config: Fig1Config,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<Fig1Summary>,
}

impl Fig1Result {
    pub fn summary_for(&self, method: BoltzmannMethod) -> Vec<&Fig1Summary> {
        self.summary.iter().filter(|s| s.method == method).collect()
    }
}

/// Runs every (trial, sample size, method) combination.
///
/// Trial `t` draws its true parameters from stream `(seed, 1, t)`; the data
/// for sample size `T` from `(seed, 1, t, T)`; each method from
/// `(seed, 1, t, T, method)`. Results are therefore independent of which
/// methods or sizes are selected.
pub fn run_fig1(config: &Fig1Config, timing: bool) -> Result<Fig1Result> {
    config.validate()?;
    let seed = config.master_seed;
    let mut records = Vec::new();
    for trial in 0..config.trials {
        let mut rng = RngStream::derive(seed, &[1, trial as u64]);
        let truth = BoltzmannParams::random(config.n, config.param_std, &mut rng).normalized()?;
        for &td in &config.sample_sizes {
            let mut data_rng = RngStream::derive(seed, &[1, trial as u64, td as u64]);
            let x = sample_binary_states(config.n, |s| truth.energy(s), &mut data_rng, td)?.compress();
            for &method in &config.methods {
                let mut rng = RngStream::derive(seed, &[1, trial as u64, td as u64, method.index()]);
                let start = Instant::now();
                let outcome = estimate_boltzmann(method, &x, config.nu, config.mixture_components, &config.optim, &mut rng)
                    .and_then(|est| Ok((param_error_boltzmann(&est.params, &truth)?, est.optim.status)));
                let wall_ms = if timing { start.elapsed().as_millis() as u64 } else { 0 };
                let (error, status) = match outcome {
                    Ok((e, s)) => (e, s.as_str().to_string()),
                    Err(e) => (f64::NAN, format!("error: {e}")),
                };
                records.push(TrialRecord {
                    label: method.as_str().to_string(),
                    sample_size: Some(td),
                    trial,
                    error,
                    status,
                    wall_ms,
                });
            }
        }
    }
    let summary = summarize(config, &records);
    Ok(Fig1Result {
        config: config.clone(),
        records,
        summary,
    })
}

fn summarize(config: &Fig1Config, records: &[TrialRecord]) -> Vec<Fig1Summary> {
    let mut out = Vec::new();
    for &method in &config.methods {
        for &td in &config.sample_sizes {
            let errors: Vec<f64> = records
                .iter()
                .filter(|r| r.label == method.as_str() && r.sample_size == Some(td) && r.is_ok())
                .map(|r| r.error)
                .collect();
            let mean_error = mean(&errors);
            out.push(Fig1Summary {
                method,
                sample_size: td,
                n_ok: errors.len(),
                mean_error,
                log10_mean_error: mean_error.log10(),
                mean_log10_error: mean(&errors.iter().map(|e| e.log10()).collect::<Vec<_>>()),
            });
        }
    }
    out
}
