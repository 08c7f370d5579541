//! Boosted ICA study: accuracy of stagewise product-of-experts fits for
//! different numbers of experts learned per stage.

use std::time::Instant;

use nalgebra::DMatrix;

use super::config::{set, set_list, KeyValues};
use super::metrics::{poe_alignment, spurious_norm_ratio};
use super::{median, quantile, TrialRecord};
use crate::bregman::SPair;
use crate::error::{invalid, Result};
use crate::estimators::{boosting_fit, noise_sample_size, BoostingConfig};
use crate::models::{gaussian_noise_from_sample, NoiseModel, DEFAULT_SMOOTHING};
use crate::optimize::OptimConfig;
use crate::sampling::{condition_number, sample_ica, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct Fig2Config {
    pub n: usize,
    pub sample_size: usize,
    pub total_experts: usize,
    pub group_sizes: Vec<usize>,
    pub trials: usize,
    pub nu: f64,
    pub master_seed: u64,
    pub max_condition: f64,
    pub smoothing_eps: f64,
    pub optim: OptimConfig,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            n: 4,
            sample_size: 10_000,
            total_experts: 8,
            group_sizes: vec![1, 2, 4],
            trials: 20,
            nu: 2.0,
            master_seed: 1,
            max_condition: 100.0,
            smoothing_eps: DEFAULT_SMOOTHING,
            optim: OptimConfig::default(),
        }
    }
}

impl Fig2Config {
    /// Overrides fields from configuration keys (`n`, `sample_size`,
    /// `total_experts`, `group_sizes`, `trials`, `nu`, `seed`,
    /// `max_condition`, `smoothing_eps`, and the optimizer keys).
    pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
        set(kv, "n", &mut self.n)?;
        set(kv, "sample_size", &mut self.sample_size)?;
        set(kv, "total_experts", &mut self.total_experts)?;
        set_list(kv, "group_sizes", &mut self.group_sizes)?;
        set(kv, "trials", &mut self.trials)?;
        set(kv, "nu", &mut self.nu)?;
        set(kv, "seed", &mut self.master_seed)?;
        set(kv, "max_condition", &mut self.max_condition)?;
        set(kv, "smoothing_eps", &mut self.smoothing_eps)?;
        super::apply_optim(kv, &mut self.optim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.total_experts < self.n {
            return Err(invalid("need n ≥ 1 and at least n experts"));
        }
        if self.group_sizes.is_empty() || self.group_sizes.iter().any(|&m| m == 0 || !self.total_experts.is_multiple_of(m)) {
            return Err(invalid(format!(
                "every group size must divide the expert count {}",
                self.total_experts
            )));
        }
        if self.trials == 0 || self.sample_size <= self.n {
            return Err(invalid("need at least one trial and more points than dimensions"));
        }
        if !(self.nu > 0.0) || !(self.max_condition >= 1.0) || !(self.smoothing_eps >= 0.0) {
            return Err(invalid("nu must be positive, max_condition ≥ 1, smoothing_eps ≥ 0"));
        }
        self.optim.validate()
    }
}

/// Mixing matrix with i.i.d. standard normal entries, redrawn from the same
/// stream until its condition number is at most `max_condition`.
pub fn draw_mixing(n: usize, max_condition: f64, rng: &mut RngStream) -> DMatrix<f64> {
    loop {
        let b = DMatrix::from_fn(n, n, |_, _| rng.standard_normal());
        if condition_number(&b) <= max_condition {
            return b;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig2Trial {
    pub record: TrialRecord,
    pub group_size: usize,
    /// Largest unmatched expert norm over smallest matched expert norm.
    pub spurious_ratio: f64,
    pub experts: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig2Summary {
    pub group_size: usize,
    pub n_ok: usize,
    pub median_error: f64,
    pub q1_error: f64,
    pub q3_error: f64,
    pub median_spurious_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig2Result {
    pub config: Fig2Config,
    pub trials: Vec<Fig2Trial>,
    pub summary: Vec<Fig2Summary>,
}

impl Fig2Result {
    pub fn records(&self) -> Vec<TrialRecord> {
        self.trials.iter().map(|t| t.record.clone()).collect()
    }

    pub fn summary_for(&self, group_size: usize) -> Option<&Fig2Summary> {
        self.summary.iter().find(|s| s.group_size == group_size)
    }
}

/// Runs every (trial, group size) combination.
///
/// Trial `t` draws the mixing matrix, data and noise sample from stream
/// `(seed, 2, t)`; the noise sample is shared by all group sizes. The fit
/// for group size `m` initializes from stream `(seed, 2, t, m)`.
pub fn run_fig2(config: &Fig2Config, timing: bool) -> Result<Fig2Result> {
    config.validate()?;
    let seed = config.master_seed;
    let pair = SPair::noise_contrastive();
    let mut trials = Vec::new();
    for trial in 0..config.trials {
        let mut rng = RngStream::derive(seed, &[2, trial as u64]);
        let b_star = draw_mixing(config.n, config.max_condition, &mut rng);
        let x = sample_ica(&b_star, &mut rng, config.sample_size)?;
        let noise = gaussian_noise_from_sample(&x)?;
        let y = noise.sample(&mut rng, noise_sample_size(config.nu, config.sample_size));
        for &m in &config.group_sizes {
            let mut fit_rng = RngStream::derive(seed, &[2, trial as u64, m as u64]);
            let boost = BoostingConfig {
                total_experts: config.total_experts,
                group_size: m,
                nu: config.nu,
                smoothing_eps: config.smoothing_eps,
                optim: config.optim,
            };
            let start = Instant::now();
            let outcome = boosting_fit(&x, &noise, &y, &pair, &boost, &mut fit_rng).and_then(|fit| {
                let alignment = poe_alignment(&fit.params.experts, &b_star)?;
                let ratio = spurious_norm_ratio(&fit.params.experts, &alignment);
                Ok((alignment.error, fit.status().as_str().to_string(), ratio, fit.params.experts))
            });
            let wall_ms = if timing { start.elapsed().as_millis() as u64 } else { 0 };
            let (error, status, spurious_ratio, experts) = match outcome {
                Ok(v) => v,
                Err(e) => (f64::NAN, format!("error: {e}"), f64::NAN, Vec::new()),
            };
            trials.push(Fig2Trial {
                record: TrialRecord {
                    label: m.to_string(),
                    sample_size: None,
                    trial,
                    error,
                    status,
                    wall_ms,
                },
                group_size: m,
                spurious_ratio,
                experts,
            });
        }
    }
    let summary = config
        .group_sizes
        .iter()
        .map(|&m| {
            let ok: Vec<&Fig2Trial> = trials.iter().filter(|t| t.group_size == m && t.record.is_ok()).collect();
            let errors: Vec<f64> = ok.iter().map(|t| t.record.error).collect();
            let ratios: Vec<f64> = ok.iter().map(|t| t.spurious_ratio).collect();
            Fig2Summary {
                group_size: m,
                n_ok: ok.len(),
                median_error: median(&errors),
                q1_error: quantile(&errors, 0.25),
                q3_error: quantile(&errors, 0.75),
                median_spurious_ratio: median(&ratios),
            }
        })
        .collect();
    Ok(Fig2Result {
        config: config.clone(),
        trials,
        summary,
    })
}
