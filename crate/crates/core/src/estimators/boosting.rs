//! Stagewise fitting of a product of experts.
//!
//! Each stage adds `group_size` new experts and re-fits only those and `c`
//! with the noise-contrastive family objective; earlier experts stay frozen.

use super::nce_family_objective;
use crate::bregman::SPair;
use crate::error::{invalid, Error, Result};
use crate::models::{IcaPoeModel, IcaPoeParams, NoiseModel, DEFAULT_SMOOTHING};
use crate::optimize::{minimize_with_restarts, OptimConfig, OptimStatus};
use crate::sample::Sample;
use crate::sampling::RngStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoostingConfig {
    pub total_experts: usize,
    pub group_size: usize,
    pub nu: f64,
    pub smoothing_eps: f64,
    pub optim: OptimConfig,
}

impl Default for BoostingConfig {
    fn default() -> Self {
        Self {
            total_experts: 8,
            group_size: 1,
            nu: 2.0,
            smoothing_eps: DEFAULT_SMOOTHING,
            optim: OptimConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub stage: usize,
    pub status: OptimStatus,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostingFit {
    pub params: IcaPoeParams,
    pub stages: Vec<StageReport>,
    /// Experts and `c` as they stood at the end of each stage.
    pub history: Vec<IcaPoeParams>,
}

impl BoostingFit {
    /// `converged` only if every stage converged; otherwise the first
    /// non-converged status.
    pub fn status(&self) -> OptimStatus {
        self.stages
            .iter()
            .map(|s| s.status)
            .find(|s| *s != OptimStatus::Converged)
            .unwrap_or(OptimStatus::Converged)
    }
}

/// Fits `total_experts` experts in stages of `group_size`.
///
/// New experts start from i.i.d. Gaussian entries with standard deviation
/// `optim.init_scale`, and `c` restarts at 0 in every stage. A stage fails
/// (with the experts fitted so far) only if the optimizer ends at a
/// non-finite point.
pub fn boosting_fit<N: NoiseModel + ?Sized>(
    data: &Sample,
    noise: &N,
    noise_sample: &Sample,
    pair: &SPair,
    config: &BoostingConfig,
    rng: &mut RngStream,
) -> Result<BoostingFit> {
    let (k_total, m) = (config.total_experts, config.group_size);
    if m == 0 || k_total == 0 || k_total % m != 0 {
        return Err(invalid(format!("group size {m} must divide the expert count {k_total}")));
    }
    if !(config.smoothing_eps >= 0.0) {
        return Err(invalid("smoothing must be nonnegative"));
    }
    config.optim.validate()?;
    let n = data.dim();
    let mut frozen: Vec<Vec<f64>> = Vec::with_capacity(k_total);
    let mut c = 0.0;
    let mut stages = Vec::new();
    let mut history = Vec::new();
    for stage in 0..k_total / m {
        let model = IcaPoeModel::with_frozen(n, frozen.clone(), m, config.smoothing_eps);
        let objective = nce_family_objective(model.clone(), noise, data, noise_sample, pair, config.nu)?;
        let mut theta0: Vec<f64> = (0..m * n).map(|_| config.optim.init_scale * rng.standard_normal()).collect();
        theta0.push(0.0);
        let res = minimize_with_restarts(&objective, &theta0, &config.optim, rng);
        if !res.value.is_finite() || res.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::StageFailure {
                stage,
                reason: format!("optimizer ended at a non-finite point ({})", res.status),
                partial: frozen,
                c,
            });
        }
        let params = model.to_params(&res.theta);
        frozen = params.experts.clone();
        c = params.c;
        stages.push(StageReport {
            stage,
            status: res.status,
            value: res.value,
            grad_norm: res.grad_norm,
            iterations: res.iterations,
        });
        history.push(params);
    }
    let params = IcaPoeParams::new(frozen, c, config.smoothing_eps)?;
    Ok(BoostingFit { params, stages, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::noise_sample_size;
    use crate::models::gaussian_noise_from_sample;
    use crate::sampling::sample_ica;
    use nalgebra::DMatrix;

    fn problem(n: usize, td: usize, nu: f64, seed: u64) -> (Sample, crate::models::GaussianNoise, Sample, RngStream) {
        let mut rng = RngStream::new(seed, 0);
        let b = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.3 * rng.standard_normal() });
        let x = sample_ica(&b, &mut rng, td).unwrap();
        let noise = gaussian_noise_from_sample(&x).unwrap();
        let y = noise.sample(&mut rng, noise_sample_size(nu, td));
        (x, noise, y, rng)
    }

    #[test]
    fn single_group_is_one_joint_fit() {
        let (x, noise, y, mut rng) = problem(2, 400, 2.0, 71);
        let config = BoostingConfig {
            total_experts: 2,
            group_size: 2,
            ..BoostingConfig::default()
        };
        let fit = boosting_fit(&x, &noise, &y, &SPair::noise_contrastive(), &config, &mut rng).unwrap();
        assert_eq!(fit.stages.len(), 1);
        assert_eq!(fit.params.num_experts(), 2);
    }

    #[test]
    fn earlier_experts_stay_frozen() {
        let (x, noise, y, mut rng) = problem(2, 300, 2.0, 72);
        let config = BoostingConfig {
            total_experts: 4,
            group_size: 1,
            ..BoostingConfig::default()
        };
        let fit = boosting_fit(&x, &noise, &y, &SPair::noise_contrastive(), &config, &mut rng).unwrap();
        assert_eq!(fit.stages.len(), 4);
        for (s, snapshot) in fit.history.iter().enumerate() {
            assert_eq!(snapshot.num_experts(), s + 1);
            for later in &fit.history[s..] {
                assert_eq!(&later.experts[..=s], &snapshot.experts[..]);
            }
        }
        assert_eq!(fit.params.experts, fit.history[3].experts);
    }

    #[test]
    fn rejects_non_dividing_group() {
        let (x, noise, y, mut rng) = problem(2, 50, 2.0, 73);
        let config = BoostingConfig {
            total_experts: 8,
            group_size: 3,
            ..BoostingConfig::default()
        };
        assert!(boosting_fit(&x, &noise, &y, &SPair::noise_contrastive(), &config, &mut rng).is_err());
    }
}
