//! Ratio matching for binary models:
//! `L_rm = mean_X Σᵢ (p_m(x₋ᵢ) / (p_m(x) + p_m(x₋ᵢ)))²`, where `x₋ᵢ` flips bit `i`.

use super::{check_sample, Objective};
use crate::error::{invalid, Result};
use crate::models::{DomainKind, UnnormalizedModel};
use crate::numeric::sigmoid;
use crate::sample::Sample;

pub struct RatioMatchingObjective<M> {
    model: M,
    data: Sample,
}

pub fn ratio_matching_objective<M: UnnormalizedModel>(model: M, data: &Sample) -> Result<RatioMatchingObjective<M>> {
    if model.domain() != DomainKind::BinaryHypercube {
        return Err(invalid("ratio matching needs a model on {-1, +1}^n"));
    }
    check_sample(&model, data, "data")?;
    Ok(RatioMatchingObjective {
        model,
        data: data.clone(),
    })
}

impl<M: UnnormalizedModel> Objective for RatioMatchingObjective<M> {
    fn param_dim(&self) -> usize {
        self.model.param_dim()
    }

    fn evaluate(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut value = 0.0;
        let mut flipped = vec![0.0; self.model.input_dim()];
        for (w, x) in self.data.iter() {
            let l_x = self.model.log_unnorm(x, theta);
            flipped.copy_from_slice(x);
            for i in 0..x.len() {
                flipped[i] = -x[i];
                let s = sigmoid(self.model.log_unnorm(&flipped, theta) - l_x);
                value += w * s * s;
                let coef = w * 2.0 * s * s * (1.0 - s);
                self.model.add_grad_theta(&flipped, theta, coef, grad);
                self.model.add_grad_theta(x, theta, -coef, grad);
                flipped[i] = x[i];
            }
        }
        value
    }

    fn describe(&self) -> String {
        format!("ratio_matching(model={}, T_d={})", self.model.describe(), self.data.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bregman::SPair;
    use crate::estimators::data_dependent_noise_objective;
    use crate::estimators::test_support::gradient_error;
    use crate::estimators::PerturbationSpec;
    use crate::models::{BoltzmannModel, BoltzmannParams, DiagonalGaussianModel};
    use crate::sampling::{enumerated_distribution, RngStream};

    #[test]
    fn examples() {
        let model = BoltzmannModel::new(1);
        let x = Sample::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let obj = ratio_matching_objective(model, &x).unwrap();
        assert!((obj.value(&[0.0, 0.3]) - 0.25).abs() < 1e-15);
        // overwhelming bias toward +1 on data at +1
        let plus = Sample::from_rows(&[vec![1.0]]).unwrap();
        let obj = ratio_matching_objective(model, &plus).unwrap();
        assert!(obj.value(&[400.0, 0.0]) < 1e-300);
    }

    #[test]
    fn half_sum_of_bit_flip_objectives() {
        let mut rng = RngStream::new(31, 0);
        let model = BoltzmannModel::new(3);
        for _ in 0..5 {
            let truth = BoltzmannParams::random(3, 0.5, &mut rng);
            let pd = enumerated_distribution(3, |s| truth.energy(s)).unwrap();
            let theta: Vec<f64> = (0..7).map(|_| rng.standard_normal()).collect();
            let rm = ratio_matching_objective(model, &pd).unwrap().value(&theta);
            let mut sum = 0.0;
            for i in 0..3 {
                let spec = PerturbationSpec::bit_flip(3, i, 0.5).unwrap();
                sum += data_dependent_noise_objective(model, &pd, &spec, &SPair::quadratic())
                    .unwrap()
                    .value(&theta);
            }
            assert!((rm - (0.5 * sum + 1.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_to_normalization() {
        let mut rng = RngStream::new(32, 0);
        let x = crate::models::BernoulliNoise::uniform(4);
        let data = crate::models::NoiseModel::sample(&x, &mut rng, 25);
        let obj = ratio_matching_objective(BoltzmannModel::new(4), &data).unwrap();
        let mut theta: Vec<f64> = (0..11).map(|_| rng.standard_normal()).collect();
        let v = obj.value(&theta);
        theta[10] += 3.7;
        // c cancels in each log-ratio; only rounding remains
        assert!((obj.value(&theta) - v).abs() < 1e-13);
    }

    #[test]
    fn gradients() {
        let mut rng = RngStream::new(33, 0);
        let noise = crate::models::BernoulliNoise::uniform(4);
        let data = crate::models::NoiseModel::sample(&noise, &mut rng, 30);
        let obj = ratio_matching_objective(BoltzmannModel::new(4), &data).unwrap();
        for _ in 0..10 {
            let theta: Vec<f64> = (0..11).map(|_| rng.standard_normal()).collect();
            assert!(gradient_error(&obj, &theta) < 1e-5);
        }
    }

    #[test]
    fn rejects_non_binary() {
        let real = Sample::from_rows(&[vec![0.5]]).unwrap();
        assert!(ratio_matching_objective(DiagonalGaussianModel::new(1), &real).is_err());
        assert!(ratio_matching_objective(BoltzmannModel::new(1), &real).is_err());
    }
}
