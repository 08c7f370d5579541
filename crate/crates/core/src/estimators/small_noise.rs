//! Small-shift expansion of the data-dependent noise objective.
//!
//! With `B = I` and `v ~ N(0, σ²I)`,
//! `E_v L̃(v) = S₀(1) − S₁(1) + σ² α² S₁′(1) J_sm + O(σ³)`, where `J_sm` is
//! the score matching objective.

use nalgebra::DMatrix;

use super::{data_dependent_noise_objective, score_matching_objective, Objective, PerturbationSpec};
use crate::bregman::SPair;
use crate::error::{invalid, Result};
use crate::models::{DomainKind, UnnormalizedModel};
use crate::sample::Sample;
use crate::sampling::RngStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallNoiseCheck {
    /// Monte Carlo average of the objective over shifts `v`.
    pub lhs: f64,
    /// Second-order prediction.
    pub rhs: f64,
    /// `S₀(1) − S₁(1)`.
    pub constant: f64,
    pub score_matching: f64,
}

impl SmallNoiseCheck {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Shifts `v = σ z` for `v_draws` draws of `z`.
///
/// Draws come in antithetic pairs `±z` and are whitened so their empirical
/// second moment is exactly `I`; the leading Monte Carlo error then cancels
/// and the remainder can be compared across σ. Reusing the same `rng` state
/// for each σ gives common random numbers.
fn shifts(n: usize, v_draws: usize, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    let half = v_draws / 2;
    if half < n {
        return Err(invalid(format!("need at least {} shift draws", 2 * n)));
    }
    let z = DMatrix::from_fn(n, half, |_, _| rng.standard_normal());
    let second = (&z * z.transpose()) / half as f64;
    let chol = second
        .cholesky()
        .ok_or_else(|| invalid("shift draws are degenerate"))?;
    let white = chol.l().solve_lower_triangular(&z).expect("positive definite factor");
    let mut out = Vec::with_capacity(2 * half);
    for col in white.column_iter() {
        out.push(col.iter().copied().collect::<Vec<_>>());
        out.push(col.iter().map(|v| -v).collect());
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn small_noise_expansion_check<M: UnnormalizedModel + Clone>(
    model: &M,
    data: &Sample,
    theta: &[f64],
    pair: &SPair,
    alpha: f64,
    sigma: f64,
    v_draws: usize,
    rng: &mut RngStream,
) -> Result<SmallNoiseCheck> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    if model.domain() != DomainKind::Real {
        return Err(invalid("shift perturbations need a continuous model"));
    }
    let sm = score_matching_objective(model.clone(), data)?.value(theta);
    let n = model.input_dim();
    let draws = shifts(n, v_draws, rng)?;
    let mut total = 0.0;
    for z in &draws {
        let v = z.iter().map(|c| sigma * c).collect();
        let spec = PerturbationSpec::shift(v, alpha)?;
        total += data_dependent_noise_objective(model.clone(), data, &spec, pair)?.value(theta);
    }
    let lhs = total / draws.len() as f64;
    let constant = pair.s0(1.0) - pair.s1(1.0);
    let rhs = constant + sigma * sigma * alpha * alpha * pair.s1_deriv(1.0) * sm;
    Ok(SmallNoiseCheck {
        lhs,
        rhs,
        constant,
        score_matching: sm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DiagonalGaussianModel;

    fn setup() -> (DiagonalGaussianModel, Sample) {
        let mut rng = RngStream::new(51, 0);
        let data = Sample::from_flat(1, (0..100).map(|_| rng.standard_normal()).collect()).unwrap();
        (DiagonalGaussianModel::new(1), data)
    }

    #[test]
    fn residual_shrinks_faster_than_sigma_squared() {
        let (model, data) = setup();
        let theta = [0.7, 0.0];
        for pair in SPair::builtins() {
            let mut scaled = Vec::new();
            for sigma in [0.1, 0.05, 0.025] {
                let mut rng = RngStream::new(52, 0);
                let c = small_noise_expansion_check(&model, &data, &theta, &pair, 0.5, sigma, 2000, &mut rng).unwrap();
                scaled.push(c.residual() / (sigma * sigma));
            }
            assert!(scaled[0] > scaled[1] && scaled[1] > scaled[2], "{}: {scaled:?}", pair.name());
        }
    }

    #[test]
    fn tiny_sigma_recovers_constant() {
        let (model, data) = setup();
        let pair = SPair::quadratic();
        let mut rng = RngStream::new(53, 0);
        let c = small_noise_expansion_check(&model, &data, &[1.3, 0.2], &pair, 0.5, 1e-7, 20, &mut rng).unwrap();
        assert!((c.lhs - c.constant).abs() < 1e-10);
        assert_eq!(c.constant, -0.5);
        assert_eq!(pair.s1_deriv(1.0), 1.0);
    }

    #[test]
    fn shifts_are_whitened() {
        let mut rng = RngStream::new(54, 0);
        let v = shifts(2, 200, &mut rng).unwrap();
        assert_eq!(v.len(), 200);
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let m: f64 = v.iter().map(|z| z[i] * z[j]).sum::<f64>() / 200.0;
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((m - target).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_sigma() {
        let (model, data) = setup();
        let mut rng = RngStream::new(55, 0);
        for sigma in [0.0, -0.1, f64::NAN] {
            assert!(small_noise_expansion_check(&model, &data, &[1.0, 0.0], &SPair::quadratic(), 0.5, sigma, 100, &mut rng).is_err());
        }
    }
}
