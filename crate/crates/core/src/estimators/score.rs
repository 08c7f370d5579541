//! Objectives built on the score `∇_x ln p_m` of continuous models.

use super::{check_sample, Objective};
use crate::bregman::ConvexGenerator;
use crate::error::{Error, Result};
use crate::models::{InputDerivatives, UnnormalizedModel};
use crate::sample::Sample;

fn require_derivatives<M: UnnormalizedModel>(model: &M, data: &Sample) -> Result<()> {
    check_sample(model, data, "data")?;
    let probe = vec![0.0; model.input_dim()];
    let theta = vec![1.0; model.param_dim()];
    if model.input_derivatives(&probe, &theta).is_none() {
        return Err(Error::MissingCapability("input derivatives of the log-density"));
    }
    Ok(())
}

fn derivatives<M: UnnormalizedModel>(model: &M, x: &[f64], theta: &[f64]) -> InputDerivatives {
    model
        .input_derivatives(x, theta)
        .expect("capability checked at construction")
}

/// `mean_X[½‖∇_x L‖² + Δ_x L]`.
pub struct ScoreMatchingObjective<M> {
    model: M,
    data: Sample,
}

pub fn score_matching_objective<M: UnnormalizedModel>(model: M, data: &Sample) -> Result<ScoreMatchingObjective<M>> {
    require_derivatives(&model, data)?;
    Ok(ScoreMatchingObjective {
        model,
        data: data.clone(),
    })
}

impl<M: UnnormalizedModel> Objective for ScoreMatchingObjective<M> {
    fn param_dim(&self) -> usize {
        self.model.param_dim()
    }

    fn evaluate(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let p = self.param_dim();
        let mut value = 0.0;
        for (w, x) in self.data.iter() {
            let d = derivatives(&self.model, x, theta);
            for i in 0..x.len() {
                let s = d.score[i];
                value += w * (0.5 * s * s + d.curvature[i]);
                let row = i * p..(i + 1) * p;
                for ((g, ds), dh) in grad.iter_mut().zip(&d.score_grad[row.clone()]).zip(&d.curvature_grad[row]) {
                    *g += w * (s * ds + dh);
                }
            }
        }
        value
    }

    fn describe(&self) -> String {
        format!("score_matching(model={}, T_d={})", self.model.describe(), self.data.len())
    }
}

/// `mean_X Σᵢ[−Ψ(gᵢ) + Ψ′(gᵢ) gᵢ + Ψ″(gᵢ) ∂gᵢ/∂xᵢ]` with `g = ∇_x L` and a
/// coordinate-wise generator Ψ.
pub struct GeneralScoreObjective<M> {
    model: M,
    data: Sample,
    psi: ConvexGenerator,
}

pub fn general_score_function_objective<M: UnnormalizedModel>(
    model: M,
    data: &Sample,
    psi: &ConvexGenerator,
) -> Result<GeneralScoreObjective<M>> {
    require_derivatives(&model, data)?;
    let domain = psi.domain();
    if domain.lower != f64::NEG_INFINITY || domain.upper != f64::INFINITY {
        return Err(Error::Construction(format!(
            "generator {} must be defined on the whole real line to act on scores",
            psi.name()
        )));
    }
    if psi.second_derivative(0.0).is_none() || psi.third_derivative(0.0).is_none() {
        return Err(Error::Construction(format!(
            "generator {} needs closed-form second and third derivatives",
            psi.name()
        )));
    }
    Ok(GeneralScoreObjective {
        model,
        data: data.clone(),
        psi: psi.clone(),
    })
}

impl<M: UnnormalizedModel> Objective for GeneralScoreObjective<M> {
    fn param_dim(&self) -> usize {
        self.model.param_dim()
    }

    fn evaluate(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let p = self.param_dim();
        let psi = &self.psi;
        let mut value = 0.0;
        for (w, x) in self.data.iter() {
            let d = derivatives(&self.model, x, theta);
            for i in 0..x.len() {
                let (g, h) = (d.score[i], d.curvature[i]);
                let d2 = psi.second_derivative(g).expect("checked at construction");
                let d3 = psi.third_derivative(g).expect("checked at construction");
                value += w * (-psi.value(g) + psi.derivative(g) * g + d2 * h);
                // d/dg of the summand is Ψ″ g + Ψ‴ h
                let coef_g = w * (d2 * g + d3 * h);
                let coef_h = w * d2;
                let row = i * p..(i + 1) * p;
                for ((gr, dg), dh) in grad.iter_mut().zip(&d.score_grad[row.clone()]).zip(&d.curvature_grad[row]) {
                    *gr += coef_g * dg + coef_h * dh;
                }
            }
        }
        value
    }

    fn describe(&self) -> String {
        format!(
            "general_score(model={}, psi={}, T_d={})",
            self.model.describe(),
            self.psi.name(),
            self.data.len()
        )
    }
}
