use bregest::bregman::{bregman_divergence, logit_boost_transform, ConvexGenerator, SPair};
use bregest::estimators::{
    direct_matching_objective, nce_family_objective, FnObjective, ratio_matching_objective, score_matching_objective, Objective,
};
use bregest::experiments::{poe_alignment_error, run_fig1, BoltzmannMethod, Fig1Config, FIG1_HEADER};
use bregest::models::{
    BernoulliNoise, BoltzmannModel, BoltzmannParams, DiagonalGaussianModel, IcaPoeModel, NoiseModel,
    UnnormalizedModel,
};
use bregest::optimize::{finite_diff_grad, finite_diff_grad_fn, minimize, OptimConfig, OptimStatus};
use bregest::sampling::{enumerate_states, RngStream};
use bregest::Sample;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn point_in(psi: &ConvexGenerator, t: f64) -> f64 {
    // t in (0, 1) mapped into the generator domain
    if psi.domain().lower >= 0.0 {
        (8.0 * (t - 0.5)).exp()
    } else {
        20.0 * (t - 0.5)
    }
}

fn rel_grad_error(g: &[f64], fd: &[f64]) -> f64 {
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
    g.iter().zip(fd).map(|(a, b)| (a - b).abs() / scale).fold(0.0, f64::max)
}

fn objective_grad_error(obj: &dyn Objective, theta: &[f64]) -> f64 {
    let mut g = vec![0.0; obj.param_dim()];
    obj.evaluate(theta, &mut g);
    rel_grad_error(&g, &finite_diff_grad(obj, theta, 1e-5))
}

fn model_grad_error<M: UnnormalizedModel>(model: &M, x: &[f64], theta: &[f64]) -> f64 {
    let g = model.grad_theta(x, theta);
    let fd = finite_diff_grad_fn(&|t: &[f64]| model.log_unnorm(x, t), theta, 1e-5);
    rel_grad_error(&g, &fd)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn divergence_nonnegative_and_zero_only_on_diagonal(k in 0usize..5, s in 0.001f64..0.999, t in 0.001f64..0.999) {
        let psi = ConvexGenerator::builtins().swap_remove(k);
        let (a, b) = (point_in(&psi, s), point_in(&psi, t));
        let d = bregman_divergence(&psi, a, b).unwrap();
        prop_assert!(d >= -1e-12);
        if (a - b).abs() > 1e-3 {
            prop_assert!(d > 1e-12, "{}: d({a}, {b}) = {d}", psi.name());
        }
        prop_assert!(bregman_divergence(&psi, a, a).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn generator_derivative_increases(k in 0usize..5, mut ts in proptest::collection::vec(0.001f64..0.999, 2..20)) {
        let psi = ConvexGenerator::builtins().swap_remove(k);
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let grid: Vec<f64> = ts.iter().map(|&t| point_in(&psi, t)).collect();
        prop_assert!(psi.derivative_is_increasing(&grid));
    }

    #[test]
    fn log_pair_ratio_condition(k in 0usize..3, g in -30.0f64..30.0) {
        let lp = logit_boost_transform(&SPair::builtins()[k]);
        let ratio = lp.ls0_deriv(g) / lp.ls1_deriv(-g);
        prop_assert!((ratio / g.exp() - 1.0).abs() < 1e-9, "G = {g}: {ratio}");
    }

    #[test]
    fn boltzmann_gradient(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        let model = BoltzmannModel::new(4);
        let x: Vec<f64> = (0..4).map(|_| if rng.uniform() < 0.5 { -1.0 } else { 1.0 }).collect();
        let theta: Vec<f64> = (0..model.param_dim()).map(|_| rng.standard_normal()).collect();
        prop_assert!(model_grad_error(&model, &x, &theta) < 1e-5);
    }

    #[test]
    fn ica_gradient(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        let model = IcaPoeModel::new(3, 4, 1e-3);
        let x: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
        let theta: Vec<f64> = (0..model.param_dim()).map(|_| rng.standard_normal()).collect();
        prop_assert!(model_grad_error(&model, &x, &theta) < 1e-5);
    }

    #[test]
    fn gaussian_gradient(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        let model = DiagonalGaussianModel::new(2);
        let x: Vec<f64> = (0..2).map(|_| rng.standard_normal()).collect();
        let theta = [0.3 + rng.uniform(), 0.3 + rng.uniform(), rng.standard_normal()];
        prop_assert!(model_grad_error(&model, &x, &theta) < 1e-5);
    }

    #[test]
    fn normalized_boltzmann_is_a_pmf(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = RngStream::new(seed, 0);
        let p = BoltzmannParams::random(n, 0.8, &mut rng).normalized().unwrap();
        let total: f64 = enumerate_states(n).unwrap().iter().map(|s| (p.energy(s) + p.c).exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn streams_are_deterministic(seed in any::<u64>(), id in any::<u64>()) {
        let draw = || {
            let mut r = RngStream::new(seed, id);
            (0..8).map(|_| r.standard_normal().to_bits()).collect::<Vec<_>>()
        };
        prop_assert_eq!(draw(), draw());
    }

    #[test]
    fn estimator_gradients(seed in any::<u64>(), k in 0usize..3) {
        let mut rng = RngStream::new(seed, 0);
        let pair = SPair::builtins().swap_remove(k);
        let model = BoltzmannModel::new(3);
        let noise = BernoulliNoise::new(vec![0.35, 0.5, 0.65]).unwrap();
        let x = BernoulliNoise::uniform(3).sample(&mut rng, 30);
        let y = noise.sample(&mut rng, 45);
        let theta: Vec<f64> = (0..7).map(|_| 0.7 * rng.standard_normal()).collect();
        let nce = nce_family_objective(model, &noise, &x, &y, &pair, 1.5).unwrap();
        let direct = direct_matching_objective(model, &noise, &x, &y, &pair).unwrap();
        let rm = ratio_matching_objective(model, &x).unwrap();
        prop_assert!(objective_grad_error(&nce, &theta) < 1e-5);
        prop_assert!(objective_grad_error(&direct, &theta) < 1e-5);
        prop_assert!(objective_grad_error(&rm, &theta) < 1e-5);
    }

    #[test]
    fn normalization_does_not_enter_ratio_or_score_matching(seed in any::<u64>(), shift in -5.0f64..5.0) {
        let mut rng = RngStream::new(seed, 0);
        let x = BernoulliNoise::uniform(3).sample(&mut rng, 20);
        let rm = ratio_matching_objective(BoltzmannModel::new(3), &x).unwrap();
        let mut theta: Vec<f64> = (0..7).map(|_| rng.standard_normal()).collect();
        let before = rm.value(&theta);
        theta[6] += shift;
        prop_assert!((rm.value(&theta) - before).abs() < 1e-13);

        let g = Sample::from_flat(2, (0..20).map(|_| rng.standard_normal()).collect()).unwrap();
        let sm = score_matching_objective(DiagonalGaussianModel::new(2), &g).unwrap();
        let mut t = [0.5 + rng.uniform(), 0.5 + rng.uniform(), 0.0];
        let before = sm.value(&t);
        t[2] += shift;
        prop_assert_eq!(sm.value(&t), before);
    }

    #[test]
    fn convex_quadratics(seed in any::<u64>(), dim in 1usize..12) {
        let mut rng = RngStream::new(seed, 0);
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.standard_normal());
        let h = &a * a.transpose() + DMatrix::identity(dim, dim);
        let b: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let (h1, b1, h2, b2) = (h.clone(), b.clone(), h, b);
        let obj = FnObjective::with_gradient(
            dim,
            move |t: &[f64]| {
                let ht = &h1 * nalgebra::DVector::from_column_slice(t);
                0.5 * t.iter().zip(ht.iter()).map(|(x, y)| x * y).sum::<f64>() - t.iter().zip(&b1).map(|(x, y)| x * y).sum::<f64>()
            },
            move |t, g| {
                let ht = &h2 * nalgebra::DVector::from_column_slice(t);
                for i in 0..g.len() {
                    g[i] = ht[i] - b2[i];
                }
            },
        );
        let start: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let config = OptimConfig::default();
        let r1 = minimize(&obj, &start, &config);
        let r2 = minimize(&obj, &start, &config);
        prop_assert_eq!(&r1, &r2);
        prop_assert_eq!(r1.status, OptimStatus::Converged);
        prop_assert!(r1.iterations <= 2 * dim, "dim {dim}: {} iterations", r1.iterations);
        prop_assert!(r1.value <= obj.value(&start));
    }

    #[test]
    fn alignment_ignores_row_order_and_signs(seed in any::<u64>(), flips in any::<u8>()) {
        let mut rng = RngStream::new(seed, 0);
        let b_star = DMatrix::from_fn(3, 3, |_, _| rng.standard_normal());
        let b_hat: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.standard_normal()).collect()).collect();
        let base = poe_alignment_error(&b_hat, &b_star).unwrap();
        let mut shuffled: Vec<Vec<f64>> = b_hat.iter().rev().cloned().collect();
        for (k, row) in shuffled.iter_mut().enumerate() {
            if flips >> k & 1 == 1 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
        }
        let other = poe_alignment_error(&shuffled, &b_star).unwrap();
        prop_assert!((base - other).abs() <= 1e-12 * base.max(1.0));
    }
}

#[test]
fn fig1_csv_schema() {
    let config = Fig1Config {
        n: 3,
        sample_sizes: vec![200, 400],
        trials: 3,
        methods: vec![BoltzmannMethod::NceBernoulli, BoltzmannMethod::RatioMatching],
        ..Fig1Config::default()
    };
    let r = run_fig1(&config, false).unwrap();
    let csv = bregest::experiments::fig1_csv(&r);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(FIG1_HEADER));
    assert_eq!(lines.count(), 2 * 2 * 3);
    assert_eq!(r.summary.len(), 4);
}
