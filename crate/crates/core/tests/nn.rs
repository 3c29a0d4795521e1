use dbacs_core::dbacs::{
    adversarial_losses, aligner_objective, critic_objective, cycle_loss, gradient_penalty, gradient_penalty_with_grad, mae_with_grad,
    ArchPreset, DbacsModel, LossWeights,
};
use dbacs_core::nn::{
    check_params, grad_check, AdamConfig, AdamState, GradCheckConfig, LayerSpec, Network, NetworkState, Padding, Tensor,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, b: usize, t: usize, c: usize) -> Tensor {
    Tensor::from_vec(b, t, c, (0..b * t * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn half_sq(y: &Tensor) -> dbacs_core::Result<(f64, Tensor)> {
    Ok((y.as_slice().iter().map(|v| 0.5 * v * v).sum(), y.clone()))
}

/// Central differences at h = 1e-4, as the backward contract states them.
fn coarse() -> GradCheckConfig {
    GradCheckConfig { step: 1e-4, samples: 400, abs_floor: 1e-9, seed: 3 }
}

#[test]
fn predictor_topology_maps_to_a_unit_interval_scalar() {
    let net = Network::new(64, 8, ArchPreset::PaperArch.predictor(64), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let y = net.predict(&random_tensor(&mut rng, 5, 64, 8)).unwrap();
    assert_eq!(y.shape(), (5, 1, 1));
    assert!(y.as_slice().iter().all(|v| *v > 0.0 && *v < 1.0));
}

#[test]
fn every_layer_kind_agrees_with_central_differences() {
    let kinds: Vec<(&str, Vec<LayerSpec>)> = vec![
        ("causal conv", vec![LayerSpec::conv(3, 3)]),
        ("valid conv", vec![LayerSpec::Conv1d { filters: 2, kernel: 4, padding: Padding::None }]),
        ("dense", vec![LayerSpec::dense(4)]),
        ("leaky relu", vec![LayerSpec::conv(3, 2), LayerSpec::LeakyRelu]),
        ("sigmoid", vec![LayerSpec::dense(3), LayerSpec::Sigmoid]),
        ("linear", vec![LayerSpec::dense(3), LayerSpec::Linear]),
        ("maxpool", vec![LayerSpec::conv(3, 3), LayerSpec::Maxpool1d { size: 3 }]),
        ("upsample", vec![LayerSpec::conv(2, 3), LayerSpec::Upsample1d { size: 2 }]),
        ("flatten", vec![LayerSpec::conv(2, 3), LayerSpec::Flatten, LayerSpec::dense(2)]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (name, layers) in kinds {
        let net = Network::new(9, 3, layers, 7).unwrap();
        let x = random_tensor(&mut rng, 3, 9, 3);
        let err = grad_check(&net, &x, half_sq, coarse()).unwrap();
        assert!(err <= 1e-3, "{name}: {err}");
        let err = grad_check(&net, &x, half_sq, GradCheckConfig::default()).unwrap();
        assert!(err <= 1e-4, "{name}: {err}");
    }
}

#[test]
fn linear_regression_under_mae_away_from_kinks() {
    let net = Network::new(1, 4, vec![LayerSpec::dense(1)], 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_tensor(&mut rng, 16, 1, 4);
    let pred = net.predict(&x).unwrap();
    // targets a fixed distance of 0.5 away keep every residual off zero
    let truth: Vec<f64> = pred.as_slice().iter().enumerate().map(|(i, p)| if i % 2 == 0 { p + 0.5 } else { p - 0.5 }).collect();
    let loss = |y: &Tensor| {
        let (v, g) = mae_with_grad(y.scalars()?, &truth)?;
        Ok((v, Tensor::from_vec(g.len(), 1, 1, g)?))
    };
    assert!(grad_check(&net, &x, loss, GradCheckConfig::default()).unwrap() <= 1e-4);
}

#[test]
fn random_two_layer_conv_under_l2() {
    let net = Network::new(12, 2, vec![LayerSpec::conv(4, 3), LayerSpec::LeakyRelu, LayerSpec::conv(2, 5)], 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_tensor(&mut rng, 4, 12, 2);
    assert!(grad_check(&net, &x, half_sq, GradCheckConfig::default()).unwrap() <= 1e-4);
}

#[test]
fn zero_weight_sigmoid_net_with_constant_target() {
    let mut net = Network::new(6, 2, vec![LayerSpec::Flatten, LayerSpec::dense(1), LayerSpec::Sigmoid], 5).unwrap();
    net.params_mut().fill(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_tensor(&mut rng, 4, 6, 2);
    let loss = |y: &Tensor| {
        let d: Vec<f64> = y.as_slice().iter().map(|v| v - 0.9).collect();
        Ok((d.iter().map(|v| 0.5 * v * v).sum(), Tensor::from_vec(d.len(), 1, 1, d)?))
    };
    assert!(grad_check(&net, &x, loss, GradCheckConfig::default()).unwrap() <= 1e-4);
}

/// A small square-channel model: the aligners keep 3 channels on both sides.
fn toy_model(seed: u64) -> DbacsModel {
    let aligner = || vec![LayerSpec::conv(4, 3), LayerSpec::LeakyRelu, LayerSpec::conv(3, 3), LayerSpec::Linear];
    let critic = || vec![LayerSpec::conv(3, 3), LayerSpec::LeakyRelu, LayerSpec::Flatten, LayerSpec::dense(4), LayerSpec::LeakyRelu, LayerSpec::dense(1)];
    DbacsModel::from_parts(
        Network::new(6, 3, vec![LayerSpec::Flatten, LayerSpec::dense(1), LayerSpec::Sigmoid], seed).unwrap(),
        Network::new(6, 3, aligner(), seed + 1).unwrap(),
        Network::new(6, 3, aligner(), seed + 2).unwrap(),
        Network::new(6, 3, critic(), seed + 3).unwrap(),
        Network::new(6, 3, critic(), seed + 4).unwrap(),
    )
    .unwrap()
}

#[test]
fn composed_cycle_and_adversarial_gradients_agree_with_differences() {
    let model = toy_model(10);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (xs, xt) = (random_tensor(&mut rng, 5, 6, 3), random_tensor(&mut rng, 5, 6, 3));
    let w = LossWeights { adv_s: 1.0, adv_t: 1.0, pred: 0.0, cyc: 10.0, gp: 10.0 };
    let objective = |m: &DbacsModel| {
        let (adv_s, adv_t) = adversarial_losses(m, &xs, &xt)?;
        let (cs, ct) = cycle_loss(&m.f, &m.g, &xs, &xt)?;
        // −mean D(aligned) terms only; the real-data critic means are constant in θ_F, θ_G
        let real_s = m.d_a.predict(&xs)?.scalars()?.iter().sum::<f64>() / 5.0;
        let real_t = m.d_b.predict(&xt)?.scalars()?.iter().sum::<f64>() / 5.0;
        Ok((adv_s - real_s) + (adv_t - real_t) + w.cyc * (cs + ct))
    };
    let (report, grad_f, grad_g) = aligner_objective(&model, &xs, &xt, None, &w).unwrap();
    assert!((report.total - objective(&model).unwrap()).abs() <= 1e-10);
    let cfg = GradCheckConfig::default();
    let err_f = check_params(&model.f, &grad_f, |f| objective(&DbacsModel { f: f.clone(), ..model.clone() }), cfg).unwrap();
    let err_g = check_params(&model.g, &grad_g, |g| objective(&DbacsModel { g: g.clone(), ..model.clone() }), cfg).unwrap();
    assert!(err_f <= 1e-4 && err_g <= 1e-4, "{err_f} {err_g}");
}

#[test]
fn critic_objective_gradients_agree_with_differences() {
    let model = toy_model(20);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (xs, xt) = (random_tensor(&mut rng, 6, 6, 3), random_tensor(&mut rng, 6, 6, 3));
    let w = LossWeights::default();
    let seed = 99;
    let (report, grad_a, grad_b) = critic_objective(&model, &xs, &xt, &w, seed).unwrap();
    let objective = |m: &DbacsModel| Ok(critic_objective(m, &xs, &xt, &w, seed)?.0.total);
    assert!((report.total - objective(&model).unwrap()).abs() <= 1e-12);
    let cfg = GradCheckConfig::default();
    let err_a = check_params(&model.d_a, &grad_a, |d| objective(&DbacsModel { d_a: d.clone(), ..model.clone() }), cfg).unwrap();
    let err_b = check_params(&model.d_b, &grad_b, |d| objective(&DbacsModel { d_b: d.clone(), ..model.clone() }), cfg).unwrap();
    assert!(err_a <= 1e-4 && err_b <= 1e-4, "{err_a} {err_b}");
}

#[test]
fn penalty_gradient_agrees_with_differences_of_the_penalty() {
    let model = toy_model(30);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (real, fake) = (random_tensor(&mut rng, 6, 6, 3), random_tensor(&mut rng, 6, 6, 3));
    let (gp, grad) = gradient_penalty_with_grad(&model.d_a, &real, &fake, 5).unwrap();
    assert_eq!(gp, gradient_penalty(&model.d_a, &real, &fake, 5).unwrap());
    let err = check_params(&model.d_a, &grad, |d| gradient_penalty(d, &real, &fake, 5), GradCheckConfig::default()).unwrap();
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn penalty_input_gradient_matches_finite_differences() {
    let critic = Network::new(5, 2, vec![LayerSpec::conv(3, 2), LayerSpec::LeakyRelu, LayerSpec::Flatten, LayerSpec::dense(1)], 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random_tensor(&mut rng, 1, 5, 2);
    // the interpolate of identical batches is the batch itself
    let gp = gradient_penalty(&critic, &x, &x, 0).unwrap();
    let h = 1e-6;
    let mut sq = 0.0;
    for i in 0..10 {
        let (mut up, mut down) = (x.clone(), x.clone());
        up.as_mut_slice()[i] += h;
        down.as_mut_slice()[i] -= h;
        let d = (critic.predict(&up).unwrap().as_slice()[0] - critic.predict(&down).unwrap().as_slice()[0]) / (2.0 * h);
        sq += d * d;
    }
    let numeric = (f64::sqrt(sq) - 1.0).powi(2);
    assert!((gp - numeric).abs() <= 1e-3 * numeric.max(1e-12), "{gp} vs {numeric}");
}

#[test]
fn constant_critic_has_unit_penalty() {
    let mut critic = Network::new(4, 2, vec![LayerSpec::Flatten, LayerSpec::dense(1)], 0).unwrap();
    let (w, b) = critic.layer_params_mut(1);
    w.fill(0.0);
    b.fill(3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (r, f) = (random_tensor(&mut rng, 4, 4, 2), random_tensor(&mut rng, 4, 4, 2));
    assert!((gradient_penalty(&critic, &r, &f, 1).unwrap() - 1.0).abs() <= 1e-15);
}

#[test]
fn adam_first_step_moves_by_the_learning_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grads: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..2.0)).collect();
    for lr in [1e-4, 1e-3, 0.05] {
        for config in [AdamConfig::ADVERSARIAL.with_lr(lr), AdamConfig::PREDICTOR.with_lr(lr)] {
            let start: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
            let mut params = start.clone();
            AdamState::new(config, 50).step(&mut params, &grads, false).unwrap();
            for ((p, s), g) in params.iter().zip(&start).zip(&grads) {
                // bias-corrected moments are g and g², so Δ = −lr·g/(|g| + ε)
                let exact = -lr * g / (g.abs() + config.eps);
                assert!((p - s - exact).abs() <= 1e-9);
                if lr <= 1e-3 && g.abs() >= 0.1 {
                    assert!((p - s + lr * g.signum()).abs() <= 1e-9);
                }
            }
        }
    }
}

#[test]
fn adam_zero_gradient_and_maximize_symmetry() {
    let start = vec![0.3, -1.2, 4.0];
    let mut params = start.clone();
    let mut state = AdamState::new(AdamConfig::ADVERSARIAL, 3);
    for _ in 0..5 {
        state.step(&mut params, &[0.0; 3], false).unwrap();
    }
    assert_eq!(params, start);
    assert_eq!(state.step, 5);

    let grads = [0.7, -0.1, 2.5];
    let (mut down, mut up) = (start.clone(), start.clone());
    let (mut s_down, mut s_up) = (AdamState::new(AdamConfig::ADVERSARIAL, 3), AdamState::new(AdamConfig::ADVERSARIAL, 3));
    for _ in 0..4 {
        s_down.step(&mut down, &grads, false).unwrap();
        s_up.step(&mut up, &grads, true).unwrap();
    }
    for ((d, u), s) in down.iter().zip(&up).zip(&start) {
        assert_eq!(d - s, -(u - s));
    }
    assert!(s_up.step(&mut up, &[f64::NAN, 0.0, 0.0], true).is_err());
}

#[test]
fn checkpoint_state_round_trips_losslessly() {
    let model = DbacsModel::new(ArchPreset::Desk, 36, 5, 7, 12).unwrap();
    for net in [&model.predictor, &model.f, &model.g, &model.d_a, &model.d_b] {
        let state = NetworkState::from(net.clone());
        let back = Network::try_from(state.clone()).unwrap();
        assert_eq!(&back, net);
        assert_eq!(back.fingerprint(), net.fingerprint());
    }
    let mut broken = NetworkState::from(model.f.clone());
    broken.params.pop();
    assert!(Network::try_from(broken).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backward_is_linear_in_the_upstream(seed in any::<u64>(), a in -3.0f64..3.0) {
        let net = Network::new(8, 2, vec![LayerSpec::conv(3, 3), LayerSpec::LeakyRelu, LayerSpec::Maxpool1d { size: 2 }, LayerSpec::conv(2, 2)], seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, 2, 8, 2);
        let (y, tape) = net.forward(&x).unwrap();
        let u = random_tensor(&mut rng, 2, y.len(), y.channels());
        let scaled = Tensor::from_vec(2, y.len(), y.channels(), u.as_slice().iter().map(|v| a * v).collect()).unwrap();
        let g1 = net.param_grads(&tape, &u).unwrap();
        let g2 = net.param_grads(&tape, &scaled).unwrap();
        for (p, q) in g1.iter().zip(&g2) {
            prop_assert!((a * p - q).abs() <= 1e-10 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn forward_is_deterministic_and_finite(seed in any::<u64>()) {
        let net = Network::new(12, 3, ArchPreset::Desk.aligner(12, 2, true).unwrap(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, 2, 12, 3);
        let (a, b) = (net.predict(&x).unwrap(), net.predict(&x).unwrap());
        prop_assert_eq!(a.shape(), (2, 12, 2));
        prop_assert!(a.is_finite());
        prop_assert_eq!(a, b);
    }
}
