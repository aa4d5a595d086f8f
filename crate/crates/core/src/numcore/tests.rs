use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn zero_network_outputs_zero() {
    let net = Network::zeros(&[3, 5, 2], OutputKind::Linear).unwrap();
    assert_eq!(net.forward(&[0.4, -1.0, 7.0]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn identity_linear_layer() {
    let mut net = Network::zeros(&[2, 2], OutputKind::Linear).unwrap();
    // weights [[1,0],[0,1]], biases [0,0]
    net.set_params(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
    assert_eq!(net.forward(&[0.3, -0.2]).unwrap(), vec![0.3, -0.2]);
}

#[test]
fn forward_rejects_wrong_input_length() {
    let net = Network::zeros(&[3, 2], OutputKind::Linear).unwrap();
    let err = net.forward(&[1.0]).unwrap_err();
    assert_eq!(
        err,
        NetError::Shape {
            what: "input",
            expected: 3,
            got: 1
        }
    );
}

#[test]
fn invalid_layouts_rejected() {
    assert!(Network::zeros(&[3], OutputKind::Linear).is_err());
    assert!(Network::zeros(&[3, 0, 2], OutputKind::Linear).is_err());
    assert!(Network::zeros(&[3, 3], OutputKind::Gaussian).is_err());
}

#[test]
fn batched_forward_matches_single() {
    let net = Network::new(&[4, 8, 3], OutputKind::Linear, &mut rng(1)).unwrap();
    let mut r = rng(2);
    let inputs: Vec<f64> = (0..20).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut scratch = ForwardScratch::default();
    let batch = net.forward_batch(&inputs, 5, &mut scratch).unwrap().to_vec();
    for row in 0..5 {
        let single = net.forward(&inputs[row * 4..row * 4 + 4]).unwrap();
        assert_eq!(&batch[row * 3..row * 3 + 3], single.as_slice());
    }
}

#[test]
fn xor_is_learned() {
    let mut net = Network::new(&[2, 4, 1], OutputKind::Linear, &mut rng(3)).unwrap();
    let mut opt = OptimizerState::for_network(&net, 0.02);
    let corners = [
        ([0.0, 0.0], 0.0),
        ([0.0, 1.0], 1.0),
        ([1.0, 0.0], 1.0),
        ([1.0, 1.0], 0.0),
    ];
    let batch: Vec<Sample> = corners
        .iter()
        .map(|(x, y)| Sample::unweighted(x.to_vec(), vec![*y]))
        .collect();
    for _ in 0..5000 {
        net_train_step(&mut net, &mut opt, &batch).unwrap();
    }
    for (x, y) in corners {
        let out = net.forward(&x).unwrap()[0];
        assert!((out - y).abs() < 0.1, "xor({x:?}) = {out}");
    }
}

#[test]
fn perfect_fit_gives_zero_loss_and_zero_gradient() {
    let net = Network::new(&[2, 3, 2], OutputKind::Linear, &mut rng(4)).unwrap();
    let input = vec![0.5, -0.25];
    let target = net.forward(&input).unwrap();
    let (loss, grad) = net
        .loss_and_gradient(&[Sample::unweighted(input, target)])
        .unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|g| *g == 0.0));
}

#[test]
fn zero_learning_rate_keeps_parameters_bit_identical() {
    let mut net = Network::new(&[3, 6, 2], OutputKind::Gaussian, &mut rng(5)).unwrap();
    let before = net.params().to_vec();
    let mut opt = OptimizerState::for_network(&net, 0.0);
    let batch = vec![Sample::unweighted(vec![0.1, 0.2, 0.3], vec![1.0])];
    net_train_step(&mut net, &mut opt, &batch).unwrap();
    assert_eq!(before, net.params());
    assert_eq!(opt.step_count(), 1);
}

/// Least-squares residual of y ≈ a·x1 + b·x2 + c by the normal equations.
fn least_squares_floor(xs: &[[f64; 2]], ys: &[f64]) -> f64 {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (x, &y) in xs.iter().zip(ys) {
        let row = [x[0], x[1], 1.0];
        for i in 0..3 {
            aty[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    // Gaussian elimination on the 3x3 system.
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&ata[i]);
        m[i][3] = aty[i];
    }
    for c in 0..3 {
        let p = (c..3)
            .max_by(|&a, &b| m[a][c].abs().partial_cmp(&m[b][c].abs()).unwrap())
            .unwrap();
        m.swap(c, p);
        for r in 0..3 {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..4 {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..3).map(|i| m[i][3] / m[i][i]).collect();
    xs.iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = coef[0] * x[0] + coef[1] * x[1] + coef[2] - y;
            e * e
        })
        .sum::<f64>()
        / ys.len() as f64
}

#[test]
fn linear_regression_loss_decreases_toward_least_squares_floor() {
    let mut r = rng(6);
    let xs: Vec<[f64; 2]> = (0..32)
        .map(|_| [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)])
        .collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| 1.5 * x[0] - 0.7 * x[1] + 0.2 + 0.05 * r.gen_range(-1.0..1.0))
        .collect();
    let floor = least_squares_floor(&xs, &ys);
    let batch: Vec<Sample> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| Sample::unweighted(x.to_vec(), vec![*y]))
        .collect();
    let mut net = Network::zeros(&[2, 1], OutputKind::Linear).unwrap();
    let mut opt = OptimizerState::for_network(&net, 1e-2);
    let losses: Vec<f64> = (0..300)
        .map(|_| net_train_step(&mut net, &mut opt, &batch).unwrap())
        .collect();
    for w in losses[10..].windows(2) {
        assert!(w[1] <= w[0], "loss increased: {} -> {}", w[0], w[1]);
    }
    for l in &losses {
        assert!(*l >= floor - 1e-12);
    }
    assert!(losses[losses.len() - 1] < losses[10]);
}

#[test]
fn adam_converges_on_convex_quadratic() {
    let mut w = [0.0];
    let mut opt = OptimizerState::with_learning_rate(1, 1e-2);
    for _ in 0..5000 {
        let g = [2.0 * (w[0] - 3.0)];
        opt.apply(&mut w, &g).unwrap();
    }
    assert!((w[0] - 3.0).abs() < 1e-3, "w = {}", w[0]);
}

#[test]
fn non_finite_target_rejected_with_index() {
    let mut net = Network::new(&[1, 2, 1], OutputKind::Linear, &mut rng(7)).unwrap();
    let before = net.params().to_vec();
    let mut opt = OptimizerState::for_network(&net, 1e-3);
    let batch = vec![
        Sample::unweighted(vec![0.1], vec![0.0]),
        Sample::unweighted(vec![0.2], vec![f64::NAN]),
    ];
    let err = net_train_step(&mut net, &mut opt, &batch).unwrap_err();
    assert_eq!(err, NetError::NonFiniteLoss { index: 1 });
    assert_eq!(before, net.params());
    assert_eq!(opt.step_count(), 0);
}

#[test]
fn update_producing_overflow_is_rejected() {
    let mut params = [f64::MAX];
    let mut opt = OptimizerState::with_learning_rate(1, -f64::MAX);
    assert!(opt.apply(&mut params, &[1.0]).is_err());
    assert_eq!(params[0], f64::MAX);
    assert_eq!(opt.step_count(), 0);
}

#[test]
fn sample_shape_errors_name_the_sample() {
    let net = Network::zeros(&[2, 1], OutputKind::Linear).unwrap();
    let batch = vec![
        Sample::unweighted(vec![0.0, 0.0], vec![0.0]),
        Sample::unweighted(vec![0.0], vec![0.0]),
    ];
    assert!(matches!(
        net.loss_and_gradient(&batch),
        Err(NetError::SampleShape { index: 1, .. })
    ));
    assert_eq!(
        net.loss_and_gradient::<Sample>(&[]),
        Err(NetError::EmptyBatch)
    );
}

#[test]
fn soft_clamp_bounds_and_derivative() {
    for raw in [-100.0, -6.0, -1.0, 0.0, 1.5, 2.0, 50.0] {
        let lv = soft_clamp_log_var(raw);
        assert!((LOG_VAR_MIN..=LOG_VAR_MAX).contains(&lv), "{raw} -> {lv}");
        let h = 1e-6;
        let fd = (soft_clamp_log_var(raw + h) - soft_clamp_log_var(raw - h)) / (2.0 * h);
        assert!((fd - soft_clamp_log_var_grad(raw)).abs() < 1e-6);
    }
}

#[test]
fn gradcheck_zero_network_reports_zero() {
    let net = Network::zeros(&[3, 4, 2], OutputKind::Linear).unwrap();
    assert_eq!(finite_diff_check(&net, &[1.0, 2.0, 3.0], &[0.0, 0.0]), 0.0);
}

#[test]
fn gradcheck_random_network() {
    let mut r = rng(8);
    let net = Network::new(&[3, 8, 8, 2], OutputKind::Linear, &mut r).unwrap();
    let input: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
    let target: Vec<f64> = (0..2).map(|_| r.gen_range(-1.0..1.0)).collect();
    let err = finite_diff_check(&net, &input, &target);
    assert!(err <= 1e-4, "relative gradient error {err}");
}

#[test]
fn gradcheck_gaussian_head() {
    let mut r = rng(9);
    let net = Network::new(&[3, 8, 8, 4], OutputKind::Gaussian, &mut r).unwrap();
    let err = finite_diff_check(&net, &[0.2, -0.4, 0.9], &[0.3, -0.1]);
    assert!(err <= 1e-4, "relative gradient error {err}");
}

#[test]
fn gradcheck_detects_sign_flip() {
    let mut r = rng(10);
    let net = Network::new(&[3, 8, 8, 2], OutputKind::Linear, &mut r).unwrap();
    let (input, target) = (vec![0.3, -0.6, 0.8], vec![0.5, -0.5]);
    let (_, mut grad) = net
        .loss_and_gradient(&[Sample::unweighted(input.clone(), target.clone())])
        .unwrap();
    // corrupt the first layer's weight block
    for g in &mut grad[..24] {
        *g = -*g;
    }
    assert!(gradient_error(&net, &input, &target, &grad) > 1e-1);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let net = Network::new(&[5, 7, 4], OutputKind::Gaussian, &mut rng(11)).unwrap();
    let text = serde_json::to_string(&net).unwrap();
    let back: Network = serde_json::from_str(&text).unwrap();
    assert_eq!(net, back);
    let bits = |n: &Network| n.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&net), bits(&back));
    let rec: NetworkRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(rec.tensors["layers.0.weight"].shape, vec![5, 7]);
    assert_eq!(rec.tensors["layers.1.bias"].shape, vec![4]);
}

#[test]
fn checkpoint_with_wrong_shape_rejected() {
    let net = Network::zeros(&[2, 3], OutputKind::Linear).unwrap();
    let mut rec = NetworkRecord::from(net);
    rec.tensors.get_mut("layers.0.bias").unwrap().data.pop();
    assert!(Network::try_from(rec).is_err());
}
