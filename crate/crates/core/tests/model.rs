mod common;

use ndarray::{Array1, Array2};

use common::{max_gradient_relative_error, normal_matrix, random_outcomes, rng};
use ressurv::cox::{neg_log_partial_likelihood, RiskSetIndex};
use ressurv::model::{
    init_params, main_channel_backward, model_forward, resblock_backward, resblock_forward,
    ResSurvParams,
};
use ressurv::{ActivationKind, Mode, NetworkLayout};

const KINDS: [ActivationKind; 4] = [
    ActivationKind::Tanh,
    ActivationKind::Selu,
    ActivationKind::Relu,
    ActivationKind::Identity,
];

#[test]
fn network_gradient_matches_differences_for_every_activation() {
    for kind in KINDS {
        for seed in [1, 2, 3] {
            let mut r = rng(100 + seed);
            let layout = NetworkLayout::uniform(16, 2, 8, 2, kind, 0.2);
            let params = init_params(&layout, seed).unwrap();
            let x = normal_matrix(32, 16, &mut r);
            let (t, e) = random_outcomes(32, &mut r);
            let idx = RiskSetIndex::build(&t, &e).unwrap();
            let mode = Mode::Train { seed, epoch: 5 };
            let err = max_gradient_relative_error(&params, &x, &idx, mode, 0.05, 1e-5, 1e-7);
            assert!(err < 1e-4, "{kind:?} seed {seed}: relative error {err:e}");
        }
    }
}

/// `sum(R ∘ y)` for a fixed random `R`, so `∂/∂y = R`.
fn block_objective(x: &Array2<f64>, params: &ResSurvParams, r: &Array2<f64>, mode: Mode) -> f64 {
    let (y, _) = resblock_forward(x, &params.blocks[0], 0, &params.layout, mode).unwrap();
    (&y * r).sum()
}

#[test]
fn block_gradient_matches_differences() {
    let mut g = rng(7);
    let layout = NetworkLayout::uniform(8, 1, 8, 2, ActivationKind::Tanh, 0.0);
    let params = init_params(&layout, 3).unwrap();
    let x = normal_matrix(12, 8, &mut g);
    let r = normal_matrix(12, 8, &mut g);
    let mode = Mode::Train { seed: 1, epoch: 1 };
    let (_, cache) = resblock_forward(&x, &params.blocks[0], 0, &layout, mode).unwrap();
    let (grad_x, grads) = resblock_backward(&r, &params.blocks[0], &cache, &layout);

    let h = 1e-6;
    let rel = |a: f64, f: f64| (a - f).abs() / a.abs().max(f.abs()).max(1e-8);
    let mut worst = 0.0f64;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[[i, j]] += h;
            down[[i, j]] -= h;
            let fd = (block_objective(&up, &params, &r, mode)
                - block_objective(&down, &params, &r, mode))
                / (2.0 * h);
            worst = worst.max(rel(grad_x[[i, j]], fd));
        }
    }
    let perturb = |f: &dyn Fn(&mut ResSurvParams, f64)| {
        let (mut up, mut down) = (params.clone(), params.clone());
        f(&mut up, h);
        f(&mut down, -h);
        (block_objective(&x, &up, &r, mode) - block_objective(&x, &down, &r, mode)) / (2.0 * h)
    };
    for l in 0..2 {
        for (a, b) in [(0, 0), (3, 5), (7, 7)] {
            let fd = perturb(&|p, d| p.blocks[0].dense_layers[l].weight[[a, b]] += d);
            worst = worst.max(rel(grads.dense[l].0[[a, b]], fd));
        }
        let fd = perturb(&|p, d| p.blocks[0].batch_norms[l].gamma[2] += d);
        worst = worst.max(rel(grads.batch_norms[l].0[2], fd));
    }
    let fd = perturb(&|p, d| p.blocks[0].shortcut.as_mut().unwrap()[[1, 4]] += d);
    worst = worst.max(rel(grads.shortcut.as_ref().unwrap()[[1, 4]], fd));
    assert!(worst < 1e-6, "block relative error {worst:e}");
}

#[test]
fn block_gradient_is_main_channel_plus_shortcut() {
    let mut g = rng(8);
    let layout = NetworkLayout::uniform(5, 1, 6, 3, ActivationKind::Selu, 0.3);
    let params = init_params(&layout, 4).unwrap();
    let x = normal_matrix(10, 5, &mut g);
    let r = normal_matrix(10, 6, &mut g);
    let mode = Mode::Train { seed: 2, epoch: 9 };
    let block = &params.blocks[0];
    let (_, cache) = resblock_forward(&x, block, 0, &layout, mode).unwrap();
    let (full, _) = resblock_backward(&r, block, &cache, &layout);
    let (main, _) = main_channel_backward(&r, block, &cache, &layout);
    let via_shortcut = r.dot(block.shortcut.as_ref().unwrap());
    let diff = (&full - &(&main + &via_shortcut))
        .mapv(f64::abs)
        .fold(0.0f64, |a, &b| a.max(b));
    assert!(diff < 1e-14, "{diff:e}");
}

#[test]
fn identity_activation_block_is_a_matrix_product() {
    let mut g = rng(9);
    let mut layout = NetworkLayout::uniform(3, 1, 4, 2, ActivationKind::Identity, 0.0);
    layout.batch_norm = false;
    let params = init_params(&layout, 5).unwrap();
    let x = normal_matrix(6, 3, &mut g);
    let (h, _) = model_forward(&x, &params, Mode::Train { seed: 0, epoch: 1 }).unwrap();

    let b = &params.blocks[0];
    let (l1, l2) = (&b.dense_layers[0], &b.dense_layers[1]);
    let ws = b.shortcut.as_ref().unwrap();
    let head = &params.output_head;
    for (i, row) in x.rows().into_iter().enumerate() {
        let z1 = l1.weight.dot(&row) + &l1.bias;
        let f = l2.weight.dot(&z1) + &l2.bias;
        let y = f + ws.dot(&row);
        let expect = head.weight.row(0).dot(&y) + head.bias[0];
        assert!(
            (h[i] - expect).abs() < 1e-12,
            "sample {i}: {} vs {expect}",
            h[i]
        );
    }
}

#[test]
fn deep_network_keeps_gradient_at_first_block() {
    for kind in KINDS {
        let mut g = rng(11);
        let layout = NetworkLayout::uniform(20, 7, 64, 3, kind, 0.2);
        let params = init_params(&layout, 17).unwrap();
        let x = normal_matrix(64, 20, &mut g);
        let (t, e) = random_outcomes(64, &mut g);
        let idx = RiskSetIndex::build(&t, &e).unwrap();
        let (_, grads, _) = ressurv::train::cox_loss_and_gradient(
            &params,
            &x,
            &idx,
            Mode::Train { seed: 1, epoch: 1 },
            0.0,
        )
        .unwrap();
        let first = layout.input_dim * 64;
        let inf_norm = grads[..first].iter().fold(0.0f64, |a, g| a.max(g.abs()));
        assert!(grads.iter().all(|g| g.is_finite()));
        assert!(
            inf_norm > 1e-12,
            "{kind:?}: first-block weight gradient {inf_norm:e}"
        );
    }
}

#[test]
fn head_bias_shift_moves_scores_not_loss() {
    let mut g = rng(12);
    let layout = NetworkLayout::uniform(4, 2, 8, 2, ActivationKind::Relu, 0.0);
    let mut params = init_params(&layout, 6).unwrap();
    let x = normal_matrix(30, 4, &mut g);
    let (t, e) = random_outcomes(30, &mut g);
    let idx = RiskSetIndex::build(&t, &e).unwrap();
    let h0 = params.predict(&x).unwrap();
    params.output_head.bias += &Array1::from_elem(1, 7.25);
    let h1 = params.predict(&x).unwrap();
    for (a, b) in h0.iter().zip(&h1) {
        assert!((b - a - 7.25).abs() < 1e-12);
    }
    let d = neg_log_partial_likelihood(&h1, &idx) - neg_log_partial_likelihood(&h0, &idx);
    assert!(d.abs() < 1e-12, "{d:e}");
}
