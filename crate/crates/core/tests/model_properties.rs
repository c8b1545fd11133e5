mod common;

use common::{masked_forward, random_matrix, small_arch};
use incontext_ad::linalg::Matrix;
use incontext_ad::model::{fit, forward_joint, loss_and_grad, predict, predict_chunked, predict_logits, ModelParams};
use incontext_ad::preprocess::prepare;
use incontext_ad::rng::seeded;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn labels(n: usize, seed: u64) -> Vec<i8> {
    let mut rng = seeded(seed);
    (0..n).map(|_| rng.random_range(-1..=1)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn joint_and_cached_paths_match_masked_attention_oracle() {
    let params = ModelParams::<f64>::init(&small_arch(), 11).unwrap();
    let d = params.arch.d_max;
    for trial in 0..10 {
        let xs = random_matrix(3 + trial, d, 100 + trial as u64);
        let xq = random_matrix(1 + trial % 4, d, 200 + trial as u64);
        let ys = labels(xs.rows(), trial as u64);
        let oracle = masked_forward(&params, &xs, &ys, &xq);
        let joint = forward_joint(&params, &xs, &ys, &xq).unwrap();
        assert!(max_diff(&oracle, &joint) < 1e-10, "joint pass differs from oracle");

        let raw_s = random_matrix(4 + trial, 3, 300 + trial as u64);
        let raw_q = random_matrix(5, 3, 400 + trial as u64);
        let ys = labels(raw_s.rows(), 50 + trial as u64);
        let ctx = fit(&params, &raw_s, &ys).unwrap();
        let cached = predict_logits(&params, &ctx, &raw_q).unwrap();
        let oracle = masked_forward(&params, &prepare(&raw_s, &ctx.stats).unwrap(), &ys, &prepare(&raw_q, &ctx.stats).unwrap());
        assert!(max_diff(&oracle, &cached) < 1e-10, "cached pass differs from oracle");
    }
}

#[test]
fn cache_footprint_and_refit_determinism() {
    let params = ModelParams::<f64>::init(&small_arch(), 3).unwrap();
    let xs = random_matrix(9, 4, 1);
    let ys = labels(9, 2);
    let a = fit(&params, &xs, &ys).unwrap();
    let b = fit(&params, &xs, &ys).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_layers(), params.arch.n_layers);
    assert_eq!(a.cache_len(), 2 * params.arch.n_layers * 9 * params.arch.d_model);
}

#[test]
fn empty_support_is_rejected() {
    let params = ModelParams::<f64>::init(&small_arch(), 3).unwrap();
    let err = fit(&params, &Matrix::zeros(0, 3), &[]).unwrap_err();
    assert!(matches!(err, incontext_ad::error::Error::EmptyContext));
}

#[test]
fn feature_count_mismatch_is_rejected() {
    let params = ModelParams::<f64>::init(&small_arch(), 3).unwrap();
    let ctx = fit(&params, &random_matrix(5, 3, 1), &[-1; 5]).unwrap();
    assert!(predict(&params, &ctx, &random_matrix(2, 4, 2)).is_err());
}

#[test]
fn chunked_prediction_matches_bulk() {
    let params = ModelParams::<f64>::init(&small_arch(), 5).unwrap();
    let ctx = fit(&params, &random_matrix(12, 5, 1), &labels(12, 1)).unwrap();
    let xq = random_matrix(17, 5, 2);
    let bulk = predict(&params, &ctx, &xq).unwrap();
    let ones = predict_chunked(&params, &ctx, &xq, 1).unwrap();
    let sevens = predict_chunked(&params, &ctx, &xq, 7).unwrap();
    assert!(max_diff(&bulk, &ones) < 1e-6);
    assert!(max_diff(&bulk, &sevens) < 1e-6);
    assert!(bulk.iter().all(|&p| p > 0.0 && p < 1.0));
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let arch = small_arch();
    let params = ModelParams::<f64>::init(&arch, 21).unwrap();
    let xs = random_matrix(7, arch.d_max, 1);
    let ys = vec![0, 1, -1, 0, -1, 1, 0];
    let xq = random_matrix(6, arch.d_max, 2);
    let yq = vec![0, 1, 1, 0, 1, 0];
    let (_, grads) = loss_and_grad(&params, &xs, &ys, &xq, &yq).unwrap();
    let mut rng = seeded(77);
    let h = 1e-5;
    for _ in 0..100 {
        let t = rng.random_range(0..params.tensors.len());
        let i = rng.random_range(0..params.tensors[t].len());
        let eval = |delta: f64| {
            let mut p = params.clone();
            p.tensors[t].as_mut_slice()[i] += delta;
            loss_and_grad(&p, &xs, &ys, &xq, &yq).unwrap().0
        };
        let numeric = (eval(h) - eval(-h)) / (2.0 * h);
        let analytic = grads[t].as_slice()[i];
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
        assert!(rel < 1e-4, "tensor {t} entry {i}: analytic {analytic} numeric {numeric}");
    }
}

#[test]
fn unlabeled_rows_pass_through_film_unchanged() {
    let params = ModelParams::<f64>::init(&small_arch(), 8).unwrap();
    let x = random_matrix(5, params.arch.d_model, 4);
    let c = params.label_embedding(&[-1; 5]).unwrap();
    assert!(c.as_slice().iter().all(|&v| v == 0.0));
    assert_eq!(params.film(&x, &c).unwrap(), x);
}

fn setup(seed: u64, ns: usize, nq: usize) -> (ModelParams<f64>, Matrix<f64>, Vec<i8>, Matrix<f64>) {
    let params = ModelParams::<f64>::init(&small_arch(), seed).unwrap();
    let d = params.arch.d_max;
    (params, random_matrix(ns, d, seed + 1), labels(ns, seed + 2), random_matrix(nq, d, seed + 3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permuting_queries_permutes_logits(seed in 0u64..1000, ns in 1usize..12, nq in 2usize..10) {
        let (params, xs, ys, xq) = setup(seed, ns, nq);
        let base = forward_joint(&params, &xs, &ys, &xq).unwrap();
        let mut perm: Vec<usize> = (0..nq).collect();
        perm.shuffle(&mut seeded(seed));
        let out = forward_joint(&params, &xs, &ys, &xq.select_rows(&perm)).unwrap();
        for (k, &p) in perm.iter().enumerate() {
            prop_assert!((out[k] - base[p]).abs() < 1e-10);
        }
    }

    #[test]
    fn dropping_a_query_leaves_the_rest(seed in 0u64..1000, ns in 1usize..12, nq in 2usize..10, drop in 0usize..10) {
        let (params, xs, ys, xq) = setup(seed, ns, nq);
        let drop = drop % nq;
        let base = forward_joint(&params, &xs, &ys, &xq).unwrap();
        let keep: Vec<usize> = (0..nq).filter(|&i| i != drop).collect();
        let out = forward_joint(&params, &xs, &ys, &xq.select_rows(&keep)).unwrap();
        for (k, &i) in keep.iter().enumerate() {
            prop_assert!((out[k] - base[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn permuting_support_leaves_logits(seed in 0u64..1000, ns in 1usize..12, nq in 1usize..6) {
        let (params, xs, ys, xq) = setup(seed, ns, nq);
        let base = forward_joint(&params, &xs, &ys, &xq).unwrap();
        let mut perm: Vec<usize> = (0..ns).collect();
        perm.shuffle(&mut seeded(seed ^ 0xabc));
        let ys_p: Vec<i8> = perm.iter().map(|&i| ys[i]).collect();
        let out = forward_joint(&params, &xs.select_rows(&perm), &ys_p, &xq).unwrap();
        for (a, b) in out.iter().zip(&base) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn film_is_exact_identity_for_unlabeled(seed in 0u64..1000, rows in 1usize..8) {
        let params = ModelParams::<f64>::init(&small_arch(), seed).unwrap();
        let x = random_matrix(rows, params.arch.d_model, seed);
        let c = params.label_embedding(&vec![-1; rows]).unwrap();
        prop_assert_eq!(params.film(&x, &c).unwrap(), x);
    }

    #[test]
    fn cached_prediction_equals_joint_query_slice(seed in 0u64..1000, ns in 1usize..12, nq in 1usize..8) {
        let params = ModelParams::<f64>::init(&small_arch(), seed).unwrap();
        let raw_s = random_matrix(ns, 4, seed + 1);
        let raw_q = random_matrix(nq, 4, seed + 2);
        let ys = labels(ns, seed + 3);
        let ctx = fit(&params, &raw_s, &ys).unwrap();
        let cached = predict_logits(&params, &ctx, &raw_q).unwrap();
        let xs = prepare(&raw_s, &ctx.stats).unwrap();
        let xq = prepare(&raw_q, &ctx.stats).unwrap();
        let joint = forward_joint(&params, &xs, &ys, &xq).unwrap();
        prop_assert!(max_diff(&cached, &joint) < 1e-10);
    }
}
