mod common;

use common::{random_matrix, small_arch};
use incontext_ad::detector::{encode_labels, plan_members, Detector, EnsembleConfig, MemberView};
use incontext_ad::model::ModelParams;
use proptest::prelude::*;

fn detector(cfg: EnsembleConfig) -> Detector<f64> {
    Detector::new(ModelParams::init(&small_arch(), 9).unwrap(), cfg).unwrap()
}

const PERMS_3: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

#[test]
fn full_permutation_ensemble_is_column_order_invariant() {
    let det = detector(EnsembleConfig::default());
    let train = random_matrix(30, 3, 1);
    let test = random_matrix(12, 3, 2);
    let encoded = vec![-1i8; 30];
    let views = || PERMS_3.iter().map(|p| MemberView { features: p.to_vec(), rows: (0..30).collect() }).collect::<Vec<_>>();
    let base = det.score(&det.fit_views(&train, &encoded, views()).unwrap(), &test).unwrap();
    for p in PERMS_3 {
        let state = det.fit_views(&train.select_cols(&p), &encoded, views()).unwrap();
        let scores = det.score(&state, &test.select_cols(&p)).unwrap();
        for (a, b) in scores.iter().zip(&base) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn label_modes_encode_to_model_domain() {
    assert_eq!(encode_labels(3, None).unwrap(), vec![-1, -1, -1]);
    assert_eq!(encode_labels(3, Some(&[Some(0); 3])).unwrap(), vec![0, 0, 0]);
    assert_eq!(encode_labels(3, Some(&[Some(1), None, None])).unwrap(), vec![1, -1, -1]);
    assert!(encode_labels(2, Some(&[Some(0)])).is_err());
    assert!(encode_labels(1, Some(&[Some(2)])).is_err());
}

#[test]
fn context_is_subsampled_only_above_the_cap() {
    let cfg = EnsembleConfig { context_cap: 50, n_members: 3, ..EnsembleConfig::default() };
    let below = plan_members(50, 4, &[-1; 50], 6, &cfg);
    assert!(below.iter().all(|v| v.rows == (0..50).collect::<Vec<_>>()));
    let mut encoded = vec![-1i8; 400];
    for i in (0..400).step_by(40) {
        encoded[i] = 1;
    }
    let above = plan_members(400, 4, &encoded, 6, &cfg);
    for v in &above {
        assert_eq!(v.rows.len(), 50);
        assert!((0..400).step_by(40).all(|i| v.rows.binary_search(&i).is_ok()));
        let mut f = v.features.clone();
        f.sort_unstable();
        assert_eq!(f, vec![0, 1, 2, 3]);
    }
}

#[test]
fn wide_inputs_get_feature_subsets() {
    let cfg = EnsembleConfig { n_members: 5, ..EnsembleConfig::default() };
    for v in plan_members(20, 11, &[-1; 20], 6, &cfg) {
        assert_eq!(v.features.len(), 6);
        let mut f = v.features.clone();
        f.sort_unstable();
        f.dedup();
        assert_eq!(f.len(), 6);
        assert!(f.iter().all(|&c| c < 11));
    }
    let det = detector(EnsembleConfig { n_members: 2, ..EnsembleConfig::default() });
    let state = det.fit(&random_matrix(20, 11, 3), None).unwrap();
    assert_eq!(det.score(&state, &random_matrix(4, 11, 4)).unwrap().len(), 4);
}

#[test]
fn dimension_and_emptiness_errors() {
    let det = detector(EnsembleConfig::default());
    assert!(det.fit(&random_matrix(0, 3, 1), None).is_err());
    let state = det.fit(&random_matrix(10, 3, 1), None).unwrap();
    assert!(det.score(&state, &random_matrix(2, 4, 1)).is_err());
    assert!(Detector::new(ModelParams::<f64>::init(&small_arch(), 1).unwrap(), EnsembleConfig { n_members: 0, ..EnsembleConfig::default() }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scores_are_deterministic_and_batch_independent(seed in 0u64..10_000, n in 2usize..40, m in 1usize..10) {
        let det = detector(EnsembleConfig { seed, context_cap: 16, ..EnsembleConfig::default() });
        let train = random_matrix(n, 4, seed);
        let test = random_matrix(m, 4, seed + 1);
        let state = det.fit(&train, None).unwrap();
        let bulk = det.score(&state, &test).unwrap();
        prop_assert_eq!(&bulk, &det.score(&state, &test).unwrap());
        for i in 0..m {
            let one = det.score(&state, &test.select_rows(&[i])).unwrap();
            prop_assert!((one[0] - bulk[i]).abs() < 1e-12);
        }
        let members = det.member_scores(&state, &test).unwrap();
        for i in 0..m {
            let lo = members.iter().map(|s| s[i]).fold(f64::INFINITY, f64::min);
            let hi = members.iter().map(|s| s[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(bulk[i] >= lo - 1e-15 && bulk[i] <= hi + 1e-15);
            prop_assert!(bulk[i] > 0.0 && bulk[i] < 1.0);
        }
    }
}
