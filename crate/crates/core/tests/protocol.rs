mod common;

use common::{linear_data, small_hp, synthetic};
use ressurv::dataset::HazardKind;
use ressurv::train::{
    compare_models, cross_validate, grid_search, GridSpec, LINEAR_COX, NO_SHORTCUT, RESSURV,
};
use ressurv::{Hyperparameters, OptimizerKind, SurvivalDataset};

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn five_folds_of_twenty() {
    let ds = linear_data(100, 0.3, 1);
    let cv = cross_validate(&ds, &small_hp(), 5, 3).unwrap();
    assert_eq!(cv.folds.len(), 5);
    assert!(cv
        .folds
        .iter()
        .all(|f| f.n_test == 20 && f.n_train + f.n_val == 80));
    let cs: Vec<f64> = cv.folds.iter().map(|f| f.c_index).collect();
    let mean = cs.iter().sum::<f64>() / 5.0;
    let std = (cs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
    assert!((cv.mean_c_index - mean).abs() < 1e-12);
    assert!((cv.std_c_index - std).abs() < 1e-12);
}

#[test]
fn strong_linear_signal_is_found() {
    let (ds, _) = synthetic(
        HazardKind::Linear,
        600,
        5,
        &[2.0, -2.0, 1.0, 0.0, 0.0],
        0.3,
        2,
    );
    let cv = cross_validate(&ds, &small_hp(), 5, 4).unwrap();
    assert!(cv.mean_c_index > 0.8, "mean C-index {}", cv.mean_c_index);
}

#[test]
fn row_order_does_not_change_cv() {
    let ds = linear_data(300, 0.3, 3);
    let n = ds.n_samples();
    let perm: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % n).collect();
    let shuffled = ds.subset(&perm);
    let hp = Hyperparameters {
        dropout_rate: 0.2,
        ..small_hp()
    };
    let a = cross_validate(&ds, &hp, 5, 6).unwrap();
    let b = cross_validate(&shuffled, &hp, 5, 6).unwrap();
    assert_eq!(a.fold_hash, b.fold_hash);
    assert!((a.mean_c_index - b.mean_c_index).abs() < 1e-12);
    assert_eq!(a, b);
}

#[test]
fn single_point_grid_picks_it() {
    let ds = linear_data(150, 0.3, 4);
    let result = grid_search(&ds, &GridSpec::single(small_hp()), 3, 1, 10).unwrap();
    assert_eq!(result.points.len(), 1);
    assert_eq!(result.best, Some(0));
}

#[test]
fn divergent_point_is_recorded_and_skipped() {
    let ds = linear_data(200, 0.3, 5);
    let base = Hyperparameters {
        optimizer: OptimizerKind::Sgd,
        l2_lambda: 1e3,
        patience: 50,
        max_epochs: 60,
        ..small_hp()
    };
    let mut grid = GridSpec::single(base);
    grid.learning_rate = vec![1e-1, 1e-4];
    let result = grid_search(&ds, &grid, 3, 2, 2).unwrap();
    let bad = &result.points[0];
    assert!(
        bad.failure
            .as_deref()
            .is_some_and(|f| f.contains("non-finite")),
        "{:?}",
        bad.failure
    );
    assert_eq!(bad.mean_c_index, None);
    assert!(result.points[1].failure.is_none());
    assert_eq!(result.best, Some(1));
}

fn two_by_two_grid() -> GridSpec {
    let mut grid = GridSpec::single(Hyperparameters {
        dropout_rate: 0.2,
        max_epochs: 40,
        ..small_hp()
    });
    grid.activation = vec![ressurv::ActivationKind::Tanh, ressurv::ActivationKind::Relu];
    grid.learning_rate = vec![1e-2, 1e-3];
    grid
}

#[test]
fn grid_result_is_independent_of_workers() {
    let ds = linear_data(200, 0.3, 6);
    let grid = two_by_two_grid();
    let one = in_pool(1, || grid_search(&ds, &grid, 3, 5, 4).unwrap());
    let four = in_pool(4, || grid_search(&ds, &grid, 3, 5, 4).unwrap());
    assert_eq!(one, four);
    let json = |r| serde_json::to_string(r).unwrap();
    assert_eq!(json(&one), json(&four));
}

#[test]
fn budget_caps_evaluations() {
    let ds = linear_data(150, 0.3, 7);
    let mut grid = GridSpec::single(small_hp());
    grid.nodes = vec![4, 8, 16, 32, 64];
    grid.learning_rate = vec![1e-2, 1e-3];
    assert_eq!(grid.len(), 10);
    let result = grid_search(&ds, &grid, 3, 1, 1).unwrap();
    assert_eq!(result.total_runs, 1);
    assert_eq!(result.points.len(), 1);
    assert_eq!(result.points[0].hyperparameters, grid.point(0));
}

#[test]
fn comparison_uses_shared_folds() {
    let ds: SurvivalDataset = linear_data(300, 0.3, 8);
    let report = compare_models(&ds, &small_hp(), 3, 9).unwrap();
    let names: Vec<&str> = report.models.iter().map(|m| m.model.as_str()).collect();
    assert_eq!(names, [RESSURV, NO_SHORTCUT, LINEAR_COX]);
    assert!(report.models.iter().all(|m| m.fold_c_index.len() == 3));
    let cv = cross_validate(&ds, &small_hp(), 3, 9).unwrap();
    assert_eq!(report.fold_hash, cv.fold_hash);
    let ressurv = report.model(RESSURV).unwrap();
    assert_eq!(ressurv.mean_c_index, cv.mean_c_index);
}
