use rayon::prelude::*;
use serde::Serialize;

use super::cv::{cross_validate, CvReport};
use super::hyper::{GridSpec, Hyperparameters};
use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPointResult {
    /// Position in grid enumeration order.
    pub index: usize,
    pub hyperparameters: Hyperparameters,
    pub mean_c_index: Option<f64>,
    pub std_c_index: Option<f64>,
    pub cv: Option<CvReport>,
    /// Set when training diverged (non-finite loss) in some fold.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSearchResult {
    pub points: Vec<GridPointResult>,
    /// Index into `points` of the highest mean CV C-index; ties go to the
    /// earlier point. `None` if every point failed.
    pub best: Option<usize>,
    pub total_runs: usize,
}

impl GridSearchResult {
    pub fn best_point(&self) -> Option<&GridPointResult> {
        self.best.map(|b| &self.points[b])
    }
}

/// First strictly greater value wins, so ties resolve to the lowest index.
pub(crate) fn argmax_first(values: impl IntoIterator<Item = Option<f64>>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Cross-validate the first `budget` grid points. Points run in parallel on
/// the ambient rayon pool; the result does not depend on scheduling. A point
/// whose training diverges is recorded as failed; any other error aborts the
/// search.
pub fn grid_search(
    ds: &SurvivalDataset,
    grid: &GridSpec,
    k: usize,
    seed: u64,
    budget: usize,
) -> Result<GridSearchResult> {
    grid.validate()?;
    if budget == 0 {
        return Err(Error::Config(
            "grid-search budget must be at least 1".into(),
        ));
    }
    let points = grid.points(budget);
    let results: Vec<Result<GridPointResult>> = points
        .into_par_iter()
        .enumerate()
        .map(|(index, hp)| match cross_validate(ds, &hp, k, seed) {
            Ok(cv) => Ok(GridPointResult {
                index,
                mean_c_index: Some(cv.mean_c_index),
                std_c_index: Some(cv.std_c_index),
                cv: Some(cv),
                failure: None,
                hyperparameters: hp,
            }),
            Err(e) if e.is_divergence() => Ok(GridPointResult {
                index,
                hyperparameters: hp,
                mean_c_index: None,
                std_c_index: None,
                cv: None,
                failure: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        })
        .collect();
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    let best = argmax_first(points.iter().map(|p| p.mean_c_index));
    Ok(GridSearchResult {
        total_runs: points.len(),
        points,
        best,
    })
}
