use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

use super::{fit_structured_l2e, l2e_loss, FitResult, Init, Penalty, PenaltySpec, SolverOptions};

/// 20 log-spaced values from 10 down to 1e-4.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..20).map(|k| 10f64.powf(1.0 - 5.0 * k as f64 / 19.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub mean_score: f64,
    pub fold_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_lambda: f64,
    pub best_index: usize,
    pub table: Vec<CvRow>,
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::input("lambda grid is empty"));
    }
    if grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::input("lambda grid values must be positive and finite"));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::input("lambda grid must be strictly decreasing"));
    }
    Ok(())
}

/// Seeded random partition of `0..n` into `folds` held-out index sets, each sorted.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::input(format!("need at least 2 folds, got {folds}")));
    }
    if n < 2 * folds {
        return Err(Error::input(format!(
            "{n} observations give folds smaller than 2 with {folds}-fold cross-validation"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let mut out = vec![Vec::with_capacity(n / folds + 1); folds];
    for (pos, i) in idx.into_iter().enumerate() {
        out[pos % folds].push(i);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    Ok(out)
}

/// Fit along a decreasing grid, each fit warm-started from the previous one.
pub fn fit_path(data: &Dataset, penalty: &Penalty, grid: &[f64], opts: &SolverOptions) -> Result<Vec<FitResult>> {
    let mut out: Vec<FitResult> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut o = opts.clone();
        if let Some(prev) = out.last() {
            o.init = Init::Provided { beta: prev.beta.clone(), tau: prev.tau };
        }
        let spec = PenaltySpec { kind: penalty.clone(), lambda };
        out.push(fit_structured_l2e(data, &spec, &o)?);
    }
    Ok(out)
}

/// Generic k-fold driver: `score_path(train, test)` returns one held-out
/// score per grid value. Folds run in parallel; results do not depend on
/// the number of threads.
pub(crate) fn run_cv<F>(data: &Dataset, grid: &[f64], folds: usize, seed: u64, score_path: F) -> Result<CvResult>
where
    F: Fn(&Dataset, &Dataset) -> Result<Vec<f64>> + Sync,
{
    check_grid(grid)?;
    let assignment = fold_assignment(data.n(), folds, seed)?;
    let per_fold: Vec<Vec<f64>> = assignment
        .par_iter()
        .map(|held_out| {
            let mut mask = vec![false; data.n()];
            held_out.iter().for_each(|&i| mask[i] = true);
            let train_idx: Vec<usize> = (0..data.n()).filter(|&i| !mask[i]).collect();
            score_path(&data.select_rows(&train_idx), &data.select_rows(held_out))
        })
        .collect::<Result<_>>()?;

    let table: Vec<CvRow> = grid
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let fold_scores: Vec<f64> = per_fold.iter().map(|s| s[k]).collect();
            let mean_score = fold_scores.iter().sum::<f64>() / folds as f64;
            CvRow { lambda, mean_score, fold_scores }
        })
        .collect();
    // first minimum wins, i.e. ties go to the larger lambda
    let mut best_index = 0;
    for (k, row) in table.iter().enumerate() {
        let best = table[best_index].mean_score;
        if row.mean_score < best || (best.is_nan() && !row.mean_score.is_nan()) {
            best_index = k;
        }
    }
    Ok(CvResult { best_lambda: grid[best_index], best_index, table })
}

/// K-fold cross-validation of the penalized L2E fit. The validation score is
/// the held-out L2E loss at the training estimate `(beta, tau)`.
pub fn cross_validate(
    data: &Dataset,
    penalty: &Penalty,
    grid: &[f64],
    folds: usize,
    opts: &SolverOptions,
    seed: u64,
) -> Result<CvResult> {
    penalty.validate(data.p())?;
    run_cv(data, grid, folds, seed, |train, test| {
        fit_path(train, penalty, grid, opts)?
            .iter()
            .map(|f| l2e_loss(&f.beta, f.tau, test))
            .collect()
    })
}

/// Cross-validate, then refit on all of `data` along the grid up to the chosen lambda.
pub fn fit_cv(
    data: &Dataset,
    penalty: &Penalty,
    grid: &[f64],
    folds: usize,
    opts: &SolverOptions,
    seed: u64,
) -> Result<(FitResult, CvResult)> {
    let cv = cross_validate(data, penalty, grid, folds, opts, seed)?;
    let mut path = fit_path(data, penalty, &grid[..=cv.best_index], opts)?;
    let fit = path.pop().expect("non-empty path");
    Ok((fit, cv))
}
