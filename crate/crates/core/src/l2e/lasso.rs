//! Ordinary least-squares lasso, used as the non-robust baseline and for
//! comparison in tests.

use crate::data::Dataset;
use crate::error::Result;

use super::cd::{self, CdProblem};
use super::cv::{check_grid, run_cv, CvResult};
use super::{Penalty, PenaltySpec};

const MAX_SWEEPS: usize = 1000;
const TOL: f64 = 1e-7;

/// Minimize `(1 / 2n) ||y - X beta||^2 + lambda * P(beta)`.
pub fn fit_lasso(data: &Dataset, penalty: &PenaltySpec, warm: Option<&[f64]>) -> Result<Vec<f64>> {
    penalty.validate(data.p())?;
    let mut beta = match warm {
        Some(b) => {
            data.check_beta(b)?;
            b.to_vec()
        }
        None => vec![0.0; data.p()],
    };
    let mut r = data.residuals(&beta)?;
    let w = vec![1.0; data.n()];
    let blocks = penalty.kind.blocks(data.p());
    let threshold = match penalty.kind {
        Penalty::None => 0.0,
        _ => data.n() as f64 * penalty.lambda,
    };
    let problem = CdProblem { data, weights: &w, blocks: &blocks, threshold };
    cd::solve(&problem, &mut beta, &mut r, MAX_SWEEPS, TOL);
    Ok(beta)
}

pub fn lasso_path(data: &Dataset, penalty: &Penalty, grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let spec = PenaltySpec { kind: penalty.clone(), lambda };
        let beta = fit_lasso(data, &spec, out.last().map(Vec::as_slice))?;
        out.push(beta);
    }
    Ok(out)
}

/// Cross-validated lasso with held-out mean squared error as the score.
pub fn lasso_cv(data: &Dataset, penalty: &Penalty, grid: &[f64], folds: usize, seed: u64) -> Result<(Vec<f64>, CvResult)> {
    check_grid(grid)?;
    penalty.validate(data.p())?;
    let cv = run_cv(data, grid, folds, seed, |train, test| {
        lasso_path(train, penalty, grid)?
            .iter()
            .map(|b| {
                let r = test.residuals(b)?;
                Ok(r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64)
            })
            .collect()
    })?;
    let mut path = lasso_path(data, penalty, &grid[..=cv.best_index])?;
    Ok((path.pop().expect("non-empty path"), cv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_design_gives_soft_threshold() {
        // columns e1, e2 scaled so X'X / n = I
        let n = 4.0f64;
        let s = n.sqrt();
        let rows = vec![vec![s, 0.0], vec![0.0, s], vec![0.0, 0.0], vec![0.0, 0.0]];
        let y = vec![3.0 * s, 0.2 * s, 0.0, 0.0];
        let d = Dataset::from_rows(&rows, y).unwrap();
        // X'y / n = (3, 0.2); lasso solution = soft(., 0.5)
        let b = fit_lasso(&d, &PenaltySpec::lasso(0.5), None).unwrap();
        assert!((b[0] - 2.5).abs() < 1e-9);
        assert_eq!(b[1], 0.0);
    }
}
