//! Penalized L2E regression.
//!
//! For the Gaussian linear model with residuals `r = y - X beta` and
//! precision `tau`, the L2E loss is
//!
//! ```text
//! h(beta, tau) = tau / (2 sqrt(pi)) - (tau / n) sqrt(2 / pi) * sum_i exp(-tau^2 r_i^2 / 2)
//! ```
//!
//! and a structured fit minimizes `h(beta, tau) + lambda * P(beta)`. The
//! solver alternates case weights, a penalized weighted least-squares step
//! for `beta` and a one-dimensional search for `tau`.

mod cd;
mod cv;
pub mod lasso;
mod loss;
mod prox;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cv::{cross_validate, default_lambda_grid, fit_cv, fit_path, fold_assignment, CvResult, CvRow};
pub use loss::{case_weights, l2e_gradient, l2e_loss};
pub use prox::{prox_group_lasso, prox_lasso};
pub use solver::{fit_structured_l2e, penalty_scale};

pub(crate) use loss::{loss_from_residuals, weights_from_residuals};

/// A partition of the coefficient indices `0..p` into disjoint blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Groups(Vec<Vec<usize>>);

impl Groups {
    /// Every block must be non-empty and no index may repeat. Coverage of
    /// `0..p` is checked against a concrete dimension by [`Groups::check_covers`].
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::input("group partition has no blocks"));
        }
        if blocks.iter().any(Vec::is_empty) {
            return Err(Error::input("group partition contains an empty block"));
        }
        let total: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; blocks.iter().flatten().max().map_or(0, |m| m + 1)];
        for &j in blocks.iter().flatten() {
            if seen[j] {
                return Err(Error::input(format!("index {j} appears in more than one group")));
            }
            seen[j] = true;
        }
        debug_assert_eq!(total, seen.iter().filter(|s| **s).count());
        Ok(Groups(blocks))
    }

    /// Build from a per-coefficient group label (`labels[j]` is the group of `j`).
    pub fn from_assignment(labels: &[usize]) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); k];
        for (j, &g) in labels.iter().enumerate() {
            blocks[g].push(j);
        }
        Groups::new(blocks.into_iter().filter(|b| !b.is_empty()).collect())
    }

    pub fn singletons(p: usize) -> Self {
        Groups((0..p).map(|j| vec![j]).collect())
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.0
    }

    pub fn check_covers(&self, p: usize) -> Result<()> {
        let mut seen = vec![false; p];
        for &j in self.0.iter().flatten() {
            if j >= p {
                return Err(Error::input(format!("group index {j} out of range for p = {p}")));
            }
            seen[j] = true;
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::input(format!("index {j} is not covered by any group")));
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<usize>>> for Groups {
    type Error = Error;
    fn try_from(v: Vec<Vec<usize>>) -> Result<Self> {
        Groups::new(v)
    }
}

impl From<Groups> for Vec<Vec<usize>> {
    fn from(g: Groups) -> Self {
        g.0
    }
}

/// Penalty family. Group lasso carries its partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    None,
    Lasso,
    GroupLasso(Groups),
}

impl Penalty {
    /// Value of the unscaled penalty `P(beta)`.
    pub fn value(&self, beta: &[f64]) -> f64 {
        match self {
            Penalty::None => 0.0,
            Penalty::Lasso => beta.iter().map(|b| b.abs()).sum(),
            Penalty::GroupLasso(g) => g
                .blocks()
                .iter()
                .map(|blk| blk.iter().map(|&j| beta[j] * beta[j]).sum::<f64>().sqrt())
                .sum(),
        }
    }

    pub(crate) fn blocks(&self, p: usize) -> Vec<Vec<usize>> {
        match self {
            Penalty::GroupLasso(g) => g.blocks().to_vec(),
            _ => Groups::singletons(p).0,
        }
    }

    pub(crate) fn validate(&self, p: usize) -> Result<()> {
        if let Penalty::GroupLasso(g) = self {
            g.check_covers(p)?;
        }
        Ok(())
    }
}

/// Penalty family plus its strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: Penalty,
    pub lambda: f64,
}

impl PenaltySpec {
    pub fn none() -> Self {
        PenaltySpec { kind: Penalty::None, lambda: 0.0 }
    }

    pub fn lasso(lambda: f64) -> Self {
        PenaltySpec { kind: Penalty::Lasso, lambda }
    }

    pub fn group_lasso(lambda: f64, groups: Groups) -> Self {
        PenaltySpec { kind: Penalty::GroupLasso(groups), lambda }
    }

    /// Nonzero strength and a penalty family other than `None`.
    pub fn is_active(&self) -> bool {
        self.lambda > 0.0 && !matches!(self.kind, Penalty::None)
    }

    pub fn value(&self, beta: &[f64]) -> f64 {
        if self.lambda == 0.0 {
            0.0
        } else {
            self.lambda * self.kind.value(beta)
        }
    }

    pub(crate) fn validate(&self, p: usize) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        self.kind.validate(p)
    }
}

/// Starting point for the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Least-squares fit with the same penalty and lambda, then a MAD-based precision.
    LassoWarm,
    Zeros,
    Provided { beta: Vec<f64>, tau: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_outer_iter: usize,
    pub rel_tol: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub inner_cd_iter: usize,
    pub init: Init,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_outer_iter: 100,
            rel_tol: 1e-6,
            tau_min: 1e-4,
            tau_max: 1e4,
            inner_cd_iter: 50,
            init: Init::LassoWarm,
        }
    }
}

impl SolverOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tau_min > 0.0 && self.tau_min < self.tau_max && self.tau_max.is_finite()) {
            return Err(Error::domain(format!(
                "need 0 < tau_min < tau_max, got [{}, {}]",
                self.tau_min, self.tau_max
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::domain("rel_tol must be positive"));
        }
        if self.max_outer_iter == 0 || self.inner_cd_iter == 0 {
            return Err(Error::domain("iteration limits must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of one penalized L2E fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub tau: f64,
    /// Converged case weights `exp(-tau^2 r_i^2 / 2)`.
    pub weights: Vec<f64>,
    /// Penalized objective at the start and after every outer iteration of
    /// the final anchored problem.
    pub objective_trace: Vec<f64>,
    pub lambda_used: f64,
    /// Multiplier of `lambda * P(beta)` in the fitted objective, see
    /// [`fit_structured_l2e`].
    pub penalty_scale: f64,
    pub converged: bool,
    pub iterations: usize,
    /// The precision ended on a box boundary.
    pub tau_at_bound: bool,
}
