//! The transfer pipeline: per-source detection and selection, co-learning on
//! the union of the target and the selected source rows, and an l1
//! de-biasing step on the target residuals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::l2e::{default_lambda_grid, fit_cv, CvResult, FitResult, Penalty, SolverOptions};
use crate::rng::derive_seed;
use crate::selection::{importance_weights_with, select_source, SelectionConfig, SelectionReport, WeightFactors};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    /// Penalty used for detection and co-learning. De-biasing is always lasso.
    pub penalty: Penalty,
    pub lambda_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub folds: usize,
    pub selection: SelectionConfig,
    pub solver: SolverOptions,
    pub seed: u64,
    /// Stable identifiers keying the per-source random streams. Defaults to
    /// the position in the source list.
    pub source_ids: Option<Vec<u64>>,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            penalty: Penalty::Lasso,
            lambda_grid: default_lambda_grid(),
            mu_grid: default_lambda_grid(),
            folds: 5,
            selection: SelectionConfig::default(),
            solver: SolverOptions::default(),
            seed: 0,
            source_ids: None,
        }
    }
}

impl TransferConfig {
    fn ids(&self, k: usize) -> Result<Vec<u64>> {
        match &self.source_ids {
            None => Ok((0..k as u64).collect()),
            Some(ids) if ids.len() != k => Err(Error::config(format!(
                "{} source identifiers for {} sources",
                ids.len(),
                k
            ))),
            Some(ids) => {
                let mut sorted = ids.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::config("source identifiers must be distinct"));
                }
                Ok(ids.clone())
            }
        }
    }

    fn seed_for(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }
}

/// Step-1 outcome for one source cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceOutcome {
    pub id: u64,
    /// Fit on the target stacked over this source.
    pub fit: FitResult,
    pub cv: CvResult,
    pub report: SelectionReport,
}

impl SourceOutcome {
    pub fn lambda(&self) -> f64 {
        self.fit.lambda_used
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Debiased {
    pub delta: Vec<f64>,
    pub beta_final: Vec<f64>,
    pub fit: FitResult,
    pub cv: CvResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    pub beta_colearn: Vec<f64>,
    pub delta: Vec<f64>,
    /// `beta_colearn[j] + delta[j]` for every `j`.
    pub beta_final: Vec<f64>,
    pub tau_colearn: f64,
    pub per_source: Vec<SourceOutcome>,
    pub lambda: f64,
    pub mu: f64,
    pub colearn: FitResult,
    pub colearn_cv: CvResult,
    pub debias_fit: FitResult,
    pub debias_cv: CvResult,
}

fn check_columns(target: &Dataset, other: &Dataset, what: &str) -> Result<()> {
    if !other.is_empty() && other.p() != target.p() {
        return Err(Error::input(format!(
            "{what} has {} columns but the target has {}",
            other.p(),
            target.p()
        )));
    }
    Ok(())
}

/// Fit the target stacked over one source, compute case weights for both
/// blocks of rows and keep source rows by pseudo-importance sampling.
///
/// `id` keys the random streams (cross-validation folds and uniforms).
pub fn detect_and_select(
    target: &Dataset,
    source: &Dataset,
    cfg: &TransferConfig,
    id: u64,
) -> Result<(SourceOutcome, Dataset)> {
    detect_and_select_with(target, source, cfg, id, WeightFactors::Full)
}

pub(crate) fn detect_and_select_with(
    target: &Dataset,
    source: &Dataset,
    cfg: &TransferConfig,
    id: u64,
    factors: WeightFactors,
) -> Result<(SourceOutcome, Dataset)> {
    check_columns(target, source, &format!("source {id}"))?;
    if source.is_empty() {
        return Err(Error::input(format!("source {id} has no rows")));
    }
    let merged = Dataset::stack(&[target, source])?;
    let (fit, cv) = fit_cv(
        &merged,
        &cfg.penalty,
        &cfg.lambda_grid,
        cfg.folds,
        &cfg.solver,
        cfg.seed_for(&format!("source/{id}/cv")),
    )?;
    let (w0, wk) = fit.weights.split_at(target.n());
    let iw = importance_weights_with(w0, wk, &cfg.selection, factors)?;
    let (report, selected) = select_source(source, &iw, cfg.seed_for(&format!("source/{id}/select")))?;
    Ok((SourceOutcome { id, fit, cv, report }, selected))
}

/// Penalized L2E on the target followed by the selected source rows, with
/// lambda chosen by cross-validation. Empty selections contribute no rows.
pub fn co_learn(target: &Dataset, selected: &[Dataset], cfg: &TransferConfig) -> Result<(FitResult, CvResult)> {
    for (k, s) in selected.iter().enumerate() {
        check_columns(target, s, &format!("selection {k}"))?;
    }
    let parts: Vec<&Dataset> = std::iter::once(target).chain(selected).collect();
    let union = Dataset::stack(&parts)?;
    fit_cv(
        &union,
        &cfg.penalty,
        &cfg.lambda_grid,
        cfg.folds,
        &cfg.solver,
        cfg.seed_for("colearn/cv"),
    )
}

/// Lasso L2E of `y - X beta_colearn` on the target design; the fitted
/// coefficients are the correction `delta`.
pub fn debias(target: &Dataset, beta_colearn: &[f64], cfg: &TransferConfig) -> Result<Debiased> {
    let r = target.residuals(beta_colearn)?;
    let shifted = target.with_response(r)?;
    let (fit, cv) = fit_cv(
        &shifted,
        &Penalty::Lasso,
        &cfg.mu_grid,
        cfg.folds,
        &cfg.solver,
        cfg.seed_for("debias/cv"),
    )?;
    let delta = fit.beta.clone();
    let beta_final = beta_colearn.iter().zip(&delta).map(|(b, d)| b + d).collect();
    Ok(Debiased { delta, beta_final, fit, cv })
}

/// Run the full pipeline on a target and any number of sources.
pub fn trans_l2e(target: &Dataset, sources: &[Dataset], cfg: &TransferConfig) -> Result<TransferResult> {
    trans_l2e_with(target, sources, cfg, WeightFactors::Full)
}

pub(crate) fn trans_l2e_with(
    target: &Dataset,
    sources: &[Dataset],
    cfg: &TransferConfig,
    factors: WeightFactors,
) -> Result<TransferResult> {
    let ids = cfg.ids(sources.len())?;
    let step1: Vec<(SourceOutcome, Dataset)> = sources
        .par_iter()
        .zip(ids.par_iter())
        .map(|(s, &id)| detect_and_select_with(target, s, cfg, id, factors))
        .collect::<Result<_>>()?;
    let (per_source, selected): (Vec<SourceOutcome>, Vec<Dataset>) = step1.into_iter().unzip();

    let (colearn, colearn_cv) = co_learn(target, &selected, cfg)?;
    let d = debias(target, &colearn.beta, cfg)?;
    Ok(TransferResult {
        beta_colearn: colearn.beta.clone(),
        delta: d.delta,
        beta_final: d.beta_final,
        tau_colearn: colearn.tau,
        per_source,
        lambda: colearn.lambda_used,
        mu: d.fit.lambda_used,
        colearn,
        colearn_cv,
        debias_fit: d.fit,
        debias_cv: d.cv,
    })
}

/// Cross-validated L2E on the target alone. Uses the same random stream as
/// co-learning, so it coincides with [`co_learn`] on empty selections.
pub fn target_l2e(target: &Dataset, cfg: &TransferConfig) -> Result<(FitResult, CvResult)> {
    co_learn(target, &[], cfg)
}

/// Cross-validated L2E on the target and every source row.
pub fn pooled_l2e(target: &Dataset, sources: &[Dataset], cfg: &TransferConfig) -> Result<(FitResult, CvResult)> {
    co_learn(target, sources, cfg)
}
