use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::quantile_sorted;
use crate::error::{Error, Result};
use crate::l2e::lasso::lasso_cv;
use crate::rng::derive_seed;
use crate::selection::WeightFactors;
use crate::transfer::{pooled_l2e, target_l2e, trans_l2e_with, TransferConfig};

use super::{evaluate, simulate, PerSource, SimConfig};

/// Which generator knob an experiment varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Source contamination proportion `rk`.
    OutlierProp,
    /// Model shift level `sigma_shift`.
    ModelShift,
    /// Precision ratio `nu`.
    PrecisionShift,
    /// Number of covariates `p`.
    Dimension,
    /// Number of sources `k`.
    SourceCount,
    /// Model shift with one large source and a clean target, comparing
    /// variants of the importance weight.
    SelectionAblation,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::OutlierProp,
        ExperimentKind::ModelShift,
        ExperimentKind::PrecisionShift,
        ExperimentKind::Dimension,
        ExperimentKind::SourceCount,
        ExperimentKind::SelectionAblation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::OutlierProp => "outlier_prop",
            ExperimentKind::ModelShift => "model_shift",
            ExperimentKind::PrecisionShift => "precision_shift",
            ExperimentKind::Dimension => "dimension",
            ExperimentKind::SourceCount => "source_count",
            ExperimentKind::SelectionAblation => "selection_ablation",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Name of the varied parameter, for axis labels.
    pub fn variable(self) -> &'static str {
        match self {
            ExperimentKind::OutlierProp => "rk",
            ExperimentKind::ModelShift | ExperimentKind::SelectionAblation => "sigma",
            ExperimentKind::PrecisionShift => "nu",
            ExperimentKind::Dimension => "p",
            ExperimentKind::SourceCount => "K",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            ExperimentKind::OutlierProp => vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            ExperimentKind::ModelShift | ExperimentKind::SelectionAblation => {
                vec![0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0]
            }
            ExperimentKind::PrecisionShift => vec![0.2, 0.5, 1.0, 2.0, 4.0],
            ExperimentKind::Dimension => vec![50.0, 250.0, 500.0],
            ExperimentKind::SourceCount => vec![1.0, 3.0, 5.0, 7.0, 9.0],
        }
    }

    /// Generator settings shared by every grid point of the experiment.
    pub fn preset(self) -> SimConfig {
        match self {
            ExperimentKind::SelectionAblation => SimConfig { k: 1, nk: 1200, r0: 0.0, ..SimConfig::default() },
            _ => SimConfig::default(),
        }
    }

    pub fn default_methods(self) -> Vec<Method> {
        match self {
            ExperimentKind::SelectionAblation => vec![Method::TargetL2e, Method::TransL2e],
            _ => vec![Method::TargetLasso, Method::TargetL2e, Method::PooledL2e, Method::TransL2e],
        }
    }

    pub fn default_variants(self) -> Vec<AblationVariant> {
        match self {
            ExperimentKind::SelectionAblation => vec![
                AblationVariant::Full,
                AblationVariant::NoWeight,
                AblationVariant::NoRatio,
                AblationVariant::NoHellinger,
            ],
            _ => vec![AblationVariant::Full],
        }
    }

    /// `base` with the varied parameter set to `value`.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut cfg = base.clone();
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::config(format!("{} grid value {v} is not a positive integer", self.name())))
            }
        };
        match self {
            ExperimentKind::OutlierProp => cfg.rk = value,
            ExperimentKind::ModelShift | ExperimentKind::SelectionAblation => cfg.sigma_shift = PerSource::Shared(value),
            ExperimentKind::PrecisionShift => cfg.nu = PerSource::Shared(value),
            ExperimentKind::Dimension => cfg.p = count(value)?,
            ExperimentKind::SourceCount => cfg.k = count(value)?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Least-squares lasso on the target.
    TargetLasso,
    /// L2E on the target.
    TargetL2e,
    /// L2E on the target and every source row.
    PooledL2e,
    /// The transfer pipeline.
    TransL2e,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TargetLasso => "target_lasso",
            Method::TargetL2e => "target_l2e",
            Method::PooledL2e => "pooled_l2e",
            Method::TransL2e => "trans_l2e",
        }
    }
}

/// Importance-weight construction used by the transfer method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    /// Drop the case-weight factor.
    NoWeight,
    /// Drop the density ratio.
    NoRatio,
    /// Drop the Hellinger modulation.
    NoHellinger,
}

impl AblationVariant {
    fn factors(self) -> WeightFactors {
        match self {
            AblationVariant::Full => WeightFactors::Full,
            AblationVariant::NoWeight => WeightFactors::NoBaseline,
            AblationVariant::NoRatio => WeightFactors::NoRatio,
            AblationVariant::NoHellinger => WeightFactors::NoHellinger,
        }
    }

    /// Method label in result tables.
    pub fn label(self) -> String {
        match self {
            AblationVariant::Full => Method::TransL2e.name().to_string(),
            AblationVariant::NoWeight => "trans_l2e/no_weight".into(),
            AblationVariant::NoRatio => "trans_l2e/no_ratio".into(),
            AblationVariant::NoHellinger => "trans_l2e/no_hellinger".into(),
        }
    }
}

fn default_replicates() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Values of the varied parameter; the experiment's standard grid when absent.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    /// Weight constructions run for the transfer method.
    #[serde(default)]
    pub ablation_variants: Option<Vec<AblationVariant>>,
    /// Record wall-clock time per fit. Timings make the table non-reproducible.
    #[serde(default)]
    pub record_runtime: bool,
    /// Fitting options. The seed is replaced by one derived per replicate.
    #[serde(default)]
    pub transfer: TransferConfig,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            grid: None,
            replicates: default_replicates(),
            methods: None,
            ablation_variants: None,
            record_runtime: false,
            transfer: TransferConfig::default(),
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        self.grid.clone().unwrap_or_else(|| self.experiment.default_grid())
    }

    pub fn methods(&self) -> Vec<Method> {
        self.methods.clone().unwrap_or_else(|| self.experiment.default_methods())
    }

    pub fn variants(&self) -> Vec<AblationVariant> {
        self.ablation_variants.clone().unwrap_or_else(|| self.experiment.default_variants())
    }
}

/// One (grid value, replicate, method) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub grid_value: f64,
    pub replicate: usize,
    pub method: String,
    pub rel_err: f64,
    pub f1: f64,
    /// Mean kept proportion over sources, for the transfer method.
    pub kept_proportion: Option<f64>,
    pub runtime_ms: Option<f64>,
}

/// Quartiles of the metrics for one (grid value, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub grid_value: f64,
    pub method: String,
    pub replicates: usize,
    pub rel_err_median: f64,
    pub rel_err_q25: f64,
    pub rel_err_q75: f64,
    pub f1_median: f64,
    pub f1_q25: f64,
    pub f1_q75: f64,
    pub kept_proportion_median: Option<f64>,
}

/// Run every (grid value, replicate, method) combination.
///
/// Each replicate draws its data and its fitting streams from `seed` and
/// the replicate index only, so all methods, and all grid values that share
/// a dimension, see common random numbers. Rows come back in grid, then
/// replicate, then method order regardless of thread count.
pub fn run_experiment(ecfg: &ExperimentConfig, base: &SimConfig, seed: u64) -> Result<Vec<ResultRow>> {
    let kind = ecfg.experiment;
    let grid = ecfg.grid();
    let methods = ecfg.methods();
    let variants = ecfg.variants();
    if grid.is_empty() || methods.is_empty() || ecfg.replicates == 0 {
        return Err(Error::config("experiment needs a grid, at least one method and one replicate"));
    }
    if methods.contains(&Method::TransL2e) && variants.is_empty() {
        return Err(Error::config("the transfer method needs at least one weight variant"));
    }
    let configs: Vec<SimConfig> = grid.iter().map(|&v| kind.apply(base, v)).collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..ecfg.replicates).map(move |r| (g, r)))
        .collect();
    let rows: Vec<Vec<ResultRow>> = cells
        .par_iter()
        .map(|&(g, rep)| run_cell(ecfg, kind, grid[g], &configs[g], rep, seed, &methods, &variants))
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    ecfg: &ExperimentConfig,
    kind: ExperimentKind,
    grid_value: f64,
    sim: &SimConfig,
    rep: usize,
    seed: u64,
    methods: &[Method],
    variants: &[AblationVariant],
) -> Result<Vec<ResultRow>> {
    let data = simulate(sim, derive_seed(seed, &format!("data/{}/{rep}", kind.name())))?;
    let tcfg = TransferConfig {
        seed: derive_seed(seed, &format!("fit/{}/{rep}", kind.name())),
        source_ids: None,
        ..ecfg.transfer.clone()
    };
    let row = |method: String, beta: &[f64], kept: Option<f64>, ms: f64| -> Result<ResultRow> {
        let m = evaluate(beta, &data.beta_target)?;
        Ok(ResultRow {
            experiment: kind.name().to_string(),
            grid_value,
            replicate: rep,
            method,
            rel_err: m.rel_err,
            f1: m.f1,
            kept_proportion: kept,
            runtime_ms: ecfg.record_runtime.then_some(ms),
        })
    };
    let timed = |f: &dyn Fn() -> Result<(Vec<f64>, Option<f64>)>| -> Result<(Vec<f64>, Option<f64>, f64)> {
        let start = Instant::now();
        let (beta, kept) = f()?;
        Ok((beta, kept, start.elapsed().as_secs_f64() * 1e3))
    };

    let mut out = Vec::new();
    for &method in methods {
        match method {
            Method::TargetLasso => {
                let (beta, _, ms) = timed(&|| {
                    let seed = derive_seed(tcfg.seed, "colearn/cv");
                    let (b, _) = lasso_cv(&data.target, &tcfg.penalty, &tcfg.lambda_grid, tcfg.folds, seed)?;
                    Ok((b, None))
                })?;
                out.push(row(method.name().into(), &beta, None, ms)?);
            }
            Method::TargetL2e => {
                let (beta, _, ms) = timed(&|| Ok((target_l2e(&data.target, &tcfg)?.0.beta, None)))?;
                out.push(row(method.name().into(), &beta, None, ms)?);
            }
            Method::PooledL2e => {
                let (beta, _, ms) = timed(&|| Ok((pooled_l2e(&data.target, &data.sources, &tcfg)?.0.beta, None)))?;
                out.push(row(method.name().into(), &beta, None, ms)?);
            }
            Method::TransL2e => {
                for &v in variants {
                    let (beta, kept, ms) = timed(&|| {
                        let res = trans_l2e_with(&data.target, &data.sources, &tcfg, v.factors())?;
                        let k = res.per_source.len();
                        let kept = (k > 0)
                            .then(|| res.per_source.iter().map(|s| s.report.kept_proportion).sum::<f64>() / k as f64);
                        Ok((res.beta_final, kept))
                    })?;
                    out.push(row(v.label(), &beta, kept, ms)?);
                }
            }
        }
    }
    Ok(out)
}

fn quartiles(mut v: Vec<f64>) -> (f64, f64, f64) {
    v.sort_by(f64::total_cmp);
    (quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75))
}

/// Median and quartiles per (experiment, grid value, method), in first-seen order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, u64, String)> = Vec::new();
    for r in rows {
        let key = (r.experiment.clone(), r.grid_value.to_bits(), r.method.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(experiment, bits, method)| {
            let cell: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.experiment == experiment && r.grid_value.to_bits() == bits && r.method == method)
                .collect();
            let (e25, e50, e75) = quartiles(cell.iter().map(|r| r.rel_err).collect());
            let (f25, f50, f75) = quartiles(cell.iter().map(|r| r.f1).collect());
            let kept: Vec<f64> = cell.iter().filter_map(|r| r.kept_proportion).collect();
            SummaryRow {
                experiment,
                grid_value: f64::from_bits(bits),
                method,
                replicates: cell.len(),
                rel_err_median: e50,
                rel_err_q25: e25,
                rel_err_q75: e75,
                f1_median: f50,
                f1_q25: f25,
                f1_q75: f75,
                kept_proportion_median: (!kept.is_empty()).then(|| quartiles(kept).1),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_and_presets() {
        assert_eq!(ExperimentKind::ModelShift.default_grid().len(), 7);
        assert_eq!(ExperimentKind::SelectionAblation.preset().nk, 1200);
        assert_eq!(ExperimentKind::parse("source_count"), Some(ExperimentKind::SourceCount));
        assert!(ExperimentKind::SourceCount.apply(&SimConfig::default(), 2.5).is_err());
        let c = ExperimentKind::Dimension.apply(&SimConfig::default(), 50.0).unwrap();
        assert_eq!(c.p, 50);
    }

    #[test]
    fn summary_quartiles() {
        let rows: Vec<ResultRow> = (0..5)
            .map(|i| ResultRow {
                experiment: "e".into(),
                grid_value: 1.0,
                replicate: i,
                method: "m".into(),
                rel_err: i as f64,
                f1: 1.0,
                kept_proportion: None,
                runtime_ms: None,
            })
            .collect();
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].rel_err_q25, s[0].rel_err_median, s[0].rel_err_q75), (1.0, 2.0, 3.0));
        assert_eq!(s[0].kept_proportion_median, None);
    }
}
