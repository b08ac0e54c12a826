//! Pseudo-importance weighting and accept/reject selection of source rows.
//!
//! For source case `j` with converged weight `w_j`,
//!
//! ```text
//! p_j = w_j * f0(w_j) / (fk(w_j) + eps) * exp(-sqrt(h_k))
//! ```
//!
//! where `f0` and `fk` are kernel density estimates of the target and source
//! case weights and `h_k` is their Hellinger distance. Row `j` is kept when
//! a uniform draw `u_j` falls below `p_j`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::density::{hellinger, kde_fit, HellingerResult};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Guard added to the source density in the ratio.
    pub epsilon: f64,
    /// Clip each `p_j` to `[0, 1]`.
    pub clip_p: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { epsilon: 1e-8, clip_p: true }
    }
}

/// Which factors of the importance weight are used. Only the full product
/// is public; the others exist for the ablation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum WeightFactors {
    Full,
    NoBaseline,
    NoRatio,
    NoHellinger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceWeights {
    /// Acceptance probabilities (clipped when configured).
    pub p: Vec<f64>,
    /// Values before clipping.
    pub p_raw: Vec<f64>,
    pub hellinger: HellingerResult,
}

impl ImportanceWeights {
    /// Wrap externally supplied acceptance probabilities.
    pub fn from_probabilities(p: Vec<f64>) -> Self {
        ImportanceWeights {
            p_raw: p.clone(),
            p,
            hellinger: HellingerResult { distance: 0.0, grid_points: 0, grid_bounds: (0.0, 0.0) },
        }
    }
}

fn check_weights(name: &str, w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::input(format!("{name} weight vector is empty")));
    }
    if let Some(i) = w.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::input(format!("{name} weight {i} = {} lies outside [0, 1]", w[i])));
    }
    Ok(())
}

/// Pseudo-importance weights of the source cases.
pub fn importance_weights(w_target: &[f64], w_source: &[f64], cfg: &SelectionConfig) -> Result<ImportanceWeights> {
    importance_weights_with(w_target, w_source, cfg, WeightFactors::Full)
}

pub(crate) fn importance_weights_with(
    w_target: &[f64],
    w_source: &[f64],
    cfg: &SelectionConfig,
    factors: WeightFactors,
) -> Result<ImportanceWeights> {
    check_weights("target", w_target)?;
    check_weights("source", w_source)?;
    if !(cfg.epsilon > 0.0) {
        return Err(Error::domain("epsilon must be positive"));
    }
    let f0 = kde_fit(w_target)?;
    let fk = kde_fit(w_source)?;
    let h = hellinger(&f0, &fk);
    let modulation = match factors {
        WeightFactors::NoHellinger => 1.0,
        _ => (-h.distance.sqrt()).exp(),
    };
    let p_raw: Vec<f64> = w_source
        .iter()
        .map(|&w| {
            let ratio = match factors {
                WeightFactors::NoRatio => 1.0,
                _ => f0.eval(w) / (fk.eval(w) + cfg.epsilon),
            };
            let base = match factors {
                WeightFactors::NoBaseline => 1.0,
                _ => w,
            };
            base * ratio * modulation
        })
        .collect();
    let p = if cfg.clip_p {
        p_raw.iter().map(|v| v.clamp(0.0, 1.0)).collect()
    } else {
        p_raw.clone()
    };
    Ok(ImportanceWeights { p, p_raw, hellinger: h })
}

/// Accept/reject outcome for one source cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub p: Vec<f64>,
    pub p_raw: Vec<f64>,
    pub kept: Vec<bool>,
    pub hellinger: f64,
    pub kept_count: usize,
    pub kept_proportion: f64,
    pub uniforms: Vec<f64>,
    pub kept_labels: Vec<String>,
}

/// Draw `u_j ~ U[0, 1)` in row order from `seed` and keep row `j` iff `u_j < p_j`.
///
/// The subsample preserves row order and labels. An empty subsample is a
/// valid outcome: the cohort is deemed non-transferable.
pub fn select_source(source: &Dataset, weights: &ImportanceWeights, seed: u64) -> Result<(SelectionReport, Dataset)> {
    let p = &weights.p;
    if p.len() != source.n() {
        return Err(Error::input(format!(
            "{} acceptance probabilities for {} source rows",
            p.len(),
            source.n()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let uniforms: Vec<f64> = (0..p.len()).map(|_| rng.random::<f64>()).collect();
    let kept: Vec<bool> = uniforms.iter().zip(p).map(|(u, pj)| u < pj).collect();
    let rows: Vec<usize> = kept.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i).collect();
    let subsample = source.select_rows(&rows);
    let kept_labels = rows.iter().map(|&i| source.label(i).into_owned()).collect();
    let kept_count = rows.len();
    let report = SelectionReport {
        p: p.clone(),
        p_raw: weights.p_raw.clone(),
        kept,
        hellinger: weights.hellinger.distance,
        kept_count,
        kept_proportion: kept_count as f64 / source.n().max(1) as f64,
        uniforms,
        kept_labels,
    };
    Ok((report, subsample))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, 1.0]).collect();
        Dataset::from_rows(&rows, (0..n).map(|i| i as f64 * 0.5).collect()).unwrap()
    }

    #[test]
    fn identical_weights_reproduce_baseline() {
        let w: Vec<f64> = (0..300).map(|i| 0.05 + 0.9 * ((i as f64) * 0.377).sin().abs()).collect();
        let iw = importance_weights(&w, &w, &SelectionConfig::default()).unwrap();
        assert!(iw.hellinger.distance < 1e-6);
        for (p, wj) in iw.p.iter().zip(&w) {
            assert!((p - wj).abs() < 1e-4, "{p} vs {wj}");
        }
    }

    #[test]
    fn zero_baseline_weight_gives_zero() {
        let wt = vec![0.5, 0.6, 0.7];
        let ws = vec![0.0, 0.6, 0.9];
        let iw = importance_weights(&wt, &ws, &SelectionConfig::default()).unwrap();
        assert_eq!(iw.p[0], 0.0);
    }

    #[test]
    fn separated_distributions_apply_full_modulation() {
        let wt = vec![0.001; 50];
        let ws = vec![0.999; 50];
        let cfg = SelectionConfig::default();
        let iw = importance_weights_with(&wt, &ws, &cfg, WeightFactors::NoRatio).unwrap();
        assert!(iw.hellinger.distance > 0.999);
        let m = iw.p_raw[0] / ws[0];
        assert!((m - (-1f64).exp()).abs() < 1e-3, "{m}");
    }

    #[test]
    fn rejects_bad_weights() {
        let cfg = SelectionConfig::default();
        assert!(importance_weights(&[], &[0.5], &cfg).is_err());
        assert!(importance_weights(&[0.5], &[1.5], &cfg).is_err());
        assert!(importance_weights(&[-0.1], &[0.5], &cfg).is_err());
        assert!(importance_weights(&[f64::NAN], &[0.5], &cfg).is_err());
    }

    #[test]
    fn certain_rejection_and_acceptance() {
        let d = source(50);
        let (r, s) = select_source(&d, &ImportanceWeights::from_probabilities(vec![0.0; 50]), 3).unwrap();
        assert!(s.is_empty());
        assert_eq!(r.kept_proportion, 0.0);
        let (r, s) = select_source(&d, &ImportanceWeights::from_probabilities(vec![1.0; 50]), 3).unwrap();
        assert_eq!(s.n(), 50);
        assert_eq!(r.kept_count, 50);
        assert_eq!(s.y(), d.y());
    }

    #[test]
    fn length_mismatch() {
        let d = source(5);
        assert!(select_source(&d, &ImportanceWeights::from_probabilities(vec![0.5; 4]), 0).is_err());
    }

    #[test]
    fn half_probability_concentrates() {
        let n = 100_000;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let d = Dataset::from_rows(&rows, vec![0.0; n]).unwrap();
        let (r, _) = select_source(&d, &ImportanceWeights::from_probabilities(vec![0.5; n]), 11).unwrap();
        assert!((0.494..=0.506).contains(&r.kept_proportion), "{}", r.kept_proportion);
    }
}
