//! Synthetic target and source cohorts, contamination, evaluation metrics and
//! the experiment runner.
//!
//! The target design is i.i.d. standard normal with a sparse truth of
//! `sparse_support` ones. Each source uses an AR(1) design
//! `Sigma_ij = ar_rho^|i-j|`, a truth perturbed by Gaussian noise of standard
//! deviation `sigma_shift` on its first `shift_support` coordinates, and
//! noise precision `nu * tau0`. Contamination lifts the leading responses of
//! a cohort by twice its largest clean response.

mod experiment;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

pub use experiment::{
    run_experiment, summarize, AblationVariant, ExperimentConfig, ExperimentKind, Method, ResultRow, SummaryRow,
};

/// A per-source parameter: one value shared by every source, or one value per source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSource {
    Shared(f64),
    Each(Vec<f64>),
}

impl PerSource {
    pub fn get(&self, k: usize) -> f64 {
        match self {
            PerSource::Shared(v) => *v,
            PerSource::Each(v) => v[k],
        }
    }

    fn check(&self, name: &str, sources: usize, ok: impl Fn(f64) -> bool) -> Result<()> {
        let values: &[f64] = match self {
            PerSource::Shared(v) => std::slice::from_ref(v),
            PerSource::Each(v) => {
                if v.len() != sources {
                    return Err(Error::config(format!("{name} lists {} values for {sources} sources", v.len())));
                }
                v
            }
        };
        if let Some(bad) = values.iter().find(|v| !ok(**v)) {
            return Err(Error::config(format!("invalid {name} value {bad}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n0: usize,
    pub nk: usize,
    pub p: usize,
    /// Number of sources.
    pub k: usize,
    /// Model shift level per source.
    pub sigma_shift: PerSource,
    pub tau0: f64,
    /// Source-to-target precision ratio per source.
    pub nu: PerSource,
    pub r0: f64,
    pub rk: f64,
    pub shift_support: usize,
    pub sparse_support: usize,
    pub ar_rho: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n0: 200,
            nk: 400,
            p: 100,
            k: 5,
            sigma_shift: PerSource::Shared(0.2),
            tau0: 1.0,
            nu: PerSource::Shared(1.0),
            r0: 0.1,
            rk: 0.1,
            shift_support: 30,
            sparse_support: 10,
            ar_rho: 0.5,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.nk == 0 || self.p == 0 {
            return Err(Error::config("n0, nk and p must be positive"));
        }
        if self.sparse_support > self.p || self.shift_support > self.p {
            return Err(Error::config(format!(
                "supports ({}, {}) exceed p = {}",
                self.sparse_support, self.shift_support, self.p
            )));
        }
        for (name, r) in [("r0", self.r0), ("rk", self.rk)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::config(format!("{name} = {r} is not a proportion")));
            }
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(Error::config("tau0 must be positive"));
        }
        if !(self.ar_rho.abs() < 1.0) {
            return Err(Error::config("ar_rho must lie in (-1, 1)"));
        }
        self.sigma_shift.check("sigma_shift", self.k, |v| v >= 0.0 && v.is_finite())?;
        self.nu.check("nu", self.k, |v| v > 0.0 && v.is_finite())
    }

    /// Sparse truth: `sparse_support` ones followed by zeros.
    pub fn beta_true(&self) -> Vec<f64> {
        (0..self.p).map(|j| if j < self.sparse_support { 1.0 } else { 0.0 }).collect()
    }
}

/// One simulated problem: the target, its truth, and every source with its truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub target: Dataset,
    pub beta_target: Vec<f64>,
    pub sources: Vec<Dataset>,
    pub beta_sources: Vec<Vec<f64>>,
}

fn normals(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Rows are drawn one after another, each as a vector of `p` draws.
fn design(rng: &mut Rng, n: usize, p: usize, chol: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let z = DVector::from_vec(normals(rng, p));
        let row = match chol {
            Some(l) => l * z,
            None => z,
        };
        for j in 0..p {
            x[(i, j)] = row[j];
        }
    }
    x
}

fn respond(rng: &mut Rng, x: &DMatrix<f64>, beta: &[f64], tau: f64) -> Vec<f64> {
    let mean = x * DVector::from_column_slice(beta);
    mean.iter()
        .map(|m| {
            let e: f64 = StandardNormal.sample(rng);
            m + e / tau
        })
        .collect()
}

/// Target cohort and its truth.
pub fn gen_target(cfg: &SimConfig, seed: u64) -> Result<(Dataset, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let beta = cfg.beta_true();
    let x = design(&mut rng, cfg.n0, cfg.p, None);
    let y = respond(&mut rng, &x, &beta, cfg.tau0);
    let y = contaminate(&y, cfg.r0)?;
    Ok((Dataset::new(x, y)?, beta))
}

/// AR(1) correlation matrix `rho^|i-j|`.
pub fn ar1_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// Source cohort `k` and its truth, built on the target truth `beta_target`.
pub fn gen_source(cfg: &SimConfig, k: usize, beta_target: &[f64], seed: u64) -> Result<(Dataset, Vec<f64>)> {
    cfg.validate()?;
    if k >= cfg.k {
        return Err(Error::config(format!("source index {k} out of range for {} sources", cfg.k)));
    }
    if beta_target.len() != cfg.p {
        return Err(Error::input(format!("target truth has length {}, expected {}", beta_target.len(), cfg.p)));
    }
    let mut rng = rng_from_seed(seed);
    let sigma = cfg.sigma_shift.get(k);
    let shift = normals(&mut rng, cfg.shift_support);
    let mut beta = beta_target.to_vec();
    for (b, d) in beta.iter_mut().zip(&shift) {
        *b += sigma * d;
    }
    let chol = ar1_covariance(cfg.p, cfg.ar_rho)
        .cholesky()
        .ok_or_else(|| Error::Numerical { iteration: 0, message: "AR(1) covariance is not positive definite".into() })?
        .l();
    let x = design(&mut rng, cfg.nk, cfg.p, Some(&chol));
    let y = respond(&mut rng, &x, &beta, cfg.nu.get(k) * cfg.tau0);
    let y = contaminate(&y, cfg.rk)?;
    Ok((Dataset::new(x, y)?, beta))
}

/// Target and all sources, each cohort on its own stream derived from `seed`.
pub fn simulate(cfg: &SimConfig, seed: u64) -> Result<SimData> {
    let (target, beta_target) = gen_target(cfg, derive_seed(seed, "target"))?;
    let mut sources = Vec::with_capacity(cfg.k);
    let mut beta_sources = Vec::with_capacity(cfg.k);
    for k in 0..cfg.k {
        let (d, b) = gen_source(cfg, k, &beta_target, derive_seed(seed, &format!("source/{k}")))?;
        sources.push(d);
        beta_sources.push(b);
    }
    Ok(SimData { target, beta_target, sources, beta_sources })
}

/// Lift the first `round(proportion * n)` entries by `2 * max(y)`.
pub fn contaminate(y: &[f64], proportion: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&proportion) {
        return Err(Error::domain(format!("contamination proportion {proportion} is outside [0, 1]")));
    }
    let m = (proportion * y.len() as f64).round() as usize;
    let shift = 2.0 * y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(y.iter().enumerate().map(|(i, &v)| if i < m { v + shift } else { v }).collect())
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// `||beta_hat - beta_true|| / ||beta_true||`.
pub fn rel_err(beta_hat: &[f64], beta_true: &[f64]) -> Result<f64> {
    if beta_hat.len() != beta_true.len() {
        return Err(Error::input(format!(
            "estimate has length {}, truth has length {}",
            beta_hat.len(),
            beta_true.len()
        )));
    }
    let denom = norm(beta_true.iter().copied());
    if denom == 0.0 {
        return Err(Error::domain("relative error is undefined for a zero truth"));
    }
    Ok(norm(beta_hat.iter().zip(beta_true).map(|(a, b)| a - b)) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rel_err: f64,
    pub f1: f64,
    pub support_tp: usize,
    pub support_fp: usize,
    pub support_fn: usize,
}

/// Coefficients with `|beta_j| > zero_tol` count as selected.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// Support recovery against the nonzero entries of `beta_true`. The
/// `rel_err` field is left at zero; [`evaluate`] fills both.
pub fn f1_score(beta_hat: &[f64], beta_true: &[f64], zero_tol: f64) -> Result<Metrics> {
    if beta_hat.len() != beta_true.len() {
        return Err(Error::input("estimate and truth differ in length"));
    }
    if !(zero_tol >= 0.0) {
        return Err(Error::domain("zero_tol must be nonnegative"));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (b, t) in beta_hat.iter().zip(beta_true) {
        match (b.abs() > zero_tol, *t != 0.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let f1 = if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    Ok(Metrics { rel_err: 0.0, f1, support_tp: tp, support_fp: fp, support_fn: fn_ })
}

pub fn evaluate(beta_hat: &[f64], beta_true: &[f64]) -> Result<Metrics> {
    let mut m = f1_score(beta_hat, beta_true, DEFAULT_ZERO_TOL)?;
    m.rel_err = rel_err(beta_hat, beta_true)?;
    Ok(m)
}
