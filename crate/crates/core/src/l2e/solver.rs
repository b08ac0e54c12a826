use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{Error, Result};

use super::cd::{self, CdProblem};
use super::loss::{INV_TWO_SQRT_PI, SQRT_TWO_OVER_PI};
use super::{loss_from_residuals, weights_from_residuals, FitResult, Init, Penalty, PenaltySpec, SolverOptions};

/// Consistency constant of the normal MAD.
const MAD_SCALE: f64 = 1.4826;
const INNER_TOL: f64 = 1e-3;
const WARM_SWEEPS: usize = 200;
const TAU_GRID: usize = 41;
const GOLDEN_TOL: f64 = 1e-8;
const MAX_ANCHOR_ROUNDS: usize = 20;
/// Half-width, as a ratio, of the precision window in the final pass.
const TRUST_INIT: f64 = 1.05;
/// A final pass is accepted once `tau` lies this fraction of the window inside its edges.
const ANCHOR_TOL: f64 = 0.9;
const TRACK_TOL: f64 = 1e-4;
/// Ratio bracketing the local precision search.
const LOCAL_SPAN: f64 = 2.0;

/// Fit the penalized L2E regression by block alternation.
///
/// The penalty is measured on the scale of the least-squares lasso
/// `(1 / 2n) sum_i w_i r_i^2 + lambda * P(beta)` at an anchor precision
/// `t`, which makes the fitted objective
///
/// ```text
/// h(beta, tau) + lambda * sqrt(2 / pi) * t^3 * P(beta)
/// ```
///
/// Each outer iteration recomputes the case weights, minimizes the weighted
/// least-squares majorizer of `h` plus the penalty by coordinate descent,
/// then minimizes `h(beta, .)` over `[tau_min, tau_max]`. A first pass lets
/// the anchor follow the current `tau`, which locates a point where the two
/// agree. The final pass freezes the anchor there and restricts `tau` to a
/// narrow window around it, so both block steps are monotone in one fixed
/// objective; if `tau` ends on the window edge the anchor moves and the pass
/// repeats. `objective_trace` records the final pass.
pub fn fit_structured_l2e(data: &Dataset, penalty: &PenaltySpec, opts: &SolverOptions) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::input("cannot fit an empty dataset"));
    }
    let p = data.p();
    penalty.validate(p)?;
    opts.validate()?;
    let blocks = penalty.kind.blocks(p);

    let (mut beta, tau0) = match &opts.init {
        Init::LassoWarm => (warm_start(data, penalty, &blocks)?, None),
        Init::Zeros => (vec![0.0; p], None),
        Init::Provided { beta, tau } => {
            data.check_beta(beta)?;
            if !(*tau > 0.0) || !tau.is_finite() {
                return Err(Error::domain(format!("provided tau must be positive, got {tau}")));
            }
            (beta.clone(), Some(*tau))
        }
    };
    let r = data.residuals(&beta)?;
    let tau = tau0.unwrap_or_else(|| mad_precision(&r, opts.tau_max)).clamp(opts.tau_min, opts.tau_max);
    let mut st = State { beta: std::mem::take(&mut beta), r, tau, iterations: 0 };
    let ctx = Ctx { data, penalty, blocks: &blocks, opts };

    if !penalty.is_active() {
        let phase = ctx.descend(&mut st, Anchor::Fixed { at: 1.0, window: (opts.tau_min, opts.tau_max) })?;
        return Ok(ctx.finish(st, phase, 1.0, true));
    }

    let tracking = ctx.descend(&mut st, Anchor::Tracking)?;
    let mut trust = TRUST_INIT;
    let mut last_side = 0.0;
    let mut phase = tracking;
    let mut anchor = st.tau;
    for _ in 0..MAX_ANCHOR_ROUNDS {
        anchor = st.tau;
        phase = ctx.descend(&mut st, Anchor::Fixed { at: anchor, window: (anchor / trust, anchor * trust) })?;
        let gap = st.tau.ln() - anchor.ln();
        if gap.abs() <= ANCHOR_TOL * trust.ln() {
            return Ok(ctx.finish(st, phase, anchor, true));
        }
        if gap.signum() == -last_side {
            trust = trust.sqrt();
        }
        last_side = gap.signum();
    }
    Ok(ctx.finish(st, phase, anchor, false))
}

/// Multiplier of `lambda * P(beta)` in the objective anchored at `anchor`.
pub fn penalty_scale(anchor: f64) -> f64 {
    SQRT_TWO_OVER_PI * anchor * anchor * anchor
}

#[derive(Clone, Copy)]
enum Anchor {
    /// The penalty scale follows the current `tau`.
    Tracking,
    /// Fixed scale; `tau` is confined to `window`.
    Fixed { at: f64, window: (f64, f64) },
}

struct State {
    beta: Vec<f64>,
    r: Vec<f64>,
    tau: f64,
    iterations: usize,
}

struct Phase {
    trace: Vec<f64>,
    converged: bool,
}

struct Ctx<'a> {
    data: &'a Dataset,
    penalty: &'a PenaltySpec,
    blocks: &'a [Vec<usize>],
    opts: &'a SolverOptions,
}

impl Ctx<'_> {
    fn objective(&self, st: &State, anchor: f64) -> f64 {
        loss_from_residuals(&st.r, st.tau) + penalty_scale(anchor) * self.penalty.value(&st.beta)
    }

    fn numerical(&self, st: &State, value: f64) -> Error {
        Error::Numerical { iteration: st.iterations, message: format!("objective became {value}") }
    }

    fn descend(&self, st: &mut State, mode: Anchor) -> Result<Phase> {
        let (opts, n) = (self.opts, self.data.n() as f64);
        let anchor_of = |tau: f64| match mode {
            Anchor::Tracking => tau,
            Anchor::Fixed { at, .. } => at,
        };
        let (lo, hi) = match mode {
            Anchor::Tracking => (opts.tau_min, opts.tau_max),
            Anchor::Fixed { window, .. } => (window.0.max(opts.tau_min), window.1.min(opts.tau_max)),
        };
        let mut obj = self.objective(st, anchor_of(st.tau));
        if !obj.is_finite() {
            return Err(self.numerical(st, obj));
        }
        let mut trace = vec![obj];
        let mut converged = false;
        let mut first = true;

        for _ in 0..opts.max_outer_iter {
            st.iterations += 1;
            let prev = obj;
            let tau_prev = st.tau;
            let anchor = anchor_of(st.tau);

            // beta step on the weighted least-squares majorizer
            let w = weights_from_residuals(&st.r, st.tau);
            let ratio = anchor / st.tau;
            let threshold = if self.penalty.is_active() { n * self.penalty.lambda * ratio.powi(3) } else { 0.0 };
            let problem = CdProblem { data: self.data, weights: &w, blocks: self.blocks, threshold };
            let (beta_prev, r_prev) = (st.beta.clone(), st.r.clone());
            cd::solve(&problem, &mut st.beta, &mut st.r, opts.inner_cd_iter, INNER_TOL);
            let after = self.objective(st, anchor);
            if !(after <= prev) {
                if !after.is_finite() {
                    return Err(self.numerical(st, after));
                }
                st.beta = beta_prev;
                st.r = r_prev;
            }

            // tau step: a global scan first, then a local search around the current value
            let candidate = match mode {
                Anchor::Fixed { .. } => minimize_tau_local(&st.r, lo, hi),
                Anchor::Tracking if first => minimize_tau(&st.r, lo, hi),
                Anchor::Tracking => {
                    let (a, b) = ((st.tau / LOCAL_SPAN).max(lo), (st.tau * LOCAL_SPAN).min(hi));
                    minimize_tau_local(&st.r, a, b)
                }
            };
            first = false;
            if loss_from_residuals(&st.r, candidate) < loss_from_residuals(&st.r, st.tau) {
                st.tau = candidate;
            }

            obj = self.objective(st, anchor_of(st.tau));
            if !obj.is_finite() {
                return Err(self.numerical(st, obj));
            }
            trace.push(obj);
            let scale = prev.abs().max(st.tau * INV_TWO_SQRT_PI);
            let done = match mode {
                Anchor::Tracking => {
                    (prev - obj).abs() <= opts.rel_tol * scale && (st.tau / tau_prev).ln().abs() <= TRACK_TOL
                }
                Anchor::Fixed { .. } => (prev - obj).abs() <= opts.rel_tol * scale,
            };
            if done {
                converged = true;
                break;
            }
        }
        Ok(Phase { trace, converged })
    }

    fn finish(&self, st: State, phase: Phase, anchor: f64, anchored: bool) -> FitResult {
        let weights = weights_from_residuals(&st.r, st.tau);
        let opts = self.opts;
        let tau_at_bound = st.tau <= opts.tau_min * (1.0 + 1e-9) || st.tau >= opts.tau_max * (1.0 - 1e-9);
        FitResult {
            beta: st.beta,
            tau: st.tau,
            weights,
            objective_trace: phase.trace,
            lambda_used: self.penalty.lambda,
            penalty_scale: if self.penalty.is_active() { penalty_scale(anchor) } else { 0.0 },
            converged: phase.converged && anchored,
            iterations: st.iterations,
            tau_at_bound,
        }
    }
}

/// `1 / (1.4826 * MAD(r))`, or `fallback` when the MAD vanishes.
fn mad_precision(r: &[f64], fallback: f64) -> f64 {
    let med = median(r);
    let dev: Vec<f64> = r.iter().map(|v| (v - med).abs()).collect();
    let mad = median(&dev) * MAD_SCALE;
    if mad > 0.0 && mad.is_finite() {
        1.0 / mad
    } else {
        fallback
    }
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Least-squares start: penalized least squares at the same lambda, or
/// (ridge-stabilized) normal equations when there is no penalty.
fn warm_start(data: &Dataset, penalty: &PenaltySpec, blocks: &[Vec<usize>]) -> Result<Vec<f64>> {
    if matches!(penalty.kind, Penalty::None) || penalty.lambda == 0.0 {
        return normal_equations(data);
    }
    let n = data.n();
    let w = vec![1.0; n];
    let problem = CdProblem { data, weights: &w, blocks, threshold: n as f64 * penalty.lambda };
    let mut beta = vec![0.0; data.p()];
    let mut r = data.y().to_vec();
    cd::solve(&problem, &mut beta, &mut r, WARM_SWEEPS, 1e-6);
    Ok(beta)
}

fn normal_equations(data: &Dataset) -> Result<Vec<f64>> {
    let x = data.x();
    let (n, p) = (data.n(), data.p());
    let gram: DMatrix<f64> = x.tr_mul(x);
    let rhs = x.tr_mul(&nalgebra::DVector::from_column_slice(data.y()));
    let scale = gram.trace() / p as f64;
    let ridges: &[f64] = if p >= n { &[1e-3, 1e-1] } else { &[0.0, 1e-10, 1e-6] };
    for &ridge in ridges {
        let mut g = gram.clone();
        for j in 0..p {
            g[(j, j)] += ridge * scale;
        }
        if let Some(ch) = g.cholesky() {
            let sol = ch.solve(&rhs);
            if sol.iter().all(|v| v.is_finite()) {
                return Ok(sol.iter().copied().collect());
            }
        }
    }
    Ok(vec![0.0; p])
}

/// Global minimizer of `tau -> h(r, tau)` on `[lo, hi]`: a log-spaced scan
/// brackets the best basin, then golden-section search refines it in
/// `log(tau)`.
pub(crate) fn minimize_tau(r: &[f64], lo: f64, hi: f64) -> f64 {
    let f = |s: f64| loss_from_residuals(r, s.exp());
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (TAU_GRID - 1) as f64;
    let grid: Vec<f64> = (0..TAU_GRID).map(|i| a + step * i as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&s| f(s)).collect();
    let best = (0..TAU_GRID).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    let left = grid[best.saturating_sub(1)];
    let right = grid[(best + 1).min(TAU_GRID - 1)];
    let (s, fs) = golden_section(f, left, right, GOLDEN_TOL);
    if fs <= vals[best] {
        s.exp().clamp(lo, hi)
    } else {
        grid[best].exp().clamp(lo, hi)
    }
}

/// Minimizer of `tau -> h(r, tau)` on a short interval by golden-section
/// search in `log(tau)`.
fn minimize_tau_local(r: &[f64], lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let (s, _) = golden_section(|s| loss_from_residuals(r, s.exp()), lo.ln(), hi.ln(), GOLDEN_TOL);
    s.exp().clamp(lo, hi)
}

/// Golden-section search for a minimum of `f` on `[a, b]`; returns `(x, f(x))`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
