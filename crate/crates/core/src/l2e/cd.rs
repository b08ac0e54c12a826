//! Block coordinate descent for
//! `0.5 * sum_i w_i r_i^2 + t * sum_g ||beta_g||_2`.
//!
//! Singleton blocks give the lasso, and the update is then the exact
//! coordinate minimizer. Larger blocks take one majorized proximal step with
//! curvature `trace(X_g' W X_g)`, which also never increases the objective.

use crate::data::Dataset;

use super::prox::{group_shrink_factor, soft_threshold};

pub(crate) struct CdProblem<'a> {
    pub data: &'a Dataset,
    pub weights: &'a [f64],
    pub blocks: &'a [Vec<usize>],
    pub threshold: f64,
}

struct State<'a> {
    problem: &'a CdProblem<'a>,
    col_norm: Vec<f64>,
    curvature: Vec<f64>,
    weight_sum: f64,
    grad: Vec<f64>,
}

impl State<'_> {
    /// Update one block in place; returns the largest weighted change in fitted values.
    fn update_block(&mut self, bi: usize, beta: &mut [f64], r: &mut [f64]) -> f64 {
        let CdProblem { data, weights, blocks, threshold } = *self.problem;
        let blk = &blocks[bi];
        let l = self.curvature[bi];
        let mut change: f64 = 0.0;
        if l <= 0.0 {
            if threshold > 0.0 {
                for &j in blk {
                    shift(data.column(j), r, beta[j]);
                    beta[j] = 0.0;
                }
            }
            return 0.0;
        }
        self.grad.clear();
        for &j in blk {
            let g = weighted_dot(data.column(j), weights, r);
            self.grad.push(beta[j] + g / l);
        }
        let t = threshold / l;
        if blk.len() == 1 {
            self.grad[0] = soft_threshold(self.grad[0], t);
        } else {
            let norm = self.grad.iter().map(|z| z * z).sum::<f64>().sqrt();
            let s = group_shrink_factor(norm, t);
            self.grad.iter_mut().for_each(|z| *z *= s);
        }
        for (k, &j) in blk.iter().enumerate() {
            let d = self.grad[k] - beta[j];
            if d != 0.0 {
                shift(data.column(j), r, -d);
                beta[j] = self.grad[k];
                change = change.max(d.abs() * (self.col_norm[j] / self.weight_sum).sqrt());
            }
        }
        change
    }

    fn sweep(&mut self, which: &[usize], beta: &mut [f64], r: &mut [f64]) -> f64 {
        which
            .iter()
            .fold(0.0, |acc: f64, &bi| acc.max(self.update_block(bi, beta, r)))
    }
}

/// `sum_i x_i w_i r_i` with independent partial sums, which lets the loop vectorize.
#[inline]
fn weighted_dot(x: &[f64], w: &[f64], r: &[f64]) -> f64 {
    const LANES: usize = 8;
    let n = x.len().min(w.len()).min(r.len());
    let (x, w, r) = (&x[..n], &w[..n], &r[..n]);
    let mut acc = [0.0; LANES];
    let (xc, wc, rc) = (x.chunks_exact(LANES), w.chunks_exact(LANES), r.chunks_exact(LANES));
    let tail: f64 = xc
        .remainder()
        .iter()
        .zip(wc.remainder().iter().zip(rc.remainder()))
        .map(|(a, (b, c))| a * b * c)
        .sum();
    for (xs, (ws, rs)) in xc.zip(wc.zip(rc)) {
        for k in 0..LANES {
            acc[k] += xs[k] * ws[k] * rs[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// `r += c * x`
#[inline]
fn shift(x: &[f64], r: &mut [f64], c: f64) {
    if c != 0.0 {
        r.iter_mut().zip(x).for_each(|(ri, xi)| *ri += c * xi);
    }
}

/// Run block coordinate descent with an active-set strategy. `r` must hold
/// `y - X beta` on entry and is kept consistent. Returns the number of sweeps.
pub(crate) fn solve(problem: &CdProblem<'_>, beta: &mut [f64], r: &mut [f64], max_sweeps: usize, tol: f64) -> usize {
    let data = problem.data;
    let w = problem.weights;
    let col_norm: Vec<f64> = (0..data.p())
        .map(|j| data.column(j).iter().zip(w).map(|(x, wi)| wi * x * x).sum())
        .collect();
    let curvature = problem
        .blocks
        .iter()
        .map(|b| b.iter().map(|&j| col_norm[j]).sum())
        .collect();
    let weight_sum = w.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let scale = (r.iter().zip(w).map(|(ri, wi)| wi * ri * ri).sum::<f64>() / weight_sum).sqrt();
    let tol_abs = tol * scale.max(1e-300);
    let mut st = State { problem, col_norm, curvature, weight_sum, grad: Vec::new() };

    let all: Vec<usize> = (0..problem.blocks.len()).collect();
    let mut sweeps = 0;
    loop {
        let d = st.sweep(&all, beta, r);
        sweeps += 1;
        if d <= tol_abs || sweeps >= max_sweeps {
            break;
        }
        let active: Vec<usize> = all
            .iter()
            .copied()
            .filter(|&bi| problem.blocks[bi].iter().any(|&j| beta[j] != 0.0))
            .collect();
        if active.len() == all.len() {
            continue;
        }
        loop {
            let d = st.sweep(&active, beta, r);
            sweeps += 1;
            if d <= tol_abs || sweeps >= max_sweeps {
                break;
            }
        }
        if sweeps >= max_sweeps {
            break;
        }
    }
    sweeps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::l2e::Groups;

    fn objective(d: &Dataset, w: &[f64], blocks: &[Vec<usize>], t: f64, beta: &[f64]) -> f64 {
        let r = d.residuals(beta).unwrap();
        let fit: f64 = r.iter().zip(w).map(|(ri, wi)| 0.5 * wi * ri * ri).sum();
        let pen: f64 = blocks
            .iter()
            .map(|b| b.iter().map(|&j| beta[j] * beta[j]).sum::<f64>().sqrt())
            .sum();
        fit + t * pen
    }

    fn fixture() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let a = i as f64;
                vec![(a * 0.7).sin(), (a * 1.3).cos(), a / 12.0 - 0.4]
            })
            .collect();
        let y = rows.iter().map(|r| 2.0 * r[0] - r[1] + 0.1 * r[2]).collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn unpenalized_solves_least_squares() {
        let d = fixture();
        let w = vec![1.0; d.n()];
        let blocks = Groups::singletons(3).blocks().to_vec();
        let prob = CdProblem { data: &d, weights: &w, blocks: &blocks, threshold: 0.0 };
        let mut beta = vec![0.0; 3];
        let mut r = d.y().to_vec();
        solve(&prob, &mut beta, &mut r, 5000, 1e-14);
        assert!((beta[0] - 2.0).abs() < 1e-8);
        assert!((beta[1] + 1.0).abs() < 1e-8);
        assert!((beta[2] - 0.1).abs() < 1e-7);
        let rr = d.residuals(&beta).unwrap();
        assert!(rr.iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn every_sweep_descends() {
        let d = fixture();
        let w: Vec<f64> = (0..d.n()).map(|i| 0.2 + (i as f64 * 0.37).sin().abs()).collect();
        for blocks in [Groups::singletons(3).blocks().to_vec(), vec![vec![0, 2], vec![1]]] {
            let prob = CdProblem { data: &d, weights: &w, blocks: &blocks, threshold: 0.3 };
            let mut beta = vec![0.5, 0.5, 0.5];
            let mut r = d.residuals(&beta).unwrap();
            let mut prev = objective(&d, &w, &blocks, 0.3, &beta);
            for _ in 0..30 {
                solve(&prob, &mut beta, &mut r, 1, 1e-12);
                let cur = objective(&d, &w, &blocks, 0.3, &beta);
                assert!(cur <= prev + 1e-12, "{cur} > {prev}");
                prev = cur;
            }
        }
    }
}
