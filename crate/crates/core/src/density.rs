//! Gaussian kernel density estimation and the Hellinger distance between
//! two estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const BANDWIDTH_FLOOR: f64 = 1e-3;
/// Trapezoid grid size for the Hellinger integral.
pub const HELLINGER_GRID: usize = 512;

/// Gaussian KDE over a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    samples: Vec<f64>,
    bandwidth: f64,
}

impl DensityEstimate {
    /// Estimate with an explicit bandwidth.
    pub fn with_bandwidth(samples: &[f64], bandwidth: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("density estimate needs at least one sample"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::input("density samples must be finite"));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::domain(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(DensityEstimate { samples: samples.to_vec(), bandwidth })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn eval(&self, x: f64) -> f64 {
        let inv_b = 1.0 / self.bandwidth;
        let s: f64 = self
            .samples
            .iter()
            .map(|&si| {
                let z = (x - si) * inv_b;
                (-0.5 * z * z).exp()
            })
            .sum();
        s * INV_SQRT_2PI * inv_b / self.samples.len() as f64
    }

    fn range(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)))
    }
}

/// Linear-interpolation sample quantile (type 7) of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, floored at 1e-3.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return BANDWIDTH_FLOOR;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = sd.min(iqr / 1.34);
    (0.9 * spread * (n as f64).powf(-0.2)).max(BANDWIDTH_FLOOR)
}

/// Gaussian KDE with Silverman's bandwidth.
pub fn kde_fit(samples: &[f64]) -> Result<DensityEstimate> {
    if samples.is_empty() {
        return Err(Error::input("density estimate needs at least one sample"));
    }
    DensityEstimate::with_bandwidth(samples, silverman_bandwidth(samples))
}

pub fn kde_eval(d: &DensityEstimate, points: &[f64]) -> Vec<f64> {
    points.iter().map(|&x| d.eval(x)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HellingerResult {
    pub distance: f64,
    pub grid_points: usize,
    pub grid_bounds: (f64, f64),
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().sum();
    step * (inner + 0.5 * (values[0] + values[n - 1]))
}

/// Hellinger distance `sqrt(1 - int sqrt(f0 f1))` between two densities
/// given as functions, integrated by the trapezoid rule on a uniform grid
/// over `[lo, hi]`. Each density is renormalized to unit mass on the grid
/// first and the result is clipped to `[0, 1]`.
pub fn hellinger_on_grid(f0: impl Fn(f64) -> f64, f1: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    let step = (hi - lo) / (points - 1) as f64;
    let xs: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    let a: Vec<f64> = xs.iter().map(|&x| f0(x)).collect();
    let b: Vec<f64> = xs.iter().map(|&x| f1(x)).collect();
    let (ma, mb) = (trapezoid(&a, step), trapezoid(&b, step));
    if !(ma > 0.0 && mb > 0.0) {
        return 1.0;
    }
    let root: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (u / ma * v / mb).sqrt()).collect();
    let bc = trapezoid(&root, step);
    (1.0 - bc).max(0.0).sqrt().clamp(0.0, 1.0)
}

/// Hellinger distance between two kernel estimates on a 512-point grid
/// spanning both sample sets padded by three of the larger bandwidth.
pub fn hellinger(f0: &DensityEstimate, fk: &DensityEstimate) -> HellingerResult {
    let b = f0.bandwidth.max(fk.bandwidth);
    let (lo0, hi0) = f0.range();
    let (lo1, hi1) = fk.range();
    let (min, max) = (lo0.min(lo1), hi0.max(hi1));
    if f0.samples.len() == 1 && f0.samples == fk.samples && f0.bandwidth == fk.bandwidth {
        return HellingerResult { distance: 0.0, grid_points: HELLINGER_GRID, grid_bounds: (min, max) };
    }
    let (mut lo, mut hi) = (min - 3.0 * b, max + 3.0 * b);
    if !(hi > lo) {
        let mid = 0.5 * (lo + hi);
        lo = mid - 3.0 * b;
        hi = mid + 3.0 * b;
    }
    let distance = hellinger_on_grid(|x| f0.eval(x), |x| fk.eval(x), lo, hi, HELLINGER_GRID);
    HellingerResult { distance, grid_points: HELLINGER_GRID, grid_bounds: (lo, hi) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_sample_floor() {
        let d = kde_fit(&[0.0]).unwrap();
        assert_eq!(d.bandwidth(), 1e-3);
        assert!(d.eval(0.0) > 0.0);
        assert!(kde_fit(&[]).is_err());
        assert!(kde_fit(&[0.5; 10]).unwrap().bandwidth() == 1e-3);
    }

    #[test]
    fn kernel_closed_forms() {
        let d = DensityEstimate::with_bandwidth(&[0.0], 1.0).unwrap();
        assert_relative_eq!(d.eval(0.0), 0.398_942_3, epsilon = 1e-7);
        assert_relative_eq!(d.eval(1.0), 0.241_970_7, epsilon = 1e-7);
    }

    #[test]
    fn tails_and_symmetry() {
        let d = DensityEstimate::with_bandwidth(&[-1.0, 1.0], 0.05).unwrap();
        assert!(d.eval(1.0 + 21.0 * 0.05) < 1e-80);
        assert_eq!(d.eval(0.0), d.eval(-0.0));
        assert_relative_eq!(d.eval(0.37), d.eval(-0.37), max_relative = 1e-14);
    }

    #[test]
    fn identical_and_disjoint() {
        let s: Vec<f64> = (0..50).map(|i| (i as f64 * 0.13).sin()).collect();
        let a = kde_fit(&s).unwrap();
        assert!(hellinger(&a, &a).distance < 1e-6);

        let lo: Vec<f64> = (0..20).map(|i| -100.0 + 1e-6 * i as f64).collect();
        let hi: Vec<f64> = (0..20).map(|i| 100.0 + 1e-6 * i as f64).collect();
        let h = hellinger(&kde_fit(&lo).unwrap(), &kde_fit(&hi).unwrap());
        assert!(h.distance > 0.999);
        assert_eq!(h.grid_points, 512);
    }

    #[test]
    fn gaussian_closed_form() {
        let phi = |m: f64| move |x: f64| INV_SQRT_2PI * (-0.5 * (x - m) * (x - m)).exp();
        let h = hellinger_on_grid(phi(0.0), phi(1.0), -8.0, 9.0, 512);
        let exact = (1.0 - (-1.0f64 / 8.0).exp()).sqrt();
        assert_relative_eq!(exact, 0.342_787, epsilon = 1e-6);
        assert!((h - exact).abs() < 1e-3);
    }
}
