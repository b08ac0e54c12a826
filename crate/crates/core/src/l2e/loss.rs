use crate::data::Dataset;
use crate::error::{Error, Result};

/// `1 / (2 sqrt(pi))`
pub(crate) const INV_TWO_SQRT_PI: f64 = 0.282_094_791_773_878_14;
/// `sqrt(2 / pi)`
pub(crate) const SQRT_TWO_OVER_PI: f64 = 0.797_884_560_802_865_4;

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("tau must be positive and finite, got {tau}")))
    }
}

pub(crate) fn loss_from_residuals(r: &[f64], tau: f64) -> f64 {
    let t2 = tau * tau * 0.5;
    let s: f64 = r.iter().map(|ri| (-t2 * ri * ri).exp()).sum();
    tau * INV_TWO_SQRT_PI - tau / r.len() as f64 * SQRT_TWO_OVER_PI * s
}

pub(crate) fn weights_from_residuals(r: &[f64], tau: f64) -> Vec<f64> {
    let t2 = tau * tau * 0.5;
    r.iter().map(|ri| (-t2 * ri * ri).exp()).collect()
}

/// The L2E loss `h(beta, tau)` on `data`.
pub fn l2e_loss(beta: &[f64], tau: f64, data: &Dataset) -> Result<f64> {
    check_tau(tau)?;
    let r = data.residuals(beta)?;
    if r.is_empty() {
        return Err(Error::input("loss of an empty dataset"));
    }
    Ok(loss_from_residuals(&r, tau))
}

/// Case weights `w_i = exp(-tau^2 r_i^2 / 2)`.
pub fn case_weights(beta: &[f64], tau: f64, data: &Dataset) -> Result<Vec<f64>> {
    check_tau(tau)?;
    let r = data.residuals(beta)?;
    Ok(weights_from_residuals(&r, tau))
}

/// Analytic gradient `(dh/dbeta, dh/dtau)`.
pub fn l2e_gradient(beta: &[f64], tau: f64, data: &Dataset) -> Result<(Vec<f64>, f64)> {
    check_tau(tau)?;
    let r = data.residuals(beta)?;
    let n = r.len() as f64;
    let w = weights_from_residuals(&r, tau);
    let wr: Vec<f64> = w.iter().zip(&r).map(|(wi, ri)| wi * ri).collect();
    let scale = -tau * tau * tau / n * SQRT_TWO_OVER_PI;
    let g_beta = (0..data.p())
        .map(|j| scale * data.column(j).iter().zip(&wr).map(|(x, v)| x * v).sum::<f64>())
        .collect();
    let t2 = tau * tau;
    let s: f64 = w.iter().zip(&r).map(|(wi, ri)| wi * (1.0 - t2 * ri * ri)).sum();
    let g_tau = INV_TWO_SQRT_PI - SQRT_TWO_OVER_PI / n * s;
    Ok((g_beta, g_tau))
}
