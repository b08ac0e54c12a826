use crate::error::{Error, Result};

use super::Groups;

#[inline]
pub(crate) fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Scale factor `max(1 - t / ||v||, 0)` of the block soft-threshold.
#[inline]
pub(crate) fn group_shrink_factor(norm: f64, t: f64) -> f64 {
    if norm <= t {
        0.0
    } else {
        1.0 - t / norm
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("threshold must be finite and >= 0, got {t}")))
    }
}

/// Proximal map of `t * ||.||_1`: componentwise soft-thresholding.
pub fn prox_lasso(v: &[f64], threshold: f64) -> Result<Vec<f64>> {
    check_threshold(threshold)?;
    Ok(v.iter().map(|&x| soft_threshold(x, threshold)).collect())
}

/// Proximal map of `t * sum_g ||v_g||_2`: every block is scaled by
/// `max(1 - t / ||v_g||, 0)`.
pub fn prox_group_lasso(v: &[f64], threshold: f64, groups: &Groups) -> Result<Vec<f64>> {
    check_threshold(threshold)?;
    groups.check_covers(v.len())?;
    let mut out = vec![0.0; v.len()];
    for blk in groups.blocks() {
        let norm = blk.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt();
        let s = group_shrink_factor(norm, threshold);
        for &j in blk {
            out[j] = s * v[j];
        }
    }
    Ok(out)
}
