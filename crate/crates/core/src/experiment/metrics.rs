//! Depth error metrics.

use crate::pipeline::DepthMap;
use crate::{Error, Result};

fn check_pair(est: &DepthMap, gt: &DepthMap) -> Result<()> {
    if est.rows() != gt.rows() || est.cols() != gt.cols() {
        return Err(Error::DimensionMismatch {
            expected_width: gt.cols(),
            expected_height: gt.rows(),
            width: est.cols(),
            height: est.rows(),
        });
    }
    if gt.values().iter().any(|&d| d.is_nan() || d <= 0.0) {
        return Err(Error::domain("ground-truth depth must be positive"));
    }
    Ok(())
}

/// Mean absolute relative error, `mean(|est - gt| / gt)` over all cells.
pub fn mare(est: &DepthMap, gt: &DepthMap) -> Result<f64> {
    check_pair(est, gt)?;
    let sum: f64 = est
        .values()
        .iter()
        .zip(gt.values())
        .map(|(&e, &g)| (e - g).abs() / g)
        .sum();
    Ok(sum / gt.values().len() as f64)
}

/// Mean absolute relative error restricted to cells where `mask` is set.
/// Returns `None` when no cell is selected.
pub fn mare_masked(est: &DepthMap, gt: &DepthMap, mask: &[bool]) -> Result<Option<f64>> {
    check_pair(est, gt)?;
    if mask.len() != gt.values().len() {
        return Err(Error::domain("mask length differs from the depth map"));
    }
    let (sum, n) = est
        .values()
        .iter()
        .zip(gt.values())
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), ((&e, &g), _)| (s + (e - g).abs() / g, n + 1));
    Ok((n > 0).then(|| sum / n as f64))
}
