//! Median-ratio scale recovery for relative depth.

use serde::Serialize;
use thiserror::Error;

use crate::image::DepthMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("no depth pairs")]
    EmptyPairSet,
    #[error("depth pair {index} is not positive ({z_vo}, {z_pred})")]
    NonPositiveDepth { index: usize, z_vo: f64, z_pred: f64 },
    #[error("scale must be positive and finite, got {0}")]
    NonPositiveScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleEstimate {
    pub theta_s: f64,
    pub n_pairs: usize,
    /// Median absolute deviation of the ratios from `theta_s`.
    pub ratio_dispersion: f64,
}

/// Element at sorted index `n / 2`; for even counts this is the upper of the two middle values.
pub fn upper_median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mid = values.len() / 2;
    Some(*values.select_nth_unstable_by(mid, f64::total_cmp).1)
}

/// Scale mapping predicted depth to VO depth from `(z_vo, z_pred)` pairs.
pub fn recover_scale(pairs: &[(f64, f64)]) -> Result<ScaleEstimate, ScaleError> {
    if pairs.is_empty() {
        return Err(ScaleError::EmptyPairSet);
    }
    let mut ratios = Vec::with_capacity(pairs.len());
    for (index, &(z_vo, z_pred)) in pairs.iter().enumerate() {
        if !(z_vo > 0.0 && z_pred > 0.0 && z_vo.is_finite() && z_pred.is_finite()) {
            return Err(ScaleError::NonPositiveDepth { index, z_vo, z_pred });
        }
        ratios.push(z_vo / z_pred);
    }
    let theta_s = upper_median(ratios.clone()).expect("non-empty");
    let ratio_dispersion = upper_median(ratios.iter().map(|r| (r - theta_s).abs()).collect()).expect("non-empty");
    Ok(ScaleEstimate { theta_s, n_pairs: pairs.len(), ratio_dispersion })
}

pub fn rescale_depth(depth: &DepthMap, theta_s: f64) -> Result<DepthMap, ScaleError> {
    if !(theta_s > 0.0 && theta_s.is_finite()) {
        return Err(ScaleError::NonPositiveScale(theta_s));
    }
    Ok(depth.scaled(theta_s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_ratios(r: &[f64]) -> Vec<(f64, f64)> {
        r.iter().map(|&x| (x * 2.0, 2.0)).collect()
    }

    #[test]
    fn examples() {
        assert_eq!(recover_scale(&with_ratios(&[2.0; 5])).unwrap().theta_s, 2.0);
        assert_eq!(recover_scale(&with_ratios(&[1.0, 2.0, 9.0])).unwrap().theta_s, 2.0);
        assert_eq!(recover_scale(&with_ratios(&[1.0, 2.0, 3.0, 100.0])).unwrap().theta_s, 3.0);
        assert_eq!(recover_scale(&[]), Err(ScaleError::EmptyPairSet));
        assert!(matches!(recover_scale(&[(1.0, 0.0)]), Err(ScaleError::NonPositiveDepth { index: 0, .. })));
    }

    #[test]
    fn rescale() {
        let d = DepthMap::from_values(2, 1, vec![0.3, 1.7]).unwrap();
        assert_eq!(rescale_depth(&d, 1.0).unwrap(), d);
        assert_eq!(rescale_depth(&d, 2.0).unwrap().values(), &[0.6, 3.4]);
        assert!(rescale_depth(&d, 0.0).is_err());
    }
}
