use super::{weighted_moments, CovEstimator, CovarianceModel, Point};
use crate::error::{Error, Result};

/// Sample mean and unbiased sample covariance.
pub fn classic_cov(points: &[Point]) -> Result<CovarianceModel> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 points, got {n}")));
    }
    let (center, s, _) = weighted_moments(points, &vec![1.0; n]);
    let f = n as f64 / (n as f64 - 1.0);
    CovarianceModel::checked(center, s.scale(f), CovEstimator::Classic, 1.0)
}
