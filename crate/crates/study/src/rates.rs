//! Log-log rate fits with Student-t confidence intervals.

use aeul_core::fit::log_log_fit;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, StudyError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    /// Natural-log intercept: `log err ≈ intercept + slope·log α`.
    pub intercept: f64,
    pub r2: f64,
    /// 95% interval for the slope.
    pub slope_ci: (f64, f64),
    pub points: usize,
}

/// Least squares of `log err` against `log α`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 3 {
        return Err(StudyError::config(format!("rate fit needs at least 3 pairs, got {}", pairs.len())));
    }
    if let Some(&(a, e)) = pairs.iter().find(|&&(a, e)| !(a > 0.0) || !(e > 0.0)) {
        return Err(StudyError::config(format!("rate fit needs positive alpha and error, got ({a}, {e})")));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let fit = log_log_fit(&xs, &ys)?;
    let dof = (pairs.len() - 2) as f64;
    let half = if fit.slope_stderr > 0.0 {
        let t = StudentsT::new(0.0, 1.0, dof).expect("dof >= 1").inverse_cdf(0.975);
        t * fit.slope_stderr
    } else {
        0.0
    };
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        slope_ci: (fit.slope - half, fit.slope + half),
        points: pairs.len(),
    })
}
