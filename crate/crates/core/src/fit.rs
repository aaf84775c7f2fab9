//! Small least-squares helpers used by every scaling-exponent estimate.
//!
//! All power-law fits in the crate go through [`log_log_slope`]; robust
//! aggregation of per-point exponents goes through [`median`].  Keeping these
//! in one place guarantees that independently implemented checks (oracle
//! recomputations in tests) can share the arithmetic.

use crate::error::{Error, Result};

/// Ordinary least squares slope and intercept of `y` against `x`.
///
/// Returns `(slope, intercept)`.  Requires at least two distinct abscissae.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 samples for a line fit, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y.iter()) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit(
            "all abscissae coincide; slope is undefined".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Least-squares slope of `ln y` against `ln x`.
///
/// Every `(x, y)` pair must be strictly positive; callers filter zeros
/// (they mean "below resolution", not "tiny value") before fitting.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.iter().any(|v| !(*v > 0.0)) || y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateFit(
            "log-log fit requires strictly positive samples".into(),
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    ols(&lx, &ly)
}

/// Median of a sample; even lengths average the two middle order statistics.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("median of empty sample"));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in median"));
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Largest relative deviation `|y_i - ŷ_i| / ŷ_i` of positive data from the
/// fitted power law `ŷ = e^b x^a`.
pub fn max_rel_deviation(x: &[f64], y: &[f64], slope: f64, intercept: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (xi, yi) in x.iter().zip(y.iter()) {
        let fitted = (intercept + slope * xi.ln()).exp();
        if fitted > 0.0 {
            worst = worst.max((yi - fitted).abs() / fitted);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [5.0, 7.0, 9.0, 11.0];
        let (a, b) = ols(&x, &y).unwrap();
        assert!((a - 2.0).abs() < 1e-12);
        assert!((b - 3.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_power_law_exponent() {
        let x: Vec<f64> = (1..20).map(|k| 0.01 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(1.5)).collect();
        let (slope, _) = log_log_slope(&x, &y).unwrap();
        assert!((slope - 1.5).abs() < 1e-10);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
    }

    #[test]
    fn rejects_degenerate_fits() {
        assert!(ols(&[1.0], &[2.0]).is_err());
        assert!(ols(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(log_log_slope(&[1.0, 0.0], &[1.0, 1.0]).is_err());
    }
}
