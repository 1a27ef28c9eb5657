//! Least-squares fits of `y = a + b·x^p` for fixed exponents `p`.

use crate::error::{HeatError, Result};
use crate::scalar::{from_usize, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult<T> {
    pub exponent: T,
    pub intercept: T,
    pub slope: T,
    pub residual_sum: T,
    /// Coefficient of determination; 1 for exact fits of constant data.
    pub r_squared: T,
}

/// Ordinary least squares `y ≈ a + b x`.
pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> Result<FitResult<T>> {
    if x.len() != y.len() {
        return Err(HeatError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(HeatError::DegenerateFit(format!(
            "need at least 2 rows, got {}",
            x.len()
        )));
    }
    let m: T = from_usize(x.len());
    let mx = x.iter().copied().sum::<T>() / m;
    let my = y.iter().copied().sum::<T>() / m;
    let sxx: T = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let syy: T = y.iter().map(|&v| (v - my) * (v - my)).sum();
    let scale = x.iter().fold(T::zero(), |s, &v| s.max(v.abs()));
    if !(sxx > T::epsilon() * scale * scale * m) {
        return Err(HeatError::DegenerateFit("regressor is constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_sum: T = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let e = b - intercept - slope * a;
            e * e
        })
        .sum();
    let r_squared = if syy > T::zero() {
        T::one() - residual_sum / syy
    } else {
        T::one()
    };
    Ok(FitResult {
        exponent: T::one(),
        intercept,
        slope,
        residual_sum,
        r_squared,
    })
}

/// Fits `y ≈ a + b x^p`; `x` must be positive.
pub fn fit_power<T: Real>(x: &[T], y: &[T], p: T) -> Result<FitResult<T>> {
    if x.iter().any(|&v| !(v > T::zero())) {
        return Err(HeatError::DegenerateFit(
            "regressor values must be positive".into(),
        ));
    }
    let xp: Vec<T> = x.iter().map(|&v| v.powf(p)).collect();
    Ok(FitResult {
        exponent: p,
        ..linear_fit(&xp, y)?
    })
}

/// One fit per candidate exponent and the index of the smallest residual.
pub fn fit_exponent<T: Real>(
    x: &[T],
    y: &[T],
    candidates: &[T],
) -> Result<(Vec<FitResult<T>>, usize)> {
    if candidates.is_empty() {
        return Err(HeatError::DegenerateFit("no candidate exponents".into()));
    }
    let fits = candidates
        .iter()
        .map(|&p| fit_power(x, y, p))
        .collect::<Result<Vec<_>>>()?;
    let best = fits
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.residual_sum.partial_cmp(&b.1.residual_sum).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok((fits, best))
}

/// Slope of `log y` against `log x`.
pub fn log_log_slope<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    let lx: Vec<T> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<T> = y.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly)?.slope)
}
