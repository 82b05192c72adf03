//! Log-log least squares against the Japanese bracket.

use serde::{Deserialize, Serialize};

use crate::{japanese_bracket, DnlsError, Result};

/// Fewest samples accepted by [`fit_power_law`].
pub const MIN_FIT_POINTS: usize = 10;

/// `value ≈ constant · ⟨t⟩^exponent`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub quantity: String,
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub t_range: (f64, f64),
}

/// Ordinary least squares of `ln value` on `ln ⟨t⟩` over the samples with
/// `t ≥ t_min`.
pub fn fit_power_law(quantity: &str, series: &[(f64, f64)], t_min: f64) -> Result<FitResult> {
    let used: Vec<(f64, f64)> = series.iter().copied().filter(|&(t, _)| t >= t_min).collect();
    if used.len() < MIN_FIT_POINTS {
        return Err(DnlsError::Argument(format!(
            "{quantity}: {} samples with t ≥ {t_min}, need {MIN_FIT_POINTS}",
            used.len()
        )));
    }
    if let Some(&(t, v)) = used.iter().find(|&&(_, v)| !(v > 0.0 && v.is_finite())) {
        return Err(DnlsError::Argument(format!(
            "{quantity}: nonpositive value {v} at t = {t}"
        )));
    }
    let (slope, intercept, r2) =
        loglog_ols(&used).ok_or_else(|| DnlsError::Argument(format!("{quantity}: all samples share one time")))?;
    let t_lo = used.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_hi = used.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        quantity: quantity.to_string(),
        exponent: slope,
        constant: intercept.exp(),
        r_squared: r2,
        t_range: (t_lo, t_hi),
    })
}

/// Slope, intercept and r² of `ln v` against `ln ⟨t⟩`. `None` when the
/// abscissae are degenerate.
pub(crate) fn loglog_ols(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|&(t, _)| japanese_bracket(t).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 1e-300 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy <= 1e-300 {
        1.0
    } else {
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Some((slope, intercept, r2))
}
