//! Log-log regression records shared by every exponent estimator.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("scale range spans {got:.2} octaves, need at least {need}")]
    TooFewOctaves { need: f64, got: f64 },
    #[error("log of a non-positive value at point {0}")]
    NonPositive(usize),
}

/// Unweighted least-squares fit of log-log data. The residual is the largest
/// absolute deviation from the fitted line, reported so downstream checks can
/// reject bad fits instead of trusting slopes blindly.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub scale_range: (f64, f64),
    pub n_points: usize,
}

/// Fits `y = slope * x + intercept` on already-log-scaled points.
pub fn fit_line(pts: &[(f64, f64)]) -> Result<DecayFit, FitError> {
    if pts.len() < 2 {
        return Err(FitError::TooFewPoints { need: 2, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(FitError::TooFewPoints { need: 2, got: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = pts
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).abs())
        .fold(0.0, f64::max);
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    Ok(DecayFit { slope, intercept, residual, scale_range: (lo, hi), n_points: pts.len() })
}

/// Same as [`fit_line`] but enforces a minimum span in octaves (the x values
/// are base-2 logarithms of the scale).
pub fn fit_line_spanning(pts: &[(f64, f64)], min_octaves: f64) -> Result<DecayFit, FitError> {
    let fit = fit_line(pts)?;
    let span = fit.scale_range.1 - fit.scale_range.0;
    if span + 1e-12 < min_octaves {
        return Err(FitError::TooFewOctaves { need: min_octaves, got: span });
    }
    Ok(fit)
}

/// Base-2 logarithms of `(x, y)` pairs; rejects non-positive values.
pub fn log2_points(pts: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, FitError> {
    pts.iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            if x <= 0.0 || y <= 0.0 {
                Err(FitError::NonPositive(i))
            } else {
                Ok((x.log2(), y.log2()))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line_recovered() {
        let pts: Vec<(f64, f64)> = (0..6).map(|j| (j as f64, 1.5 * j as f64 - 2.0)).collect();
        let fit = fit_line(&pts).unwrap();
        assert_relative_eq!(fit.slope, 1.5, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, -2.0, epsilon = 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn octave_span_enforced() {
        let pts = vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)];
        assert!(fit_line_spanning(&pts, 4.0).is_err());
        assert!(fit_line_spanning(&pts, 2.0).is_ok());
    }

    #[test]
    fn residual_is_max_deviation() {
        let pts = vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.5)];
        let fit = fit_line(&pts).unwrap();
        let worst = pts
            .iter()
            .map(|p| (p.1 - (fit.slope * p.0 + fit.intercept)).abs())
            .fold(0.0, f64::max);
        assert_relative_eq!(fit.residual, worst);
    }
}
