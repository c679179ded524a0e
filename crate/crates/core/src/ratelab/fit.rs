//! Least-squares fits of `log value` against `log n`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::RatelabError;

/// Fewest grid points a slope is reported for.
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// Two-sided 95% Student-t interval for the slope.
    pub ci95: (f64, f64),
    pub points: usize,
}

/// `log value = intercept + slope · log n + b · log log n` with `b` held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedFit {
    pub log_power: f64,
    #[serde(flatten)]
    pub fit: LogLogFit,
}

fn check(points: &[(f64, f64)]) -> Result<(), RatelabError> {
    if points.len() < MIN_FIT_POINTS {
        return Err(RatelabError::TooFewPoints {
            need: MIN_FIT_POINTS,
            got: points.len(),
        });
    }
    for &(n, v) in points {
        if !(n > 0.0) || !(v > 0.0) || !v.is_finite() {
            return Err(RatelabError::NonPositiveValue { n, value: v });
        }
    }
    Ok(())
}

fn ols(xy: &[(f64, f64)]) -> LogLogFit {
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xy
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let df = k - 2.0;
    let stderr = (rss / df / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df)
        .expect("df >= 2")
        .inverse_cdf(0.975);
    LogLogFit {
        slope,
        intercept,
        stderr,
        ci95: (slope - t * stderr, slope + t * stderr),
        points: xy.len(),
    }
}

/// Ordinary least squares on `(log n, log value)`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<LogLogFit, RatelabError> {
    check(points)?;
    let xy: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
    Ok(ols(&xy))
}

/// The power-law exponent after dividing out `(log n)^log_power`. Needs
/// every `n > 1`.
pub fn fit_log_corrected(
    points: &[(f64, f64)],
    log_power: f64,
) -> Result<CorrectedFit, RatelabError> {
    check(points)?;
    if let Some(&(n, value)) = points.iter().find(|p| p.0 <= 1.0) {
        return Err(RatelabError::NonPositiveValue { n, value });
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, v)| (n.ln(), v.ln() - log_power * n.ln().ln()))
        .collect();
    Ok(CorrectedFit {
        log_power,
        fit: ols(&xy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Vec<f64> {
        (7..=13).map(|e| (1u64 << e) as f64).collect()
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = grid()
            .into_iter()
            .map(|n| (n, 3.0 * n.powf(-0.5)))
            .collect();
        let f = fit_loglog(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
    }

    #[test]
    fn constant_values() {
        let pts: Vec<_> = grid().into_iter().map(|n| (n, 0.7)).collect();
        assert!(fit_loglog(&pts).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn log_factor_flattens_the_raw_slope() {
        let pts: Vec<_> = grid()
            .into_iter()
            .map(|n| (n, n.powf(-0.25) * n.ln().powf(0.75)))
            .collect();
        let raw = fit_loglog(&pts).unwrap().slope;
        assert!(raw > -0.25 && raw < 0.0, "{raw}");
        let corrected = fit_log_corrected(&pts, 0.75).unwrap();
        assert!((corrected.fit.slope + 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_points() {
        let pts = [(2.0, 1.0), (4.0, 0.0), (8.0, 1.0), (16.0, 1.0)];
        assert!(matches!(
            fit_loglog(&pts),
            Err(RatelabError::NonPositiveValue { .. })
        ));
        assert!(matches!(
            fit_loglog(&pts[..3]),
            Err(RatelabError::TooFewPoints { .. })
        ));
        let pts = [(1.0, 1.0), (4.0, 1.0), (8.0, 1.0), (16.0, 1.0)];
        assert!(fit_log_corrected(&pts, 0.5).is_err());
    }

    #[test]
    fn interval_covers_the_noisy_slope() {
        let noise = [0.03, -0.02, 0.01, -0.04, 0.02, 0.0, -0.01];
        let pts: Vec<_> = grid()
            .into_iter()
            .zip(noise)
            .map(|(n, e)| (n, n.powf(-0.3) * f64::exp(e)))
            .collect();
        let f = fit_loglog(&pts).unwrap();
        assert!(f.ci95.0 < -0.3 && -0.3 < f.ci95.1);
        assert!(f.ci95.1 < 0.0);
    }

    proptest! {
        #[test]
        fn scaling_values_only_moves_the_intercept(c in 0.01f64..100.0, a in -1.0f64..1.0) {
            let pts: Vec<_> = grid().into_iter().map(|n| (n, n.powf(a) * (1.0 + 0.1 * (n.ln()).sin()))).collect();
            let scaled: Vec<_> = pts.iter().map(|&(n, v)| (n, c * v)).collect();
            let (f, g) = (fit_loglog(&pts).unwrap(), fit_loglog(&scaled).unwrap());
            prop_assert!((f.slope - g.slope).abs() < 1e-10);
            prop_assert!((g.intercept - f.intercept - c.ln()).abs() < 1e-10);
        }
    }
}
