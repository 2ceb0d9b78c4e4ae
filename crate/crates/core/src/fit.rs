//! Least-squares fits for scaling laws.

use serde::Serialize;

/// Fit of log y = intercept + slope·log x.
#[derive(Clone, Debug, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Number of points kept after excluding those near the floor.
    pub used: usize,
}

/// Least-squares log-log fit, skipping points with y ≤ 10·floor or non-positive data.
/// With fewer than two usable points the slope is NaN.
pub fn loglog_fit(x: &[f64], y: &[f64], floor: f64) -> LogLogFit {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&a, &b)| a > 0.0 && b > 0.0 && b > 10.0 * floor && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let (slope, intercept) = linear_fit(&pts);
    LogLogFit { slope, intercept, used: pts.len() }
}

/// Least-squares (slope, intercept) of y against x; NaN for fewer than two points.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Successive log₂ ratios y[i]/y[i+1] (local rates for halving sequences).
pub fn local_rates(y: &[f64]) -> Vec<f64> {
    y.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn floor_exclusion() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y = [1.0, 0.25, 1e-15, 1e-16];
        let f = loglog_fit(&x, &y, 1e-15);
        assert_eq!(f.used, 2);
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!(loglog_fit(&[1.0], &[1.0], 0.0).slope.is_nan());
    }

    proptest! {
        #[test]
        fn recovers_power_laws(p in -6.0f64..6.0, c in 0.01f64..100.0) {
            let x: Vec<f64> = (0..6).map(|i| 2f64.powi(-i)).collect();
            let y: Vec<f64> = x.iter().map(|v| c * v.powf(p)).collect();
            let f = loglog_fit(&x, &y, 0.0);
            prop_assert!((f.slope - p).abs() < 1e-10);
            prop_assert!((f.intercept - c.ln()).abs() < 1e-9);
        }
    }
}
