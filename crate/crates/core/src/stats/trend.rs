use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

/// Least-squares line with a two-sided t-test on the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendResult {
    pub slope: f64,
    pub intercept: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Fit `y = intercept + slope·x`.
///
/// A perfect fit (zero residual variance) with nonzero slope reports
/// `p_value = 0`; a perfect flat fit reports 1.
pub fn ols_trend(points: &[(f64, f64)]) -> Result<TrendResult, StatsError> {
    let n = points.len();
    if n < 3 {
        return Err(StatsError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || !sxx.is_finite() {
        return Err(StatsError::DegenerateX);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let df = nf - 2.0;
    let se = (sse / df / sxx).sqrt();
    let p_value = if se == 0.0 {
        if slope == 0.0 { 1.0 } else { 0.0 }
    } else {
        let t = (slope / se).abs();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * dist.sf(t)).clamp(0.0, 1.0)
    };
    Ok(TrendResult { slope, intercept, p_value, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_have_zero_p() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let r = ols_trend(&pts).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12);
        assert!((r.intercept - 1.0).abs() < 1e-12);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn matches_reference_regression() {
        // scipy.stats.linregress([1,2,3,4,5,6], [2.1,3.9,6.2,7.8,10.1,12.2])
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let ys = [2.1, 3.9, 6.2, 7.8, 10.1, 12.2];
        let pts: Vec<_> = xs.iter().copied().zip(ys.iter().copied()).collect();
        let r = ols_trend(&pts).unwrap();
        assert!((r.slope - 2.02).abs() < 1e-9, "{}", r.slope);
        assert!((r.intercept + 0.02).abs() < 1e-9, "{}", r.intercept);
        assert!((r.p_value - 1.201_360_256_021_785_8e-6).abs() < 1e-12, "{}", r.p_value);
    }

    #[test]
    fn constant_shift_in_y_keeps_slope() {
        let pts = [(0.0, 1.0), (1.0, 0.5), (2.0, 2.5), (3.0, 2.0)];
        let shifted: Vec<_> = pts.iter().map(|&(x, y)| (x, y + 10.0)).collect();
        let a = ols_trend(&pts).unwrap();
        let b = ols_trend(&shifted).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-12);
        assert!((a.p_value - b.p_value).abs() < 1e-12);
        assert!((b.intercept - a.intercept - 10.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(ols_trend(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]), Err(StatsError::DegenerateX)));
        assert!(matches!(ols_trend(&[(1.0, 1.0), (2.0, 2.0)]), Err(StatsError::TooFewPoints(2))));
    }
}
