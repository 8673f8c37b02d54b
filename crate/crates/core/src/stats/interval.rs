use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    /// Wald interval `p ± z·sqrt(p(1-p)/n)`, clamped to `[0, 1]`.
    Normal,
    /// Exact interval from beta quantiles.
    #[default]
    ClopperPearson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub point: f64,
    pub low: f64,
    pub high: f64,
    pub method: IntervalMethod,
    pub confidence: f64,
}

/// Two-sided standard normal critical value for `confidence`.
pub fn z_critical(confidence: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

pub fn binomial_interval(
    successes: u64,
    trials: u64,
    confidence: f64,
    method: IntervalMethod,
) -> Result<IntervalEstimate, StatsError> {
    if trials == 0 || successes > trials {
        return Err(StatsError::InvalidCounts { successes, trials });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::InvalidConfidence(confidence));
    }
    let n = trials as f64;
    let x = successes as f64;
    let point = x / n;
    let (low, high) = match method {
        IntervalMethod::Normal => {
            let half = z_critical(confidence) * (point * (1.0 - point) / n).sqrt();
            ((point - half).max(0.0), (point + half).min(1.0))
        }
        IntervalMethod::ClopperPearson => {
            let alpha = 1.0 - confidence;
            let low = if successes == 0 {
                0.0
            } else {
                Beta::new(x, n - x + 1.0).expect("valid beta").inverse_cdf(alpha / 2.0)
            };
            let high = if successes == trials {
                1.0
            } else {
                Beta::new(x + 1.0, n - x).expect("valid beta").inverse_cdf(1.0 - alpha / 2.0)
            };
            // Quantile rounding must not push a bound past the point estimate.
            (low.min(point), high.max(point))
        }
    };
    Ok(IntervalEstimate { point, low, high, method, confidence })
}

/// Scale a proportion interval to counts in a pool of `pool_size` items.
pub fn extrapolate_pool(interval: &IntervalEstimate, pool_size: u64) -> (u64, u64) {
    let p = pool_size as f64;
    ((interval.low * p).round() as u64, (interval.high * p).round() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_zero_successes_starts_at_zero() {
        let ci = binomial_interval(0, 50, 0.95, IntervalMethod::ClopperPearson).unwrap();
        assert_eq!(ci.low, 0.0);
        // 1 - 0.025^(1/50)
        assert!((ci.high - 0.071_121_736_464_197_6).abs() < 1e-9);
    }

    #[test]
    fn normal_half_width_at_one_half() {
        let ci = binomial_interval(50, 100, 0.95, IntervalMethod::Normal).unwrap();
        assert!((ci.point - 0.5).abs() < 1e-12);
        assert!((ci.high - ci.point - 0.098).abs() < 1e-3);
        assert!((ci.point - ci.low - 0.098).abs() < 1e-3);
    }

    #[test]
    fn clopper_pearson_matches_reference_quantiles() {
        // scipy.stats.beta.ppf(0.025, 7, 14) and beta.ppf(0.975, 8, 13).
        let ci = binomial_interval(7, 20, 0.95, IntervalMethod::ClopperPearson).unwrap();
        assert!((ci.low - 0.153_909_204_784_541_2).abs() < 1e-8, "{}", ci.low);
        assert!((ci.high - 0.592_188_534_532_828_2).abs() < 1e-8, "{}", ci.high);
    }

    #[test]
    fn nsfw_share_interval_surrounds_point() {
        for m in [IntervalMethod::Normal, IntervalMethod::ClopperPearson] {
            let ci = binomial_interval(4104, 400_000, 0.95, m).unwrap();
            assert!((ci.point - 0.01026).abs() < 1e-12);
            assert!(ci.low < ci.point && ci.point < ci.high);
            assert!(ci.high - ci.low < 0.001);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(binomial_interval(3, 2, 0.95, IntervalMethod::Normal).is_err());
        assert!(binomial_interval(0, 0, 0.95, IntervalMethod::Normal).is_err());
        assert!(binomial_interval(1, 2, 1.0, IntervalMethod::Normal).is_err());
    }

    #[test]
    fn extrapolation_rounds_each_end() {
        let ci = IntervalEstimate { point: 0.3, low: 0.25, high: 0.35, method: IntervalMethod::Normal, confidence: 0.95 };
        assert_eq!(extrapolate_pool(&ci, 100), (25, 35));
        let p = IntervalEstimate { point: 0.123, low: 0.123, high: 0.123, ..ci };
        assert_eq!(extrapolate_pool(&p, 1000), (123, 123));
    }
}
