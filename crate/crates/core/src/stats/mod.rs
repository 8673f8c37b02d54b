//! Pass rates, exclusion amplification, binomial intervals, pool
//! extrapolation and OLS trend tests.

mod interval;
mod tally;
mod trend;

use thiserror::Error;

pub use interval::{binomial_interval, extrapolate_pool, z_critical, IntervalEstimate, IntervalMethod};
pub use tally::{pass_rate, GroupCount, GroupKey, Tally};
pub use trend::{ols_trend, TrendResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("group has no raw samples")]
    EmptyGroup,
    #[error("nothing passed the filter globally")]
    NoGlobalPasses,
    #[error("invalid counts: {successes} successes of {trials} trials")]
    InvalidCounts { successes: u64, trials: u64 },
    #[error("confidence {0} outside (0, 1)")]
    InvalidConfidence(f64),
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("x values are all equal")]
    DegenerateX,
    #[error("age range ({0}, {1}) is not ordered")]
    BadAgeRange(u32, u32),
}

/// Exclusion amplification of group `g`: its pass rate over the global pass
/// rate, `p_g / P`. Equal to the group's share of the filtered set over its
/// share of the raw set.
pub fn amplification_index(g: &GroupCount, global: &GroupCount) -> Result<f64, StatsError> {
    let (num, den) = amplification_exact(g, global)?;
    Ok(num as f64 / den as f64)
}

/// [`amplification_index`] as a reduced fraction `(num, den)`:
/// `(passed_g · raw_global) / (raw_g · passed_global)`.
pub fn amplification_exact(g: &GroupCount, global: &GroupCount) -> Result<(u128, u128), StatsError> {
    if g.raw == 0 {
        return Err(StatsError::EmptyGroup);
    }
    if global.passed == 0 {
        return Err(StatsError::NoGlobalPasses);
    }
    let num = g.passed as u128 * global.raw as u128;
    let den = g.raw as u128 * global.passed as u128;
    let d = gcd(num, den);
    Ok((num / d, den / d))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Decade label for an age range, bucketed by the integer midpoint:
/// `(18, 24)` has midpoint 21 and lands in `"20-29"`.
pub fn age_decade_bucket(low: u32, high: u32) -> Result<String, StatsError> {
    if low > high {
        return Err(StatsError::BadAgeRange(low, high));
    }
    let mid = (low + high) / 2;
    let start = mid / 10 * 10;
    Ok(format!("{}-{}", start, start + 9))
}
