//! Population statistics, normal sampling and the two-sample tests.

mod running;
mod sampling;
mod special;

pub use running::RunningStats;
pub use sampling::clt_sample;
pub use special::{inc_beta, ln_gamma};
pub use tests::{f_test, welch_t_test, Alternative, FTestResult, TTestResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least 2 observations per sample, got {0}")]
    TooFewSamples(usize),
    #[error("{0}")]
    ZeroVariance(&'static str),
    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDf(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distribution {
    StudentT { df: f64 },
    F { d1: f64, d2: f64 },
}

impl Distribution {
    fn validate(&self) -> Result<(), StatsError> {
        match *self {
            Distribution::StudentT { df } if df.is_nan() || df <= 0.0 => Err(StatsError::InvalidDf(df)),
            Distribution::F { d1, .. } if d1.is_nan() || d1 <= 0.0 => Err(StatsError::InvalidDf(d1)),
            Distribution::F { d2, .. } if d2.is_nan() || d2 <= 0.0 => Err(StatsError::InvalidDf(d2)),
            _ => Ok(()),
        }
    }
}

/// Upper tail `P(X > x)`.
pub fn tail_probability(dist: Distribution, x: f64) -> Result<f64, StatsError> {
    dist.validate()?;
    Ok(match dist {
        Distribution::StudentT { df } => {
            let half = 0.5 * inc_beta(df / 2.0, 0.5, df / (df + x * x));
            if x >= 0.0 {
                half
            } else {
                1.0 - half
            }
        }
        Distribution::F { d1, d2 } => {
            if x <= 0.0 {
                1.0
            } else {
                inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))
            }
        }
    })
}

/// `x` such that `P(X <= x) = p`, by bisection on the tail.
pub fn quantile(dist: Distribution, p: f64) -> Result<f64, StatsError> {
    dist.validate()?;
    assert!(p > 0.0 && p < 1.0, "quantile level {p} outside (0, 1)");
    let cdf = |x: f64| 1.0 - tail_probability(dist, x).expect("validated");
    let (mut lo, mut hi) = match dist {
        Distribution::StudentT { .. } => (-1.0, 1.0),
        Distribution::F { .. } => (0.0, 1.0),
    };
    while cdf(hi) < p {
        hi *= 2.0;
    }
    if let Distribution::StudentT { .. } = dist {
        while cdf(lo) > p {
            lo *= 2.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
