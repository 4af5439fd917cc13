//! Small statistical toolbox: normal tails, OLS, KS distance, binomial
//! confidence bounds, and the Monte Carlo estimate record.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("regression abscissae are degenerate (zero variance)")]
    DegenerateRegression,
}

/// Result of a replica-parallel Monte Carlo estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    /// Sample standard deviation of per-replica values divided by sqrt(replicas).
    pub stderr: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Half-open stream id range [lo, hi) that produced the estimate.
    pub stream_range: (u64, u64),
}

impl McEstimate {
    pub fn from_replicas(values: &[f64], seed: u64, stream_range: (u64, u64)) -> Self {
        let (value, stderr) = mean_and_stderr(values);
        Self { value, stderr, replicas: values.len(), seed, stream_range }
    }
}

/// Sample mean and its standard error (0 for a single sample).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n > 0, "mean of empty sample");
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Standard normal upper tail P(Z > x).
pub fn normal_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    1.0 - normal_tail(x)
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "KS needs non-empty samples");
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Large-sample KS critical value sqrt(-ln(alpha/2)/2) * sqrt((n+m)/(nm)).
pub fn ks_critical_value(alpha: f64, n: usize, m: usize) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0);
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Least-squares slope of y on x with its standard error.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), StatsError> {
    let n = xs.len();
    assert_eq!(n, ys.len(), "mismatched regression inputs");
    if n < 3 {
        return Err(StatsError::TooFewSamples { need: 3, got: n });
    }
    let xbar = xs.iter().sum::<f64>() / n as f64;
    let ybar = ys.iter().sum::<f64>() / n as f64;
    let sxx = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum::<f64>();
    if sxx <= 0.0 {
        return Err(StatsError::DegenerateRegression);
    }
    let sxy = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum::<f64>();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum::<f64>();
    let sigma_sq = rss / (n - 2) as f64;
    Ok((slope, (sigma_sq / sxx).sqrt()))
}

/// Inverse of the regularized incomplete beta I_x(a, b) in x, by bisection
/// on the CDF. The stock quantile routines bisect on a coarse fixed grid;
/// confidence bounds here are consumed at 1e-3 probability scales, which
/// needs the quantile good to ~1e-12 absolute.
fn beta_inv_reg(a: f64, b: f64, p: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0 && (0.0..=1.0).contains(&p));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One-sided Clopper-Pearson upper confidence bound for a binomial p.
pub fn clopper_pearson_upper(successes: usize, trials: usize, confidence: f64) -> f64 {
    assert!(trials > 0 && successes <= trials);
    assert!(confidence > 0.0 && confidence < 1.0);
    if successes == trials {
        return 1.0;
    }
    let a = successes as f64 + 1.0;
    let b = (trials - successes) as f64;
    beta_inv_reg(a, b, confidence)
}

/// One-sided Clopper-Pearson lower confidence bound for a binomial p.
pub fn clopper_pearson_lower(successes: usize, trials: usize, confidence: f64) -> f64 {
    assert!(trials > 0 && successes <= trials);
    assert!(confidence > 0.0 && confidence < 1.0);
    if successes == 0 {
        return 0.0;
    }
    let a = successes as f64;
    let b = (trials - successes) as f64 + 1.0;
    beta_inv_reg(a, b, 1.0 - confidence)
}

/// Effective sample size (sum w)^2 / sum w^2 of importance-type weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr_match_hand_computation() {
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // var = 5/3, se = sqrt(5/12)
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn normal_tail_reference_values() {
        assert!((normal_tail(0.0) - 0.5).abs() < 1e-15);
        // 1 - Phi(1) = 0.15865525393145707; erfc here is good to ~1e-11.
        assert!((normal_tail(1.0) - 0.158_655_253_931_457_07).abs() < 2e-11);
        // 2 * (1 - Phi(1)) is the reflection-principle tail at x = 1.
        assert!((2.0 * normal_tail(1.0) - 0.317_31).abs() < 5e-6);
    }

    #[test]
    fn ks_statistic_on_disjoint_samples_is_one() {
        let a = [1.0, 2.0, 3.0];
        let b = [10.0, 11.0];
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }

    #[test]
    fn ks_statistic_identical_samples_is_zero() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn ks_handles_interleaved_ties() {
        let a = [1.0, 1.0, 2.0];
        let b = [1.0, 2.0, 2.0];
        // F_a(1) = 2/3, F_b(1) = 1/3.
        assert!((ks_two_sample(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ks_critical_value_at_one_percent() {
        // c(0.01) = 1.62762; equal sizes 1e4 -> c * sqrt(2/1e4).
        let crit = ks_critical_value(0.01, 10_000, 10_000);
        assert!((crit - 1.627_62 * (2.0f64 / 10_000.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let (slope, se) = ols_slope(&xs, &ys).unwrap();
        assert!((slope + 2.0).abs() < 1e-14);
        assert!(se < 1e-13);
    }

    #[test]
    fn ols_stderr_matches_hand_computation() {
        // xs centered give sxx = 5, sxy = -1: slope -0.2, intercept 0.3,
        // residuals (0.2, -0.6, 0.6, -0.2), RSS 0.8, se = sqrt(0.4/5).
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.5, -0.5, 0.5, -0.5];
        let (slope, se) = ols_slope(&xs, &ys).unwrap();
        assert!((slope + 0.2).abs() < 1e-14);
        assert!((se - 0.08f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn clopper_pearson_zero_successes_matches_rule_of_three() {
        // Upper bound at 95% with 0/n is exactly 1 - 0.05^{1/n} ~ 3/n.
        let ub = clopper_pearson_upper(0, 1000, 0.95);
        assert!((ub - (1.0 - 0.05f64.powf(1.0 / 1000.0))).abs() < 1e-11);
        assert_eq!(clopper_pearson_lower(0, 1000, 0.95), 0.0);
    }

    #[test]
    fn clopper_pearson_bounds_bracket_the_point_estimate() {
        let lo = clopper_pearson_lower(50, 1000, 0.99);
        let hi = clopper_pearson_upper(50, 1000, 0.99);
        assert!(lo < 0.05 && 0.05 < hi);
        assert!(lo > 0.03 && hi < 0.08);
    }

    #[test]
    fn ess_of_equal_weights_is_count() {
        assert_eq!(effective_sample_size(&[2.0; 50]), 50.0);
        let skewed = effective_sample_size(&[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(skewed, 1.0);
    }
}
