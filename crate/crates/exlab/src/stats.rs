//! Small statistics toolbox shared by the Monte Carlo experiments: exact
//! binomial confidence intervals, a monotone-trend test, and least squares.

use statrs::function::beta::beta_reg;

/// Exact (Clopper–Pearson) two-sided binomial confidence interval for `k`
/// successes in `n` trials. Exact coverage matters here: site densities sit
/// arbitrarily close to 0 and 1, where the normal approximation undercovers.
pub fn binomial_ci(k: u64, n: u64, confidence: f64) -> (f64, f64) {
    assert!(k <= n && n > 0);
    assert!(confidence > 0.0 && confidence < 1.0);
    let a = 1.0 - confidence;
    let lo = if k == 0 {
        0.0
    } else {
        beta_quantile(k as f64, (n - k + 1) as f64, a / 2.0)
    };
    let hi = if k == n {
        1.0
    } else {
        beta_quantile((k + 1) as f64, (n - k) as f64, 1.0 - a / 2.0)
    };
    (lo, hi)
}

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta.
/// The library's generic inverse stops near 1e-5; endpoint probabilities
/// here need full precision.
fn beta_quantile(a: f64, b: f64, q: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Mann–Kendall trend statistic for a time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendTest {
    /// Raw score: number of increasing pairs minus decreasing pairs.
    pub s: i64,
    /// Tie-corrected variance of the score under the no-trend null.
    pub variance: f64,
    /// Continuity-corrected normal score.
    pub z: f64,
}

impl TrendTest {
    /// One-sided test for a decreasing trend at the given confidence
    /// (0.95 → z threshold -1.645).
    pub fn decreasing_at(&self, confidence: f64) -> bool {
        let threshold = -standard_normal_quantile(confidence);
        self.z <= threshold
    }
}

/// Compute the Mann–Kendall score, its tie-corrected null variance, and the
/// continuity-corrected z value. Series shorter than 2 get z = 0.
pub fn mann_kendall(series: &[f64]) -> TrendTest {
    let n = series.len();
    let mut s: i64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += match series[j].partial_cmp(&series[i]).expect("non-NaN series") {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => -1,
                std::cmp::Ordering::Equal => 0,
            };
        }
    }
    // Tie groups: runs of equal values in sorted order.
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut run = 1usize;
    for i in 1..=n {
        if i < n && sorted[i] == sorted[i - 1] {
            run += 1;
        } else {
            if run > 1 {
                let t = run as f64;
                tie_term += t * (t - 1.0) * (2.0 * t + 5.0);
            }
            run = 1;
        }
    }
    let nf = n as f64;
    let variance = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - tie_term) / 18.0;
    let z = if variance <= 0.0 {
        0.0
    } else if s > 0 {
        (s as f64 - 1.0) / variance.sqrt()
    } else if s < 0 {
        (s as f64 + 1.0) / variance.sqrt()
    } else {
        0.0
    };
    TrendTest { s, variance, z }
}

/// Upper quantile of the standard normal (one-sided), via statrs.
fn standard_normal_quantile(confidence: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(confidence)
}

/// Ordinary least squares line `y ~ intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points to fit a line");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    assert!(sxx > 0.0, "degenerate x values");
    let slope = sxy / sxx;
    LineFit { slope, intercept: my - slope * mx }
}

/// Sample mean and standard deviation (n-1 denominator).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn binomial_ci_degenerate_counts() {
        let (lo, hi) = binomial_ci(0, 20, 0.95);
        assert_eq!(lo, 0.0);
        // k = 0 upper endpoint solves (1-p)^n = alpha/2.
        assert_abs_diff_eq!(hi, 1.0 - 0.025f64.powf(1.0 / 20.0), epsilon = 1e-12);
        let (lo2, hi2) = binomial_ci(20, 20, 0.95);
        assert_eq!(hi2, 1.0);
        assert_abs_diff_eq!(lo2, 0.025f64.powf(1.0 / 20.0), epsilon = 1e-12);
    }

    #[test]
    fn binomial_ci_single_trial_is_maximal() {
        let (lo, hi) = binomial_ci(1, 1, 0.95);
        assert_abs_diff_eq!(lo, 0.025, epsilon = 1e-12);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn binomial_ci_contains_point_estimate() {
        for n in [5u64, 50, 500] {
            for k in 0..=n {
                let (lo, hi) = binomial_ci(k, n, 0.95);
                let p = k as f64 / n as f64;
                assert!(lo <= p + 1e-12 && p <= hi + 1e-12, "k={k} n={n}");
                assert!(lo >= 0.0 && hi <= 1.0);
            }
        }
    }

    #[test]
    fn binomial_ci_coverage_at_extreme_p() {
        // Long-run coverage at p = 0.98, n = 200: the interval must contain
        // p for at least ~95% of outcomes drawn from Binomial(n, p). Checked
        // by direct summation of the binomial pmf over covered k.
        use statrs::function::gamma::ln_gamma;
        let (n, p) = (200u64, 0.98f64);
        let ln_pmf = |k: u64| {
            ln_gamma((n + 1) as f64) - ln_gamma((k + 1) as f64)
                - ln_gamma((n - k + 1) as f64)
                + k as f64 * p.ln()
                + (n - k) as f64 * (1.0 - p).ln()
        };
        let mut covered = 0.0;
        for k in 0..=n {
            let (lo, hi) = binomial_ci(k, n, 0.95);
            if lo <= p && p <= hi {
                covered += ln_pmf(k).exp();
            }
        }
        assert!(covered >= 0.95, "coverage {covered}");
    }

    #[test]
    fn mann_kendall_monotone_series() {
        let dec: Vec<f64> = (0..11).map(|i| 10.0 - i as f64).collect();
        let t = mann_kendall(&dec);
        assert_eq!(t.s, -55);
        assert!(t.decreasing_at(0.95));

        let inc: Vec<f64> = (0..11).map(|i| i as f64).collect();
        assert!(!mann_kendall(&inc).decreasing_at(0.95));
    }

    #[test]
    fn mann_kendall_flat_series_is_null() {
        let t = mann_kendall(&[1.0; 12]);
        assert_eq!(t.s, 0);
        assert_eq!(t.z, 0.0);
        assert!(!t.decreasing_at(0.95));
    }

    #[test]
    fn mann_kendall_tie_correction_reduces_variance() {
        let with_ties = mann_kendall(&[3.0, 2.0, 2.0, 1.0]);
        let without = mann_kendall(&[3.0, 2.5, 2.0, 1.0]);
        assert!(with_ties.variance < without.variance);
    }

    #[test]
    fn mann_kendall_noisy_but_trending() {
        // Slow decay plus deterministic wiggle: still detected.
        let series: Vec<f64> =
            (0..11).map(|i| 1.0 / (1.0 + i as f64) + 0.01 * ((i % 3) as f64)).collect();
        assert!(mann_kendall(&series).decreasing_at(0.95));
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let f = linear_fit(&xs, &ys);
        assert_abs_diff_eq!(f.slope, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.intercept, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_sd_known_values() {
        let (m, sd) = mean_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_abs_diff_eq!(m, 5.0);
        assert_abs_diff_eq!(sd * sd, 32.0 / 7.0, epsilon = 1e-12);
    }
}
