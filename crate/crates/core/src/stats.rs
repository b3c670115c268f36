//! Summary statistics and goodness-of-fit tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Standard error of a proportion estimated from `n` Bernoulli draws.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n: usize,
    pub threshold: f64,
    pub pass: bool,
}

/// Asymptotic one-sample KS critical value with Stephens' small-sample factor.
pub fn ks_critical(n: usize, level: f64) -> f64 {
    let c = (-(level / 2.0).ln() / 2.0).sqrt();
    let rn = (n as f64).sqrt();
    c / (rn + 0.12 + 0.11 / rn)
}

/// Sup-distance between the empirical CDF of `sorted` and `cdf`.
///
/// The supremum runs over `y ≤ upper`; samples above `upper` (including the
/// `+∞` sentinel) count as censored. Pass `f64::INFINITY` for no censoring.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64, upper: f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut seen = 0usize;
    for (i, &x) in sorted.iter().enumerate() {
        if x > upper {
            break;
        }
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
        seen = i + 1;
    }
    if upper.is_finite() {
        d = d.max((cdf(upper) - seen as f64 / n).abs());
    }
    d
}

pub fn ks_test(sorted: &[f64], cdf: impl Fn(f64) -> f64, level: f64, upper: f64) -> KsReport {
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let statistic = ks_statistic(sorted, cdf, upper);
    let threshold = ks_critical(sorted.len(), level);
    KsReport { statistic, n: sorted.len(), threshold, pass: statistic <= threshold }
}

/// Sorts in place, NaN last.
pub fn sort_samples(xs: &mut [f64]) {
    xs.sort_by(|a, b| a.total_cmp(b));
}

/// Pearson χ² statistic and its upper-tail p-value.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected.len());
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = (observed.len() - 1) as f64;
    let p = 1.0 - ChiSquared::new(dof).expect("dof > 0").cdf(stat);
    (stat, p)
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}
