use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::special::{hurwitz_zeta, tail_sum};
use crate::{Error, Result};

/// Slowly varying factor of the interarrival tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SlowlyVarying {
    Constant { c: f64 },
    /// `c·(1 + ln n)^p`
    LogPower { c: f64, p: f64 },
}

impl SlowlyVarying {
    pub fn eval(&self, n: f64) -> f64 {
        match *self {
            SlowlyVarying::Constant { c } => c,
            SlowlyVarying::LogPower { c, p } => c * (1.0 + n.ln()).powf(p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = match *self {
            SlowlyVarying::Constant { c } | SlowlyVarying::LogPower { c, .. } => c,
        };
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("L.c", format!("scale must be positive, got {c}")));
        }
        if let SlowlyVarying::LogPower { p, .. } = *self {
            if !p.is_finite() {
                return Err(Error::param("L.p", "log exponent must be finite"));
            }
        }
        Ok(())
    }

    /// `max_λ |L(λn)/L(n) − 1|` over the given ratios at scale `n`.
    pub fn ratio_deviation(&self, n: f64, lambdas: &[f64]) -> f64 {
        let base = self.eval(n);
        lambdas
            .iter()
            .map(|&l| (self.eval(l * n) / base - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Normalized law `p(n) = C_α L(n) n^{-1-α}` on `n ≥ 1`.
///
/// Survival probabilities are tabulated up to `n_table`; beyond it they are
/// evaluated from the exact series remainder, so inverse-CDF sampling is exact
/// in distribution on the whole range.
#[derive(Debug, Clone)]
pub struct InterarrivalLaw {
    pub alpha: f64,
    pub l: SlowlyVarying,
    pub c_alpha: f64,
    pub n_table: u64,
    // sf[n] = P(τ > n) for n = 0..=n_table
    sf: Vec<f64>,
}

impl InterarrivalLaw {
    pub fn new(alpha: f64, l: SlowlyVarying, n_table: u64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0,1), got {alpha}")));
        }
        l.validate()?;
        if n_table < 16 {
            return Err(Error::param("n_table", "must be at least 16"));
        }
        let g = |n: f64| l.eval(n) * n.powf(-1.0 - alpha);
        let mut head = vec![0.0; n_table as usize + 1];
        for n in 1..=n_table as usize {
            head[n] = g(n as f64);
        }
        let tail = Self::raw_tail(alpha, l, n_table);
        // sum smallest terms first
        let mut sf = vec![0.0; n_table as usize + 1];
        sf[n_table as usize] = tail;
        for n in (1..=n_table as usize).rev() {
            sf[n - 1] = sf[n] + head[n];
        }
        let total = sf[0];
        let c_alpha = 1.0 / total;
        for v in sf.iter_mut() {
            *v *= c_alpha;
        }
        sf[0] = 1.0;
        Ok(InterarrivalLaw { alpha, l, c_alpha, n_table, sf })
    }

    // Σ_{n>m} L(n) n^{-1-α}, unnormalized.
    fn raw_tail(alpha: f64, l: SlowlyVarying, m: u64) -> f64 {
        match l {
            SlowlyVarying::Constant { c } => c * hurwitz_zeta(1.0 + alpha, m as f64 + 1.0),
            SlowlyVarying::LogPower { .. } => tail_sum(|x| l.eval(x) * x.powf(-1.0 - alpha), alpha, m),
        }
    }

    pub fn pmf(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let x = n as f64;
        self.c_alpha * self.l.eval(x) * x.powf(-1.0 - self.alpha)
    }

    /// `P(τ > n)`.
    pub fn survival(&self, n: u64) -> f64 {
        if n <= self.n_table {
            self.sf[n as usize]
        } else {
            self.c_alpha * Self::raw_tail(self.alpha, self.l, n)
        }
    }

    /// Smallest `n` with `P(τ > n) < v`, for `v ∈ (0, 1]`.
    pub fn quantile_survival(&self, v: f64) -> u64 {
        if v > self.sf[self.n_table as usize] {
            // first index with sf[n] < v; sf is nonincreasing
            let idx = self.sf.partition_point(|&s| s >= v);
            return idx as u64;
        }
        // Pareto guess from the tabulated edge, then bracket and bisect.
        let m = self.n_table as f64;
        let edge = self.sf[self.n_table as usize];
        let guess = (m * (v / edge).powf(-1.0 / self.alpha)).min(9.0e18);
        let mut lo = self.n_table;
        let mut hi = (guess as u64).max(lo + 1);
        while self.survival(hi) >= v {
            lo = hi;
            if hi >= u64::MAX / 4 {
                return hi;
            }
            hi = hi.saturating_mul(2);
        }
        // invariant: survival(lo) ≥ v > survival(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.survival(mid) >= v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    pub fn sample(&self, rng: &mut crate::par::Rng) -> u64 {
        // 1 − U lies in (0, 1]
        let v = 1.0 - rng.gen::<f64>();
        self.quantile_survival(v)
    }

    /// `Σ_n p(n)(1 − e^{−λn})` by direct summation plus the exact remainder.
    pub fn one_minus_laplace(&self, lambda: f64) -> f64 {
        let mut terms: Vec<f64> = (1..=self.n_table)
            .map(|n| self.pmf(n) * -(-lambda * n as f64).exp_m1())
            .collect();
        terms.reverse();
        let head = crate::stats::pairwise_sum(&terms);
        let (alpha, l) = (self.alpha, self.l);
        let tail = tail_sum(
            |x| l.eval(x) * x.powf(-1.0 - alpha) * -(-lambda * x).exp_m1(),
            alpha,
            self.n_table,
        );
        head + self.c_alpha * tail
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::replica_rng;
    use crate::special::zeta;

    #[test]
    fn constant_normalizer_is_inverse_zeta() {
        let law = InterarrivalLaw::new(0.5, SlowlyVarying::Constant { c: 1.0 }, 100_000).unwrap();
        assert!((law.c_alpha - 1.0 / zeta(1.5)).abs() < 1e-13);
        assert!((law.c_alpha - 0.382_793).abs() < 1e-6);
    }

    #[test]
    fn survival_continuous_across_table_edge() {
        for l in [SlowlyVarying::Constant { c: 2.0 }, SlowlyVarying::LogPower { c: 1.0, p: 1.5 }] {
            let law = InterarrivalLaw::new(0.4, l, 5000).unwrap();
            let inside = law.survival(4999);
            let outside = law.survival(5000) + law.pmf(5000);
            assert!((inside / outside - 1.0).abs() < 1e-11, "{l:?}");
            let beyond = law.survival(5001) + law.pmf(5001);
            assert!((beyond / law.survival(5000) - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn log_power_normalized() {
        let law = InterarrivalLaw::new(0.7, SlowlyVarying::LogPower { c: 1.0, p: -0.5 }, 20_000).unwrap();
        let mut s = law.survival(20_000);
        for n in 1..=20_000 {
            s += law.pmf(n);
        }
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quantile_is_inverse_of_survival() {
        let law = InterarrivalLaw::new(0.5, SlowlyVarying::Constant { c: 1.0 }, 1000).unwrap();
        for &v in &[0.9, 0.5, 0.1, 1e-2, 1e-3, 1e-5, 1e-9] {
            let n = law.quantile_survival(v);
            assert!(law.survival(n) < v, "v {v}");
            assert!(law.survival(n - 1) >= v, "v {v}");
        }
        assert_eq!(law.quantile_survival(1.0), 1);
    }

    #[test]
    fn sampling_deterministic() {
        let law = InterarrivalLaw::new(0.5, SlowlyVarying::Constant { c: 1.0 }, 1000).unwrap();
        let draw = || {
            let mut r = replica_rng(3, 0, 0);
            (0..50).map(|_| law.sample(&mut r)).collect::<Vec<u64>>()
        };
        let (a, b) = (draw(), draw());
        assert_eq!(a, b);
    }

    #[test]
    fn ratio_grid_for_log_power() {
        let l = SlowlyVarying::LogPower { c: 1.0, p: 2.0 };
        let lams = [0.5, 2.0, 10.0];
        assert!(l.ratio_deviation(1e12, &lams) < l.ratio_deviation(1e4, &lams));
        assert!(l.ratio_deviation(1e30, &lams) < 0.1);
    }
}
