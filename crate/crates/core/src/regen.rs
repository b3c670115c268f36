//! Stable regenerative sets, Mathéron functionals and their limit laws.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Beta, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::par::{self, stream, Rng};
use crate::quad::{integrate, integrate_2d, integrate_to_inf};
use crate::stats::{ks_critical, ks_test, mean_se, KsReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetSource {
    Mrp,
    Subordinator,
    Wetting,
}

/// Finite closed subset of `[0, 1]`: sorted, deduplicated, containing 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedSetSample {
    pub points: Vec<f64>,
    pub source: SetSource,
}

impl ClosedSetSample {
    /// Normalizes `points`: drops values outside `[0, 1]`, sorts, dedups and adds 0.
    pub fn new(mut points: Vec<f64>, source: SetSource) -> Self {
        points.retain(|p| (0.0..=1.0).contains(p));
        points.push(0.0);
        points.sort_by(|a, b| a.total_cmp(b));
        points.dedup();
        ClosedSetSample { points, source }
    }

    /// `(d_t, g_t)`; see [`matheron_functionals`].
    pub fn matheron(&self, t: f64) -> (f64, f64) {
        matheron_functionals(self, t)
    }
}

/// `d_t = inf(F ∩ (t, ∞))` (`+∞` if empty) and `g_t = sup(F ∩ [0, t))`
/// (0 if empty, which covers `t = 0`).
pub fn matheron_functionals(set: &ClosedSetSample, t: f64) -> (f64, f64) {
    let p = &set.points;
    let k = p.partition_point(|&x| x <= t);
    let d = p.get(k).copied().unwrap_or(f64::INFINITY);
    let below = p.partition_point(|&x| x < t);
    let g = if below == 0 { 0.0 } else { p[below - 1] };
    (d, g)
}

/// Positive α-stable variable with `E e^{−λS} = e^{−λ^α}` (Kanter's representation).
pub fn sample_positive_stable(alpha: f64, rng: &mut Rng) -> f64 {
    let u = PI * rng.gen::<f64>();
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = ((1.0 - alpha) * u).sin() / e;
    a * b.powf((1.0 - alpha) / alpha)
}

/// Subordinator increment over a time step `h`.
///
/// For `α = 1/2` this is the Lévy variable `h²/(2Z²)`; otherwise a Kanter
/// draw scaled by `h^{1/α}`. Both have Laplace transform `e^{−h λ^α}` up to
/// the constant `√2` at `α = 1/2`, which does not affect the range law.
pub fn subordinator_increment(alpha: f64, h: f64, rng: &mut Rng) -> f64 {
    if alpha == 0.5 {
        let z: f64 = StandardNormal.sample(rng);
        h * h / (2.0 * z * z)
    } else {
        h.powf(1.0 / alpha) * sample_positive_stable(alpha, rng)
    }
}

/// Range of the α-stable subordinator on the time grid `{k·step}`, cut at 1.
pub fn sample_regenerative_set(alpha: f64, step: f64, rng: &mut Rng) -> Result<ClosedSetSample> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0,1), got {alpha}")));
    }
    if !(step > 0.0 && step <= 1e-2) {
        return Err(Error::param("step", format!("must lie in (0, 1e-2], got {step}")));
    }
    let mut pts = vec![0.0];
    let mut s = 0.0;
    loop {
        s += subordinator_increment(alpha, step, rng);
        if s > 1.0 {
            break;
        }
        pts.push(s);
    }
    Ok(ClosedSetSample { points: pts, source: SetSource::Subordinator })
}

/// Many independent regenerative-set samples, one derived stream each.
pub fn sample_regenerative_sets(alpha: f64, step: f64, count: usize, seed: u64) -> Result<Vec<ClosedSetSample>> {
    // validate once so the replicas cannot fail
    sample_regenerative_set(alpha, step, &mut par::replica_rng(seed, stream::REGEN, u64::MAX))?;
    Ok(par::map_replicas(count, seed, stream::REGEN, |_, rng| {
        sample_regenerative_set(alpha, step, rng).expect("validated parameters")
    }))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("must lie in (0,1), got {alpha}")))
    }
}

/// `P(d_t ≤ y)` for the α-stable regenerative set.
///
/// Near `t` the density `sin(απ)/π · t^α/(u(u−t)^α)` is integrated after
/// `u = t + w^{1/(1−α)}`; far from `t` the survival is integrated after
/// `r = t/u = s^{1/α}`. Both integrands are bounded. `α = 1/2` uses
/// `P(d_t > y) = (2/π) arctan √(t/(y−t))`.
pub fn dt_law_cdf(alpha: f64, t: f64, y: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(t > 0.0) {
        return Err(Error::param("t", format!("must be positive, got {t}")));
    }
    if y < t {
        return Err(Error::param("y", format!("need y ≥ t, got y = {y} < t = {t}")));
    }
    if y == t {
        return Ok(0.0);
    }
    if y.is_infinite() {
        return Ok(1.0);
    }
    if alpha == 0.5 {
        return Ok(1.0 - 2.0 / PI * (t / (y - t)).sqrt().atan());
    }
    Ok(dt_cdf_quadrature(alpha, t, y))
}

fn dt_cdf_quadrature(alpha: f64, t: f64, y: f64) -> f64 {
    let c = (alpha * PI).sin() / PI;
    if y <= 2.0 * t {
        let top = (y - t).powf(1.0 - alpha);
        let f = |w: f64| {
            let u = t + w.powf(1.0 / (1.0 - alpha));
            c * t.powf(alpha) / ((1.0 - alpha) * u)
        };
        integrate(f, 0.0, top, 1e-15, 1e-13).value
    } else {
        1.0 - dt_survival_far(alpha, t, y)
    }
}

// P(d_t > y) for y ≥ 2t.
fn dt_survival_far(alpha: f64, t: f64, y: f64) -> f64 {
    let c = (alpha * PI).sin() / PI;
    let top = (t / y).powf(alpha);
    integrate(|s: f64| c / alpha * (1.0 - s.powf(1.0 / alpha)).powf(-alpha), 0.0, top, 1e-15, 1e-13).value
}

/// Closed-form limit laws of the Mathéron functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitLawTable {
    pub alpha: f64,
}

impl LimitLawTable {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(LimitLawTable { alpha })
    }

    pub fn dt_density(&self, t: f64, y: f64) -> f64 {
        if y <= t {
            return 0.0;
        }
        let a = self.alpha;
        (a * PI).sin() / PI * t.powf(a) / (y * (y - t).powf(a))
    }

    pub fn dt_cdf(&self, t: f64, y: f64) -> f64 {
        if y <= t {
            return 0.0;
        }
        dt_law_cdf(self.alpha, t, y).expect("validated alpha")
    }

    /// Total mass of the `d_t` density by quadrature on both substitution
    /// pieces, without the closed form.
    pub fn dt_total_mass(&self, t: f64) -> f64 {
        dt_cdf_quadrature(self.alpha, t, 2.0 * t) + dt_survival_far(self.alpha, t, 2.0 * t)
    }

    /// Arcsine density of `g_1` at `α = 1/2`.
    pub fn arcsine_density(u: f64) -> f64 {
        1.0 / (PI * (u * (1.0 - u)).sqrt())
    }

    pub fn arcsine_cdf(u: f64) -> f64 {
        2.0 / PI * u.clamp(0.0, 1.0).sqrt().asin()
    }

    /// Joint density of `(g_t, d_t − g_t)` at `α = 1/2`.
    pub fn joint_density(u: f64, v: f64) -> f64 {
        1.0 / (2.0 * PI * (u * v * v * v).sqrt())
    }

    /// `∫_{t−u}^∞` of the joint density: the `g_t` marginal at `u`.
    pub fn g_marginal_from_joint(t: f64, u: f64) -> f64 {
        integrate_to_inf(|v| Self::joint_density(u, v), t - u, 1e-14, 1e-12).value
    }

    /// `(y, P(d_t ≤ y))` pairs for plotting.
    pub fn dt_table(&self, t: f64, ys: &[f64]) -> Vec<(f64, f64)> {
        ys.iter().map(|&y| (y, self.dt_cdf(t, y))).collect()
    }
}

/// `P(d_s > t)` under the critical wetting limit law.
///
/// Equals `√s + (1/2π) ∬_{[0,s]×[t,1]} √((1−v)/(u(v−u)³)) du dv`; the inner
/// integral is taken in `w = √u`.
pub fn clo_probability(s: f64, t: f64) -> Result<f64> {
    if !(0.0 < s && s < t && t < 1.0) {
        if 0.0 < s && s < 1.0 && t == 1.0 {
            return Ok(clo_boundary(s));
        }
        return Err(Error::param("(s, t)", format!("need 0 < s < t < 1, got ({s}, {t})")));
    }
    let rs = s.sqrt();
    let r = integrate_2d(
        |v, w| 2.0 * ((1.0 - v) / (v - w * w).powi(3)).sqrt(),
        t,
        1.0,
        |_| 0.0,
        |_| rs,
        1e-12,
    );
    Ok(rs + r.value / (2.0 * PI))
}

/// `P(d_s > 1) = √s`.
pub fn clo_boundary(s: f64) -> f64 {
    s.sqrt()
}

/// Monte Carlo oracle for [`clo_probability`]: `𝒜_{1/2}` samples reweighted
/// by `(π/2)√(1 − g_1)`. Returns the weighted mean and its standard error.
pub fn clo_mc_oracle(s: f64, t: f64, samples: usize, step: f64, seed: u64) -> Result<(f64, f64)> {
    sample_regenerative_set(0.5, step, &mut par::replica_rng(seed, stream::CLO_ORACLE, u64::MAX))?;
    let vals = par::map_replicas(samples, seed, stream::CLO_ORACLE, |_, rng| {
        let set = sample_regenerative_set(0.5, step, rng).expect("validated");
        let (_, g1) = set.matheron(1.0);
        let (ds, _) = set.matheron(s);
        let w = PI / 2.0 * (1.0 - g1).sqrt();
        if ds > t { w } else { 0.0 }
    });
    Ok(mean_se(&vals))
}

/// The discrete double sum and its integral limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcgPair {
    pub finite_sum: f64,
    pub limit: f64,
}

/// `(1/v_N) Σ_{i≤sN} w_i Σ_{j=tN}^{N} (u_{j−i} − u_{j−i−1}) v_{N−j}` with
/// `v_n = w_n = √n`, `u_n = n^{-3/2}`, against
/// `−(3/2) ∬_{[0,s]×[t,1]} √(u(1−v))/(v−u)^{5/2}`.
pub fn dcg_pair(s: f64, t: f64, n: u64) -> Result<DcgPair> {
    if !(0.0 < s && s < t && t < 1.0) {
        return Err(Error::param("(s, t)", format!("need 0 < s < t < 1, got ({s}, {t})")));
    }
    if n < 100 {
        return Err(Error::param("N", format!("need N ≥ 100, got {n}")));
    }
    let nn = n as usize;
    let u = |k: usize| if k == 0 { 0.0 } else { (k as f64).powf(-1.5) };
    let du: Vec<f64> = (0..=nn).map(|k| if k == 0 { 0.0 } else { u(k) - u(k - 1) }).collect();
    let v: Vec<f64> = (0..=nn).map(|k| (k as f64).sqrt()).collect();
    let i_max = (s * n as f64).floor() as usize;
    let j_min = (t * n as f64).ceil() as usize;
    let outer: Vec<f64> = par::map_indexed(i_max, |i0| {
        let i = i0 + 1;
        let mut inner = 0.0;
        for j in j_min..=nn {
            inner += du[j - i] * v[nn - j];
        }
        v[i] * inner
    });
    let finite_sum = crate::stats::pairwise_sum(&outer) / v[nn];
    let limit = -1.5
        * integrate_2d(
            |uu, vv| (uu * (1.0 - vv)).sqrt() / (vv - uu).powf(2.5),
            0.0,
            s,
            |_| t,
            |_| 1.0,
            1e-12,
        )
        .value;
    Ok(DcgPair { finite_sum, limit })
}

/// Per-`t` KS results and the pairwise joint comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidiReport {
    pub alpha: f64,
    pub per_t: Vec<FidiRow>,
    pub joint: Vec<JointRow>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidiRow {
    pub t: f64,
    pub ks: KsReport,
    /// Fewer than 50 samples have `d_t ≤ 1`; the test has little power there.
    pub sparse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRow {
    pub t1: f64,
    pub t2: f64,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Draw of `d_t` from the limit law: `d_t = t/R`, `R ~ Beta(α, 1−α)`.
pub fn sample_dt(alpha: f64, t: f64, rng: &mut Rng) -> f64 {
    let beta = Beta::new(alpha, 1.0 - alpha).expect("valid alpha");
    t / beta.sample(rng)
}

/// KS test of each `d_t` sample against [`dt_law_cdf`], plus joint laws of
/// consecutive pairs `(d_{t1}, d_{t2})` against a Monte Carlo oracle built
/// from the regenerative property: `d_{t2} = d_{t1}` if `d_{t1} > t2`, else
/// `d_{t1}` plus an independent `d_{t2 − d_{t1}}`.
pub fn fidi_convergence_check(
    sets: &[ClosedSetSample],
    alpha: f64,
    t_list: &[f64],
    level: f64,
    seed: u64,
) -> Result<FidiReport> {
    check_alpha(alpha)?;
    if sets.is_empty() {
        return Err(Error::param("sets", "need at least one set"));
    }
    let src = sets[0].source;
    if sets.iter().any(|s| s.source != src) {
        return Err(Error::param("sets", "all sets must come from the same source"));
    }
    let mut per_t = Vec::new();
    for &t in t_list {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::param("t", format!("must lie in (0,1), got {t}")));
        }
        let mut d: Vec<f64> = sets.iter().map(|s| s.matheron(t).0).collect();
        crate::stats::sort_samples(&mut d);
        let ks = ks_test(&d, |y| dt_law_cdf(alpha, t, y.max(t)).unwrap(), level, 1.0);
        let sparse = d.iter().filter(|&&y| y <= 1.0).count() < 50;
        per_t.push(FidiRow { t, ks, sparse });
    }

    let mut joint = Vec::new();
    let oracle_n = 4 * sets.len();
    for w in t_list.windows(2) {
        let (t1, t2) = (w[0].min(w[1]), w[0].max(w[1]));
        let emp: Vec<(f64, f64)> = sets.iter().map(|s| (s.matheron(t1).0, s.matheron(t2).0)).collect();
        let oracle: Vec<(f64, f64)> = par::map_replicas(oracle_n, seed, stream::REGEN ^ 0xA5A5, |_, rng| {
            let y1 = sample_dt(alpha, t1, rng);
            let y2 = if y1 > t2 { y1 } else { y1 + sample_dt(alpha, t2 - y1, rng) };
            (y1, y2)
        });
        let grid: Vec<f64> = (1..=20).map(|k| t1 + (1.0 - t1) * k as f64 / 20.0).collect();
        let cdf2 = |pts: &[(f64, f64)], a: f64, b: f64| {
            pts.iter().filter(|&&(x, y)| x <= a && y <= b).count() as f64 / pts.len() as f64
        };
        let mut stat: f64 = 0.0;
        for &a in &grid {
            for &b in grid.iter().filter(|&&b| b >= t2) {
                stat = stat.max((cdf2(&emp, a, b) - cdf2(&oracle, a, b)).abs());
            }
        }
        // two-sample KS scale as a heuristic bound for the bivariate sup
        let n_eff = (sets.len() * oracle_n) as f64 / (sets.len() + oracle_n) as f64;
        let threshold = ks_critical(n_eff.round() as usize, level);
        joint.push(JointRow { t1, t2, statistic: stat, threshold, pass: stat <= threshold });
    }
    let pass = per_t.iter().all(|r| r.ks.pass) && joint.iter().all(|j| j.pass);
    Ok(FidiReport { alpha, per_t, joint, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::replica_rng;
    use statrs::function::beta::beta_reg;

    #[test]
    fn matheron_examples() {
        let f = ClosedSetSample::new(vec![0.3, 0.7], SetSource::Mrp);
        assert_eq!(f.matheron(0.5), (0.7, 0.3));
        assert_eq!(f.matheron(0.0), (0.3, 0.0));
        let e = ClosedSetSample::new(vec![], SetSource::Mrp);
        let (d, g) = e.matheron(0.5);
        assert!(d.is_infinite());
        assert_eq!(g, 0.0);
    }

    #[test]
    fn set_normalization() {
        let f = ClosedSetSample::new(vec![0.5, 0.2, 0.5, 1.5, -0.1], SetSource::Mrp);
        assert_eq!(f.points, vec![0.0, 0.2, 0.5]);
    }

    #[test]
    fn dt_half_closed_form_point() {
        assert!((dt_law_cdf(0.5, 1.0, 2.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(dt_law_cdf(0.5, 1.0, 1.0).unwrap(), 0.0);
        assert!(dt_law_cdf(0.5, 1.0, 0.5).is_err());
        assert!((1.0 - dt_law_cdf(0.5, 1.0, 1e20).unwrap()) < 1e-8);
    }

    #[test]
    fn dt_quadrature_matches_incomplete_beta() {
        for &alpha in &[0.3, 0.7, 0.45] {
            for &(t, y) in &[(0.3, 0.31), (0.3, 0.5), (0.3, 0.6), (0.3, 0.9), (1.0, 50.0), (0.1, 1e6)] {
                let got = dt_law_cdf(alpha, t, y).unwrap();
                let want = 1.0 - beta_reg(alpha, 1.0 - alpha, t / y);
                assert!((got - want).abs() < 1e-9, "α {alpha} t {t} y {y}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn dt_density_normalized() {
        for &alpha in &[0.3, 0.5, 0.7] {
            let law = LimitLawTable::new(alpha).unwrap();
            assert!((law.dt_total_mass(0.4) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn arcsine_and_joint() {
        assert!((LimitLawTable::arcsine_cdf(0.5) - 0.5).abs() < 1e-15);
        let (t, u) = (0.5, 0.2);
        let m = LimitLawTable::g_marginal_from_joint(t, u);
        let want = 1.0 / (PI * (u * (t - u)).sqrt());
        assert!((m - want).abs() < 1e-6);
    }

    #[test]
    fn clo_values() {
        assert!((clo_boundary(0.25) - 0.5).abs() < 1e-15);
        assert_eq!(clo_probability(0.25, 1.0).unwrap(), 0.5);
        let near = clo_probability(0.25, 1.0 - 1e-9).unwrap();
        assert!((near - 0.5).abs() < 1e-9);
        for i in 1..=10 {
            for j in 1..=10 {
                let s = i as f64 / 11.0;
                let t = s + (1.0 - s) * j as f64 / 11.0;
                let p = clo_probability(s, t).unwrap();
                assert!(p > s.sqrt() && p < 1.0, "s {s} t {t} p {p}");
            }
        }
        assert!(clo_probability(0.5, 0.25).is_err());
    }

    #[test]
    fn dcg_sign_and_monotone() {
        let a = dcg_pair(0.2, 0.75, 1000).unwrap();
        let b = dcg_pair(0.3, 0.75, 1000).unwrap();
        assert!(a.limit < 0.0 && b.limit < 0.0);
        assert!(b.limit.abs() > a.limit.abs());
        assert!((a.finite_sum / a.limit - 1.0).abs() < 0.05);
    }

    #[test]
    fn regen_set_basic() {
        let mut rng = replica_rng(1, 0, 0);
        assert!(sample_regenerative_set(0.5, 0.05, &mut rng).is_err());
        for alpha in [0.3, 0.5, 0.8] {
            let s = sample_regenerative_set(alpha, 1e-3, &mut rng).unwrap();
            assert_eq!(s.points[0], 0.0);
            assert!(s.points.windows(2).all(|w| w[0] < w[1]));
            for t in [0.1, 0.5, 0.9] {
                let (d, g) = s.matheron(t);
                assert!(d >= t && g <= t);
            }
        }
    }

    #[test]
    fn levy_increment_moments() {
        let h = 0.1;
        let xs: Vec<f64> = par::map_replicas(200_000, 4, 99, |_, rng| 1.0 / subordinator_increment(0.5, h, rng));
        // 1/X = 2Z²/h²: mean 2/h², variance 8/h⁴
        let (m, se) = mean_se(&xs);
        assert!((m - 2.0 / (h * h)).abs() < 3.0 * se);
        let c: Vec<f64> = xs.iter().map(|x| (x - 2.0 / (h * h)).powi(2)).collect();
        let (v, vse) = mean_se(&c);
        assert!((v - 8.0 / h.powi(4)).abs() < 3.0 * vse, "{v} vs {}", 8.0 / h.powi(4));
    }

    #[test]
    fn kanter_laplace_transform() {
        let alpha = 0.3;
        let xs: Vec<f64> = par::map_replicas(100_000, 6, 98, |_, rng| (-sample_positive_stable(alpha, rng)).exp());
        let (m, se) = mean_se(&xs);
        assert!((m - (-1.0f64).exp()).abs() < 4.0 * se);
    }

    #[test]
    fn ks_calibration_inverse_transform() {
        let mut rng = replica_rng(8, 0, 0);
        let mut xs: Vec<f64> = (0..10_000).map(|_| sample_dt(0.5, 0.3, &mut rng)).collect();
        crate::stats::sort_samples(&mut xs);
        let r = ks_test(&xs, |y| dt_law_cdf(0.5, 0.3, y).unwrap(), 0.01, f64::INFINITY);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn fidi_null_calibration() {
        let sets = sample_regenerative_sets(0.5, 1e-3, 2000, 12).unwrap();
        let rep = fidi_convergence_check(&sets, 0.5, &[0.3, 0.6, 0.999], 0.01, 12).unwrap();
        assert!(rep.per_t[0].ks.pass && rep.per_t[1].ks.pass, "{rep:?}");
        assert!(rep.per_t[2].sparse);
        assert!(rep.joint[0].pass, "{rep:?}");
    }
}
