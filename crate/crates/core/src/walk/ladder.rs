use serde::{Deserialize, Serialize};

use super::tensor::Propagator;
use super::WalkModel;
use crate::par::{self, stream, Rng};
use crate::quad::gregory_weights;
use crate::stats::{binomial_se, mean_se};
use crate::{Error, Result};

/// First ascending and descending ladder epochs and heights of one walk each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderSample {
    pub t1: u64,
    pub h1: f64,
    pub t1m: u64,
    pub h1m: f64,
    /// Walks abandoned at the cap and redrawn.
    pub restarts: u32,
}

// First strict entry into (0,∞) for sign = 1, (−∞,0) for sign = −1.
fn first_passage(model: &WalkModel, sign: f64, cap: u64, rng: &mut Rng) -> (u64, f64, u32) {
    let mut restarts = 0;
    loop {
        let mut s = 0.0;
        for k in 1..=cap {
            s += sign * model.sample(rng);
            if s > 0.0 {
                return (k, s, restarts);
            }
        }
        restarts += 1;
    }
}

pub fn sample_ladder(model: &WalkModel, cap: u64, rng: &mut Rng) -> Result<LadderSample> {
    if cap < 1_000_000 {
        return Err(Error::param("cap", format!("ladder cap must be at least 1e6, got {cap}")));
    }
    let (t1, h1, r1) = first_passage(model, 1.0, cap, rng);
    let (t1m, h1m, r2) = first_passage(model, -1.0, cap, rng);
    Ok(LadderSample { t1, h1, t1m, h1m, restarts: r1 + r2 })
}

/// Monte Carlo `P[H_1 ≥ r]` and `P[H_1^- ≥ r]` with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderTailTable {
    pub points: Vec<f64>,
    pub asc: Vec<f64>,
    pub asc_se: Vec<f64>,
    pub desc: Vec<f64>,
    pub desc_se: Vec<f64>,
    pub replicas: usize,
    /// Fraction of ladder draws that hit the cap; above 1e-3 the epoch
    /// statistics are biased (heights are unaffected).
    pub cap_rate: f64,
    pub cap_warning: bool,
}

pub fn ladder_tail_probs(model: &WalkModel, points: &[f64], replicas: usize, cap: u64, seed: u64) -> Result<LadderTailTable> {
    if points.iter().any(|&r| r < 0.0) {
        return Err(Error::param("points", "ladder tail points must be nonnegative"));
    }
    if replicas == 0 {
        return Err(Error::param("replicas", "need at least one replica"));
    }
    sample_ladder(model, cap, &mut par::replica_rng(seed, stream::LADDER_ASC, u64::MAX))?;
    let draws = par::map_replicas(replicas, seed, stream::LADDER_ASC, |_, rng| {
        sample_ladder(model, cap, rng).expect("validated cap")
    });
    let n = replicas as f64;
    let mut asc = Vec::new();
    let mut desc = Vec::new();
    for &r in points {
        asc.push(draws.iter().filter(|d| d.h1 >= r).count() as f64 / n);
        desc.push(draws.iter().filter(|d| d.h1m >= r).count() as f64 / n);
    }
    let restarts: u64 = draws.iter().map(|d| d.restarts as u64).sum();
    let cap_rate = restarts as f64 / (2.0 * n + restarts as f64);
    Ok(LadderTailTable {
        points: points.to_vec(),
        asc_se: asc.iter().map(|&p| binomial_se(p, replicas)).collect(),
        desc_se: desc.iter().map(|&p| binomial_se(p, replicas)).collect(),
        asc,
        desc,
        replicas,
        cap_rate,
        cap_warning: cap_rate > 1e-3,
    })
}

/// Deterministic `P[H_1 ≥ r]` and `P[H_1^- ≥ r]`.
///
/// The density of the walk killed on leaving `(−∞, 0]` is propagated on
/// `(−M, 0]`, `M = 6σ√steps`, with spacing `spacing`; each step adds the
/// probability of jumping to `[r, ∞)`. The mass still alive after `steps`
/// is spread with the overshoot law of the last step. The increment laws
/// are symmetric, so both ladder heights share one computation.
pub fn ladder_tails_quadrature(model: &WalkModel, points: &[f64], steps: usize, spacing: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if steps < 2 {
        return Err(Error::param("steps", "need at least 2 propagation steps"));
    }
    let sigma = model.sigma;
    let m = 6.0 * sigma * (steps as f64).sqrt() + model.support_radius();
    let h = (m / spacing).ceil() as usize + 1;
    // node k sits at −k·spacing
    let w = gregory_weights(h, spacing, true);
    let prop = Propagator::new(model, spacing, h);
    let mut p: Vec<f64> = (0..h).map(|k| model.density(-(k as f64) * spacing)).collect();
    // jump probabilities P[X ≥ r + k·d] from node k, with r = 0 appended
    let jump: Vec<Vec<f64>> = points
        .iter()
        .chain(std::iter::once(&0.0))
        .map(|&r| (0..h).map(|k| w[k] * model.sf(r + k as f64 * spacing)).collect())
        .collect();
    let np = points.len();
    let mut tot: Vec<f64> = points.iter().map(|&r| model.sf(r)).collect();
    let mut last = vec![0.0; np + 1];
    let mut buf = vec![0.0; h];
    for _ in 2..=steps {
        last = par::map_indexed(np + 1, |j| jump[j].iter().zip(&p).map(|(a, b)| a * b).sum());
        for (t, l) in tot.iter_mut().zip(&last) {
            *t += l;
        }
        prop.apply(&p, &w, &mut buf);
        std::mem::swap(&mut p, &mut buf);
    }
    let last0 = last[np];
    let alive: f64 = (0..h).map(|k| w[k] * p[k]).sum();
    let asc: Vec<f64> = tot.iter().zip(&last).map(|(t, l)| t + alive * l / last0).collect();
    Ok((asc.clone(), asc))
}

/// `U(x) = Σ_{k≥0} P[H_1 + … + H_k ≤ x]` and the descending analogue `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalFunctionEstimate {
    pub x_grid: Vec<f64>,
    pub u: Vec<f64>,
    pub u_se: Vec<f64>,
    pub v: Vec<f64>,
    pub v_se: Vec<f64>,
    pub replicas: usize,
}

impl RenewalFunctionEstimate {
    fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
        let k = xs.partition_point(|&g| g <= x);
        if k == 0 {
            return ys[0];
        }
        if k >= xs.len() {
            return ys[xs.len() - 1];
        }
        let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        // renewal functions are right-continuous step-like; linear is fine on a fine grid
        ys[k - 1] + t * (ys[k] - ys[k - 1])
    }

    pub fn u_at(&self, x: f64) -> f64 {
        Self::interp(&self.x_grid, &self.u, x)
    }

    pub fn v_at(&self, x: f64) -> f64 {
        Self::interp(&self.x_grid, &self.v, x)
    }

    /// `∫_y^{y+Δ} V(w) dw` by the trapezoid rule on 200 points.
    pub fn v_integral(&self, y: f64, delta: f64) -> f64 {
        let n = 200;
        let h = delta / n as f64;
        (0..=n)
            .map(|i| {
                let c = if i == 0 || i == n { 0.5 } else { 1.0 };
                c * self.v_at(y + i as f64 * h)
            })
            .sum::<f64>()
            * h
    }
}

/// Renewal functions from sums of independent ladder heights, one run per replica.
pub fn renewal_function_estimate(
    model: &WalkModel,
    x_grid: &[f64],
    replicas: usize,
    cap: u64,
    seed: u64,
) -> Result<RenewalFunctionEstimate> {
    if x_grid.is_empty() || x_grid.iter().any(|&x| x < 0.0) {
        return Err(Error::param("x_grid", "need a nonempty grid of nonnegative points"));
    }
    if cap < 1_000_000 {
        return Err(Error::param("cap", format!("ladder cap must be at least 1e6, got {cap}")));
    }
    let xmax = x_grid.iter().cloned().fold(0.0, f64::max);
    let count = |sign: f64, rng: &mut Rng| -> Vec<f64> {
        let mut heights = vec![0.0];
        let mut s = 0.0;
        loop {
            let (_, h, _) = first_passage(model, sign, cap, rng);
            s += h;
            if s > xmax {
                break;
            }
            heights.push(s);
        }
        x_grid.iter().map(|&x| heights.partition_point(|&hh| hh <= x) as f64).collect()
    };
    let up = par::map_replicas(replicas, seed, stream::RENEWAL_FN, |_, rng| count(1.0, rng));
    let down = par::map_replicas(replicas, seed, stream::RENEWAL_FN ^ 0x55, |_, rng| count(-1.0, rng));
    let col = |rows: &[Vec<f64>], j: usize| mean_se(&rows.iter().map(|r| r[j]).collect::<Vec<_>>());
    let mut est = RenewalFunctionEstimate {
        x_grid: x_grid.to_vec(),
        u: vec![],
        u_se: vec![],
        v: vec![],
        v_se: vec![],
        replicas,
    };
    for j in 0..x_grid.len() {
        let (m, s) = col(&up, j);
        est.u.push(m);
        est.u_se.push(s);
        let (m, s) = col(&down, j);
        est.v.push(m);
        est.v_se.push(s);
    }
    Ok(est)
}

/// One `(m, I)` comparison of the duality identity
/// `P[S_1 ≤ 0, …, S_m ≤ 0, −S_m ∈ I] = P[m is a descending ladder epoch, −S_m ∈ I]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityRow {
    pub m: usize,
    pub lo: f64,
    pub hi: f64,
    pub stay_below: f64,
    pub stay_below_se: f64,
    pub ladder_mass: f64,
    pub ladder_mass_se: f64,
    pub z: f64,
}

/// Both sides estimated from independent walk streams.
pub fn duality_check(model: &WalkModel, m_max: usize, intervals: &[(f64, f64)], replicas: usize, seed: u64) -> Vec<DualityRow> {
    let k = intervals.len();
    let run = |strm: u64, ladder: bool| -> Vec<u32> {
        let per = par::map_replicas(replicas, seed, strm, |_, rng| {
            let mut hits = vec![0u8; m_max * k];
            let mut s = 0.0;
            let mut max_so_far: f64 = 0.0;
            let mut min_so_far: f64 = 0.0;
            for m in 1..=m_max {
                s += model.sample(rng);
                let event = if ladder { s < min_so_far } else { s.max(max_so_far) <= 0.0 };
                max_so_far = max_so_far.max(s);
                min_so_far = min_so_far.min(s);
                if event {
                    for (j, &(lo, hi)) in intervals.iter().enumerate() {
                        if -s >= lo && -s < hi {
                            hits[(m - 1) * k + j] = 1;
                        }
                    }
                }
            }
            hits
        });
        let mut tot = vec![0u32; m_max * k];
        for h in per {
            for (t, v) in tot.iter_mut().zip(h) {
                *t += v as u32;
            }
        }
        tot
    };
    let below = run(stream::DUALITY, false);
    let ladder = run(stream::DUALITY ^ 0x77, true);
    let mut rows = Vec::new();
    for m in 1..=m_max {
        for (j, &(lo, hi)) in intervals.iter().enumerate() {
            let p1 = below[(m - 1) * k + j] as f64 / replicas as f64;
            let p2 = ladder[(m - 1) * k + j] as f64 / replicas as f64;
            let s1 = binomial_se(p1, replicas);
            let s2 = binomial_se(p2, replicas);
            let se = (s1 * s1 + s2 * s2).sqrt();
            rows.push(DualityRow {
                m,
                lo,
                hi,
                stay_below: p1,
                stay_below_se: s1,
                ladder_mass: p2,
                ladder_mass_se: s2,
                z: if se > 0.0 { (p1 - p2) / se } else { 0.0 },
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoneyReport {
    pub n: usize,
    pub x: f64,
    pub y: f64,
    pub delta: f64,
    pub probability: f64,
    pub probability_se: f64,
    pub asymptotic: f64,
    pub ratio: f64,
    pub ratio_se: f64,
}

/// Monte Carlo `P[S_n ∈ (x−y−Δ, x−y], τ_x > n]` against
/// `U(x) ∫_y^{y+Δ} V / (σ√(2π) n^{3/2})`, with `τ_x = inf{k ≥ 1 : S_k ≥ x}`.
#[allow(clippy::too_many_arguments)]
pub fn doney_local_check(
    model: &WalkModel,
    x: f64,
    y: f64,
    delta: f64,
    n: usize,
    replicas: usize,
    renewal: &RenewalFunctionEstimate,
    seed: u64,
) -> Result<DoneyReport> {
    if !(x > 0.0 && y > 0.0 && delta > 0.0) {
        return Err(Error::param("(x, y, Δ)", "need positive x, y and Δ"));
    }
    let xmax = renewal.x_grid.last().copied().unwrap_or(0.0);
    if x > xmax || y + delta > xmax {
        return Err(Error::param("renewal", "renewal grid must cover x and y + Δ"));
    }
    let (lo, hi) = (x - y - delta, x - y);
    let hits = par::map_replicas(replicas, seed, stream::DONEY, |_, rng| {
        let mut s = 0.0;
        for _ in 0..n {
            s += model.sample(rng);
            if s >= x {
                return 0.0;
            }
        }
        if s > lo && s <= hi { 1.0 } else { 0.0 }
    });
    let p = hits.iter().sum::<f64>() / replicas as f64;
    let se = binomial_se(p, replicas);
    let asymptotic = renewal.u_at(x) * renewal.v_integral(y, delta) * model.local_constant() / (n as f64).powf(1.5);
    Ok(DoneyReport {
        n,
        x,
        y,
        delta,
        probability: p,
        probability_se: se,
        asymptotic,
        ratio: p / asymptotic,
        ratio_se: se / asymptotic,
    })
}
