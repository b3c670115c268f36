//! Simulation of the Markov renewal process `(τ, J)` and renewal-mass estimators.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::model::{HeavyTailKernelFamily, StationaryMeasure};
use crate::par::{self, stream, Rng};
use crate::regen::{ClosedSetSample, SetSource};
use crate::report::{Check, Report};
use crate::special::gamma;
use crate::stats::mean_se;
use crate::{Error, Result};

/// Renewal epochs and grid states of one trajectory.
///
/// `times` and `states` hold every epoch up to `horizon`; the first epoch
/// beyond it, if drawn, is kept in `overshoot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrpTrajectory {
    pub times: Vec<u64>,
    pub states: Vec<usize>,
    pub horizon: u64,
    pub overshoot: Option<(u64, usize)>,
}

/// Runs the chain from grid node `x0` until the first epoch beyond `horizon`.
/// A zero horizon draws nothing.
pub fn simulate_mrp(kernel: &HeavyTailKernelFamily, x0: usize, horizon: u64, rng: &mut Rng) -> MrpTrajectory {
    let mut times = vec![0u64];
    let mut states = vec![x0];
    let mut overshoot = None;
    if horizon > 0 {
        let (mut t, mut x) = (0u64, x0);
        loop {
            let y = kernel.sample_next_state(x, rng);
            let n = kernel.sample_interarrival(x, y, rng);
            t = t.saturating_add(n);
            x = y;
            if t > horizon {
                overshoot = Some((t, y));
                break;
            }
            times.push(t);
            states.push(y);
        }
    }
    MrpTrajectory { times, states, horizon, overshoot }
}

/// `(τ ∩ [0, N]) / N`.
pub fn rescaled_contact_set(traj: &MrpTrajectory, n: u64) -> ClosedSetSample {
    let nf = n as f64;
    let pts = traj.times.iter().take_while(|&&t| t <= n).map(|&t| t as f64 / nf).collect();
    ClosedSetSample::new(pts, SetSource::Mrp)
}

/// Position of the chain after `steps` transitions, spread uniformly over the
/// landing node's cell so the marginal is a density on `[0, b]`.
pub fn chain_position(kernel: &HeavyTailKernelFamily, x0: usize, steps: usize, rng: &mut Rng) -> f64 {
    let mut x = x0;
    for _ in 0..steps {
        x = kernel.sample_next_state(x, rng);
    }
    let (lo, hi) = kernel.grid.cell(x);
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Replica estimate of `U(n, x0, cell)` for each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassFunctionEstimate {
    pub n: u64,
    pub start: usize,
    pub cells: Vec<(f64, f64)>,
    pub cell_masses: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub total: f64,
    pub total_se: f64,
    pub replicas: usize,
    /// Replica mean of `#{k ≥ 1 : τ_k ≤ n}`.
    pub mean_renewals: f64,
}

fn attribute(kernel: &HeavyTailKernelFamily, cells: &[(f64, f64)], node: usize, weight: f64, acc: &mut [f64]) {
    for (c, &(lo, hi)) in acc.iter_mut().zip(cells) {
        *c += weight * kernel.grid.overlap(node, lo, hi);
    }
}

fn summarize(per_replica: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut means = Vec::with_capacity(k);
    let mut ses = Vec::with_capacity(k);
    for c in 0..k {
        let col: Vec<f64> = per_replica.iter().map(|r| r[c]).collect();
        let (m, s) = mean_se(&col);
        means.push(m);
        ses.push(s);
    }
    (means, ses)
}

/// Estimates `U(n, x0, ·)` on `cells` at every horizon in `ns`, using shared
/// trajectories so the estimates are nested.
pub fn empirical_mass_functions(
    kernel: &HeavyTailKernelFamily,
    x0: usize,
    ns: &[u64],
    cells: &[(f64, f64)],
    replicas: usize,
    seed: u64,
) -> Result<Vec<MassFunctionEstimate>> {
    if replicas == 0 {
        return Err(Error::param("replicas", "need at least one replica"));
    }
    let horizon = ns.iter().copied().max().unwrap_or(0);
    let k = cells.len();
    // per replica, per n: cell counts then the renewal count
    let runs = par::map_replicas(replicas, seed, stream::MRP, |_, rng| {
        let traj = simulate_mrp(kernel, x0, horizon, rng);
        ns.iter()
            .map(|&n| {
                let mut acc = vec![0.0; k + 2];
                let mut count = 0usize;
                for (&t, &s) in traj.times.iter().zip(&traj.states) {
                    if t > n {
                        break;
                    }
                    attribute(kernel, cells, s, 1.0, &mut acc[..k]);
                    count += 1;
                }
                acc[k] = count as f64;
                acc[k + 1] = (count - 1) as f64;
                acc
            })
            .collect::<Vec<_>>()
    });
    Ok(ns
        .iter()
        .enumerate()
        .map(|(idx, &n)| {
            let rows: Vec<Vec<f64>> = runs.iter().map(|r| r[idx].clone()).collect();
            let (means, ses) = summarize(&rows, k + 2);
            MassFunctionEstimate {
                n,
                start: x0,
                cells: cells.to_vec(),
                cell_masses: means[..k].to_vec(),
                std_errors: ses[..k].to_vec(),
                total: means[k],
                total_se: ses[k],
                replicas,
                mean_renewals: means[k + 1],
            }
        })
        .collect())
}

pub fn empirical_mass_function(
    kernel: &HeavyTailKernelFamily,
    x0: usize,
    n: u64,
    cells: &[(f64, f64)],
    replicas: usize,
    seed: u64,
) -> Result<MassFunctionEstimate> {
    Ok(empirical_mass_functions(kernel, x0, &[n], cells, replicas, seed)?.remove(0))
}

/// Replica mean and standard error of `Σ_{k : τ_k ≤ n} f(J_k)`, `k ≥ 0`.
pub fn empirical_functional(
    kernel: &HeavyTailKernelFamily,
    x0: usize,
    n: u64,
    f: impl Fn(f64) -> f64 + Sync,
    replicas: usize,
    seed: u64,
) -> (f64, f64) {
    let vals = par::map_replicas(replicas, seed, stream::MRP, |_, rng| {
        let traj = simulate_mrp(kernel, x0, n, rng);
        traj.states.iter().map(|&s| f(kernel.grid.nodes[s])).sum::<f64>()
    });
    mean_se(&vals)
}

/// `α / (Γ(1+α) Γ(1−α) E_{Π²}[Φ/k])`.
pub fn mass_limit_constant(alpha: f64, pi2: f64) -> f64 {
    alpha / (gamma(1.0 + alpha) * gamma(1.0 - alpha) * pi2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellComparison {
    pub lo: f64,
    pub hi: f64,
    pub scaled: f64,
    pub std_error: f64,
    pub limit: f64,
    pub rel_dev: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledMassReport {
    /// `n` for the mass function, `λ` for the Laplace transform.
    pub scale: f64,
    pub total_scaled: f64,
    pub total_se: f64,
    pub total_limit: f64,
    pub cells: Vec<CellComparison>,
    pub max_rel_dev: f64,
}

impl ScaledMassReport {
    pub fn to_report(&self, prefix: &str, tol: f64) -> Report {
        let mut r = Report::default();
        r.push(Check::rel(format!("{prefix}.total"), self.total_scaled, self.total_limit, tol));
        for c in &self.cells {
            r.push(Check::rel(format!("{prefix}.cell[{:.3},{:.3}]", c.lo, c.hi), c.scaled, c.limit, tol));
        }
        r
    }
}

fn compare_cells(
    scale: f64,
    factor: f64,
    masses: &[f64],
    ses: &[f64],
    total: f64,
    total_se: f64,
    cells: &[(f64, f64)],
    limits: &[f64],
    total_limit: f64,
) -> ScaledMassReport {
    let mut out = Vec::new();
    let mut worst = ((factor * total) / total_limit - 1.0).abs();
    for i in 0..cells.len() {
        let scaled = factor * masses[i];
        let se = factor * ses[i];
        let rel = scaled / limits[i] - 1.0;
        worst = worst.max(rel.abs());
        out.push(CellComparison {
            lo: cells[i].0,
            hi: cells[i].1,
            scaled,
            std_error: se,
            limit: limits[i],
            rel_dev: rel,
            z: if se > 0.0 { (scaled - limits[i]) / se } else { 0.0 },
        });
    }
    ScaledMassReport {
        scale,
        total_scaled: factor * total,
        total_se: factor * total_se,
        total_limit,
        cells: out,
        max_rel_dev: worst,
    }
}

/// Compares `L(n) n^{-α} Û(n, x0, cell)` with the mass-function limit.
pub fn mp2_check(est: &MassFunctionEstimate, kernel: &HeavyTailKernelFamily, pi: &StationaryMeasure) -> Result<ScaledMassReport> {
    let alpha = kernel.alpha();
    let pi2 = crate::model::pi2_expectation(kernel, pi)?;
    let c = mass_limit_constant(alpha, pi2);
    let n = est.n as f64;
    let factor = kernel.law.l.eval(n) / n.powf(alpha);
    let limits: Vec<f64> = est.cells.iter().map(|&(lo, hi)| c * pi.cell_mass(kernel, lo, hi)).collect();
    Ok(compare_cells(n, factor, &est.cell_masses, &est.std_errors, est.total, est.total_se, &est.cells, &limits, c))
}

/// Estimate of the Laplace mass `U_{x0, cell}(λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub lambda: f64,
    pub cells: Vec<(f64, f64)>,
    pub cell_masses: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub total: f64,
    pub total_se: f64,
    pub replicas: usize,
    pub horizon: u64,
}

/// Replica average of `Σ_{k≥0} e^{−λτ_k} 1{J_k ∈ cell}`, truncated where `e^{−λτ} < 1e-8`.
pub fn laplace_mass(
    kernel: &HeavyTailKernelFamily,
    x0: usize,
    lambda: f64,
    cells: &[(f64, f64)],
    replicas: usize,
    seed: u64,
) -> Result<LaplaceEstimate> {
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    if replicas == 0 {
        return Err(Error::param("replicas", "need at least one replica"));
    }
    let horizon = ((1e8f64).ln() / lambda).ceil() as u64;
    let k = cells.len();
    let rows = par::map_replicas(replicas, seed, stream::LAPLACE, |_, rng| {
        let traj = simulate_mrp(kernel, x0, horizon, rng);
        let mut acc = vec![0.0; k + 1];
        for (&t, &s) in traj.times.iter().zip(&traj.states) {
            let w = (-lambda * t as f64).exp();
            attribute(kernel, cells, s, w, &mut acc[..k]);
            acc[k] += w;
        }
        acc
    });
    let (means, ses) = summarize(&rows, k + 1);
    Ok(LaplaceEstimate {
        lambda,
        cells: cells.to_vec(),
        cell_masses: means[..k].to_vec(),
        std_errors: ses[..k].to_vec(),
        total: means[k],
        total_se: ses[k],
        replicas,
        horizon,
    })
}

/// `Γ(1−α) λ^α L(1/λ) E_{Π²}[Φ/k] / α`.
pub fn laplace_prefactor(alpha: f64, lambda: f64, l_at_inv: f64, pi2: f64) -> f64 {
    gamma(1.0 - alpha) * lambda.powf(alpha) * l_at_inv * pi2 / alpha
}

/// Scales the Laplace masses and compares them with `Π[cell]`.
pub fn laplace_mass_check(
    kernel: &HeavyTailKernelFamily,
    pi: &StationaryMeasure,
    est: &LaplaceEstimate,
) -> Result<ScaledMassReport> {
    let alpha = kernel.alpha();
    let pi2 = crate::model::pi2_expectation(kernel, pi)?;
    let factor = laplace_prefactor(alpha, est.lambda, kernel.law.l.eval(1.0 / est.lambda), pi2);
    let limits: Vec<f64> = est.cells.iter().map(|&(lo, hi)| pi.cell_mass(kernel, lo, hi)).collect();
    Ok(compare_cells(est.lambda, factor, &est.cell_masses, &est.std_errors, est.total, est.total_se, &est.cells, &limits, pi.total))
}

/// The Tauberian link between the two normalizations: `Û(λ = 1/n) / Γ(1+α)`
/// against `Û(n)` on the same replica seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquifiReport {
    pub n: u64,
    pub mass_scaled: f64,
    pub laplace_scaled: f64,
    pub rel_diff: f64,
}

pub fn equifi_check(kernel: &HeavyTailKernelFamily, x0: usize, n: u64, replicas: usize, seed: u64) -> Result<EquifiReport> {
    let alpha = kernel.alpha();
    let whole = [(0.0, kernel.grid.b)];
    let m = empirical_mass_function(kernel, x0, n, &whole, replicas, seed)?;
    let l = laplace_mass(kernel, x0, 1.0 / n as f64, &whole, replicas, seed)?;
    let norm = kernel.law.l.eval(n as f64) / (n as f64).powf(alpha);
    let mass_scaled = norm * m.total;
    let laplace_scaled = norm * l.total / gamma(1.0 + alpha);
    Ok(EquifiReport { n, mass_scaled, laplace_scaled, rel_diff: (laplace_scaled / mass_scaled - 1.0).abs() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterarrivalLaplaceRow {
    pub lambda: f64,
    /// `sup |k(1−φ)/(λ^α L(1/λ)) − Φ Γ(1−α)/α|`
    pub sup_abs_dev: f64,
    /// the same, relative to `Φ Γ(1−α)/α`
    pub sup_rel_dev: f64,
    /// `(1 − φ(λ))/(λ^α L(1/λ))` of the common law
    pub scalar: f64,
}

/// Analytic series check of the interarrival Laplace transform on every
/// `stride`-th grid pair.
pub fn interarrival_laplace_check(
    kernel: &HeavyTailKernelFamily,
    lambdas: &[f64],
    stride: usize,
) -> Result<Vec<InterarrivalLaplaceRow>> {
    let alpha = kernel.alpha();
    let g = kernel.g();
    let stride = stride.max(1);
    let mut rows = Vec::new();
    for &lambda in lambdas {
        if !(lambda > 0.0) {
            return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
        }
        let base = kernel.law.one_minus_laplace(lambda);
        let norm = lambda.powf(alpha) * kernel.law.l.eval(1.0 / lambda);
        let limit_factor = gamma(1.0 - alpha) / alpha;
        let (mut sup_abs, mut sup_rel) = (0.0f64, 0.0f64);
        for i in (0..g).step_by(stride) {
            for j in (0..g).step_by(stride) {
                let lhs = kernel.k(i, j) * kernel.one_minus_laplace_pair(i, j, lambda, base) / norm;
                let rhs = kernel.phi(i, j) * limit_factor;
                sup_abs = sup_abs.max((lhs - rhs).abs());
                sup_rel = sup_rel.max((lhs / rhs - 1.0).abs());
            }
        }
        rows.push(InterarrivalLaplaceRow { lambda, sup_abs_dev: sup_abs, sup_rel_dev: sup_rel, scalar: base / norm });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenReport {
    pub n1: u64,
    pub n2: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub analytic: f64,
    pub rel_dev: f64,
}

/// `u_n ≈ α sin(απ)/π / (C_α L(n) n^{1−α})`.
pub fn renewal_density_asymptotic(kernel: &HeavyTailKernelFamily, n: f64) -> f64 {
    let alpha = kernel.alpha();
    alpha * (alpha * PI).sin() / PI / (kernel.c_alpha() * kernel.law.l.eval(n) * n.powf(1.0 - alpha))
}

/// Renewal mass in the window `[n1, n2)` for the ordinary renewal obtained
/// from the separable family.
pub fn green_function_check(kernel: &HeavyTailKernelFamily, n1: u64, n2: u64, replicas: usize, seed: u64) -> Result<GreenReport> {
    if !kernel.is_separable() {
        return Err(Error::param("family", "the renewal Green function check needs a separable kernel"));
    }
    if n1 > n2 {
        return Err(Error::param("window", format!("need n1 ≤ n2, got [{n1}, {n2})")));
    }
    let analytic: f64 = (n1.max(1)..n2).map(|n| renewal_density_asymptotic(kernel, n as f64)).sum();
    if n1 == n2 {
        return Ok(GreenReport { n1, n2, estimate: 0.0, std_error: 0.0, analytic: 0.0, rel_dev: 0.0 });
    }
    let counts = par::map_replicas(replicas, seed, stream::GREEN, |_, rng| {
        let mut t = 0u64;
        let mut c = 0u32;
        while t < n2 {
            if t >= n1 {
                c += 1;
            }
            t = t.saturating_add(kernel.law.sample(rng));
        }
        c as f64
    });
    let (estimate, std_error) = mean_se(&counts);
    Ok(GreenReport { n1, n2, estimate, std_error, analytic, rel_dev: estimate / analytic - 1.0 })
}
