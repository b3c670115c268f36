use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ladder_tail_probs, ladder_tails_quadrature, WalkModel};
use crate::model::StateGrid;
use crate::par::{self, stream};
use crate::persist::{read_artifact, write_artifact};
use crate::quad::gregory_weights;
use crate::special::hurwitz_zeta;
use crate::stats::binomial_se;
use crate::{Error, Result};

const KIND: &str = "constrained-kernel";

/// Number of early half-line densities kept for exact bin masses.
pub const SNAPSHOTS: usize = 8;

/// Banded quadrature transition on an equispaced grid:
/// `out_i = Σ_j w_j in_j h((i−j)·d)`.
pub(crate) struct Propagator {
    taps: Vec<f64>,
    radius: usize,
}

impl Propagator {
    pub(crate) fn new(model: &WalkModel, spacing: f64, max_len: usize) -> Self {
        let radius = ((model.support_radius() / spacing).ceil() as usize).min(max_len);
        let taps = (0..=2 * radius)
            .map(|m| model.density((m as f64 - radius as f64) * spacing))
            .collect();
        Propagator { taps, radius }
    }

    /// Fills all of `out`; entries of `input` past its length count as zero.
    pub(crate) fn apply(&self, input: &[f64], w: &[f64], out: &mut [f64]) {
        let r = self.radius;
        let mut pad = vec![0.0; out.len() + 2 * r];
        let n = input.len().min(out.len() + r);
        for j in 0..n {
            pad[j + r] = w[j] * input[j];
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.taps.iter().zip(&pad[i..i + 2 * r + 1]).map(|(t, q)| t * q).sum();
        }
    }
}

/// Equispaced nodes `a + k·d`, `k < len`, on the truncated half-line `(a, M]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfLine {
    pub a: f64,
    pub spacing: f64,
    pub len: usize,
}

impl HalfLine {
    pub fn node(&self, k: usize) -> f64 {
        self.a + k as f64 * self.spacing
    }

    pub fn upper(&self) -> f64 {
        self.node(self.len - 1)
    }

    pub fn weights(&self) -> Vec<f64> {
        gregory_weights(self.len, self.spacing, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhiSource {
    /// Ladder tails from the killed-walk quadrature with this many steps.
    Quadrature { steps: usize },
    /// Ladder tails from Monte Carlo ladder heights.
    MonteCarlo { replicas: usize, seed: u64 },
}

impl Default for PhiSource {
    fn default() -> Self {
        PhiSource::Quadrature { steps: 4096 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorParams {
    /// Strip nodes.
    pub g: usize,
    pub n_max: usize,
    /// Half-line truncation; defaults to `a + 6σ√n_max + σ`.
    #[serde(default)]
    pub m: Option<f64>,
    /// Half-line nodes; defaults to a spacing of `σ/5`.
    #[serde(default)]
    pub halfline_g: Option<usize>,
    #[serde(default)]
    pub phi: PhiSource,
}

impl TensorParams {
    pub fn new(g: usize, n_max: usize) -> Self {
        TensorParams { g, n_max, m: None, halfline_g: None, phi: PhiSource::default() }
    }

    fn resolve(&self, model: &WalkModel) -> Result<HalfLine> {
        if self.g < 2 {
            return Err(Error::param("G", "need at least 2 strip nodes"));
        }
        if self.n_max < 2 {
            return Err(Error::param("n_max", "horizon must be at least 2"));
        }
        let floor = model.a + 6.0 * model.sigma * (self.n_max as f64).sqrt();
        let m = self.m.unwrap_or(floor + model.sigma);
        if !(m > floor) {
            return Err(Error::param("M", format!("must exceed a + 6σ√n_max = {floor:.3}, got {m}")));
        }
        let len = self
            .halfline_g
            .unwrap_or_else(|| ((m - model.a) / (0.2 * model.sigma)).ceil() as usize + 1);
        if len < 4 * self.g {
            return Err(Error::param("halfline_G", format!("must be at least 4·G = {}, got {len}", 4 * self.g)));
        }
        Ok(HalfLine { a: model.a, spacing: (m - model.a) / (len - 1) as f64, len })
    }
}

/// Densities `f_{x,y}(n) = P_x[S_1 > a, …, S_{n−1} > a, S_n ∈ dy]/dy` on a
/// strip grid for `n ≤ n_max`, with the first-return bookkeeping.
#[derive(Debug, Clone)]
pub struct ConstrainedKernelTensor {
    pub model: WalkModel,
    pub grid: StateGrid,
    pub n_max: usize,
    pub halfline: HalfLine,
    pub phi_source: PhiSource,
    values: Vec<f64>,
    /// `P_x[S_1, …, S_n > a]` at index `n·G + i`, `n = 0..=n_max`.
    pub survival: Vec<f64>,
    /// `P_x[S_1, …, S_{n−1} > a, S_n < 0]` at index `n·G + i`.
    pub under: Vec<f64>,
    /// `1 − Σ_n ∫f − ∫Φ_a(x,·)·Σ_{n>n_max} n^{-3/2}`.
    pub defect: Vec<f64>,
    /// `Φ_a(x_i, y_j)` at `i·G + j`.
    pub phi_a: Vec<f64>,
    /// `Σ_{n>n_max} n^{-3/2}`.
    pub tail_zeta: f64,
    /// Largest `|Σ_n (strip + under) + survival(n_max) − 1|` over x.
    pub balance_residual: f64,
    snapshots: Vec<f64>,
    snapshot_len: usize,
}

fn window(model: &WalkModel, hl: &HalfLine, k: usize) -> usize {
    let reach = (7.0 * (k as f64).sqrt() + 10.0) * model.sigma + model.support_radius();
    ((reach / hl.spacing).ceil() as usize + 1).clamp(12.min(hl.len), hl.len)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Φ_a(x_i, y_j) = P[H⁻ ≥ a − y_j]·P[H ≥ a − x_i]/(σ√(2π))`, given the
/// ascending and descending tails at the points `a − x_i`.
pub fn phi_from_tails(model: &WalkModel, asc: &[f64], desc: &[f64]) -> Vec<f64> {
    let c = model.local_constant();
    asc.iter().flat_map(|&pa| desc.iter().map(move |&pd| pd * pa * c)).collect()
}

/// Builds the tensor by propagating killed half-line densities.
///
/// Since `h` is symmetric, reversing a path gives
/// `f_n(x,y) = ∫ p_k^x(u) p_{n−k}^y(u) du` with `p_k^x` the density of
/// `S_k` on `{S_1..S_k > a}`; only `k ≤ n_max/2 + 1` is propagated.
pub fn constrained_kernel(model: &WalkModel, params: &TensorParams) -> Result<ConstrainedKernelTensor> {
    model.validate()?;
    let hl = params.resolve(model)?;
    let grid = StateGrid::new(model.a, params.g)?;
    let (g, n_max) = (params.g, params.n_max);
    let w = hl.weights();
    let prop = Propagator::new(model, hl.spacing, hl.len);
    let u: Vec<f64> = (0..hl.len).map(|k| hl.node(k)).collect();
    let win = |k: usize| window(model, &hl, k);

    let mut values = vec![0.0; n_max * g * g];
    let mut survival = vec![0.0; (n_max + 1) * g];
    let mut under = vec![0.0; (n_max + 1) * g];
    for i in 0..g {
        let x = grid.nodes[i];
        for j in 0..g {
            values[i * g + j] = model.density(grid.nodes[j] - x);
        }
        survival[i] = 1.0;
        survival[g + i] = model.sf(model.a - x);
        under[g + i] = model.cdf(-x);
    }

    let snapshot_len = win(SNAPSHOTS);
    let mut snapshots = vec![0.0; SNAPSHOTS * g * snapshot_len];

    let propagate = |cols: &[Vec<f64>], len: usize| -> Vec<Vec<f64>> {
        par::map_indexed(cols.len(), |i| {
            let mut out = vec![0.0; len];
            prop.apply(&cols[i], &w, &mut out);
            out
        })
    };
    // e_j(u) = P_u[some S_i ≤ a, i ≤ j] and r_j(u) = P_u[S_1..S_{j−1} > a, S_j < 0]
    let step_e = |e: &[f64], len: usize| -> Vec<f64> {
        let mut out = vec![0.0; len];
        prop.apply(e, &w, &mut out);
        for (o, &uk) in out.iter_mut().zip(&u) {
            *o += model.cdf(model.a - uk);
        }
        out
    };
    let step_r = |r: &[f64], len: usize| -> Vec<f64> {
        let mut out = vec![0.0; len];
        prop.apply(r, &w, &mut out);
        out
    };

    let mut p_k: Vec<Vec<f64>> =
        (0..g).map(|i| u[..win(1)].iter().map(|&uk| model.density(uk - grid.nodes[i])).collect()).collect();
    let mut p_next = propagate(&p_k, win(2));
    let mut e_k: Vec<f64> = u[..win(1)].iter().map(|&uk| model.cdf(model.a - uk)).collect();
    let mut e_next = step_e(&e_k, win(2));
    let mut r_k: Vec<f64> = u[..win(1)].iter().map(|&uk| model.cdf(-uk)).collect();
    let mut r_next = step_r(&r_k, win(2));

    let mut k = 1;
    while 2 * k <= n_max {
        let len = p_k[0].len();
        let wp: Vec<Vec<f64>> = p_k.iter().map(|c| c.iter().zip(&w).map(|(p, w)| p * w).collect()).collect();
        let odd = 2 * k < n_max;
        let rows = par::map_indexed(g, |i| {
            // upper triangles; both slices are symmetric in (i, j)
            let even: Vec<f64> = (i..g).map(|j| dot(&wp[i], &p_k[j])).collect();
            let oddv: Vec<f64> = if odd {
                (i..g).map(|j| 0.5 * (dot(&wp[i], &p_next[j][..len]) + dot(&wp[j], &p_next[i][..len]))).collect()
            } else {
                vec![]
            };
            let ones = |e: &[f64]| -> f64 {
                wp[i].iter().enumerate().map(|(t, v)| v * (1.0 - e.get(t).copied().unwrap_or(0.0))).sum()
            };
            let rr = |r: &[f64]| -> f64 { wp[i].iter().zip(r).map(|(v, r)| v * r).sum() };
            (even, oddv, ones(&e_k), ones(&e_next), rr(&r_k), rr(&r_next))
        });
        for (i, (even, oddv, q0, q1, r0, r1)) in rows.into_iter().enumerate() {
            let n = 2 * k;
            for (d, &v) in even.iter().enumerate() {
                values[(n - 1) * g * g + i * g + i + d] = v;
                values[(n - 1) * g * g + (i + d) * g + i] = v;
            }
            survival[n * g + i] = q0;
            under[n * g + i] = r0;
            if odd {
                for (d, &v) in oddv.iter().enumerate() {
                    values[n * g * g + i * g + i + d] = v;
                    values[n * g * g + (i + d) * g + i] = v;
                }
                survival[(n + 1) * g + i] = q1;
                under[(n + 1) * g + i] = r1;
            }
        }
        if k <= SNAPSHOTS {
            for (i, col) in p_k.iter().enumerate() {
                let base = ((k - 1) * g + i) * snapshot_len;
                let m = col.len().min(snapshot_len);
                snapshots[base..base + m].copy_from_slice(&col[..m]);
            }
        }
        if k <= SNAPSHOTS && 2 * k + 2 > n_max {
            // keep snapshots complete for short horizons
            for kk in k + 1..=SNAPSHOTS {
                let src = if kk == k + 1 { p_next.clone() } else { propagate(&p_k, win(kk)) };
                for (i, col) in src.iter().enumerate() {
                    let base = ((kk - 1) * g + i) * snapshot_len;
                    let m = col.len().min(snapshot_len);
                    snapshots[base..base + m].copy_from_slice(&col[..m]);
                }
                p_k = src;
            }
            break;
        }
        let len2 = win(k + 2);
        let p2 = propagate(&p_next, len2);
        let e2 = step_e(&e_next, len2);
        let r2 = step_r(&r_next, len2);
        p_k = std::mem::replace(&mut p_next, p2);
        e_k = std::mem::replace(&mut e_next, e2);
        r_k = std::mem::replace(&mut r_next, r2);
        k += 1;
    }

    let phi_a = match params.phi {
        PhiSource::Quadrature { steps } => {
            let pts: Vec<f64> = grid.nodes.iter().map(|x| model.a - x).collect();
            let (asc, desc) = ladder_tails_quadrature(model, &pts, steps, hl.spacing)?;
            phi_from_tails(model, &asc, &desc)
        }
        PhiSource::MonteCarlo { replicas, seed } => {
            let pts: Vec<f64> = grid.nodes.iter().map(|x| model.a - x).collect();
            let t = ladder_tail_probs(model, &pts, replicas, 1_000_000, seed)?;
            phi_from_tails(model, &t.asc, &t.desc)
        }
    };
    if phi_a.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Inconsistent("Φ_a must be strictly positive".into()));
    }

    let tail_zeta = hurwitz_zeta(1.5, n_max as f64 + 1.0);
    let mut tensor = ConstrainedKernelTensor {
        model: *model,
        grid,
        n_max,
        halfline: hl,
        phi_source: params.phi,
        values,
        survival,
        under,
        defect: vec![],
        phi_a,
        tail_zeta,
        balance_residual: 0.0,
        snapshots,
        snapshot_len,
    };
    tensor.finish()?;
    Ok(tensor)
}

impl ConstrainedKernelTensor {
    fn finish(&mut self) -> Result<()> {
        let g = self.g();
        let mut worst: (f64, usize) = (0.0, 0);
        self.defect = vec![0.0; g];
        for i in 0..g {
            let strip: f64 = (1..=self.n_max).map(|n| self.strip_mass(n, i)).sum();
            let under: f64 = (1..=self.n_max).map(|n| self.under[n * g + i]).sum();
            let balance = strip + under + self.survival[self.n_max * g + i] - 1.0;
            if balance.abs() > worst.0.abs() || i == 0 {
                worst = (balance, i);
            }
            self.defect[i] = 1.0 - strip - self.tail_mass(i);
        }
        self.balance_residual = worst.0.abs();
        check_balance(worst.0, self.grid.nodes[worst.1])
    }

    pub fn g(&self) -> usize {
        self.grid.len()
    }

    /// `f_{x_i, y_j}(n)` for `1 ≤ n ≤ n_max`.
    pub fn f(&self, n: usize, i: usize, j: usize) -> f64 {
        let g = self.g();
        self.values[(n - 1) * g * g + i * g + j]
    }

    /// Row `f_{x_i, ·}(n)`.
    pub fn row(&self, n: usize, i: usize) -> &[f64] {
        let g = self.g();
        &self.values[(n - 1) * g * g + i * g..(n - 1) * g * g + (i + 1) * g]
    }

    /// The `G×G` slice for step `n`.
    pub fn slice(&self, n: usize) -> &[f64] {
        let g = self.g();
        &self.values[(n - 1) * g * g..n * g * g]
    }

    pub fn phi(&self, i: usize, j: usize) -> f64 {
        self.phi_a[i * self.g() + j]
    }

    /// Strip quadrature of `f_{x_i,·}(n)`.
    pub fn strip_mass(&self, n: usize, i: usize) -> f64 {
        self.grid.integrate(self.row(n, i))
    }

    /// `∫Φ_a(x_i, y) dy · Σ_{n>n_max} n^{-3/2}`.
    pub fn tail_mass(&self, i: usize) -> f64 {
        let g = self.g();
        self.grid.integrate(&self.phi_a[i * g..(i + 1) * g]) * self.tail_zeta
    }

    pub fn survival_at(&self, n: usize, i: usize) -> f64 {
        self.survival[n * self.g() + i]
    }

    /// `∫_lo^hi f_{x_i,y}(n) dy` with the last step integrated exactly, for `n ≤ 9`.
    pub fn bin_mass(&self, n: usize, i: usize, lo: f64, hi: f64) -> Result<f64> {
        if n == 0 || n > SNAPSHOTS + 1 {
            return Err(Error::param("n", format!("exact bin masses exist for 1 ≤ n ≤ {}", SNAPSHOTS + 1)));
        }
        let m = &self.model;
        if n == 1 {
            let x = self.grid.nodes[i];
            return Ok(m.cdf(hi - x) - m.cdf(lo - x));
        }
        let w = self.halfline.weights();
        let base = ((n - 2) * self.g() + i) * self.snapshot_len;
        Ok(self.snapshots[base..base + self.snapshot_len]
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let u = self.halfline.node(k);
                w[k] * p * (m.cdf(hi - u) - m.cdf(lo - u))
            })
            .sum())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::json!({
            "model": self.model,
            "g": self.g(),
            "n_max": self.n_max,
            "halfline": self.halfline,
            "phi_source": self.phi_source,
            "snapshot_len": self.snapshot_len,
        });
        write_artifact(
            path,
            KIND,
            meta,
            &[
                ("f", &self.values),
                ("survival", &self.survival),
                ("under", &self.under),
                ("phi_a", &self.phi_a),
                ("snapshots", &self.snapshots),
            ],
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let art = read_artifact(path, KIND)?;
        let bad = |r: &str| Error::Artifact { path: path.to_path_buf(), reason: r.to_string() };
        let meta = &art.header.meta;
        let field = |k: &str| meta.get(k).cloned().ok_or_else(|| bad(&format!("missing `{k}`")));
        let model: WalkModel = serde_json::from_value(field("model")?)?;
        let g: usize = serde_json::from_value(field("g")?)?;
        let n_max: usize = serde_json::from_value(field("n_max")?)?;
        let halfline: HalfLine = serde_json::from_value(field("halfline")?)?;
        let phi_source: PhiSource = serde_json::from_value(field("phi_source")?)?;
        let snapshot_len: usize = serde_json::from_value(field("snapshot_len")?)?;
        let arr = |k: &str, len: usize| -> Result<Vec<f64>> {
            let a = art.array(k).ok_or_else(|| bad(&format!("missing array `{k}`")))?;
            if a.len() != len {
                return Err(bad(&format!("array `{k}` has length {}, expected {len}", a.len())));
            }
            Ok(a.to_vec())
        };
        let mut t = ConstrainedKernelTensor {
            model,
            grid: StateGrid::new(model.a, g)?,
            n_max,
            halfline,
            phi_source,
            values: arr("f", n_max * g * g)?,
            survival: arr("survival", (n_max + 1) * g)?,
            under: arr("under", (n_max + 1) * g)?,
            defect: vec![],
            phi_a: arr("phi_a", g * g)?,
            tail_zeta: hurwitz_zeta(1.5, n_max as f64 + 1.0),
            balance_residual: 0.0,
            snapshots: arr("snapshots", SNAPSHOTS * g * snapshot_len)?,
            snapshot_len,
        };
        t.finish()?;
        Ok(t)
    }
}

fn check_balance(residual: f64, x: f64) -> Result<()> {
    if residual.abs() > 1e-2 {
        return Err(Error::MassBalance {
            x,
            residual,
            parameter: if residual < 0.0 { "M (half-line truncation)" } else { "halfline_G" },
        });
    }
    Ok(())
}

/// Direct simulation of the kernel from one start point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMc {
    pub x: f64,
    pub n: usize,
    /// `P_x[S_1..S_{n−1} > a, S_n ∈ [0,a]]`.
    pub acceptance: f64,
    pub acceptance_se: f64,
    pub bins: Vec<(f64, f64)>,
    /// Probability of each endpoint bin (unconditional).
    pub probs: Vec<f64>,
    pub probs_se: Vec<f64>,
    pub replicas: usize,
}

pub fn constrained_kernel_mc(model: &WalkModel, x: f64, n: usize, bins: usize, replicas: usize, seed: u64) -> Result<KernelMc> {
    if n == 0 || n > 16 {
        return Err(Error::param("n", format!("direct simulation needs 1 ≤ n ≤ 16, got {n}")));
    }
    if bins == 0 || replicas == 0 {
        return Err(Error::param("bins", "need at least one bin and one replica"));
    }
    let a = model.a;
    let landing = par::map_replicas(replicas, seed, stream::WALK_MC ^ (n as u64) << 8, |_, rng| {
        let mut s = x;
        for _ in 1..n {
            s += model.sample(rng);
            if s <= a {
                return None;
            }
        }
        s += model.sample(rng);
        (0.0..=a).contains(&s).then_some(s)
    });
    let mut counts = vec![0usize; bins];
    let mut hits = 0;
    for y in landing.into_iter().flatten() {
        hits += 1;
        counts[((y / a * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / replicas as f64).collect();
    let acceptance = hits as f64 / replicas as f64;
    Ok(KernelMc {
        x,
        n,
        acceptance,
        acceptance_se: binomial_se(acceptance, replicas),
        bins: (0..bins).map(|b| (a * b as f64 / bins as f64, a * (b + 1) as f64 / bins as f64)).collect(),
        probs_se: probs.iter().map(|&p| binomial_se(p, replicas)).collect(),
        probs,
        replicas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThmPrReport {
    /// `(n, e(n))` with `e(n) = max |n^{3/2} f_n/Φ_a − 1|`.
    pub rows: Vec<(usize, f64)>,
    pub decreasing: bool,
}

pub fn thm_pr_check(tensor: &ConstrainedKernelTensor, n_list: &[usize]) -> Result<ThmPrReport> {
    let g = tensor.g();
    let mut rows = Vec::new();
    for &n in n_list {
        if n < 2 || n > tensor.n_max {
            return Err(Error::param("n_list", format!("n = {n} outside [2, {}]", tensor.n_max)));
        }
        let scale = (n as f64).powf(1.5);
        let e = tensor
            .slice(n)
            .iter()
            .zip(&tensor.phi_a)
            .map(|(f, p)| (scale * f / p - 1.0).abs())
            .fold(0.0, f64::max);
        rows.push((n, e));
    }
    let _ = g;
    let decreasing = rows.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(ThmPrReport { rows, decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use std::sync::OnceLock;

    fn small() -> &'static ConstrainedKernelTensor {
        static T: OnceLock<ConstrainedKernelTensor> = OnceLock::new();
        T.get_or_init(|| {
            let m = WalkModel::gaussian(1.0, 1.0).unwrap();
            constrained_kernel(&m, &TensorParams::new(9, 64)).unwrap()
        })
    }

    #[test]
    fn first_steps_match_direct_quadrature() {
        let t = small();
        let m = t.model;
        for i in 0..9 {
            for j in 0..9 {
                let (x, y) = (t.grid.nodes[i], t.grid.nodes[j]);
                assert_eq!(t.f(1, i, j), m.density(y - x));
                let f2 = integrate(|u| m.density(u - x) * m.density(y - u), 1.0, 40.0, 1e-14, 1e-12).value;
                assert!((t.f(2, i, j) - f2).abs() < 5e-5 * f2, "{} vs {f2}", t.f(2, i, j));
            }
        }
        // f_3 as a double integral
        let (x, y) = (0.25, 0.75);
        let f3 = integrate(
            |u| {
                m.density(u - x)
                    * integrate(|v| m.density(v - u) * m.density(y - v), 1.0, 40.0, 1e-14, 1e-12).value
            },
            1.0,
            40.0,
            1e-13,
            1e-11,
        )
        .value;
        assert!((t.f(3, 2, 6) - f3).abs() < 5e-5 * f3);
    }

    #[test]
    fn bookkeeping_is_consistent() {
        let t = small();
        // dominated by the 9-node strip trapezoid
        assert!(t.balance_residual < 1e-3, "{}", t.balance_residual);
        for i in 0..9 {
            let mut prev = 1.0;
            for n in 1..=64 {
                let s = t.survival_at(n, i);
                assert!(s < prev && s > 0.0);
                prev = s;
            }
            assert!(t.defect[i] > 0.0 && t.defect[i] < 1.0);
        }
        assert!(t.values.iter().all(|&v| v >= 0.0));
        // reversal symmetry
        for n in [2, 3, 17, 64] {
            for i in 0..9 {
                for j in 0..9 {
                    assert!((t.f(n, i, j) - t.f(n, j, i)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn bin_masses_add_up() {
        let t = small();
        for n in 1..=9 {
            let whole = t.bin_mass(n, 3, 0.0, 1.0).unwrap();
            let halves = t.bin_mass(n, 3, 0.0, 0.4).unwrap() + t.bin_mass(n, 3, 0.4, 1.0).unwrap();
            assert!((whole - halves).abs() < 1e-15);
            if n >= 2 {
                assert!((whole - t.strip_mass(n, 3)).abs() < 5e-3 * whole, "n {n}");
            }
        }
        assert!(t.bin_mass(10, 0, 0.0, 1.0).is_err());
    }

    #[test]
    fn simulation_agrees_with_quadrature() {
        let t = small();
        let m = t.model;
        let mc = constrained_kernel_mc(&m, t.grid.nodes[4], 1, 4, 200_000, 1).unwrap();
        let exact = m.cdf(1.0 - 0.5) - m.cdf(-0.5);
        assert!((mc.acceptance - exact).abs() < 3.5 * mc.acceptance_se);
        let mut prev = 1.0;
        for n in 1..=6 {
            let mc = constrained_kernel_mc(&m, t.grid.nodes[4], n, 4, 200_000, 2).unwrap();
            for (b, &(lo, hi)) in mc.bins.iter().enumerate() {
                let q = t.bin_mass(n, 4, lo, hi).unwrap();
                assert!((mc.probs[b] - q).abs() < 4.0 * mc.probs_se[b].max(1e-6), "n {n} bin {b}: {} vs {q}", mc.probs[b]);
            }
            assert!(mc.acceptance <= prev);
            prev = mc.acceptance;
        }
    }

    #[test]
    fn parameter_guards() {
        let m = WalkModel::gaussian(1.0, 1.0).unwrap();
        let mut p = TensorParams::new(8, 64);
        p.m = Some(10.0);
        assert!(constrained_kernel(&m, &p).is_err());
        let mut p = TensorParams::new(8, 64);
        p.halfline_g = Some(20);
        assert!(constrained_kernel(&m, &p).is_err());
        assert!(check_balance(-0.02, 0.0).is_err());
        assert!(check_balance(0.005, 0.0).is_ok());
        assert!(thm_pr_check(small(), &[1]).is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let t = small();
        let dir = std::env::temp_dir().join(format!("renewlab-tensor-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.bin");
        t.save(&path).unwrap();
        let back = ConstrainedKernelTensor::load(&path).unwrap();
        assert_eq!(back.values, t.values);
        assert_eq!(back.defect, t.defect);
        assert_eq!(back.bin_mass(5, 2, 0.1, 0.6).unwrap(), t.bin_mass(5, 2, 0.1, 0.6).unwrap());
        std::fs::remove_dir_all(&dir).ok();
    }
}
