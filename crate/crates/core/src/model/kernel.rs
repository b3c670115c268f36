use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{InterarrivalLaw, SlowlyVarying, StateGrid};
use crate::par::Rng;
use crate::{Error, Result};

/// Number of head interarrival values touched by the modulated family.
pub const HEAD: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Family {
    /// Common interarrival law for every transition.
    Separable,
    /// Head masses `n ≤ 8` reweighted by `1 + η(x,y)ψ(n)` with
    /// `η = amp·cos(2π(x−y)/b)`; the tail is shared.
    Modulated { amp: f64 },
}

/// Serializable descriptor: a kernel is rebuilt from this alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default = "default_family")]
    pub family: Family,
    pub alpha: f64,
    #[serde(default = "default_l")]
    pub l: SlowlyVarying,
    #[serde(default)]
    pub eps: f64,
    #[serde(default = "default_g")]
    pub g: usize,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_n_table")]
    pub n_table: u64,
}

fn default_family() -> Family {
    Family::Separable
}
fn default_l() -> SlowlyVarying {
    SlowlyVarying::Constant { c: 1.0 }
}
fn default_g() -> usize {
    65
}
fn default_b() -> f64 {
    1.0
}
fn default_n_table() -> u64 {
    1_000_000
}

impl KernelSpec {
    pub fn separable(alpha: f64, eps: f64) -> Self {
        KernelSpec {
            family: Family::Separable,
            alpha,
            l: default_l(),
            eps,
            g: default_g(),
            b: default_b(),
            n_table: default_n_table(),
        }
    }
}

/// `K_{x,dy}(n) = k(x,y) p_{x,y}(n) dy` on a grid, with `k(x,y) = (1 + eps·cos(2π(x+y)/b))/b`.
#[derive(Debug, Clone)]
pub struct HeavyTailKernelFamily {
    pub spec: KernelSpec,
    pub grid: StateGrid,
    pub law: Arc<InterarrivalLaw>,
    /// Row-major `k(x_i, y_j)`.
    pub k_matrix: Vec<f64>,
    /// Row-major `Φ(x_i, y_j)`.
    pub phi_matrix: Vec<f64>,
    /// Row-major `η(x_i, y_j)`, zero for the separable family.
    eta: Vec<f64>,
    psi: [f64; HEAD + 1],
    // cumulative w_j k(x_i, y_j) per row, last entry forced to 1
    row_cdf: Vec<f64>,
}

pub fn build_test_kernel(spec: &KernelSpec) -> Result<HeavyTailKernelFamily> {
    if !(spec.eps.abs() < 1.0) {
        return Err(Error::param("eps", format!("|eps| must be < 1 for k > 0, got {}", spec.eps)));
    }
    let grid = StateGrid::new(spec.b, spec.g)?;
    let law = Arc::new(InterarrivalLaw::new(spec.alpha, spec.l, spec.n_table)?);
    let g = grid.len();
    let b = grid.b;

    let mut psi = [0.0; HEAD + 1];
    let mut eta = vec![0.0; g * g];
    if let Family::Modulated { amp } = spec.family {
        let rest: f64 = (2..=HEAD as u64).map(|n| law.pmf(n)).sum();
        psi[1] = 1.0;
        for v in psi.iter_mut().skip(2) {
            *v = -law.pmf(1) / rest;
        }
        let worst = amp.abs() * psi[1].abs().max(psi[2].abs());
        if !(worst <= 0.9) {
            return Err(Error::param(
                "amp",
                format!("head perturbation |η ψ| reaches {worst:.3}, must stay ≤ 0.9"),
            ));
        }
        for i in 0..g {
            for j in 0..g {
                eta[i * g + j] = amp * (2.0 * PI * (grid.nodes[i] - grid.nodes[j]) / b).cos();
            }
        }
    }

    let mut k_matrix = vec![0.0; g * g];
    for i in 0..g {
        for j in 0..g {
            k_matrix[i * g + j] = (1.0 + spec.eps * (2.0 * PI * (grid.nodes[i] + grid.nodes[j]) / b).cos()) / b;
        }
    }
    let phi_matrix = k_matrix.iter().map(|k| law.c_alpha * k).collect();

    let mut row_cdf = vec![0.0; g * g];
    for i in 0..g {
        let mut acc = 0.0;
        for j in 0..g {
            acc += grid.weights[j] * k_matrix[i * g + j];
            row_cdf[i * g + j] = acc;
        }
        for j in 0..g {
            row_cdf[i * g + j] /= acc;
        }
        row_cdf[i * g + g - 1] = 1.0;
    }

    Ok(HeavyTailKernelFamily { spec: spec.clone(), grid, law, k_matrix, phi_matrix, eta, psi, row_cdf })
}

impl HeavyTailKernelFamily {
    pub fn g(&self) -> usize {
        self.grid.len()
    }

    pub fn alpha(&self) -> f64 {
        self.law.alpha
    }

    pub fn c_alpha(&self) -> f64 {
        self.law.c_alpha
    }

    pub fn k(&self, i: usize, j: usize) -> f64 {
        self.k_matrix[i * self.g() + j]
    }

    pub fn phi(&self, i: usize, j: usize) -> f64 {
        self.phi_matrix[i * self.g() + j]
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.spec.family, Family::Separable)
    }

    /// Conditional interarrival law `p_{x,y}(n) = k_{x,y}(n)/k(x,y)`.
    pub fn pmf_pair(&self, i: usize, j: usize, n: u64) -> f64 {
        let base = self.law.pmf(n);
        if n as usize <= HEAD && n >= 1 {
            base * (1.0 + self.eta[i * self.g() + j] * self.psi[n as usize])
        } else {
            base
        }
    }

    /// Joint density `k_{x,y}(n)`.
    pub fn joint(&self, i: usize, j: usize, n: u64) -> f64 {
        self.k(i, j) * self.pmf_pair(i, j, n)
    }

    /// Quadrature row mass `Σ_j w_j k(x_i, y_j)`.
    pub fn row_mass(&self, i: usize) -> f64 {
        let g = self.g();
        (0..g).map(|j| self.grid.weights[j] * self.k_matrix[i * g + j]).sum()
    }

    /// Total mass of `p_{x,y}` over `n ≥ 1`.
    pub fn pair_mass(&self, i: usize, j: usize) -> f64 {
        let mut head = 0.0;
        for n in 1..=HEAD as u64 {
            head += self.pmf_pair(i, j, n);
        }
        head + self.law.survival(HEAD as u64)
    }

    pub fn sample_next_state(&self, i: usize, rng: &mut Rng) -> usize {
        let g = self.g();
        let row = &self.row_cdf[i * g..(i + 1) * g];
        let u: f64 = rng.gen();
        row.partition_point(|&c| c <= u).min(g - 1)
    }

    /// Draws from `p_{x,y}` by inverse CDF.
    pub fn sample_interarrival(&self, i: usize, j: usize, rng: &mut Rng) -> u64 {
        let v = 1.0 - rng.gen::<f64>();
        let eta = self.eta[i * self.g() + j];
        if eta != 0.0 && v > self.law.survival(HEAD as u64) {
            let mut sf = 1.0;
            for n in 1..=HEAD as u64 {
                sf -= self.pmf_pair(i, j, n);
                if sf < v {
                    return n;
                }
            }
        }
        self.law.quantile_survival(v)
    }

    /// `1 − φ_{x,y}(λ)` where `φ` is the Laplace transform of `p_{x,y}`.
    ///
    /// `base` must be `law.one_minus_laplace(λ)`; only the head correction is
    /// pair dependent.
    pub fn one_minus_laplace_pair(&self, i: usize, j: usize, lambda: f64, base: f64) -> f64 {
        let eta = self.eta[i * self.g() + j];
        if eta == 0.0 {
            return base;
        }
        let mut corr = 0.0;
        for n in 1..=HEAD as u64 {
            corr += self.law.pmf(n) * eta * self.psi[n as usize] * -(-lambda * n as f64).exp_m1();
        }
        base + corr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::replica_rng;

    fn small(family: Family, eps: f64) -> HeavyTailKernelFamily {
        let mut spec = KernelSpec::separable(0.5, eps);
        spec.family = family;
        spec.g = 33;
        spec.n_table = 100_000;
        build_test_kernel(&spec).unwrap()
    }

    #[test]
    fn rows_are_stochastic() {
        for eps in [0.0, 0.3, -0.9] {
            let k = small(Family::Separable, eps);
            for i in 0..k.g() {
                assert!((k.row_mass(i) - 1.0).abs() < 1e-12);
            }
            assert!(k.k_matrix.iter().all(|&v| v > 0.0));
            assert!(k.phi_matrix.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut spec = KernelSpec::separable(0.5, 1.0);
        assert!(build_test_kernel(&spec).is_err());
        spec.eps = 0.2;
        spec.alpha = 1.0;
        assert!(build_test_kernel(&spec).is_err());
        spec.alpha = 0.5;
        spec.family = Family::Modulated { amp: 0.99 };
        spec.n_table = 1000;
        assert!(build_test_kernel(&spec).is_err());
    }

    #[test]
    fn eps_zero_is_flat() {
        let k = small(Family::Separable, 0.0);
        assert!(k.k_matrix.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(k.phi_matrix.iter().all(|&v| (v - k.c_alpha()).abs() < 1e-15));
    }

    #[test]
    fn modulated_pairs_are_non_defective() {
        let k = small(Family::Modulated { amp: 0.8 }, 0.3);
        for i in (0..k.g()).step_by(4) {
            for j in (0..k.g()).step_by(4) {
                assert!((k.pair_mass(i, j) - 1.0).abs() < 1e-12);
                for n in 1..=8 {
                    assert!(k.pmf_pair(i, j, n) > 0.0);
                }
            }
        }
    }

    #[test]
    fn modulated_tail_ratio_uniform() {
        let k = small(Family::Modulated { amp: 0.8 }, 0.3);
        let n = 100_000u64;
        let mut worst: f64 = 0.0;
        for i in 0..k.g() {
            for j in 0..k.g() {
                let r = (n as f64).powf(1.5) * k.joint(i, j, n) / (k.law.l.eval(n as f64) * k.phi(i, j));
                worst = worst.max((r - 1.0).abs());
            }
        }
        assert!(worst < 1e-2);
    }

    #[test]
    fn head_sampler_matches_pmf() {
        let k = small(Family::Modulated { amp: 0.8 }, 0.3);
        let (i, j) = (0, 0);
        let mut rng = replica_rng(5, 0, 0);
        let m = 200_000;
        let mut ones = 0usize;
        for _ in 0..m {
            if k.sample_interarrival(i, j, &mut rng) == 1 {
                ones += 1;
            }
        }
        let p = k.pmf_pair(i, j, 1);
        let se = (p * (1.0 - p) / m as f64).sqrt();
        assert!(((ones as f64 / m as f64) - p).abs() < 4.0 * se);
    }
}
