use serde::{Deserialize, Serialize};

use super::HeavyTailKernelFamily;
use crate::{Error, Result};

/// Density of `Π` with respect to length measure on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryMeasure {
    pub density: Vec<f64>,
    pub total: f64,
    pub residual: f64,
}

impl StationaryMeasure {
    /// `Π[lo, hi]` through the grid cells.
    pub fn cell_mass(&self, kernel: &HeavyTailKernelFamily, lo: f64, hi: f64) -> f64 {
        let grid = &kernel.grid;
        (0..grid.len())
            .map(|i| grid.weights[i] * self.density[i] * grid.overlap(i, lo, hi))
            .sum()
    }
}

fn push_forward(kernel: &HeavyTailKernelFamily, pi: &[f64]) -> Vec<f64> {
    let g = kernel.g();
    let w = &kernel.grid.weights;
    let mut out = vec![0.0; g];
    for i in 0..g {
        let m = pi[i] * w[i];
        let row = &kernel.k_matrix[i * g..(i + 1) * g];
        for (o, k) in out.iter_mut().zip(row) {
            *o += m * k;
        }
    }
    out
}

/// Stationary density by power iteration on `π ↦ ∫ π(x) k(x, ·) dx`.
pub fn stationary_distribution(kernel: &HeavyTailKernelFamily) -> Result<StationaryMeasure> {
    const MAX_ITER: usize = 10_000;
    let grid = &kernel.grid;
    let mut pi = vec![1.0 / grid.b; kernel.g()];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let mut next = push_forward(kernel, &pi);
        let total = grid.integrate(&next);
        for v in next.iter_mut() {
            *v /= total;
        }
        residual = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if residual < 1e-12 {
            break;
        }
    }
    if residual >= 1e-10 {
        return Err(Error::NoConvergence { what: "stationary distribution", iterations: MAX_ITER, residual });
    }
    let check = push_forward(kernel, &pi);
    let residual = check.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let total = grid.integrate(&pi);
    Ok(StationaryMeasure { density: pi, total, residual })
}

/// `E_{Π^{(2)}}[Φ/k] = ∬ Φ(u,v) Π(du) dv`.
pub fn pi2_expectation(kernel: &HeavyTailKernelFamily, pi: &StationaryMeasure) -> Result<f64> {
    let g = kernel.g();
    if pi.density.len() != g {
        return Err(Error::GridMismatch(format!(
            "stationary density has {} nodes, kernel grid has {g}",
            pi.density.len()
        )));
    }
    let w = &kernel.grid.weights;
    let mut s = 0.0;
    for i in 0..g {
        let inner: f64 = (0..g).map(|j| w[j] * kernel.phi(i, j)).sum();
        s += w[i] * pi.density[i] * inner;
    }
    Ok(s)
}
