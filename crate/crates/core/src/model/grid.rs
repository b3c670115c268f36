use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `G` equally spaced nodes on `[0, b]` with trapezoid weights.
///
/// Node `i` owns the cell `[x_i − h/2, x_i + h/2] ∩ [0, b]`, whose length is
/// exactly its weight; cell masses of point processes on the grid are
/// attributed through these cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl StateGrid {
    pub fn new(b: f64, g: usize) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::param("b", format!("interval length must be positive, got {b}")));
        }
        if g < 2 {
            return Err(Error::param("G", format!("need at least 2 nodes, got {g}")));
        }
        let h = b / (g - 1) as f64;
        let nodes = (0..g).map(|i| i as f64 * h).collect();
        let weights = crate::quad::trapezoid_weights(g, h);
        Ok(StateGrid { b, nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.b / (self.len() - 1) as f64
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        let h = self.spacing();
        let x = self.nodes[i];
        ((x - 0.5 * h).max(0.0), (x + 0.5 * h).min(self.b))
    }

    /// Fraction of node `i`'s cell lying in `[lo, hi]`.
    pub fn overlap(&self, i: usize, lo: f64, hi: f64) -> f64 {
        let (a, b) = self.cell(i);
        ((hi.min(b) - lo.max(a)).max(0.0)) / (b - a)
    }

    /// Index of the node whose cell contains `x` (ties go right).
    pub fn nearest(&self, x: f64) -> usize {
        let i = (x / self.spacing()).round();
        (i.max(0.0) as usize).min(self.len() - 1)
    }

    /// Quadrature of nodal values.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Splits `[0, b]` into `k` equal cells.
    pub fn equal_cells(&self, k: usize) -> Vec<(f64, f64)> {
        (0..k)
            .map(|j| (self.b * j as f64 / k as f64, self.b * (j + 1) as f64 / k as f64))
            .collect()
    }
}
