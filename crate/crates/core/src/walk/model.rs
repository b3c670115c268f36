use std::f64::consts::{PI, SQRT_2};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::par::Rng;
use crate::special::{normal_cdf, normal_pdf};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkKind {
    Gaussian,
    /// Uniform on `[−σ√3, σ√3]`.
    Uniform,
    /// Laplace with scale `σ/√2`.
    Laplace,
}

/// Symmetric increment law with variance `σ²`, and the strip width `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkModel {
    pub kind: WalkKind,
    pub sigma: f64,
    pub a: f64,
}

impl WalkModel {
    pub fn new(kind: WalkKind, sigma: f64, a: f64) -> Result<Self> {
        let m = WalkModel { kind, sigma, a };
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian(sigma: f64, a: f64) -> Result<Self> {
        Self::new(WalkKind::Gaussian, sigma, a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be positive, got {}", self.sigma)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::param("a", format!("strip width must be positive, got {}", self.a)));
        }
        let p = self.sf(self.a);
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::param("a", format!("P[S_1 > a] = {p} must lie in (0,1)")));
        }
        Ok(())
    }

    fn uniform_half_width(&self) -> f64 {
        self.sigma * 3f64.sqrt()
    }

    fn laplace_scale(&self) -> f64 {
        self.sigma / SQRT_2
    }

    /// Increment density `h`.
    pub fn density(&self, z: f64) -> f64 {
        match self.kind {
            WalkKind::Gaussian => normal_pdf(z / self.sigma) / self.sigma,
            WalkKind::Uniform => {
                let b = self.uniform_half_width();
                if z.abs() <= b { 0.5 / b } else { 0.0 }
            }
            WalkKind::Laplace => {
                let s = self.laplace_scale();
                (-z.abs() / s).exp() / (2.0 * s)
            }
        }
    }

    /// `P[X ≤ z]`.
    pub fn cdf(&self, z: f64) -> f64 {
        match self.kind {
            WalkKind::Gaussian => normal_cdf(z / self.sigma),
            WalkKind::Uniform => {
                let b = self.uniform_half_width();
                ((z + b) / (2.0 * b)).clamp(0.0, 1.0)
            }
            WalkKind::Laplace => {
                let s = self.laplace_scale();
                if z < 0.0 { 0.5 * (z / s).exp() } else { 1.0 - 0.5 * (-z / s).exp() }
            }
        }
    }

    /// `P[X > z]`, accurate in the upper tail.
    pub fn sf(&self, z: f64) -> f64 {
        self.cdf(-z)
    }

    /// Half-width beyond which the density is below `1e-16·h(0)` (or zero).
    pub fn support_radius(&self) -> f64 {
        match self.kind {
            WalkKind::Gaussian => self.sigma * (2.0 * 16.0 * 10f64.ln()).sqrt(),
            WalkKind::Uniform => self.uniform_half_width(),
            WalkKind::Laplace => self.laplace_scale() * 16.0 * 10f64.ln(),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self.kind {
            WalkKind::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.sigma * z
            }
            WalkKind::Uniform => {
                let b = self.uniform_half_width();
                b * (2.0 * rng.gen::<f64>() - 1.0)
            }
            WalkKind::Laplace => {
                let s = self.laplace_scale();
                let u: f64 = rng.gen::<f64>() - 0.5;
                -s * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
            }
        }
    }

    /// `1/(σ√(2π))`, the local-limit constant.
    pub fn local_constant(&self) -> f64 {
        1.0 / (self.sigma * (2.0 * PI).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::map_replicas;
    use crate::quad::integrate;
    use crate::stats::mean_se;

    #[test]
    fn densities_have_unit_mass_and_variance() {
        for kind in [WalkKind::Gaussian, WalkKind::Uniform, WalkKind::Laplace] {
            let m = WalkModel::new(kind, 1.3, 1.0).unwrap();
            let r = m.support_radius();
            let mut mass = 0.0;
            let mut var = 0.0;
            // split at 0 and at the support edge so kinks sit on piece boundaries
            for (lo, hi) in [(-r, 0.0), (0.0, r)] {
                mass += integrate(|z| m.density(z), lo, hi, 1e-13, 1e-13).value;
                var += integrate(|z| z * z * m.density(z), lo, hi, 1e-13, 1e-13).value;
            }
            assert!((mass - 1.0).abs() < 1e-10, "{kind:?} mass {mass}");
            assert!((var - 1.69).abs() < 1e-8, "{kind:?} var {var}");
            assert!((m.cdf(0.7) + m.sf(0.7) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn samplers_match_variance() {
        for kind in [WalkKind::Gaussian, WalkKind::Uniform, WalkKind::Laplace] {
            let m = WalkModel::new(kind, 0.8, 0.5).unwrap();
            let xs = map_replicas(100_000, 2, 77, |_, rng| m.sample(rng));
            let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
            let (v, se) = mean_se(&sq);
            assert!((v - 0.64).abs() < 4.0 * se, "{kind:?}: {v}");
            let (mu, se) = mean_se(&xs);
            assert!(mu.abs() < 4.0 * se);
        }
    }

    #[test]
    fn rejects_degenerate_strip() {
        assert!(WalkModel::new(WalkKind::Uniform, 1.0, 2.0).is_err());
        assert!(WalkModel::new(WalkKind::Gaussian, 0.0, 1.0).is_err());
        assert!(WalkModel::new(WalkKind::Gaussian, 1.0, -1.0).is_err());
    }
}
