//! Run configuration. Every block has defaults, so `{}` is a valid config;
//! unknown keys anywhere are rejected.

use std::path::PathBuf;

use renewlab::model::KernelSpec;
use renewlab::walk::{PhiSource, TensorParams, WalkKind, WalkModel};
use renewlab::wetting::SurvivalMode;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub kernel: KernelSpec,
    pub mrp: MrpConfig,
    pub regen: RegenConfig,
    pub walk: WalkConfig,
    pub wetting: WettingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 20240601,
            out: None,
            kernel: KernelSpec::separable(0.5, 0.3),
            mrp: MrpConfig::default(),
            regen: RegenConfig::default(),
            walk: WalkConfig::default(),
            wetting: WettingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MrpConfig {
    /// Start node index.
    pub start: usize,
    pub n: u64,
    pub lambda: f64,
    pub replicas: usize,
    /// Equal cells of `[0, b]` for the per-cell comparisons.
    pub cells: usize,
    pub window: (u64, u64),
    pub tolerance: f64,
    /// Laplace-transform check of the interarrival law.
    pub lem2_lambda: f64,
    pub lem2_tolerance: f64,
    pub lem2_stride: usize,
}

impl Default for MrpConfig {
    fn default() -> Self {
        MrpConfig {
            start: 0,
            n: 10_000,
            lambda: 1e-3,
            replicas: 20_000,
            cells: 4,
            window: (9_000, 10_000),
            tolerance: 0.10,
            lem2_lambda: 1e-6,
            lem2_tolerance: 0.01,
            lem2_stride: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegenConfig {
    pub n: u64,
    pub trajectories: usize,
    pub t_list: Vec<f64>,
    pub level: f64,
    /// Largest KS distance accepted for the first `t`.
    pub ks_tolerance: f64,
    pub dcg_s: f64,
    pub dcg_t: f64,
    pub dcg_n: u64,
    pub dcg_tolerance: f64,
}

impl Default for RegenConfig {
    fn default() -> Self {
        RegenConfig {
            n: 10_000,
            trajectories: 5_000,
            t_list: vec![0.3, 0.5, 0.7],
            level: 0.01,
            ks_tolerance: 0.03,
            dcg_s: 0.25,
            dcg_t: 0.75,
            dcg_n: 100_000,
            dcg_tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkConfig {
    pub model: WalkModel,
    pub tensor: TensorParams,
    pub n_list: Vec<usize>,
    pub thm_pr_tolerance: f64,
    pub mc_max_n: usize,
    pub mc_replicas: usize,
    pub mc_bins: usize,
    pub ladder_replicas: usize,
    pub duality_m: usize,
    pub duality_replicas: usize,
    pub doney_x: f64,
    pub doney_y: f64,
    pub doney_delta: f64,
    pub doney_n: usize,
    pub doney_replicas: usize,
    pub doney_tolerance: f64,
    pub renewal_replicas: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            model: WalkModel { kind: WalkKind::Gaussian, sigma: 1.0, a: 1.0 },
            tensor: TensorParams { g: 32, n_max: 2048, m: None, halfline_g: None, phi: PhiSource::default() },
            n_list: vec![64, 512],
            thm_pr_tolerance: 0.10,
            mc_max_n: 8,
            mc_replicas: 1_000_000,
            mc_bins: 4,
            ladder_replicas: 100_000,
            duality_m: 6,
            duality_replicas: 400_000,
            doney_x: 0.5,
            doney_y: 0.5,
            doney_delta: 0.25,
            doney_n: 256,
            doney_replicas: 10_000_000,
            doney_tolerance: 0.25,
            renewal_replicas: 100_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WettingConfig {
    /// Tensor written by `walk`; defaults to `<out>/tensor.bin`.
    pub tensor: Option<PathBuf>,
    /// Strip nodes of the refinement tensor for `wetting-betac`.
    pub refine_g: Option<usize>,
    pub refine_tolerance: f64,
    /// Offsets from `β_c` for the tilted-kernel row masses.
    pub tilt_offsets: Vec<f64>,
    pub tilt_tolerance: f64,
    /// Offsets from `β_c` for the free-energy profile.
    pub beta_offsets: Vec<f64>,
    pub mode: SurvivalMode,
    pub n: usize,
    pub paths: usize,
    pub estz_ns: Vec<usize>,
    pub estz_variation: f64,
    pub estz_constant_tolerance: f64,
    pub estz_cross_tolerance: f64,
    pub s: f64,
    pub t: f64,
    pub main2_tolerance: f64,
    pub oracle_samples: usize,
    pub oracle_step: f64,
    pub scaling_ns: Vec<usize>,
    pub scaling_paths: usize,
    pub scaling_tolerance: f64,
}

impl Default for WettingConfig {
    fn default() -> Self {
        WettingConfig {
            tensor: None,
            refine_g: Some(64),
            refine_tolerance: 1e-3,
            tilt_offsets: vec![-0.5, -0.2, 0.0, 0.3],
            tilt_tolerance: 1e-2,
            beta_offsets: vec![-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 1.5, 2.0],
            mode: SurvivalMode::Renewal,
            n: 2000,
            paths: 5000,
            estz_ns: vec![400, 500, 600, 700, 800],
            estz_variation: 0.03,
            estz_constant_tolerance: 0.10,
            estz_cross_tolerance: 0.02,
            s: 0.25,
            t: 0.75,
            main2_tolerance: 0.03,
            oracle_samples: 20_000,
            oracle_step: 1e-4,
            scaling_ns: vec![500, 1000, 2000],
            scaling_paths: 2000,
            scaling_tolerance: 0.05,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c.walk.tensor.g, 32);
        assert_eq!(c.mrp.n, 10_000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 1}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"walk": {"modle": {}}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"kernel": {"alpha": 0.5, "colour": 1}}"#).is_err());
    }

    #[test]
    fn round_trips() {
        let c = RunConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }
}
