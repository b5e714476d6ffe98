//! Experiment specification: a single JSON document that describes the
//! instance generator, dataset sizes, solver overrides, and sweep grids.
//!
//! Every field has a default, so `{}` is a valid spec and tests can start
//! from `ExperimentSpec::default()` and tweak one knob at a time.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use wsac::critics::{CriticSolverCfg, WeightClass};
use wsac::driver::{LambdaSchedule, WsacConfig};

/// Instance generator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    /// Budget κ subtracted from raw per-step costs, so "safe" means J_c ≤ 0.
    pub cost_threshold: f64,
    pub seed: u64,
    /// Symmetric Dirichlet concentration for transition rows; large values
    /// approach uniform rows.
    pub transition_concentration: f64,
    /// Fraction of (state, action) pairs with a nonzero raw cost. Dense costs
    /// make almost every instance infeasible at small budgets, so costs are
    /// sparse by default.
    pub cost_density: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            n_states: 20,
            n_actions: 4,
            gamma: 0.9,
            cost_threshold: 0.1,
            seed: 0,
            transition_concentration: 1.0,
            cost_density: 0.25,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_states < 2 || self.n_actions < 2 {
            bail!("generator needs at least 2 states and 2 actions");
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            bail!("generator gamma must lie in [0, 1), got {}", self.gamma);
        }
        if !(self.cost_threshold >= 0.0 && self.cost_threshold <= 1.0) {
            bail!(
                "cost_threshold must lie in [0, 1], got {}",
                self.cost_threshold
            );
        }
        if !(self.transition_concentration > 0.0) || !self.transition_concentration.is_finite() {
            bail!(
                "transition_concentration must be positive and finite, got {}",
                self.transition_concentration
            );
        }
        if !(self.cost_density > 0.0 && self.cost_density <= 1.0) {
            bail!("cost_density must lie in (0, 1], got {}", self.cost_density);
        }
        Ok(())
    }
}

/// Dataset sizes and sampling seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub n_samples: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            n_samples: vec![20_000],
            seeds: vec![0, 1, 2],
        }
    }
}

impl DataSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples.is_empty() || self.seeds.is_empty() {
            bail!("data grids (n_samples, seeds) must be nonempty");
        }
        if self.n_samples.iter().any(|&n| n == 0) {
            bail!("n_samples entries must be positive");
        }
        Ok(())
    }
}

/// Optional overrides applied on top of `WsacConfig::defaults_for(v_max)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WsacOverrides {
    pub beta: Option<f64>,
    pub lambda: Option<LambdaSchedule>,
    pub k: Option<usize>,
    pub eta: Option<f64>,
    pub weight_class: Option<WeightClass>,
    pub critic: Option<CriticSolverCfg>,
    pub seed: Option<u64>,
}

impl WsacOverrides {
    /// Materialize a full solver config for a problem with the given `v_max`.
    pub fn apply(&self, v_max: f64) -> WsacConfig {
        let mut cfg = WsacConfig::defaults_for(v_max);
        if let Some(beta) = self.beta {
            cfg.beta = beta;
        }
        if let Some(lambda) = self.lambda {
            cfg.lambda = lambda;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(eta) = self.eta {
            cfg.eta = Some(eta);
        }
        if let Some(weight_class) = self.weight_class {
            cfg.weight_class = weight_class;
        }
        if let Some(critic) = self.critic {
            cfg.critic = critic;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg
    }
}

/// Sweep grids for the study subcommands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub beta: Vec<f64>,
    /// Each entry is an inclusive [lo, hi] ramp for the penalty weight λ.
    pub lambda_ranges: Vec<[f64; 2]>,
    /// Behavior-policy mixing weights: p=1 is the optimal safe policy, p=0 is
    /// uniform random.
    pub mixture_p: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            beta: vec![1.0, 0.5, 0.05],
            lambda_ranges: vec![[0.0, 1.0], [0.0, 2.0], [1.0, 2.0]],
            mixture_p: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.beta.is_empty() || self.lambda_ranges.is_empty() || self.mixture_p.is_empty() {
            bail!("sweep grids (beta, lambda_ranges, mixture_p) must be nonempty");
        }
        for &b in &self.beta {
            if !(b >= 0.0) || !b.is_finite() {
                bail!("sweep beta values must be finite and >= 0, got {b}");
            }
        }
        for &[lo, hi] in &self.lambda_ranges {
            if !(lo >= 0.0 && hi >= lo) || !hi.is_finite() {
                bail!("lambda range [{lo}, {hi}] must satisfy 0 <= lo <= hi < inf");
            }
        }
        for &p in &self.mixture_p {
            if !(0.0..=1.0).contains(&p) {
                bail!("mixture_p values must lie in [0, 1], got {p}");
            }
        }
        Ok(())
    }
}

/// Top-level experiment description, deserialized from a JSON file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub generator: GeneratorSpec,
    pub data: DataSpec,
    pub wsac: WsacOverrides,
    pub sweep: SweepSpec,
    /// Output directory; a `--out` flag on the command line takes precedence.
    pub outputs: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.data.validate()?;
        self.sweep.validate()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading experiment spec {}", path.display()))?;
        let spec: ExperimentSpec = serde_json::from_str(&text)
            .with_context(|| format!("parsing experiment spec {}", path.display()))?;
        spec.validate()
            .with_context(|| format!("validating experiment spec {}", path.display()))?;
        Ok(spec)
    }

    /// Resolve the output directory: explicit flag, then the spec's field.
    pub fn resolve_out(&self, flag: Option<&Path>) -> Result<PathBuf> {
        if let Some(dir) = flag {
            return Ok(dir.to_path_buf());
        }
        if let Some(dir) = &self.outputs {
            return Ok(dir.clone());
        }
        bail!("no output directory: pass --out or set \"outputs\" in the spec");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_is_valid() {
        ExperimentSpec::default().validate().unwrap();
    }

    #[test]
    fn empty_json_object_parses_to_defaults() {
        let spec: ExperimentSpec = serde_json::from_str("{}").unwrap();
        assert_eq!(spec, ExperimentSpec::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<ExperimentSpec>("{\"typo\": 1}");
        assert!(err.is_err());
    }

    #[test]
    fn overrides_apply_on_top_of_defaults() {
        let overrides = WsacOverrides {
            beta: Some(4.0),
            k: Some(7),
            ..WsacOverrides::default()
        };
        let cfg = overrides.apply(10.0);
        let base = WsacConfig::defaults_for(10.0);
        assert_eq!(cfg.beta, 4.0);
        assert_eq!(cfg.k, 7);
        assert_eq!(cfg.lambda, base.lambda);
        assert_eq!(cfg.weight_class, base.weight_class);
    }

    #[test]
    fn bad_threshold_rejected() {
        let mut spec = ExperimentSpec::default();
        spec.generator.cost_threshold = 1.5;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn bad_mixture_p_rejected() {
        let mut spec = ExperimentSpec::default();
        spec.sweep.mixture_p = vec![0.5, 1.2];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn out_dir_resolution_prefers_flag() {
        let mut spec = ExperimentSpec::default();
        assert!(spec.resolve_out(None).is_err());
        spec.outputs = Some(PathBuf::from("a"));
        assert_eq!(spec.resolve_out(None).unwrap(), PathBuf::from("a"));
        let flag = PathBuf::from("b");
        assert_eq!(spec.resolve_out(Some(&flag)).unwrap(), flag);
    }
}
