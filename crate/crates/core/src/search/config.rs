use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assign::{EngineKind, EngineParams};
use crate::error::{Error, Result};
use crate::perturb::Quantile;
use crate::quantity::DEFAULT_BINS;

/// Which observed skims feed the per-cell quantile stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StackMembership {
    /// Output skims of the bootstrap iterations only.
    Bootstrap,
    /// Every output skim recorded so far.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub initial_probes: Vec<Quantile>,
    /// Per-scenario quantile assignments probed next to the identical pairs.
    pub mixed_probes: Vec<BTreeMap<String, Quantile>>,
    pub refine_step: f64,
    /// Refinement scans `[best − halfwidth, best + halfwidth] ∩ [0, 1]`.
    pub refine_halfwidth: f64,
    pub threshold: f64,
    pub bootstrap_iterations: usize,
    pub stability_iterations: usize,
    /// Stability ceiling as a multiple of `threshold`.
    pub ceiling_factor: f64,
    /// Allowed per-bin count spread over the final window, as a share of Z².
    pub neighborhood_envelope: f64,
    pub bins: usize,
    /// Budget on main-chain model runs per scenario (probes not counted).
    pub max_total_runs: usize,
    pub stack: StackMembership,
    pub seed: u64,
    /// Engine for the bootstrap, probe and main-chain iterations.
    pub main_engine: EngineKind,
    pub engine: EngineParams,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            initial_probes: [0.3, 0.4, 0.5, 0.75]
                .into_iter()
                .map(|q| Quantile::new(q).expect("default probes lie in [0, 1]"))
                .collect(),
            mixed_probes: Vec::new(),
            refine_step: 0.03,
            refine_halfwidth: 0.1,
            threshold: 0.10,
            bootstrap_iterations: 4,
            stability_iterations: 8,
            ceiling_factor: 2.0,
            neighborhood_envelope: 0.05,
            bins: DEFAULT_BINS,
            max_total_runs: 20,
            stack: StackMembership::Bootstrap,
            seed: 0,
            main_engine: EngineKind::Sta,
            engine: EngineParams::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        // threshold 1.0 is admitted so every pair counts as converged
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!(
                "threshold must lie in (0, 1], got {}",
                self.threshold
            )));
        }
        if !(self.refine_step > 0.0 && self.refine_step.is_finite()) {
            return Err(Error::Config("refine_step must be positive".into()));
        }
        if !(self.refine_halfwidth >= 0.0 && self.refine_halfwidth.is_finite()) {
            return Err(Error::Config("refine_halfwidth must be non-negative".into()));
        }
        if self.bootstrap_iterations < 2 {
            return Err(Error::Config("bootstrap_iterations must be at least 2".into()));
        }
        if self.bins == 0 {
            return Err(Error::Config("bins must be at least 1".into()));
        }
        if !(self.ceiling_factor > 0.0 && self.ceiling_factor.is_finite()) {
            return Err(Error::Config("ceiling_factor must be positive".into()));
        }
        if !(self.neighborhood_envelope >= 0.0 && self.neighborhood_envelope.is_finite()) {
            return Err(Error::Config("neighborhood_envelope must be non-negative".into()));
        }
        if self.engine.sta.tol.is_nan() || self.engine.sta.tol <= 0.0 {
            return Err(Error::Config("engine.sta.tol must be positive".into()));
        }
        self.engine.dta.slices()?;
        Ok(())
    }

    pub fn stability_ceiling(&self) -> f64 {
        self.ceiling_factor * self.threshold
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SearchConfig = toml::from_str(text).map_err(|e| Error::from_toml(e, text))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("search config serializes")
    }
}
