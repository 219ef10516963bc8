//! Stand-in travel demand model.
//!
//! Each OD pair has a pool of `K` potential trip makers who each travel with
//! probability `1 / (1 + exp(alpha + beta·tt))`. With `beta > 0` trips fall
//! strictly as travel time rises, and no cell's demand depends on any other
//! cell's travel time.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::matrix::{OdMatrix, SkimMatrix, ZoneMatrix};
use crate::seed::cell_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandMode {
    /// Real-valued expected trips `K·p`.
    Expected,
    /// Binomial draws seeded per cell.
    Stochastic,
}

impl FromStr for DemandMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expected" => Ok(DemandMode::Expected),
            "stochastic" => Ok(DemandMode::Stochastic),
            other => Err(Error::Config(format!("unknown demand mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandConfig {
    /// Maximum trip makers per OD pair; non-negative integers.
    pub potential: ZoneMatrix,
    pub alpha: f64,
    pub beta: f64,
    pub mode: DemandMode,
    pub seed: u64,
    pub scenario_tag: String,
}

impl DemandConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if !self.alpha.is_finite() {
            return Err(Error::Config("alpha must be finite".into()));
        }
        if let Some(v) = self
            .potential
            .values()
            .iter()
            .find(|v| **v < 0.0 || v.fract() != 0.0 || **v > u32::MAX as f64)
        {
            return Err(Error::Config(format!(
                "potential cells must be non-negative integers, found {v}"
            )));
        }
        Ok(())
    }

    /// Trip probability for one OD pair at travel time `tt`.
    pub fn probability(&self, tt: f64) -> f64 {
        1.0 / (1.0 + (self.alpha + self.beta * tt).exp())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_text(path)?;
        let file = DemandConfigFile::parse(&text)
            .map_err(|e| e.with_source_name(path.display().to_string()))?;
        let potential_path = io::resolve(path, &file.potential);
        let potential = io::read_matrix(&potential_path)?;
        let cfg = file.into_config(potential)?;
        Ok(cfg)
    }
}

/// On-disk form of [`DemandConfig`]; the potential matrix lives in its own
/// file, referenced relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandConfigFile {
    pub potential: PathBuf,
    pub alpha: f64,
    pub beta: f64,
    pub mode: DemandMode,
    #[serde(default)]
    pub seed: u64,
    pub scenario_tag: String,
}

impl DemandConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::from_toml(e, text))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("demand config serializes")
    }

    pub fn into_config(self, potential: ZoneMatrix) -> Result<DemandConfig> {
        let cfg = DemandConfig {
            potential,
            alpha: self.alpha,
            beta: self.beta,
            mode: self.mode,
            seed: self.seed,
            scenario_tag: self.scenario_tag,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn generate_demand(t: &SkimMatrix, cfg: &DemandConfig) -> Result<OdMatrix> {
    generate_demand_seeded(t, cfg, cfg.seed)
}

/// As [`generate_demand`] with an explicit seed in place of `cfg.seed`.
pub fn generate_demand_seeded(t: &SkimMatrix, cfg: &DemandConfig, seed: u64) -> Result<OdMatrix> {
    cfg.validate()?;
    t.check_same_zones(&cfg.potential)?;
    let z = t.size();
    let mut values = Vec::with_capacity(z * z);
    for o in 0..z {
        for d in 0..z {
            let tt = t.get(o, d);
            if !tt.is_finite() {
                return Err(Error::Input(format!("non-finite travel time at ({o}, {d})")));
            }
            let k = cfg.potential.get(o, d);
            let p = cfg.probability(tt);
            let trips = match cfg.mode {
                DemandMode::Expected => k * p,
                DemandMode::Stochastic => {
                    if k == 0.0 || p == 0.0 {
                        0.0
                    } else {
                        let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, o, d));
                        let dist = Binomial::new(k as u64, p)
                            .map_err(|e| Error::Input(format!("binomial({k}, {p}): {e}")))?;
                        dist.sample(&mut rng) as f64
                    }
                }
            };
            values.push(trips);
        }
    }
    OdMatrix::new(t.zones().clone(), values, cfg.scenario_tag.clone())
}
