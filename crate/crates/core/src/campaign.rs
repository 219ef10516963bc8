//! Campaign files: one network, one search config and a demand model per
//! scenario, all referenced relative to the campaign file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assign::Network;
use crate::demand::{DemandConfig, DemandConfigFile};
use crate::error::{Error, Result};
use crate::io;
use crate::search::{EquilibriumSearch, SearchConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub demand: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignFile {
    pub network: PathBuf,
    pub search: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub scenarios: Vec<ScenarioEntry>,
}

impl CampaignFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: CampaignFile = toml::from_str(text).map_err(|e| Error::from_toml(e, text))?;
        if file.scenarios.is_empty() {
            return Err(Error::Config("campaign lists no scenarios".into()));
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("campaign serializes")
    }
}

/// A loaded, validated campaign.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub search: EquilibriumSearch,
    /// Output directory named by the campaign file, already resolved.
    pub output: Option<PathBuf>,
}

fn named<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.with_source_name(path.display().to_string()))
}

impl Campaign {
    pub fn load(path: &Path) -> Result<Self> {
        let file = named(path, CampaignFile::parse(&io::read_text(path)?))?;

        let net_path = io::resolve(path, &file.network);
        let network = named(&net_path, Network::parse(&io::read_text(&net_path)?))?;

        let search_path = io::resolve(path, &file.search);
        let config = named(&search_path, SearchConfig::parse(&io::read_text(&search_path)?))?;

        let scenarios = file
            .scenarios
            .iter()
            .map(|s| DemandConfig::load(&io::resolve(path, &s.demand)))
            .collect::<Result<Vec<_>>>()?;

        Ok(Campaign {
            search: EquilibriumSearch::new(network, scenarios, config)?,
            output: file.output.map(|o| io::resolve(path, &o)),
        })
    }

    /// Write a self-contained copy of the campaign into `dir`; the copy
    /// loads back through [`Campaign::load`] on `dir/campaign.toml`.
    pub fn write_copy(search: &EquilibriumSearch, dir: &Path) -> Result<PathBuf> {
        io::write_atomic(&dir.join("network.toml"), &search.network.to_toml())?;
        io::write_atomic(&dir.join("search.toml"), &search.config.to_toml())?;
        let mut scenarios = Vec::new();
        for s in &search.scenarios {
            let tag = &s.scenario_tag;
            let potential = format!("potential_{tag}.csv");
            let demand = format!("demand_{tag}.toml");
            io::write_matrix(&dir.join(&potential), &s.potential)?;
            let file = DemandConfigFile {
                potential: potential.into(),
                alpha: s.alpha,
                beta: s.beta,
                mode: s.mode,
                seed: s.seed,
                scenario_tag: tag.clone(),
            };
            io::write_atomic(&dir.join(&demand), &file.to_toml())?;
            scenarios.push(ScenarioEntry {
                demand: demand.into(),
            });
        }
        let campaign = CampaignFile {
            network: "network.toml".into(),
            search: "search.toml".into(),
            output: None,
            scenarios,
        };
        let path = dir.join("campaign.toml");
        io::write_atomic(&path, &campaign.to_toml())?;
        Ok(path)
    }
}
