//! Synthetic grid scenarios for desk-scale experiments.
//!
//! Zones sit on a row-major grid, one centroid per node, with two-way links
//! between grid neighbours. The AM potential follows a gravity form
//! `K_od ∝ residents_o·jobs_d / dist_od` with lognormal zone weights; PM is
//! its transpose.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::assign::{Centroid, Link, Network, NetworkFile, DEFAULT_VDF_ALPHA, DEFAULT_VDF_BETA};
use crate::campaign::{CampaignFile, ScenarioEntry};
use crate::demand::{DemandConfigFile, DemandMode};
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::{ZoneMatrix, ZoneSystem};
use crate::search::SearchConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub zones: usize,
    /// Grid columns; `ceil(sqrt(zones))` when unset.
    pub grid_size: Option<usize>,
    pub seed: u64,
    /// Mean free-flow link time, minutes; each link varies ±20%.
    pub link_minutes: f64,
    /// Link capacity range, vehicles per hour.
    pub capacity: (f64, f64),
    /// Scale applied to the gravity potential before rounding.
    pub potential_scale: f64,
    /// Sigma of the lognormal zone weights.
    pub size_sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mode: DemandMode,
    /// Histogram bins written into the search config.
    pub bins: usize,
}

impl GeneratorParams {
    pub fn new(zones: usize, seed: u64) -> Self {
        GeneratorParams {
            zones,
            grid_size: None,
            seed,
            link_minutes: 3.0,
            capacity: (1200.0, 1800.0),
            potential_scale: 220.0,
            size_sigma: 0.6,
            alpha: -4.4,
            beta: 0.3,
            mode: DemandMode::Stochastic,
            bins: 30,
        }
    }
}

/// Every file of a generated scenario, in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: NetworkFile,
    pub potentials: Vec<ZoneMatrix>,
    pub demands: Vec<DemandConfigFile>,
    pub search: SearchConfig,
    pub campaign: CampaignFile,
}

fn zone_label(i: usize, width: usize) -> String {
    format!("z{:0width$}", i + 1)
}

fn node_label(i: usize, width: usize) -> String {
    format!("n{:0width$}", i + 1)
}

pub fn generate(p: &GeneratorParams) -> Result<Scenario> {
    let z = p.zones;
    if z < 2 {
        return Err(Error::Usage(format!("need at least 2 zones, got {z}")));
    }
    let cols = p
        .grid_size
        .unwrap_or_else(|| (z as f64).sqrt().ceil() as usize);
    if cols == 0 {
        return Err(Error::Usage("grid size must be positive".into()));
    }
    let (cap_lo, cap_hi) = p.capacity;
    let params_ok = p.link_minutes > 0.0
        && p.link_minutes.is_finite()
        && cap_lo > 0.0
        && cap_hi >= cap_lo
        && cap_hi.is_finite()
        && p.potential_scale >= 0.0
        && p.potential_scale.is_finite()
        && p.size_sigma >= 0.0
        && p.size_sigma.is_finite();
    if !params_ok {
        return Err(Error::Usage("generator parameters out of range".into()));
    }
    let width = z.to_string().len().max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let nodes: Vec<String> = (0..z).map(|i| node_label(i, width)).collect();
    let pos = |i: usize| ((i % cols) as i64, (i / cols) as i64);
    let mut links = Vec::new();
    for i in 0..z {
        let right = (i % cols + 1 < cols && i + 1 < z).then_some(i + 1);
        let down = (i + cols < z).then_some(i + cols);
        for j in [right, down].into_iter().flatten() {
            for (a, b) in [(i, j), (j, i)] {
                let t0 = p.link_minutes * rng.random_range(0.8..=1.2);
                let capacity = rng.random_range(cap_lo..=cap_hi);
                links.push(Link {
                    from: nodes[a].clone(),
                    to: nodes[b].clone(),
                    t0: (t0 * 100.0).round() / 100.0,
                    capacity: capacity.round(),
                    alpha: DEFAULT_VDF_ALPHA,
                    beta: DEFAULT_VDF_BETA,
                });
            }
        }
    }
    let zone_ids: Vec<String> = (0..z).map(|i| zone_label(i, width)).collect();
    let centroids = zone_ids
        .iter()
        .zip(&nodes)
        .map(|(zone, node)| Centroid {
            zone: zone.clone(),
            node: node.clone(),
        })
        .collect();
    let network = NetworkFile {
        nodes,
        links,
        centroids,
    };
    // also proves connectivity and parameter ranges
    Network::new(network.clone())?;

    let sizes = LogNormal::new(0.0, p.size_sigma).map_err(|e| Error::Usage(e.to_string()))?;
    // residents drive productions, jobs drive attractions
    let residents: Vec<f64> = (0..z).map(|_| sizes.sample(&mut rng)).collect();
    let jobs: Vec<f64> = (0..z).map(|_| sizes.sample(&mut rng)).collect();
    let zs = Arc::new(ZoneSystem::new(zone_ids)?);
    let mut am = vec![0.0; z * z];
    for o in 0..z {
        for d in 0..z {
            if o != d {
                let ((xo, yo), (xd, yd)) = (pos(o), pos(d));
                let dist = ((xo - xd).abs() + (yo - yd).abs()) as f64;
                am[o * z + d] = (p.potential_scale * residents[o] * jobs[d] / dist).round();
            }
        }
    }
    let am = ZoneMatrix::new(zs, am, "AM")?;
    let pm = am.transpose().with_tag("PM")?;

    let demands: Vec<DemandConfigFile> = ["AM", "PM"]
        .iter()
        .enumerate()
        .map(|(i, tag)| DemandConfigFile {
            potential: format!("potential_{tag}.csv").into(),
            alpha: p.alpha,
            beta: p.beta,
            mode: p.mode,
            seed: p.seed.wrapping_add(i as u64),
            scenario_tag: tag.to_string(),
        })
        .collect();
    let search = SearchConfig {
        bins: p.bins,
        seed: p.seed,
        ..SearchConfig::default()
    };
    let campaign = CampaignFile {
        network: "network.toml".into(),
        search: "search.toml".into(),
        output: None,
        scenarios: ["AM", "PM"]
            .iter()
            .map(|tag| ScenarioEntry {
                demand: format!("demand_{tag}.toml").into(),
            })
            .collect(),
    };
    Ok(Scenario {
        network,
        potentials: vec![am, pm],
        demands,
        search,
        campaign,
    })
}

impl Scenario {
    /// Write all files into `dir`; returns the campaign file path.
    pub fn write(&self, dir: &Path) -> Result<std::path::PathBuf> {
        io::write_atomic(&dir.join("network.toml"), &self.network.to_toml())?;
        io::write_atomic(&dir.join("search.toml"), &self.search.to_toml())?;
        for (demand, potential) in self.demands.iter().zip(&self.potentials) {
            io::write_matrix(&dir.join(&demand.potential), potential)?;
            io::write_atomic(
                &dir.join(format!("demand_{}.toml", demand.scenario_tag)),
                &demand.to_toml(),
            )?;
        }
        let path = dir.join("campaign.toml");
        io::write_atomic(&path, &self.campaign.to_toml())?;
        Ok(path)
    }
}
