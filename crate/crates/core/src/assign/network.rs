use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_label, ZoneSystem};

pub const DEFAULT_VDF_ALPHA: f64 = 0.15;
pub const DEFAULT_VDF_BETA: f64 = 4.0;

/// Directed link with a BPR volume-delay curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub from: String,
    pub to: String,
    /// Free-flow time, minutes.
    pub t0: f64,
    /// Vehicles per hour.
    pub capacity: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_alpha() -> f64 {
    DEFAULT_VDF_ALPHA
}

fn default_beta() -> f64 {
    DEFAULT_VDF_BETA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Centroid {
    pub zone: String,
    pub node: String,
}

/// On-disk network layout (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub nodes: Vec<String>,
    #[serde(default)]
    pub links: Vec<Link>,
    pub centroids: Vec<Centroid>,
}

impl NetworkFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::from_toml(e, text))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("network serializes")
    }
}

/// Validated network with index-based adjacency.
#[derive(Debug, Clone)]
pub struct Network {
    file: NetworkFile,
    zones: Arc<ZoneSystem>,
    link_ends: Vec<(usize, usize)>,
    out_links: Vec<Vec<usize>>,
    centroid_nodes: Vec<usize>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.file == other.file
    }
}

impl Network {
    pub fn new(file: NetworkFile) -> Result<Self> {
        let mut node_index = HashMap::with_capacity(file.nodes.len());
        for (i, id) in file.nodes.iter().enumerate() {
            check_label(id, "node id")?;
            if id.is_empty() || node_index.insert(id.as_str(), i).is_some() {
                return Err(Error::Config(format!("node id {id:?} is empty or repeated")));
            }
        }
        let lookup = |id: &str| {
            node_index
                .get(id)
                .copied()
                .ok_or_else(|| Error::Config(format!("unknown node {id:?}")))
        };

        let mut link_ends = Vec::with_capacity(file.links.len());
        let mut out_links = vec![Vec::new(); file.nodes.len()];
        for (i, l) in file.links.iter().enumerate() {
            let ok = l.t0 > 0.0
                && l.t0.is_finite()
                && l.capacity > 0.0
                && l.capacity.is_finite()
                && l.alpha >= 0.0
                && l.alpha.is_finite()
                && l.beta >= 1.0
                && l.beta.is_finite();
            if !ok {
                return Err(Error::Config(format!(
                    "link {}->{} needs t0 > 0, capacity > 0, alpha >= 0, beta >= 1",
                    l.from, l.to
                )));
            }
            let (a, b) = (lookup(&l.from)?, lookup(&l.to)?);
            if a == b {
                return Err(Error::Config(format!("self-loop at node {}", l.from)));
            }
            link_ends.push((a, b));
            out_links[a].push(i);
        }

        let zones = Arc::new(
            ZoneSystem::new(file.centroids.iter().map(|c| c.zone.clone()))
                .map_err(|e| Error::Config(e.to_string()))?,
        );
        let mut centroid_nodes = Vec::with_capacity(file.centroids.len());
        for c in &file.centroids {
            let n = lookup(&c.node)?;
            if centroid_nodes.contains(&n) {
                return Err(Error::Config(format!(
                    "node {} hosts more than one zone centroid",
                    c.node
                )));
            }
            centroid_nodes.push(n);
        }

        let net = Network {
            file,
            zones,
            link_ends,
            out_links,
            centroid_nodes,
        };
        net.check_connected()?;
        Ok(net)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Network::new(NetworkFile::parse(text)?)
    }

    pub fn to_toml(&self) -> String {
        self.file.to_toml()
    }

    pub fn file(&self) -> &NetworkFile {
        &self.file
    }

    pub fn zones(&self) -> &Arc<ZoneSystem> {
        &self.zones
    }

    pub fn node_count(&self) -> usize {
        self.file.nodes.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.file.links
    }

    pub fn link_ends(&self, link: usize) -> (usize, usize) {
        self.link_ends[link]
    }

    pub fn out_links(&self, node: usize) -> &[usize] {
        &self.out_links[node]
    }

    pub fn centroid_node(&self, zone: usize) -> usize {
        self.centroid_nodes[zone]
    }

    pub fn free_flow_times(&self) -> Vec<f64> {
        self.file.links.iter().map(|l| l.t0).collect()
    }

    /// Every centroid must reach centroid 0 and be reached from it.
    fn check_connected(&self) -> Result<()> {
        let Some(&root) = self.centroid_nodes.first() else {
            return Ok(());
        };
        let mut in_links = vec![Vec::new(); self.node_count()];
        for (i, &(a, b)) in self.link_ends.iter().enumerate() {
            in_links[b].push((i, a));
        }
        let forward = self.reach(root, |n| {
            self.out_links[n]
                .iter()
                .map(|&l| self.link_ends[l].1)
                .collect()
        });
        let backward = self.reach(root, |n| in_links[n].iter().map(|&(_, a)| a).collect());
        for (z, &n) in self.centroid_nodes.iter().enumerate() {
            if !forward[n] {
                return Err(Error::Connectivity {
                    origin: self.zones.id(0).to_string(),
                    destination: self.zones.id(z).to_string(),
                });
            }
            if !backward[n] {
                return Err(Error::Connectivity {
                    origin: self.zones.id(z).to_string(),
                    destination: self.zones.id(0).to_string(),
                });
            }
        }
        Ok(())
    }

    fn reach(&self, root: usize, next: impl Fn(usize) -> Vec<usize>) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(n) = queue.pop_front() {
            for m in next(n) {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_zone() -> NetworkFile {
        NetworkFile {
            nodes: vec!["a".into(), "b".into()],
            links: vec![
                Link {
                    from: "a".into(),
                    to: "b".into(),
                    t0: 7.0,
                    capacity: 900.0,
                    alpha: 0.15,
                    beta: 4.0,
                },
                Link {
                    from: "b".into(),
                    to: "a".into(),
                    t0: 6.5,
                    capacity: 900.0,
                    alpha: 0.15,
                    beta: 4.0,
                },
            ],
            centroids: vec![
                Centroid {
                    zone: "z1".into(),
                    node: "a".into(),
                },
                Centroid {
                    zone: "z2".into(),
                    node: "b".into(),
                },
            ],
        }
    }

    #[test]
    fn parses_and_round_trips() {
        let net = Network::new(two_zone()).unwrap();
        let again = Network::parse(&net.to_toml()).unwrap();
        assert_eq!(net, again);
        assert_eq!(again.zones().ids(), &["z1", "z2"]);
    }

    #[test]
    fn bpr_defaults_apply() {
        let text = r#"
nodes = ["a", "b"]
centroids = [{ zone = "z1", node = "a" }, { zone = "z2", node = "b" }]
[[links]]
from = "a"
to = "b"
t0 = 1.0
capacity = 100.0
[[links]]
from = "b"
to = "a"
t0 = 1.0
capacity = 100.0
"#;
        let net = Network::parse(text).unwrap();
        assert_eq!(net.links()[0].alpha, 0.15);
        assert_eq!(net.links()[0].beta, 4.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        for edit in [
            |f: &mut NetworkFile| f.links[0].t0 = 0.0,
            |f: &mut NetworkFile| f.links[0].capacity = -1.0,
            |f: &mut NetworkFile| f.links[0].alpha = -0.1,
            |f: &mut NetworkFile| f.links[0].beta = 0.5,
            |f: &mut NetworkFile| f.links[0].to = "nowhere".into(),
            |f: &mut NetworkFile| f.centroids[1].node = "a".into(),
            |f: &mut NetworkFile| f.nodes.push("a".into()),
        ] {
            let mut f = two_zone();
            edit(&mut f);
            assert!(Network::new(f).is_err());
        }
    }

    #[test]
    fn rejects_one_way_network() {
        let mut f = two_zone();
        f.links.pop();
        assert!(matches!(Network::new(f), Err(Error::Connectivity { .. })));
    }

    #[test]
    fn parse_error_has_line() {
        let err = NetworkFile::parse("nodes = [\"a\"]\ncentroids = 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }
}
