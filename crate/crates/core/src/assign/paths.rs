use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::matrix::{OdMatrix, SkimMatrix};

use super::network::Network;

/// BPR volume-delay: `t0 · (1 + alpha · (flow / capacity)^beta)`.
pub fn vdf_time(t0: f64, capacity: f64, alpha: f64, beta: f64, flow: f64) -> f64 {
    t0 * (1.0 + alpha * (flow / capacity).powf(beta))
}

pub fn link_times(network: &Network, flows: &[f64]) -> Vec<f64> {
    network
        .links()
        .iter()
        .zip(flows)
        .map(|(l, &x)| vdf_time(l.t0, l.capacity, l.alpha, l.beta, x))
        .collect()
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on distance, ties on node index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path tree from one node: distances and the link used to reach
/// each node (`None` for the root and unreachable nodes).
pub struct PathTree {
    pub dist: Vec<f64>,
    pub pred: Vec<Option<usize>>,
}

impl PathTree {
    pub fn build(network: &Network, times: &[f64], root: usize) -> PathTree {
        let n = network.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[root] = 0.0;
        heap.push(Entry {
            dist: 0.0,
            node: root,
        });
        while let Some(Entry { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &l in network.out_links(node) {
                let (_, to) = network.link_ends(l);
                let cand = d + times[l];
                if cand < dist[to] {
                    dist[to] = cand;
                    pred[to] = Some(l);
                    heap.push(Entry {
                        dist: cand,
                        node: to,
                    });
                }
            }
        }
        PathTree { dist, pred }
    }

    /// Links on the tree path to `node`, destination end first.
    pub fn path_links<'a>(&'a self, network: &'a Network, node: usize) -> PathIter<'a> {
        PathIter {
            tree: self,
            network,
            node,
        }
    }
}

pub struct PathIter<'a> {
    tree: &'a PathTree,
    network: &'a Network,
    node: usize,
}

impl Iterator for PathIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let link = self.tree.pred[self.node]?;
        self.node = self.network.link_ends(link).0;
        Some(link)
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    match times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        Some(t) => Err(Error::Input(format!("link time {t} must be positive and finite"))),
        None => Ok(()),
    }
}

fn unreachable(network: &Network, o: usize, d: usize) -> Error {
    Error::Connectivity {
        origin: network.zones().id(o).to_string(),
        destination: network.zones().id(d).to_string(),
    }
}

/// Minimum path time between every pair of centroids; diagonal is zero.
pub fn shortest_path_skim(network: &Network, times: &[f64], tag: &str) -> Result<SkimMatrix> {
    check_times(times)?;
    let z = network.zones().len();
    let mut values = vec![0.0; z * z];
    for o in 0..z {
        let tree = PathTree::build(network, times, network.centroid_node(o));
        for d in (0..z).filter(|&d| d != o) {
            let t = tree.dist[network.centroid_node(d)];
            if !t.is_finite() {
                return Err(unreachable(network, o, d));
            }
            values[o * z + d] = t;
        }
    }
    SkimMatrix::new(network.zones().clone(), values, tag)
}

/// All-or-nothing loading of `scale · n` onto shortest paths. Returns link
/// volumes and `Σ_od volume · shortest time`.
pub fn all_or_nothing(
    network: &Network,
    times: &[f64],
    n: &OdMatrix,
    scale: f64,
) -> Result<(Vec<f64>, f64)> {
    let z = network.zones().len();
    let mut loads = vec![0.0; network.links().len()];
    let mut cost = 0.0;
    for o in 0..z {
        if n.row(o)
            .iter()
            .enumerate()
            .all(|(d, &v)| d == o || v == 0.0)
        {
            continue;
        }
        let tree = PathTree::build(network, times, network.centroid_node(o));
        for d in (0..z).filter(|&d| d != o) {
            let vol = n.get(o, d) * scale;
            if vol == 0.0 {
                continue;
            }
            let node = network.centroid_node(d);
            if !tree.dist[node].is_finite() {
                return Err(unreachable(network, o, d));
            }
            cost += vol * tree.dist[node];
            for l in tree.path_links(network, node) {
                loads[l] += vol;
            }
        }
    }
    Ok((loads, cost))
}
