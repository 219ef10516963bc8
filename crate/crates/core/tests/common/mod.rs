#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use proptest::prelude::*;
use tfeq_core::assign::{Centroid, Link, NetworkFile};
use tfeq_core::campaign::Campaign;
use tfeq_core::*;

pub fn zones(n: usize) -> Arc<ZoneSystem> {
    Arc::new(ZoneSystem::new((0..n).map(|i| format!("z{i}"))).unwrap())
}

pub fn od(z: &Arc<ZoneSystem>, values: Vec<f64>) -> OdMatrix {
    OdMatrix::new(z.clone(), values, "AM").unwrap()
}

pub fn skim(z: &Arc<ZoneSystem>, values: Vec<f64>) -> SkimMatrix {
    SkimMatrix::new(z.clone(), values, "AM").unwrap()
}

/// M with the given cell values (trips = values, unit times).
pub fn m_of(values: &[f64]) -> TrafficQuantityMatrix {
    let z = (values.len() as f64).sqrt() as usize;
    let zs = zones(z);
    compute_m(&od(&zs, values.to_vec()), &skim(&zs, vec![1.0; values.len()])).unwrap()
}

/// Z in [2, 10] and a non-negative value vector of Z² cells.
pub fn square_values(max: f64) -> impl Strategy<Value = Vec<f64>> {
    (2usize..=10).prop_flat_map(move |z| prop::collection::vec(0.0..max, z * z))
}

pub fn link(from: &str, to: &str, t0: f64, capacity: f64) -> Link {
    Link {
        from: from.into(),
        to: to.into(),
        t0,
        capacity,
        alpha: 0.15,
        beta: 4.0,
    }
}

pub fn centroid(zone: &str, node: &str) -> Centroid {
    Centroid {
        zone: zone.into(),
        node: node.into(),
    }
}

/// Origin `o` and destination `d` joined by parallel links, plus a return link.
pub fn parallel_links(routes: &[(f64, f64)]) -> Network {
    let mut links: Vec<Link> = routes
        .iter()
        .map(|&(t0, capacity)| link("o", "d", t0, capacity))
        .collect();
    links.push(link("d", "o", 1.0, 1e12));
    Network::new(NetworkFile {
        nodes: vec!["o".into(), "d".into()],
        links,
        centroids: vec![centroid("O", "o"), centroid("D", "d")],
    })
    .unwrap()
}

/// Two OD pairs, W→E and N→S, whose only routes share the link `x1 -> x2`.
/// Return links keep every zone pair connected.
pub fn two_crossing(capacity: f64) -> Network {
    let nodes = ["w", "e", "n", "s", "x1", "x2"].map(String::from).to_vec();
    let links = vec![
        link("w", "x1", 2.0, 1e6),
        link("n", "x1", 2.0, 1e6),
        link("x1", "x2", 3.0, capacity),
        link("x2", "e", 2.0, 1e6),
        link("x2", "s", 2.0, 1e6),
        link("e", "w", 10.0, 1e6),
        link("s", "n", 10.0, 1e6),
        link("w", "n", 10.0, 1e6),
        link("n", "w", 10.0, 1e6),
    ];
    Network::new(NetworkFile {
        nodes,
        links,
        centroids: vec![
            centroid("W", "w"),
            centroid("E", "e"),
            centroid("N", "n"),
            centroid("S", "s"),
        ],
    })
    .unwrap()
}

pub fn shipped_campaign() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/grid20/campaign.toml")
}

pub fn shipped_search() -> EquilibriumSearch {
    Campaign::load(&shipped_campaign()).unwrap().search
}

/// A small congested grid for search-level properties.
pub fn small_search(zones: usize, seed: u64) -> EquilibriumSearch {
    let mut p = tfeq_core::scenario::GeneratorParams::new(zones, seed);
    p.bins = 12;
    let s = tfeq_core::scenario::generate(&p).unwrap();
    let network = Network::new(s.network).unwrap();
    let demands = s
        .demands
        .into_iter()
        .zip(s.potentials)
        .map(|(d, k)| d.into_config(k).unwrap())
        .collect();
    EquilibriumSearch::new(network, demands, s.search).unwrap()
}

/// Every file under `dir`, relative path and bytes, sorted by path.
pub fn tree_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
