//! Stand-in supply side: BPR network, static user-equilibrium assignment, a
//! time-sliced point-queue loader, and skim extraction.

mod dta;
mod network;
mod paths;
mod sta;

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::{OdMatrix, SkimMatrix};

pub use dta::{assign_dynamic_queue, DtaParams, PointQueue, SliceOutcome};
pub use network::{Centroid, Link, Network, NetworkFile, DEFAULT_VDF_ALPHA, DEFAULT_VDF_BETA};
pub use paths::{all_or_nothing, link_times, shortest_path_skim, vdf_time, PathTree};
pub use sta::{assign_static_ue, StaMethod, StaParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Sta,
    Dta,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Sta => "sta",
            EngineKind::Dta => "dta",
        })
    }
}

impl std::str::FromStr for EngineKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sta" => Ok(EngineKind::Sta),
            "dta" => Ok(EngineKind::Dta),
            other => Err(crate::Error::Config(format!("unknown engine {other:?}"))),
        }
    }
}

/// Final state of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    /// STA: vehicles per hour. DTA: vehicles that entered over the period.
    pub flow: f64,
    /// DTA: vehicles that left over the period. STA: equals `flow`.
    pub exited: f64,
    /// Vehicles still queued at period end (always 0 for STA).
    pub queue: f64,
    /// STA: BPR time at final flow. DTA: mean experienced time per entrant.
    pub travel_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    pub skim: SkimMatrix,
    pub link_states: Vec<LinkState>,
    pub engine: EngineKind,
    /// Final relative gap (STA only).
    pub gap: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Vehicles left in queues at period end (DTA only).
    pub spillover: f64,
}

impl AssignmentResult {
    /// Comma-separated link records for congestion inspection.
    pub fn link_states_csv(&self, network: &Network) -> String {
        let mut out = String::from("from,to,t0,capacity,flow,exited,queue,travel_time\n");
        for (l, s) in network.links().iter().zip(&self.link_states) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                l.from, l.to, l.t0, l.capacity, s.flow, s.exited, s.queue, s.travel_time
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineParams {
    pub sta: StaParams,
    pub dta: DtaParams,
}

pub fn assign(
    n: &OdMatrix,
    network: &Network,
    engine: EngineKind,
    params: &EngineParams,
) -> Result<AssignmentResult> {
    match engine {
        EngineKind::Sta => assign_static_ue(n, network, &params.sta),
        EngineKind::Dta => assign_dynamic_queue(n, network, &params.dta),
    }
}
