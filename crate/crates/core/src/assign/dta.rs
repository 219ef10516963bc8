//! Time-sliced point-queue loading.
//!
//! The OD matrix is the total for the period and is released evenly over its
//! slices. In each slice every OD pair takes the path that is shortest
//! under the queue delays at the start of the slice; each link then serves at
//! most `capacity · slice / 60` vehicles and queues the rest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{OdMatrix, SkimMatrix};

use super::paths::{all_or_nothing, PathTree};
use super::{AssignmentResult, EngineKind, LinkState, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtaParams {
    pub period_minutes: u32,
    pub slice_minutes: u32,
}

impl Default for DtaParams {
    fn default() -> Self {
        DtaParams {
            period_minutes: 120,
            slice_minutes: 5,
        }
    }
}

impl DtaParams {
    pub fn slices(&self) -> Result<usize> {
        if self.slice_minutes == 0 || self.period_minutes == 0 {
            return Err(Error::Usage("period and slice length must be positive".into()));
        }
        if !self.period_minutes.is_multiple_of(self.slice_minutes) {
            return Err(Error::Usage(format!(
                "period of {} min is not a multiple of the {} min slice",
                self.period_minutes, self.slice_minutes
            )));
        }
        Ok((self.period_minutes / self.slice_minutes) as usize)
    }
}

/// FIFO point queue at a link exit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointQueue {
    capacity: f64,
    queue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceOutcome {
    pub queue_start: f64,
    pub queue_end: f64,
    pub outflow: f64,
    /// Mean queueing delay over the slice, minutes.
    pub mean_wait: f64,
    /// Delay of a vehicle arriving at the very end of the slice, minutes.
    pub last_wait: f64,
}

impl PointQueue {
    /// `capacity` in vehicles per hour.
    pub fn new(capacity: f64) -> Self {
        PointQueue {
            capacity,
            queue: 0.0,
        }
    }

    pub fn queue(&self) -> f64 {
        self.queue
    }

    /// Current delay for a vehicle joining now, minutes.
    pub fn delay(&self) -> f64 {
        self.queue / (self.capacity / 60.0)
    }

    pub fn step(&mut self, inflow: f64, slice_minutes: f64) -> SliceOutcome {
        let service = self.capacity * slice_minutes / 60.0;
        let queue_start = self.queue;
        let available = queue_start + inflow;
        let outflow = available.min(service);
        let queue_end = available - outflow;
        self.queue = queue_end;
        let per_minute = self.capacity / 60.0;
        SliceOutcome {
            queue_start,
            queue_end,
            outflow,
            mean_wait: 0.5 * (queue_start + queue_end) / per_minute,
            last_wait: queue_end / per_minute,
        }
    }
}

pub fn assign_dynamic_queue(
    n: &OdMatrix,
    network: &Network,
    params: &DtaParams,
) -> Result<AssignmentResult> {
    n.check_zones(network.zones())?;
    let slices = params.slices()?;
    let slice = params.slice_minutes as f64;
    // the OD matrix is the period total, spread evenly over the slices
    let scale = 1.0 / slices as f64;
    let z = network.zones().len();
    let links = network.links();

    let mut queues: Vec<PointQueue> = links.iter().map(|l| PointQueue::new(l.capacity)).collect();
    let mut entered = vec![0.0; links.len()];
    let mut exited = vec![0.0; links.len()];
    let mut weighted_time = vec![0.0; links.len()];
    let mut wait_sum = vec![0.0; links.len()];
    let mut skim_sum = vec![0.0; z * z];

    for _ in 0..slices {
        let now: Vec<f64> = links
            .iter()
            .zip(&queues)
            .map(|(l, q)| l.t0 + q.delay())
            .collect();
        let (inflow, _) = all_or_nothing(network, &now, n, scale)?;
        let mut experienced = Vec::with_capacity(links.len());
        for (i, q) in queues.iter_mut().enumerate() {
            let out = q.step(inflow[i], slice);
            let t = links[i].t0 + out.mean_wait;
            entered[i] += inflow[i];
            exited[i] += out.outflow;
            weighted_time[i] += inflow[i] * t;
            wait_sum[i] += out.mean_wait;
            experienced.push(t);
        }
        for o in 0..z {
            let tree = PathTree::build(network, &now, network.centroid_node(o));
            for d in (0..z).filter(|&d| d != o) {
                let node = network.centroid_node(d);
                if !tree.dist[node].is_finite() {
                    return Err(Error::Connectivity {
                        origin: network.zones().id(o).to_string(),
                        destination: network.zones().id(d).to_string(),
                    });
                }
                skim_sum[o * z + d] += tree
                    .path_links(network, node)
                    .map(|l| experienced[l])
                    .sum::<f64>();
            }
        }
    }

    let values = skim_sum.iter().map(|s| s / slices as f64).collect();
    let skim = SkimMatrix::new(network.zones().clone(), values, n.tag())?;
    let link_states = (0..links.len())
        .map(|i| LinkState {
            flow: entered[i],
            exited: exited[i],
            queue: queues[i].queue(),
            travel_time: if entered[i] > 0.0 {
                weighted_time[i] / entered[i]
            } else {
                links[i].t0 + wait_sum[i] / slices as f64
            },
        })
        .collect();
    Ok(AssignmentResult {
        skim,
        link_states,
        engine: EngineKind::Dta,
        gap: None,
        iterations: slices,
        converged: true,
        spillover: queues.iter().map(PointQueue::queue).sum(),
    })
}
