use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::OdMatrix;

use super::paths::{all_or_nothing, link_times, shortest_path_skim};
use super::{AssignmentResult, EngineKind, LinkState, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StaMethod {
    /// Method of successive averages, step `1/k`.
    Msa,
    /// Frank-Wolfe with an exact line search on the Beckmann objective.
    FrankWolfe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StaParams {
    pub method: StaMethod,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for StaParams {
    fn default() -> Self {
        StaParams {
            method: StaMethod::FrankWolfe,
            tol: 1e-4,
            max_iters: 500,
        }
    }
}

/// Static user equilibrium. Stops once the relative gap
/// `(Σ x·t − Σ y·t) / Σ x·t` drops below `tol` or after `max_iters` steps;
/// a non-converged result is returned with `converged == false`.
pub fn assign_static_ue(
    n: &OdMatrix,
    network: &Network,
    params: &StaParams,
) -> Result<AssignmentResult> {
    n.check_zones(network.zones())?;
    if params.tol.is_nan() || params.tol <= 0.0 {
        return Err(Error::Config("STA tolerance must be positive".into()));
    }
    let free = network.free_flow_times();
    let (mut flows, _) = all_or_nothing(network, &free, n, 1.0)?;
    let mut gap = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=params.max_iters.max(1) {
        iterations = k;
        let times = link_times(network, &flows);
        let (target, sp_cost) = all_or_nothing(network, &times, n, 1.0)?;
        let total: f64 = flows.iter().zip(&times).map(|(x, t)| x * t).sum();
        gap = if total > 0.0 {
            ((total - sp_cost) / total).max(0.0)
        } else {
            0.0
        };
        if gap < params.tol {
            converged = true;
            break;
        }
        let step = match params.method {
            StaMethod::Msa => 1.0 / (k as f64 + 1.0),
            StaMethod::FrankWolfe => line_search(network, &flows, &target),
        };
        for (x, y) in flows.iter_mut().zip(&target) {
            *x += step * (y - *x);
        }
    }

    let times = link_times(network, &flows);
    let skim = shortest_path_skim(network, &times, n.tag())?;
    let link_states = flows
        .iter()
        .zip(&times)
        .map(|(&flow, &travel_time)| LinkState {
            flow,
            exited: flow,
            queue: 0.0,
            travel_time,
        })
        .collect();
    Ok(AssignmentResult {
        skim,
        link_states,
        engine: EngineKind::Sta,
        gap: Some(gap),
        iterations,
        converged,
        spillover: 0.0,
    })
}

/// Step in `[0, 1]` minimising the Beckmann objective from `x` towards `y`,
/// found by bisection on its (monotone) directional derivative.
fn line_search(network: &Network, x: &[f64], y: &[f64]) -> f64 {
    let slope = |lambda: f64| -> f64 {
        network
            .links()
            .iter()
            .zip(x.iter().zip(y))
            .map(|(l, (&xa, &ya))| {
                let flow = xa + lambda * (ya - xa);
                (ya - xa) * super::vdf_time(l.t0, l.capacity, l.alpha, l.beta, flow)
            })
            .sum()
    };
    if slope(1.0) <= 0.0 {
        return 1.0;
    }
    if slope(0.0) >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
