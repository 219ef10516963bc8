//! Search for a stable equilibrium between a travel demand model and a
//! traffic assignment model.
//!
//! The loop alternates demand generation from a travel-time skim with
//! assignment of that demand onto a road network. Convergence is judged on
//! the distribution of traffic quantity `M = N ∘ T` across all OD cells,
//! compared between successive iterations with a binned L1 distance (ΔTf).

pub mod assign;
pub mod campaign;
pub mod demand;
mod error;
pub mod io;
pub mod matrix;
pub mod perturb;
pub mod persist;
pub mod quantity;
pub mod report;
pub mod scenario;
pub mod search;
pub mod seed;

pub use assign::{assign, AssignmentResult, EngineKind, EngineParams, Network};
pub use demand::{generate_demand, DemandConfig, DemandMode};
pub use error::{Error, Result};
pub use matrix::{OdMatrix, SkimMatrix, TrafficQuantityMatrix, ZoneMatrix, ZoneSystem};
pub use perturb::{quantile_skim, Quantile, SkimStack};
pub use quantity::{build_histogram, compute_m, delta_tf, Histogram, HistogramPair};
pub use search::{EquilibriumSearch, RunHistory, RunStatus, SearchConfig};
