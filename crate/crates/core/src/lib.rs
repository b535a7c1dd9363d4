//! Operational risk assessment for real-time economic dispatch.
//!
//! The crate chains five pieces:
//!
//! * [`grid_model`]: zonal system data, commitment schedules and realizations.
//! * [`lpsolve`]: a bounded-variable revised simplex solver.
//! * [`sced`]: the single-period real-time dispatch LP and its four quantities
//!   of interest (operating cost, load shed, regulating and operating reserve).
//! * [`scenarios`] and [`risk`]: Monte-Carlo scenario generation, forward
//!   propagation through an evaluator, and level-1/2/3 risk metrics.
//! * [`surrogate`]: per-hour random-forest and neural-network surrogates trained
//!   with a hazard-aware loss, used in place of the LP chain in real time.

pub mod error;
pub mod fixtures;
pub mod grid_model;
pub mod io;
pub mod lpsolve;
pub mod risk;
pub mod scenarios;
pub mod sced;
pub mod surrogate;

pub use error::{Error, Result};
pub use grid_model::{
    features_of, priority_list_commitment, CommitmentSchedule, Generator, Realization,
    SystemModel, Trajectory, HOURS_PER_DAY, STEPS_PER_DAY, STEPS_PER_HOUR,
};
pub use risk::{Direction, QoiMatrix, RiskProfile};
pub use scenarios::{Provenance, ScenarioSet};
pub use sced::{DispatchState, QoiKind, QoiSample};
pub use surrogate::{HalParams, SurrogateBank};
