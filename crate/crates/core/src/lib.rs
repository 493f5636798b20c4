//! Online energy and task scheduling for wireless-powered mobile edge computing.
//!
//! Each slot, access points may broadcast energy to battery-powered devices,
//! and devices process queued task bits either locally or by offloading to an
//! AP. [`solve_slot`] picks these controls by minimizing a queue- and
//! battery-weighted per-slot objective; [`sim::run`] drives any [`Policy`]
//! over a horizon of random channels and arrivals.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod model;
pub mod placeholder;
pub mod roots;
pub mod scheduler;
pub mod sim;

pub use assignment::{solve_assignment, Assignment};
pub use baselines::Policy;
pub use channel::{FadingParams, Stream, Topology};
pub use error::{Error, Result};
pub use model::{
    ApParams, ChannelSlot, DeviceParams, Matrix, NetworkState, Point, Scenario, SlotDecision, SlotMetrics,
    RepairRule, SystemParams, Violation, WeightScaling,
};
pub use scheduler::{solve_slot, SlotSolution};
pub use sim::{run, RunOptions, RunOutput, RunSummary, SeriesPoint};
