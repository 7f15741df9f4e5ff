//! Association policies for a hybrid cell made of one 802.11 access point
//! and one UMTS NodeB.
//!
//! The crate has two solvers on top of two throughput models:
//!
//! * [`smdp`] computes the operator's globally optimal routing policy by
//!   value iteration on the uniformized decision chain.
//! * [`game`] computes the threshold equilibrium reached when each mobile
//!   picks the network with the smaller expected service time.
//!
//! [`wlan`] and [`umts`] provide per-mobile throughput and service rates,
//! [`sim`] holds seeded Monte-Carlo estimators used to cross-check both
//! solvers, and [`linalg`] has the small dense solver the game needs.

// Validation uses `!(x > 0.0)` so that NaN is rejected along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod game;
pub mod linalg;
pub mod sim;
pub mod smdp;
pub mod umts;
pub mod wlan;

pub use error::{Error, Result};
pub use game::{GameConfig, ServiceTimeVector, ThresholdPolicy};
pub use sim::{Estimate, SimConfig};
pub use smdp::{
    Action, ApServer, HybridCell, HybridState, NodebServer, PolicyTable, ServerModel, Setup,
    SmdpConfig, Stream, StreamConfig, ValueFunction,
};
pub use umts::{UmtsModel, UmtsParams, UmtsRow, UmtsTable};
pub use wlan::{OverheadResult, WlanModel, WlanParams};
