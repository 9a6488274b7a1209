//! Downlink scheduling for broadcast channels with a massive number of
//! receivers.
//!
//! The crate covers three views of the same system:
//!
//! * [`sim`]: an exact slot-level model of the N-user downlink under the
//!   good-channel-first-serve (GCFS) policy, or under a fixed gain threshold.
//! * [`meanfield`]: the mean-field approximation, which replaces the coupled
//!   N-user system by a channel-gain threshold `h_th` and a per-slot service
//!   probability `p = G(h_th)`.
//! * [`markov`]: the decoupled single-user queue, a discrete-time Markov
//!   chain over the number of buffered packets, solved three independent ways.
//!
//! [`metrics`] ties the simulated and predicted quantities together.
//!
//! The crate is `no_std` (with `alloc`); enable the `std` feature to link
//! against the standard library, and `serde` to derive serialization for the
//! result types.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![deny(unsafe_code)]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` rejects NaN along with the out-of-range values; index loops
// mirror the matrix algorithms they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

mod error;
mod math;
pub mod markov;
pub mod meanfield;
pub mod metrics;
pub mod models;
pub mod quad;
pub mod sim;
pub mod stream;

pub use error::{Error, Result};
pub use markov::{ChainParams, StationaryDistribution};
pub use meanfield::{MeanFieldSolution, Status};
pub use models::{
    rate_bits_per_symbol, Channel, ChannelModel, Rayleigh, SystemParams, Tabulated, TrafficModel,
    Uniform,
};
pub use sim::{Policy, Scenario, SimConfig, SimSummary, SlotPlan};
