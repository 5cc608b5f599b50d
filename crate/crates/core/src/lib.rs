#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Decentralized kernel ridge regression over an agent network.
//!
//! Every agent maps its local samples through a shared random Fourier feature
//! map, which turns the kernel problem into a ridge regression over a
//! fixed-size parameter vector. Agents then reach consensus on that vector
//! with one of three synchronous protocols:
//!
//! - consensus ADMM where every agent broadcasts every round ([`Algorithm::Dkla`]),
//! - the same ADMM with censored broadcasts ([`Algorithm::Coke`]), where an agent
//!   only transmits once its parameter has moved further than a decaying threshold,
//! - combine-then-adapt diffusion as a baseline ([`Algorithm::Cta`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the `coke-sim` crate.
//!
//! # Features
//! - `std`: implements `std::error::Error` for [`Error`].

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod data;
mod error;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod rf;
pub mod rng;
pub mod solver;

pub use crate::error::{Error, Result};
pub use crate::graph::{Graph, PenaltyConstants, RhoBound, SpectralConstants};
pub use crate::linalg::Matrix;
pub use crate::metrics::{RunTrace, Split, TraceRow};
pub use crate::model::{AgentDataset, ConvexityConstants, LocalSolveContext};
pub use crate::rf::{FeatureVariant, RandomFeatureMap};
pub use crate::solver::{
    Algorithm, AgentState, CensoringSchedule, RunConfig, RunOutcome, RunStatus,
};
