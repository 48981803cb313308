//! Design-space exploration for flow-production lines.
//!
//! The crate is `no_std` (with `alloc`) and holds everything that does not
//! touch the filesystem or threads:
//!
//! * [`dsm`] enumerates every wiring a design space matrix permits;
//! * [`plant`] turns one wiring into a lane topology and its routing table;
//! * [`scenario`] carries recipes, flock weight models and the scenario catalog;
//! * [`controller`] keeps sliding-window weight histograms and computes the
//!   priority-greedy production strategy;
//! * [`sim`] is the discrete-event kernel that runs one design under one
//!   scenario;
//! * [`evaluate`] turns run records into design scores, ROI and Pareto labels.
//!
//! IO, persistence, parallel exploration and the command line live in the
//! `flowdse` companion crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod controller;
pub mod dsm;
pub mod evaluate;
pub mod plant;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod stats;
pub mod units;

pub use units::Weight;
