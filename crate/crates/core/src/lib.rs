//! Uplink resource allocation between grant-free URLLC and grant-based eMBB
//! traffic.
//!
//! - [`reliability`]: failure probability of randomized persistent
//!   retransmission (closed form, light-traffic approximation, Monte Carlo).
//! - [`game`]: the region-sizing game and its pure Nash equilibria.
//! - [`allocator`]: variance-minimizing water filling, its KKT certificate, a
//!   brute-force oracle and the baseline allocators.
//! - [`simulator`]: frame-by-frame simulation of the whole system.
//! - [`experiment`]: configuration files, parameter sweeps and CSV output.

pub mod allocator;
pub mod error;
pub mod experiment;
pub mod game;
pub mod metrics;
pub mod par;
pub mod reliability;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use par::Execution;
