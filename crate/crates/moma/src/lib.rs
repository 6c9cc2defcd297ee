//! Link-level simulator of a service-dependent hierarchical spreading scheme
//! for massive-MIMO uplink multiple access over an LTE-like resource grid.
//!
//! Module map:
//! - [`config`]: system/class/grid parameters and validation
//! - [`codes`]: unitary code matrices, class partition, overloading, signatures
//! - [`channel`]: tapped-delay-line channels, pathloss, hardening statistics
//! - [`phy`]: spreading, synthesis, MRC despreading, SINR/rate, SIC detection
//! - [`scenario`]: per-trial user population assembly
//! - [`metrics`]: outage Monte Carlo, served-user search, link budgets
//! - [`ra`]: random access and collision analysis
//! - [`seed`]: deterministic seed derivation
//! - [`cli`]: the `moma` command-line front end

pub mod channel;
pub mod cli;
pub mod codes;
pub mod config;
pub mod metrics;
pub mod phy;
pub mod ra;
pub mod scenario;
pub mod seed;
