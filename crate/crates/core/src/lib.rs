//! Blockchain economic networks as discrete-time state-space systems.
//!
//! * [`ledger`]: the account ledger as a state machine, with blocks, chains
//!   and replay from genesis.
//! * [`lte`]: the same dynamics as a linear time-expanding system
//!   `x(k+1) = A_k x(k) + B_k u(k) + μ_k v(k)`.
//! * [`reward`]: minting schedules and reward apportionment.
//! * [`consensus`]: fork choice by chain score over a simulated
//!   peer-to-peer network.
//! * [`contract`] and [`value`]: contract methods and checkers for
//!   invariant, monotone and contractive value functions.
//! * [`scenario`], [`runner`] and [`trace`]: the scenario-driven simulator
//!   behind the `ledger-sim` binary.

pub mod consensus;
pub mod contract;
pub mod ledger;
pub mod lte;
pub mod reward;
pub mod runner;
pub mod scenario;
pub mod trace;
pub mod value;
pub mod workload;
