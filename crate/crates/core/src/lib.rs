//! Transax is a desk-scale, fully deterministic implementation of a
//! safe and private forward-trading platform for transactive microgrids.
//!
//! The crate is organized around the lifecycle of an energy trade:
//!
//! - [`market`] holds the domain types (offers, solutions, feeders, groups)
//!   and the pure predicates that define a valid trade: matchability,
//!   feasibility, safety, objective value, group-limit derivation, and
//!   privacy cost.
//! - [`solver`] builds and solves the horizon-pruned linear program that
//!   matches offers, with an exhaustive oracle and a greedy fallback for
//!   cross-checking, plus an event-driven loop that posts solutions to the
//!   ledger.
//! - [`ledger`] emulates the blockchain smart contract as a single
//!   serialized state machine with an append-only event log: accounts,
//!   production/consumption assets, offer escrow, candidate-solution
//!   ranking, and time-guarded finalization.
//! - [`mixer`] implements the decentralized shuffle protocol that unlinks
//!   named accounts from anonymous trading accounts within a group.
//! - [`metering`] emulates smart meters: deposit auditing, residual
//!   computation, and privacy-preserving billing.
//! - [`sim`] is a discrete-time energy-balance microgrid simulator that
//!   drives the whole protocol in lockstep with physical delivery.

pub mod ledger;
pub mod market;
pub mod metering;
pub mod mixer;
pub mod sim;
pub mod solver;

/// Absolute numerical slack used by every constraint check, in the
/// constraint's natural unit (kW, kWh, or currency/kWh). LP solvers return
/// approximate vertices, so exact comparisons are never used.
pub const EPSILON: f64 = 1e-6;
