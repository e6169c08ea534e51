//! Market domain types and the pure mathematical predicates of the trading
//! problem: matchability, feasibility, safety, objective value, group-limit
//! derivation, and privacy cost.
//!
//! Everything in this module is a pure function over immutable inputs; there
//! is no shared mutable state and all operations are safe to call from any
//! number of concurrent callers.
//!
//! Units are normalized at the boundary: energy in kWh, power in kW, and
//! interval length in hours, so that `power * delta_hours` is a plain
//! product yielding energy.

mod checks;
pub mod fixtures;
mod groups;
mod types;

pub use checks::{
    check_feasible, check_safety, is_matchable, objective_value, FeasibilityError,
    FeasibilityReport, FeasibilityViolation, SafetyError, SafetyReport, SafetyViolation,
};
pub use groups::{
    derive_group_limits, privacy_cost, DerivedLimit, GroupLimitError, GroupLimits, LimitCase,
};
pub use types::{
    AccountId, Feeder, FeederId, Group, GroupId, Interval, MarketState, Offer, OfferId,
    ProsumerId, ProsumerLimits, Side, Solution, TradeKey,
};
