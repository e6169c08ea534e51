//! Feasibility and safety predicates over candidate solutions.
//!
//! The reports enumerate every violated constraint rather than stopping at
//! the first, so verifier rejections and test diagnostics can name the exact
//! offending key and bound.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::types::{
    GroupId, Interval, MarketState, Offer, OfferId, ProsumerId, Side, Solution, TradeKey,
};
use crate::EPSILON;

/// A pair of offers is matchable when a price acceptable to both exists and
/// they share at least one delivery interval.
pub fn is_matchable(s: &Offer, b: &Offer) -> bool {
    debug_assert_eq!(s.side, Side::Selling);
    debug_assert_eq!(b.side, Side::Buying);
    s.reservation_price <= b.reservation_price && s.intervals.intersection(&b.intervals).count() > 0
}

/// Total power traded across all keys, kW. This is the market objective:
/// maximizing it maximizes the load reduction on the bulk grid.
pub fn objective_value(sol: &Solution) -> f64 {
    sol.trades.values().sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeasibilityViolation {
    /// Trade references a (sell, buy) pair that is not matchable.
    NotMatchable { key: TradeKey },
    /// Trade interval lies outside the intersection of the offers' intervals.
    IntervalOutsideOffers { key: TradeKey },
    NegativePower { key: TradeKey, power: f64 },
    NegativePrice { key: TradeKey, price: f64 },
    /// Energy drawn from one offer exceeds the energy it offered.
    EnergyExceeded {
        offer: OfferId,
        side: Side,
        energy_kwh: f64,
        bound_kwh: f64,
    },
    /// Unit price below the seller's reservation price.
    PriceBelowSeller { key: TradeKey, price: f64, bound: f64 },
    /// Unit price above the buyer's reservation price.
    PriceAboveBuyer { key: TradeKey, price: f64, bound: f64 },
    /// Trade key present in `trades` but missing from `prices`.
    MissingPrice { key: TradeKey },
}

impl fmt::Display for FeasibilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotMatchable { key } => write!(f, "{key}: offers not matchable"),
            Self::IntervalOutsideOffers { key } => {
                write!(f, "{key}: interval outside both offers")
            }
            Self::NegativePower { key, power } => write!(f, "{key}: negative power {power}"),
            Self::NegativePrice { key, price } => write!(f, "{key}: negative price {price}"),
            Self::EnergyExceeded { offer, side, energy_kwh, bound_kwh } => write!(
                f,
                "{offer}: {side:?} energy {energy_kwh} kWh exceeds offered {bound_kwh} kWh"
            ),
            Self::PriceBelowSeller { key, price, bound } => {
                write!(f, "{key}: price {price} below seller reservation {bound}")
            }
            Self::PriceAboveBuyer { key, price, bound } => {
                write!(f, "{key}: price {price} above buyer reservation {bound}")
            }
            Self::MissingPrice { key } => write!(f, "{key}: no price assigned"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub violations: Vec<FeasibilityViolation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FeasibilityError {
    #[error("solution references unknown offer {0}")]
    UnknownOffer(OfferId),
}

/// Checks that a solution draws at most the offered energy from every offer
/// and that every unit price sits between the reservation prices of its
/// seller and buyer. Structural defects of the key set (unmatchable pairs,
/// intervals outside the offers, negative entries) are reported as
/// violations too, so untrusted submissions cannot smuggle them past the
/// energy sums.
///
/// `delta_hours` is the interval length; energy per offer is the sum of
/// `power * delta_hours` over that offer's keys.
pub fn check_feasible(
    sol: &Solution,
    state: &MarketState,
    delta_hours: f64,
) -> Result<FeasibilityReport, FeasibilityError> {
    let mut report = FeasibilityReport::default();
    let mut sold_kwh: BTreeMap<OfferId, f64> = BTreeMap::new();
    let mut bought_kwh: BTreeMap<OfferId, f64> = BTreeMap::new();

    for (&key, &power) in &sol.trades {
        let sell = state.offer(key.sell).ok_or(FeasibilityError::UnknownOffer(key.sell))?;
        let buy = state.offer(key.buy).ok_or(FeasibilityError::UnknownOffer(key.buy))?;

        if power < -EPSILON {
            report.violations.push(FeasibilityViolation::NegativePower { key, power });
        }
        if !is_matchable(sell, buy) {
            report.violations.push(FeasibilityViolation::NotMatchable { key });
        }
        if !(sell.intervals.contains(&key.interval) && buy.intervals.contains(&key.interval)) {
            report
                .violations
                .push(FeasibilityViolation::IntervalOutsideOffers { key });
        }

        match sol.prices.get(&key) {
            None => report.violations.push(FeasibilityViolation::MissingPrice { key }),
            Some(&price) => {
                if price < -EPSILON {
                    report.violations.push(FeasibilityViolation::NegativePrice { key, price });
                }
                if price < sell.reservation_price - EPSILON {
                    report.violations.push(FeasibilityViolation::PriceBelowSeller {
                        key,
                        price,
                        bound: sell.reservation_price,
                    });
                }
                if price > buy.reservation_price + EPSILON {
                    report.violations.push(FeasibilityViolation::PriceAboveBuyer {
                        key,
                        price,
                        bound: buy.reservation_price,
                    });
                }
            }
        }

        *sold_kwh.entry(key.sell).or_default() += power * delta_hours;
        *bought_kwh.entry(key.buy).or_default() += power * delta_hours;
    }

    for (offer_id, &energy) in &sold_kwh {
        let offer = &state.offers[offer_id];
        if energy > offer.energy + EPSILON {
            report.violations.push(FeasibilityViolation::EnergyExceeded {
                offer: *offer_id,
                side: Side::Selling,
                energy_kwh: energy,
                bound_kwh: offer.energy,
            });
        }
    }
    for (offer_id, &energy) in &bought_kwh {
        let offer = &state.offers[offer_id];
        if energy > offer.energy + EPSILON {
            report.violations.push(FeasibilityViolation::EnergyExceeded {
                offer: *offer_id,
                side: Side::Buying,
                energy_kwh: energy,
                bound_kwh: offer.energy,
            });
        }
    }

    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SafetyViolation {
    /// Named prosumer produces more than its production limit in an interval.
    ProductionLimitExceeded {
        prosumer: ProsumerId,
        interval: Interval,
        power_kw: f64,
        bound_kw: f64,
    },
    /// Named prosumer consumes more than its consumption limit in an interval.
    ConsumptionLimitExceeded {
        prosumer: ProsumerId,
        interval: Interval,
        power_kw: f64,
        bound_kw: f64,
    },
    /// Total power produced or consumed within a group exceeds its internal
    /// limit in an interval.
    InternalExceeded {
        group: GroupId,
        interval: Interval,
        power_kw: f64,
        bound_kw: f64,
    },
    /// Net power flowing into or out of a group exceeds its external limit.
    ExternalExceeded {
        group: GroupId,
        interval: Interval,
        net_kw: f64,
        bound_kw: f64,
    },
}

impl fmt::Display for SafetyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ProductionLimitExceeded { prosumer, interval, power_kw, bound_kw } => write!(
                f,
                "{prosumer}@{interval}: production {power_kw} kW exceeds EPL {bound_kw} kW"
            ),
            Self::ConsumptionLimitExceeded { prosumer, interval, power_kw, bound_kw } => write!(
                f,
                "{prosumer}@{interval}: consumption {power_kw} kW exceeds ECL {bound_kw} kW"
            ),
            Self::InternalExceeded { group, interval, power_kw, bound_kw } => write!(
                f,
                "group {group}@{interval}: total {power_kw} kW exceeds internal limit {bound_kw} kW"
            ),
            Self::ExternalExceeded { group, interval, net_kw, bound_kw } => write!(
                f,
                "group {group}@{interval}: net {net_kw} kW exceeds external limit {bound_kw} kW"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub violations: Vec<SafetyViolation>,
}

impl SafetyReport {
    pub fn is_safe(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SafetyError {
    #[error("account {0} has no group assignment")]
    UnknownGroup(crate::market::AccountId),
    #[error("solution references unknown offer {0}")]
    UnknownOffer(OfferId),
}

/// Checks the per-interval safety constraints: named prosumers stay within
/// their production/consumption limits, the larger of a group's total buys
/// and total sells stays within the group's internal limit, and the absolute
/// difference of sells and buys stays within its external limit.
///
/// Anonymous accounts have no owner link, so they contribute only to the
/// group constraints; named accounts contribute to both. Infinite limits
/// (the DSO's dummy feeder) are skipped.
pub fn check_safety(sol: &Solution, state: &MarketState) -> Result<SafetyReport, SafetyError> {
    let mut report = SafetyReport::default();

    // (prosumer, interval) -> kW and (group, interval) -> kW aggregates.
    let mut prosumer_sold: BTreeMap<(ProsumerId, Interval), f64> = BTreeMap::new();
    let mut prosumer_bought: BTreeMap<(ProsumerId, Interval), f64> = BTreeMap::new();
    let mut group_sold: BTreeMap<(GroupId, Interval), f64> = BTreeMap::new();
    let mut group_bought: BTreeMap<(GroupId, Interval), f64> = BTreeMap::new();

    for (&key, &power) in &sol.trades {
        let sell = state.offer(key.sell).ok_or(SafetyError::UnknownOffer(key.sell))?;
        let buy = state.offer(key.buy).ok_or(SafetyError::UnknownOffer(key.buy))?;

        let sell_group = state
            .group_of_offer(sell)
            .ok_or_else(|| SafetyError::UnknownGroup(sell.account.clone()))?;
        let buy_group = state
            .group_of_offer(buy)
            .ok_or_else(|| SafetyError::UnknownGroup(buy.account.clone()))?;

        *group_sold.entry((sell_group.clone(), key.interval)).or_default() += power;
        *group_bought.entry((buy_group.clone(), key.interval)).or_default() += power;

        if let Some(owner) = state.account_owner.get(&sell.account) {
            *prosumer_sold.entry((owner.clone(), key.interval)).or_default() += power;
        }
        if let Some(owner) = state.account_owner.get(&buy.account) {
            *prosumer_bought.entry((owner.clone(), key.interval)).or_default() += power;
        }
    }

    for ((prosumer, interval), &power) in &prosumer_sold {
        let epl = state.limits.get(prosumer).map_or(f64::INFINITY, |l| l.epl);
        if epl.is_finite() && power > epl + EPSILON {
            report.violations.push(SafetyViolation::ProductionLimitExceeded {
                prosumer: prosumer.clone(),
                interval: *interval,
                power_kw: power,
                bound_kw: epl,
            });
        }
    }
    for ((prosumer, interval), &power) in &prosumer_bought {
        let ecl = state.limits.get(prosumer).map_or(f64::INFINITY, |l| l.ecl);
        if ecl.is_finite() && power > ecl + EPSILON {
            report.violations.push(SafetyViolation::ConsumptionLimitExceeded {
                prosumer: prosumer.clone(),
                interval: *interval,
                power_kw: power,
                bound_kw: ecl,
            });
        }
    }

    let intervals: std::collections::BTreeSet<(GroupId, Interval)> = group_sold
        .keys()
        .chain(group_bought.keys())
        .cloned()
        .collect();
    for (group_id, interval) in intervals {
        let Some(group) = state.groups.get(&group_id) else {
            // A trade mapped to a group id with no declared limits: treat as
            // unlimited rather than failing, matching the dummy-feeder rule.
            continue;
        };
        let sold = group_sold.get(&(group_id.clone(), interval)).copied().unwrap_or(0.0);
        let bought = group_bought.get(&(group_id.clone(), interval)).copied().unwrap_or(0.0);
        let total = sold.max(bought);
        let net = (sold - bought).abs();
        if group.c_int.is_finite() && total > group.c_int + EPSILON {
            report.violations.push(SafetyViolation::InternalExceeded {
                group: group_id.clone(),
                interval,
                power_kw: total,
                bound_kw: group.c_int,
            });
        }
        if group.c_ext.is_finite() && net > group.c_ext + EPSILON {
            report.violations.push(SafetyViolation::ExternalExceeded {
                group: group_id.clone(),
                interval,
                net_kw: net,
                bound_kw: group.c_ext,
            });
        }
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::fixtures::{example_one, offer, single_group_state};
    use crate::market::{
        AccountId, Group, GroupId, Interval, OfferId, ProsumerId, ProsumerLimits, Side, Solution,
        TradeKey,
    };

    #[test]
    fn matchable_requires_price_overlap_and_shared_interval() {
        let s = offer(OfferId(1), Side::Selling, "a1", 10.0, &[48], 3.0);
        let b = offer(OfferId(2), Side::Buying, "a2", 10.0, &[48, 49], 5.0);
        assert!(is_matchable(&s, &b));

        let s_pricey = offer(OfferId(3), Side::Selling, "a1", 10.0, &[48], 5.0);
        let b_cheap = offer(OfferId(4), Side::Buying, "a2", 10.0, &[48], 3.0);
        assert!(!is_matchable(&s_pricey, &b_cheap), "seller above buyer");

        let s_early = offer(OfferId(5), Side::Selling, "a1", 10.0, &[1, 2], 1.0);
        let b_late = offer(OfferId(6), Side::Buying, "a2", 10.0, &[3], 9.0);
        assert!(!is_matchable(&s_early, &b_late), "disjoint intervals");
    }

    #[test]
    fn example_one_solution_is_feasible_and_worth_40() {
        let (state, sol) = example_one();
        let report = check_feasible(&sol, &state, 1.0).unwrap();
        assert!(report.is_feasible(), "violations: {:?}", report.violations);
        assert!((objective_value(&sol) - 40.0).abs() < EPSILON);
    }

    #[test]
    fn empty_solution_is_always_feasible_and_worth_zero() {
        let (state, _) = example_one();
        let report = check_feasible(&Solution::empty(), &state, 1.0).unwrap();
        assert!(report.is_feasible());
        assert_eq!(objective_value(&Solution::empty()), 0.0);
    }

    #[test]
    fn oversold_offer_reports_energy_exceeded() {
        let (state, mut sol) = example_one();
        // s1 offered 10 kWh over a single 1-hour interval; 11 kW breaks it.
        sol.insert(TradeKey::new(OfferId(1), OfferId(3), Interval(48)), 11.0, 4.0);
        let report = check_feasible(&sol, &state, 1.0).unwrap();
        assert!(report.violations.iter().any(|v| matches!(
            v,
            FeasibilityViolation::EnergyExceeded { offer: OfferId(1), side: Side::Selling, .. }
        )));
    }

    #[test]
    fn unknown_offer_is_an_error_not_a_violation() {
        let (state, mut sol) = example_one();
        sol.insert(TradeKey::new(OfferId(99), OfferId(3), Interval(48)), 1.0, 4.0);
        assert_eq!(
            check_feasible(&sol, &state, 1.0),
            Err(FeasibilityError::UnknownOffer(OfferId(99)))
        );
    }

    #[test]
    fn price_outside_reservation_band_is_reported() {
        let (state, mut sol) = example_one();
        let key = TradeKey::new(OfferId(1), OfferId(3), Interval(48));
        sol.prices.insert(key, 1.0); // below seller reservation 3.0
        let report = check_feasible(&sol, &state, 1.0).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, FeasibilityViolation::PriceBelowSeller { .. })));
    }

    #[test]
    fn group_sells_at_internal_limit_pass_and_above_fail() {
        let mut state = single_group_state(30.0, 30.0);
        state.add_offer(offer(OfferId(1), Side::Selling, "a1", 100.0, &[5], 1.0));
        state.add_offer(offer(OfferId(2), Side::Buying, "b1", 100.0, &[5], 9.0));
        state.account_group.insert(AccountId::new("a1"), GroupId::new("g"));
        state.account_group.insert(AccountId::new("b1"), GroupId::new("g"));

        let mut sol = Solution::empty();
        sol.insert(TradeKey::new(OfferId(1), OfferId(2), Interval(5)), 30.0, 5.0);
        assert!(check_safety(&sol, &state).unwrap().is_safe(), "exactly at limit is safe");

        let mut sol = Solution::empty();
        sol.insert(TradeKey::new(OfferId(1), OfferId(2), Interval(5)), 31.0, 5.0);
        let report = check_safety(&sol, &state).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, SafetyViolation::InternalExceeded { .. })));
    }

    #[test]
    fn mixed_buys_and_sells_compare_max_against_internal_and_net_against_external() {
        // Group trades with an outside (unlimited) group: sells 20, buys 15.
        let mut state = single_group_state(30.0, 30.0);
        state.groups.insert(
            GroupId::new("other"),
            Group {
                id: GroupId::new("other"),
                feeders: Default::default(),
                c_int: f64::INFINITY,
                c_ext: f64::INFINITY,
            },
        );
        for (id, side, account, group) in [
            (1, Side::Selling, "a1", "g"),
            (2, Side::Buying, "b1", "g"),
            (3, Side::Selling, "x1", "other"),
            (4, Side::Buying, "x2", "other"),
        ] {
            state.add_offer(offer(OfferId(id), side, account, 100.0, &[5], if side == Side::Selling { 1.0 } else { 9.0 }));
            state
                .account_group
                .insert(AccountId::new(account), GroupId::new(group));
        }

        let mut sol = Solution::empty();
        // g sells 20 out, buys 15 in: max = 20 <= 30, |20-15| = 5 <= 30.
        sol.insert(TradeKey::new(OfferId(1), OfferId(4), Interval(5)), 20.0, 5.0);
        sol.insert(TradeKey::new(OfferId(3), OfferId(2), Interval(5)), 15.0, 5.0);
        assert!(check_safety(&sol, &state).unwrap().is_safe());
    }

    #[test]
    fn zero_solution_is_safe() {
        let state = single_group_state(30.0, 30.0);
        assert!(check_safety(&Solution::empty(), &state).unwrap().is_safe());
    }

    #[test]
    fn named_prosumer_limit_applies_only_to_named_accounts() {
        let mut state = single_group_state(1000.0, 1000.0);
        state.add_offer(offer(OfferId(1), Side::Selling, "named", 100.0, &[5], 1.0));
        state.add_offer(offer(OfferId(2), Side::Buying, "anon", 100.0, &[5], 9.0));
        state.account_group.insert(AccountId::new("named"), GroupId::new("g"));
        state.account_group.insert(AccountId::new("anon"), GroupId::new("g"));
        state
            .account_owner
            .insert(AccountId::new("named"), ProsumerId::new("u1"));
        state.limits.insert(
            ProsumerId::new("u1"),
            ProsumerLimits { prosumer: ProsumerId::new("u1"), epl: 10.0, ecl: 10.0 },
        );

        let mut sol = Solution::empty();
        sol.insert(TradeKey::new(OfferId(1), OfferId(2), Interval(5)), 12.0, 5.0);
        let report = check_safety(&sol, &state).unwrap();
        assert!(report.violations.iter().any(|v| matches!(
            v,
            SafetyViolation::ProductionLimitExceeded { power_kw, .. } if (*power_kw - 12.0).abs() < EPSILON
        )));
        // The anonymous buyer consumed 12 kW too, but has no owner: only the
        // group constraint (not binding here) applies to it.
        assert!(!report
            .violations
            .iter()
            .any(|v| matches!(v, SafetyViolation::ConsumptionLimitExceeded { .. })));
    }

    #[test]
    fn missing_group_assignment_is_an_error() {
        let mut state = single_group_state(30.0, 30.0);
        state.add_offer(offer(OfferId(1), Side::Selling, "ghost", 10.0, &[5], 1.0));
        state.add_offer(offer(OfferId(2), Side::Buying, "b1", 10.0, &[5], 9.0));
        state.account_group.insert(AccountId::new("b1"), GroupId::new("g"));
        let mut sol = Solution::empty();
        sol.insert(TradeKey::new(OfferId(1), OfferId(2), Interval(5)), 1.0, 5.0);
        assert_eq!(
            check_safety(&sol, &state),
            Err(SafetyError::UnknownGroup(AccountId::new("ghost")))
        );
    }
}
