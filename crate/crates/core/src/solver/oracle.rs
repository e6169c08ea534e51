//! Exhaustive enumeration oracle for small matching instances.
//!
//! The oracle walks every assignment of trade powers on a discrete grid and
//! returns the best objective subject to the same energy, prosumer, and
//! group constraints the LP enforces. It shares no code with the simplex
//! path, so agreement between the two is meaningful: the LP relaxation can
//! only be at least as good as the grid optimum, and matches it exactly
//! whenever the LP optimum happens to lie on the grid.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::market::{is_matchable, Interval, MarketState, OfferId, Side, TradeKey};
use crate::EPSILON;

const MAX_OFFERS: usize = 6;
const MAX_INTERVALS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
}

struct Search<'a> {
    keys: Vec<TradeKey>,
    state: &'a MarketState,
    step: f64,
    delta_hours: f64,
    // Remaining energy budgets, kWh.
    sell_budget: BTreeMap<OfferId, f64>,
    buy_budget: BTreeMap<OfferId, f64>,
    // Per-interval running aggregates, kW.
    prosumer_sold: BTreeMap<(String, Interval), f64>,
    prosumer_bought: BTreeMap<(String, Interval), f64>,
    group_sold: BTreeMap<(String, Interval), f64>,
    group_bought: BTreeMap<(String, Interval), f64>,
    best: f64,
}

impl<'a> Search<'a> {
    /// Largest power assignable to `key` under every constraint family.
    fn headroom(&self, key: &TradeKey) -> f64 {
        let sell = &self.state.offers[&key.sell];
        let buy = &self.state.offers[&key.buy];
        let mut cap = self.sell_budget[&key.sell].min(self.buy_budget[&key.buy]) / self.delta_hours;

        if let Some(owner) = self.state.account_owner.get(&sell.account) {
            if let Some(limits) = self.state.limits.get(owner) {
                let used = self
                    .prosumer_sold
                    .get(&(owner.0.clone(), key.interval))
                    .copied()
                    .unwrap_or(0.0);
                cap = cap.min(limits.epl - used);
            }
        }
        if let Some(owner) = self.state.account_owner.get(&buy.account) {
            if let Some(limits) = self.state.limits.get(owner) {
                let used = self
                    .prosumer_bought
                    .get(&(owner.0.clone(), key.interval))
                    .copied()
                    .unwrap_or(0.0);
                cap = cap.min(limits.ecl - used);
            }
        }

        let sell_group = self.state.account_group.get(&sell.account);
        let buy_group = self.state.account_group.get(&buy.account);
        if let Some(g) = sell_group.and_then(|g| self.state.groups.get(g)) {
            let sold = self
                .group_sold
                .get(&(g.id.0.clone(), key.interval))
                .copied()
                .unwrap_or(0.0);
            let bought = self
                .group_bought
                .get(&(g.id.0.clone(), key.interval))
                .copied()
                .unwrap_or(0.0);
            if g.c_int.is_finite() {
                cap = cap.min(g.c_int - sold);
            }
            if g.c_ext.is_finite() {
                // Selling increases the group's net outflow (sold - bought).
                cap = cap.min(g.c_ext - (sold - bought));
            }
        }
        if let Some(g) = buy_group.and_then(|g| self.state.groups.get(g)) {
            let sold = self
                .group_sold
                .get(&(g.id.0.clone(), key.interval))
                .copied()
                .unwrap_or(0.0);
            let bought = self
                .group_bought
                .get(&(g.id.0.clone(), key.interval))
                .copied()
                .unwrap_or(0.0);
            if g.c_int.is_finite() {
                cap = cap.min(g.c_int - bought);
            }
            if g.c_ext.is_finite() {
                cap = cap.min(g.c_ext - (bought - sold));
            }
        }
        cap.max(0.0)
    }

    fn apply(&mut self, key: &TradeKey, power: f64) {
        let sell = &self.state.offers[&key.sell];
        let buy = &self.state.offers[&key.buy];
        *self.sell_budget.get_mut(&key.sell).unwrap() -= power * self.delta_hours;
        *self.buy_budget.get_mut(&key.buy).unwrap() -= power * self.delta_hours;
        if let Some(owner) = self.state.account_owner.get(&sell.account) {
            *self
                .prosumer_sold
                .entry((owner.0.clone(), key.interval))
                .or_default() += power;
        }
        if let Some(owner) = self.state.account_owner.get(&buy.account) {
            *self
                .prosumer_bought
                .entry((owner.0.clone(), key.interval))
                .or_default() += power;
        }
        if let Some(g) = self.state.account_group.get(&sell.account) {
            *self.group_sold.entry((g.0.clone(), key.interval)).or_default() += power;
        }
        if let Some(g) = self.state.account_group.get(&buy.account) {
            *self.group_bought.entry((g.0.clone(), key.interval)).or_default() += power;
        }
    }

    fn dfs(&mut self, idx: usize, current: f64) {
        if idx == self.keys.len() {
            if current > self.best {
                self.best = current;
            }
            return;
        }
        // Optimistic bound: every further kW consumes both a seller and a
        // buyer energy unit, so the tradable remainder caps the gain.
        let sell_rem: f64 = self.sell_budget.values().sum();
        let buy_rem: f64 = self.buy_budget.values().sum();
        if current + sell_rem.min(buy_rem) / self.delta_hours <= self.best + EPSILON {
            return;
        }

        let key = self.keys[idx];
        let cap = self.headroom(&key);
        let levels = ((cap + EPSILON) / self.step).floor() as i64;
        // Descending levels reach strong incumbents early, tightening the
        // bound for the rest of the walk.
        for level in (0..=levels).rev() {
            let power = level as f64 * self.step;
            self.apply(&key, power);
            self.dfs(idx + 1, current + power);
            self.apply(&key, -power);
        }
    }
}

/// Exhaustively maximizes total traded power on a `grid_step` kW grid.
///
/// Instances are capped at 6 offers and 3 distinct intervals, and every
/// offered energy must be an integral multiple of `grid_step * delta_hours`
/// (so offer budgets land on the grid).
pub fn enumerate_oracle(
    state: &MarketState,
    grid_step: f64,
    delta_hours: f64,
) -> Result<f64, OracleError> {
    assert!(grid_step > 0.0, "grid step must be positive");
    if state.offers.len() > MAX_OFFERS {
        return Err(OracleError::TooLarge(format!(
            "{} offers exceed the cap of {MAX_OFFERS}",
            state.offers.len()
        )));
    }
    let intervals: std::collections::BTreeSet<Interval> = state
        .offers
        .values()
        .flat_map(|o| o.intervals.iter().copied())
        .collect();
    if intervals.len() > MAX_INTERVALS {
        return Err(OracleError::TooLarge(format!(
            "{} intervals exceed the cap of {MAX_INTERVALS}",
            intervals.len()
        )));
    }
    let unit = grid_step * delta_hours;
    for offer in state.offers.values() {
        let ratio = offer.energy / unit;
        if (ratio - ratio.round()).abs() > EPSILON {
            return Err(OracleError::TooLarge(format!(
                "offer {} energy {} is not a multiple of {}",
                offer.id, offer.energy, unit
            )));
        }
    }

    let mut keys: Vec<TradeKey> = Vec::new();
    for (sid, sell) in &state.offers {
        if sell.side != Side::Selling {
            continue;
        }
        for (bid, buy) in &state.offers {
            if buy.side != Side::Buying || !is_matchable(sell, buy) {
                continue;
            }
            for t in sell.intervals.intersection(&buy.intervals) {
                keys.push(TradeKey::new(*sid, *bid, *t));
            }
        }
    }
    keys.sort();

    let mut search = Search {
        keys,
        state,
        step: grid_step,
        delta_hours,
        sell_budget: state
            .offers
            .values()
            .filter(|o| o.side == Side::Selling)
            .map(|o| (o.id, o.energy))
            .collect(),
        buy_budget: state
            .offers
            .values()
            .filter(|o| o.side == Side::Buying)
            .map(|o| (o.id, o.energy))
            .collect(),
        prosumer_sold: BTreeMap::new(),
        prosumer_bought: BTreeMap::new(),
        group_sold: BTreeMap::new(),
        group_bought: BTreeMap::new(),
        best: 0.0,
    };
    search.dfs(0, 0.0);
    Ok(search.best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::fixtures::{example_one, offer, single_group_state};
    use crate::market::{AccountId, GroupId, OfferId};

    #[test]
    fn example_one_enumerates_to_forty() {
        let (state, _) = example_one();
        let best = enumerate_oracle(&state, 10.0, 1.0).unwrap();
        assert!((best - 40.0).abs() < EPSILON);
    }

    #[test]
    fn lone_selling_offer_trades_nothing() {
        let mut state = single_group_state(f64::INFINITY, f64::INFINITY);
        state.add_offer(offer(OfferId(1), Side::Selling, "a", 10.0, &[1], 2.0));
        state.account_group.insert(AccountId::new("a"), GroupId::new("g"));
        assert_eq!(enumerate_oracle(&state, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn two_matchable_offers_trade_their_common_energy() {
        let mut state = single_group_state(f64::INFINITY, f64::INFINITY);
        state.add_offer(offer(OfferId(1), Side::Selling, "a", 10.0, &[1], 2.0));
        state.add_offer(offer(OfferId(2), Side::Buying, "b", 10.0, &[1], 5.0));
        for acc in ["a", "b"] {
            state.account_group.insert(AccountId::new(acc), GroupId::new("g"));
        }
        let best = enumerate_oracle(&state, 1.0, 1.0).unwrap();
        assert!((best - 10.0).abs() < EPSILON);
    }

    #[test]
    fn group_limit_caps_the_enumeration() {
        let mut state = single_group_state(4.0, 4.0);
        state.add_offer(offer(OfferId(1), Side::Selling, "a", 10.0, &[1], 2.0));
        state.add_offer(offer(OfferId(2), Side::Buying, "b", 10.0, &[1], 5.0));
        for acc in ["a", "b"] {
            state.account_group.insert(AccountId::new(acc), GroupId::new("g"));
        }
        let best = enumerate_oracle(&state, 1.0, 1.0).unwrap();
        assert!((best - 4.0).abs() < EPSILON);
    }

    #[test]
    fn oversized_instances_are_rejected() {
        let mut state = single_group_state(f64::INFINITY, f64::INFINITY);
        for i in 0..7 {
            state.add_offer(offer(OfferId(i), Side::Selling, "a", 1.0, &[1], 2.0));
        }
        assert!(matches!(
            enumerate_oracle(&state, 1.0, 1.0),
            Err(OracleError::TooLarge(_))
        ));
    }

    #[test]
    fn off_grid_energy_is_rejected() {
        let mut state = single_group_state(f64::INFINITY, f64::INFINITY);
        state.add_offer(offer(OfferId(1), Side::Selling, "a", 1.5, &[1], 2.0));
        assert!(matches!(
            enumerate_oracle(&state, 1.0, 1.0),
            Err(OracleError::TooLarge(_))
        ));
    }
}
