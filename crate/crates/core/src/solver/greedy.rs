//! Greedy matcher: a cheap fallback so the ledger always has some feasible
//! candidate even when no LP solver is reachable. Anyone can run it and
//! submit the result; the contract keeps whichever submission trades more.

use std::collections::BTreeMap;

use crate::market::{
    check_feasible, check_safety, is_matchable, Interval, MarketState, OfferId, Side, Solution,
    TradeKey,
};
use crate::solver::SolverConfig;
use crate::EPSILON;

/// Pairs offers by descending matchable quantity and fills each pair's
/// shared in-window intervals as far as the energy, prosumer, and group
/// constraints allow. The result is verified against the market predicates
/// before returning; its objective is a lower bound on the LP's.
pub fn greedy_match(
    state: &MarketState,
    t_f: Interval,
    cfg: &SolverConfig,
    delta_hours: f64,
) -> Solution {
    let window_end = t_f.offset(cfg.horizon);

    let mut sell_budget: BTreeMap<OfferId, f64> = BTreeMap::new();
    let mut buy_budget: BTreeMap<OfferId, f64> = BTreeMap::new();
    for (key, power) in &state.finalized.trades {
        *sell_budget.entry(key.sell).or_default() -= power * delta_hours;
        *buy_budget.entry(key.buy).or_default() -= power * delta_hours;
    }
    for offer in state.offers.values() {
        let budget = match offer.side {
            Side::Selling => sell_budget.entry(offer.id).or_default(),
            Side::Buying => buy_budget.entry(offer.id).or_default(),
        };
        *budget += offer.energy;
        *budget = budget.max(0.0);
    }

    // (sell, buy) pairs ordered by how much could move between them.
    let mut pairs: Vec<(f64, OfferId, OfferId)> = Vec::new();
    for (sid, sell) in &state.offers {
        if sell.side != Side::Selling {
            continue;
        }
        for (bid, buy) in &state.offers {
            if buy.side != Side::Buying || !is_matchable(sell, buy) {
                continue;
            }
            if sell
                .intervals
                .intersection(&buy.intervals)
                .any(|t| *t >= t_f && *t <= window_end)
            {
                let quantity = sell_budget[sid].min(buy_budget[bid]);
                pairs.push((quantity, *sid, *bid));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut prosumer_sold: BTreeMap<(String, Interval), f64> = BTreeMap::new();
    let mut prosumer_bought: BTreeMap<(String, Interval), f64> = BTreeMap::new();
    let mut group_sold: BTreeMap<(String, Interval), f64> = BTreeMap::new();
    let mut group_bought: BTreeMap<(String, Interval), f64> = BTreeMap::new();

    let mut solution = state.finalized.clone();
    for (_, sid, bid) in pairs {
        let sell = &state.offers[&sid];
        let buy = &state.offers[&bid];
        let price = (sell.reservation_price + buy.reservation_price) / 2.0;
        let intervals: Vec<Interval> = sell
            .intervals
            .intersection(&buy.intervals)
            .copied()
            .filter(|t| *t >= t_f && *t <= window_end)
            .collect();
        for t in intervals {
            let mut cap = sell_budget[&sid].min(buy_budget[&bid]) / delta_hours;
            if let Some(owner) = state.account_owner.get(&sell.account) {
                if let Some(l) = state.limits.get(owner) {
                    cap = cap
                        .min(l.epl - prosumer_sold.get(&(owner.0.clone(), t)).copied().unwrap_or(0.0));
                }
            }
            if let Some(owner) = state.account_owner.get(&buy.account) {
                if let Some(l) = state.limits.get(owner) {
                    cap = cap.min(
                        l.ecl - prosumer_bought.get(&(owner.0.clone(), t)).copied().unwrap_or(0.0),
                    );
                }
            }
            if let Some(g) = state
                .account_group
                .get(&sell.account)
                .and_then(|g| state.groups.get(g))
            {
                let sold = group_sold.get(&(g.id.0.clone(), t)).copied().unwrap_or(0.0);
                let bought = group_bought.get(&(g.id.0.clone(), t)).copied().unwrap_or(0.0);
                if g.c_int.is_finite() {
                    cap = cap.min(g.c_int - sold);
                }
                if g.c_ext.is_finite() {
                    cap = cap.min(g.c_ext - (sold - bought));
                }
            }
            if let Some(g) = state
                .account_group
                .get(&buy.account)
                .and_then(|g| state.groups.get(g))
            {
                let sold = group_sold.get(&(g.id.0.clone(), t)).copied().unwrap_or(0.0);
                let bought = group_bought.get(&(g.id.0.clone(), t)).copied().unwrap_or(0.0);
                if g.c_int.is_finite() {
                    cap = cap.min(g.c_int - bought);
                }
                if g.c_ext.is_finite() {
                    cap = cap.min(g.c_ext - (bought - sold));
                }
            }

            if cap <= EPSILON {
                continue;
            }
            let key = TradeKey::new(sid, bid, t);
            *solution.trades.entry(key).or_default() += cap;
            solution.prices.insert(key, price);
            *sell_budget.get_mut(&sid).unwrap() -= cap * delta_hours;
            *buy_budget.get_mut(&bid).unwrap() -= cap * delta_hours;
            if let Some(owner) = state.account_owner.get(&sell.account) {
                *prosumer_sold.entry((owner.0.clone(), t)).or_default() += cap;
            }
            if let Some(owner) = state.account_owner.get(&buy.account) {
                *prosumer_bought.entry((owner.0.clone(), t)).or_default() += cap;
            }
            if let Some(g) = state.account_group.get(&sell.account) {
                *group_sold.entry((g.0.clone(), t)).or_default() += cap;
            }
            if let Some(g) = state.account_group.get(&buy.account) {
                *group_bought.entry((g.0.clone(), t)).or_default() += cap;
            }
        }
    }

    debug_assert!(
        check_feasible(&solution, state, delta_hours)
            .map(|r| r.is_feasible())
            .unwrap_or(false),
        "greedy built an infeasible solution"
    );
    debug_assert!(
        check_safety(&solution, state).map(|r| r.is_safe()).unwrap_or(false),
        "greedy built an unsafe solution"
    );
    solution
}
