//! Small canonical market states shared by tests, demos, and docs.

use std::collections::BTreeSet;

use crate::market::{
    AccountId, Feeder, FeederId, Group, GroupId, Interval, MarketState, Offer, OfferId,
    ProsumerId, Side, Solution, TradeKey,
};

pub fn offer(
    id: OfferId,
    side: Side,
    account: &str,
    energy_kwh: f64,
    intervals: &[u32],
    reservation_price: f64,
) -> Offer {
    Offer {
        id,
        side,
        account: AccountId::new(account),
        energy: energy_kwh,
        intervals: intervals.iter().map(|&t| Interval(t)).collect(),
        reservation_price,
    }
}

/// A market with one group `g` spanning one feeder `f`, with the given group
/// limits and no prosumer limits. Accounts must still be assigned to the
/// group by the caller.
pub fn single_group_state(c_int: f64, c_ext: f64) -> MarketState {
    let mut state = MarketState::default();
    state.feeders.insert(
        FeederId::new("f"),
        Feeder {
            id: FeederId::new("f"),
            c_int,
            c_ext,
            prosumers: BTreeSet::new(),
        },
    );
    state.groups.insert(
        GroupId::new("g"),
        Group {
            id: GroupId::new("g"),
            feeders: [FeederId::new("f")].into_iter().collect(),
            c_int,
            c_ext,
        },
    );
    state
}

/// The two-producer / one-consumer temporal-flexibility community, with
/// 1-hour intervals so that energy and power coincide numerically:
///
/// - `o1`: P1 sells 10 kWh, interval 48 only (no storage);
/// - `o2`: P2 sells 30 kWh, intervals {48, 49} (battery allows deferral);
/// - `o3`: C1 buys 30 kWh in interval 48;
/// - `o4`: C1 buys 10 kWh in interval 49.
///
/// The unique optimal matching moves 40 kW total: (10, 20, 10) on keys
/// (o1,o3,48), (o2,o3,48), (o2,o4,49). Returns the state together with that
/// optimal solution (prices fixed at the midpoint of each reservation band).
pub fn example_one() -> (MarketState, Solution) {
    let mut state = single_group_state(f64::INFINITY, f64::INFINITY);
    let offers = [
        offer(OfferId(1), Side::Selling, "p1", 10.0, &[48], 3.0),
        offer(OfferId(2), Side::Selling, "p2", 30.0, &[48, 49], 3.0),
        offer(OfferId(3), Side::Buying, "c1", 30.0, &[48], 5.0),
        offer(OfferId(4), Side::Buying, "c1", 10.0, &[49], 5.0),
    ];
    for o in offers {
        state
            .account_group
            .insert(o.account.clone(), GroupId::new("g"));
        state
            .account_owner
            .insert(o.account.clone(), ProsumerId::new(o.account.0.clone()));
        state.add_offer(o);
    }

    let mut optimal = Solution::empty();
    optimal.insert(TradeKey::new(OfferId(1), OfferId(3), Interval(48)), 10.0, 4.0);
    optimal.insert(TradeKey::new(OfferId(2), OfferId(3), Interval(48)), 20.0, 4.0);
    optimal.insert(TradeKey::new(OfferId(2), OfferId(4), Interval(49)), 10.0, 4.0);
    (state, optimal)
}
