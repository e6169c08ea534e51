use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// A discrete trading interval. The real duration (hours) is carried in the
/// scenario configuration, not here; interval arithmetic is plain integer
/// arithmetic on the index.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Interval(pub u32);

impl Interval {
    pub fn offset(self, delta: u32) -> Interval {
        Interval(self.0 + delta)
    }

    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifier of an offer on the ledger. Assigned sequentially by the ledger
/// so that variable orderings derived from offer ids are deterministic.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct OfferId(pub u64);

impl fmt::Display for OfferId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

/// An account identity on the ledger. Prosumers may own any number of them;
/// the market layer treats them as opaque strings.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct AccountId(pub String);

impl AccountId {
    pub fn new(id: impl Into<String>) -> Self {
        AccountId(id.into())
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ProsumerId(pub String);

impl ProsumerId {
    pub fn new(id: impl Into<String>) -> Self {
        ProsumerId(id.into())
    }
}

impl fmt::Display for ProsumerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct FeederId(pub String);

impl FeederId {
    pub fn new(id: impl Into<String>) -> Self {
        FeederId(id.into())
    }
}

#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct GroupId(pub String);

impl GroupId {
    pub fn new(id: impl Into<String>) -> Self {
        GroupId(id.into())
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Selling,
    Buying,
}

/// A selling or buying intent: the account that posted it, the amount of
/// energy offered, the set of intervals in which the energy could flow, and
/// the reservation price (lowest acceptable unit price for sellers, highest
/// for buyers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offer {
    pub id: OfferId,
    pub side: Side,
    pub account: AccountId,
    /// Energy offered, kWh. Zero-energy offers are accepted and match nothing.
    pub energy: f64,
    /// Non-empty set of intervals in which the energy could be delivered.
    pub intervals: BTreeSet<Interval>,
    /// Currency per kWh.
    pub reservation_price: f64,
}

impl Offer {
    pub fn validate(&self) -> Result<(), String> {
        if self.energy < 0.0 {
            return Err(format!("offer {}: negative energy {}", self.id, self.energy));
        }
        if self.intervals.is_empty() {
            return Err(format!("offer {}: empty interval set", self.id));
        }
        if self.reservation_price < 0.0 {
            return Err(format!(
                "offer {}: negative reservation price {}",
                self.id, self.reservation_price
            ));
        }
        Ok(())
    }
}

/// Key of one trade: (selling offer, buying offer, delivery interval).
/// Ordered by interval first so that variable orderings prefer earlier
/// intervals, then lower offer ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TradeKey {
    pub sell: OfferId,
    pub buy: OfferId,
    pub interval: Interval,
}

impl TradeKey {
    pub fn new(sell: OfferId, buy: OfferId, interval: Interval) -> Self {
        TradeKey { sell, buy, interval }
    }
}

impl PartialOrd for TradeKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TradeKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.interval, self.sell, self.buy).cmp(&(other.interval, other.sell, other.buy))
    }
}

impl fmt::Display for TradeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.sell, self.buy, self.interval)
    }
}

/// A (partial) solution to the trading problem: sparse maps from trade key
/// to power (kW) and unit price (currency/kWh). Absent keys mean zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Solution {
    pub trades: BTreeMap<TradeKey, f64>,
    pub prices: BTreeMap<TradeKey, f64>,
}

impl Solution {
    pub fn empty() -> Self {
        Solution::default()
    }

    pub fn insert(&mut self, key: TradeKey, power_kw: f64, price: f64) {
        self.trades.insert(key, power_kw);
        self.prices.insert(key, price);
    }

    pub fn is_empty(&self) -> bool {
        self.trades.is_empty()
    }

    /// Power delivered by selling offer `s` in `interval`, kW.
    pub fn sold_power(&self, s: OfferId, interval: Interval) -> f64 {
        self.trades
            .iter()
            .filter(|(k, _)| k.sell == s && k.interval == interval)
            .map(|(_, p)| *p)
            .sum()
    }

    /// Power received by buying offer `b` in `interval`, kW.
    pub fn bought_power(&self, b: OfferId, interval: Interval) -> f64 {
        self.trades
            .iter()
            .filter(|(k, _)| k.buy == b && k.interval == interval)
            .map(|(_, p)| *p)
            .sum()
    }
}

/// Capacity limits of a physical feeder. `c_int` bounds the total power
/// produced or consumed within the feeder, `c_ext` bounds the net flow
/// through the feeder head. Infinite limits mark the dummy feeder used to
/// include the DSO in the formulation; checks skip them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feeder {
    pub id: FeederId,
    pub c_int: f64,
    pub c_ext: f64,
    pub prosumers: BTreeSet<ProsumerId>,
}

impl Feeder {
    /// Only `c_ext <= c_int` is meaningful: the quantity compared against the
    /// external limit never exceeds the one compared against the internal
    /// limit, so a larger external limit could never trip. Inputs violating
    /// this are clamped at load time.
    pub fn normalize(&mut self) -> bool {
        if self.c_ext > self.c_int {
            self.c_ext = self.c_int;
            true
        } else {
            false
        }
    }

    /// The binding single limit used for group derivation.
    pub fn effective_limit(&self) -> f64 {
        self.c_int.min(self.c_ext)
    }
}

/// A set of feeders treated as one anonymity and safety domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub id: GroupId,
    pub feeders: BTreeSet<FeederId>,
    pub c_int: f64,
    pub c_ext: f64,
}

impl Group {
    pub fn normalize(&mut self) -> bool {
        if self.c_ext > self.c_int {
            self.c_ext = self.c_int;
            true
        } else {
            false
        }
    }
}

/// Per-prosumer production and consumption power limits, kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsumerLimits {
    pub prosumer: ProsumerId,
    /// Maximum production power, kW.
    pub epl: f64,
    /// Maximum consumption power, kW.
    pub ecl: f64,
}

/// Immutable view of everything the market predicates need: the offer book,
/// the topology with its limits, account associations, and already-finalized
/// trades.
///
/// Anonymous accounts appear in `account_group` but not in `account_owner`;
/// they contribute only to group-level constraints.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MarketState {
    pub offers: BTreeMap<OfferId, Offer>,
    pub feeders: BTreeMap<FeederId, Feeder>,
    pub groups: BTreeMap<GroupId, Group>,
    pub limits: BTreeMap<ProsumerId, ProsumerLimits>,
    pub account_group: BTreeMap<AccountId, GroupId>,
    pub account_owner: BTreeMap<AccountId, ProsumerId>,
    pub finalized: Solution,
}

impl MarketState {
    pub fn offer(&self, id: OfferId) -> Option<&Offer> {
        self.offers.get(&id)
    }

    pub fn add_offer(&mut self, offer: Offer) {
        self.offers.insert(offer.id, offer);
    }

    /// Group of the account that posted `offer`, if assigned.
    pub fn group_of_offer(&self, offer: &Offer) -> Option<&GroupId> {
        self.account_group.get(&offer.account)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trade_key_orders_by_interval_then_offer_ids() {
        let a = TradeKey::new(OfferId(5), OfferId(1), Interval(3));
        let b = TradeKey::new(OfferId(1), OfferId(9), Interval(4));
        let c = TradeKey::new(OfferId(1), OfferId(2), Interval(3));
        assert!(a < b, "earlier interval wins over offer ids");
        assert!(c < a, "lower sell id wins within an interval");
    }

    #[test]
    fn feeder_normalization_clamps_external_limit() {
        let mut f = Feeder {
            id: FeederId::new("f1"),
            c_int: 10.0,
            c_ext: 15.0,
            prosumers: BTreeSet::new(),
        };
        assert!(f.normalize());
        assert_eq!(f.c_ext, 10.0);
        assert!(!f.normalize());
    }

    #[test]
    fn offer_validation_rejects_bad_fields() {
        let mut o = Offer {
            id: OfferId(1),
            side: Side::Selling,
            account: AccountId::new("a"),
            energy: 1.0,
            intervals: [Interval(1)].into_iter().collect(),
            reservation_price: 2.0,
        };
        assert!(o.validate().is_ok());
        o.energy = -1.0;
        assert!(o.validate().is_err());
        o.energy = 0.0;
        assert!(o.validate().is_ok(), "zero-energy offers are degenerate but legal");
        o.intervals.clear();
        assert!(o.validate().is_err());
    }
}
