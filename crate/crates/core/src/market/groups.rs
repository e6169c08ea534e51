//! Group-limit derivation and the privacy cost of grouping.
//!
//! Feeders are merged into a group so that offers are anonymous at group
//! level. The group limit must then be set so that no distribution of power
//! among the (now indistinguishable) prosumers can overload a member feeder.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::types::{Feeder, Offer, ProsumerLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitCase {
    /// Some feeder's prosumers can jointly exceed that feeder's limit, so
    /// the group as a whole may produce at most the smallest such feeder's
    /// limit.
    FeederBound,
    /// No feeder can be exceeded by its own prosumers; the group limit is
    /// the sum of the feeder limits and grouping costs nothing.
    SumOfFeeders,
}

/// One side (production or consumption) of a derived group limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedLimit {
    pub c_g: f64,
    pub case: LimitCase,
}

/// Production and consumption limits are independent constraints of the same
/// shape, so they are derived independently; callers wanting a single shared
/// limit take the minimum of the two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupLimits {
    pub production: DerivedLimit,
    pub consumption: DerivedLimit,
}

impl GroupLimits {
    /// Single shared limit: the smaller of the two sides.
    pub fn shared(&self) -> f64 {
        self.production.c_g.min(self.consumption.c_g)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GroupLimitError {
    #[error("cannot derive limits for an empty group")]
    EmptyGroup,
}

fn derive_one_side(
    feeders: &[Feeder],
    limit_of: impl Fn(&ProsumerLimits) -> f64,
    limits: &[ProsumerLimits],
) -> DerivedLimit {
    let mut binding: Option<f64> = None;
    let mut sum = 0.0;
    for feeder in feeders {
        let c_f = feeder.effective_limit();
        sum += c_f;
        let feeder_capability: f64 = limits
            .iter()
            .filter(|l| feeder.prosumers.contains(&l.prosumer))
            .map(&limit_of)
            .sum();
        // An infinite feeder limit (the DSO's dummy feeder) can never be
        // exceeded and never binds.
        if c_f.is_finite() && feeder_capability >= c_f {
            binding = Some(match binding {
                Some(b) => b.min(c_f),
                None => c_f,
            });
        }
    }
    match binding {
        Some(c_g) => DerivedLimit { c_g, case: LimitCase::FeederBound },
        None => DerivedLimit { c_g: sum, case: LimitCase::SumOfFeeders },
    }
}

/// Derives the group limit from the member feeders and the prosumer limits,
/// for the production side (EPL vs feeder limit) and the consumption side
/// (ECL vs feeder limit) independently.
///
/// If any feeder's prosumers can jointly reach its limit, the group limit is
/// the minimum limit over such feeders; otherwise it is the sum of all
/// feeder limits.
pub fn derive_group_limits(
    feeders: &[Feeder],
    limits: &[ProsumerLimits],
) -> Result<GroupLimits, GroupLimitError> {
    if feeders.is_empty() {
        return Err(GroupLimitError::EmptyGroup);
    }
    Ok(GroupLimits {
        production: derive_one_side(feeders, |l| l.epl, limits),
        consumption: derive_one_side(feeders, |l| l.ecl, limits),
    })
}

/// Energy-trading volume forgone to keep group-level anonymity safe:
/// the tradable volume `min(sum of sells, sum of buys)` minus what the group
/// limit still allows of it.
pub fn privacy_cost(sell_offers: &[Offer], buy_offers: &[Offer], c_g: f64) -> f64 {
    debug_assert!(c_g >= 0.0);
    let sells: f64 = sell_offers.iter().map(|o| o.energy).sum();
    let buys: f64 = buy_offers.iter().map(|o| o.energy).sum();
    let tradable = sells.min(buys);
    tradable - tradable.min(c_g)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::market::fixtures::offer;
    use crate::market::{FeederId, OfferId, ProsumerId, Side};

    fn feeder(id: &str, c: f64, prosumers: &[&str]) -> Feeder {
        Feeder {
            id: FeederId::new(id),
            c_int: c,
            c_ext: c,
            prosumers: prosumers.iter().map(|p| ProsumerId::new(*p)).collect(),
        }
    }

    fn epl(prosumer: &str, value: f64) -> ProsumerLimits {
        ProsumerLimits { prosumer: ProsumerId::new(prosumer), epl: value, ecl: value }
    }

    #[test]
    fn overloadable_feeder_binds_the_group_to_its_limit() {
        // Feeder 1: C=10, prosumers sum to 12 (can exceed). Feeder 2: C=15,
        // prosumers sum to 9 (cannot). Group limit = 10.
        let feeders = [
            feeder("f1", 10.0, &["u1", "u2"]),
            feeder("f2", 15.0, &["u3"]),
        ];
        let limits = [epl("u1", 7.0), epl("u2", 5.0), epl("u3", 9.0)];
        let derived = derive_group_limits(&feeders, &limits).unwrap();
        assert_eq!(derived.production.case, LimitCase::FeederBound);
        assert_eq!(derived.production.c_g, 10.0);
    }

    #[test]
    fn unreachable_feeder_limits_let_the_group_sum_them() {
        let feeders = [
            feeder("f1", 10.0, &["u1"]),
            feeder("f2", 15.0, &["u2", "u3"]),
        ];
        let limits = [epl("u1", 8.0), epl("u2", 7.0), epl("u3", 7.0)];
        let derived = derive_group_limits(&feeders, &limits).unwrap();
        assert_eq!(derived.production.case, LimitCase::SumOfFeeders);
        assert_eq!(derived.production.c_g, 25.0);
    }

    #[test]
    fn capability_exactly_at_the_limit_binds() {
        let feeders = [feeder("f1", 10.0, &["u1"])];
        let limits = [epl("u1", 10.0)];
        let derived = derive_group_limits(&feeders, &limits).unwrap();
        assert_eq!(derived.production.case, LimitCase::FeederBound);
        assert_eq!(derived.production.c_g, 10.0);
    }

    #[test]
    fn production_and_consumption_sides_are_independent() {
        let feeders = [feeder("f1", 10.0, &["u1"])];
        let limits = [ProsumerLimits {
            prosumer: ProsumerId::new("u1"),
            epl: 12.0, // can exceed => bound at 10
            ecl: 4.0,  // cannot => sum = 10
        }];
        let derived = derive_group_limits(&feeders, &limits).unwrap();
        assert_eq!(derived.production.case, LimitCase::FeederBound);
        assert_eq!(derived.consumption.case, LimitCase::SumOfFeeders);
        assert_eq!(derived.shared(), 10.0);
    }

    #[test]
    fn empty_group_is_an_error() {
        assert_eq!(derive_group_limits(&[], &[]), Err(GroupLimitError::EmptyGroup));
    }

    #[test]
    fn dummy_feeder_with_infinite_limit_never_binds() {
        let mut dso = feeder("dso", f64::INFINITY, &["dso-op"]);
        dso.prosumers = BTreeSet::from([ProsumerId::new("dso-op")]);
        let feeders = [feeder("f1", 10.0, &["u1"]), dso];
        let limits = [epl("u1", 5.0), epl("dso-op", f64::INFINITY)];
        let derived = derive_group_limits(&feeders, &limits).unwrap();
        assert_eq!(derived.production.case, LimitCase::SumOfFeeders);
        assert!(derived.production.c_g.is_infinite());
    }

    #[test]
    fn privacy_cost_is_the_tradable_volume_beyond_the_limit() {
        let sells: Vec<_> = [25.0, 15.0]
            .iter()
            .enumerate()
            .map(|(i, &e)| offer(OfferId(i as u64), Side::Selling, "s", e, &[1], 1.0))
            .collect();
        let buys: Vec<_> = [35.0]
            .iter()
            .enumerate()
            .map(|(i, &e)| offer(OfferId(10 + i as u64), Side::Buying, "b", e, &[1], 9.0))
            .collect();
        // min(40, 35) - min(40, 35, 10) = 35 - 10 = 25.
        assert_eq!(privacy_cost(&sells, &buys, 10.0), 25.0);

        let small_sells = [offer(OfferId(1), Side::Selling, "s", 5.0, &[1], 1.0)];
        let small_buys = [offer(OfferId(2), Side::Buying, "b", 5.0, &[1], 9.0)];
        assert_eq!(privacy_cost(&small_sells, &small_buys, 10.0), 0.0);

        assert_eq!(privacy_cost(&[], &small_buys, 10.0), 0.0);
    }
}
