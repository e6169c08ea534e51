//! Construction of the horizon-pruned matching program and its solution.
//!
//! Free variables exist exactly for matchable (sell, buy) pairs and shared
//! intervals inside the planning window `[t_f, t_f + horizon]`. Intervals
//! before the window are already finalized and enter only as pinned
//! constants subtracted from the energy budgets; intervals beyond the window
//! are pruned to zero. Prices never enter the program: they are boxed by the
//! reservation prices, so any value in the box is valid and the midpoint is
//! assigned after solving.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{
    is_matchable, Interval, MarketState, OfferId, ProsumerId, Side, Solution, TradeKey,
};
use crate::solver::simplex::{self, Row, SimplexError};
use crate::EPSILON;

/// Which ledger events should trigger a re-solve in the solver service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResubmitOn {
    pub offer_posted: bool,
    pub finalized: bool,
}

impl Default for ResubmitOn {
    fn default() -> Self {
        ResubmitOn { offer_posted: true, finalized: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Planning horizon: free variables exist only for intervals up to
    /// `t_f + horizon`.
    pub horizon: u32,
    /// Logical sub-ticks to wait after the last triggering event before
    /// re-solving, so an offer burst produces a single submission.
    pub debounce_ticks: u64,
    pub resubmit_on: ResubmitOn,
    pub solver_id: String,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            horizon: 8,
            debounce_ticks: 1,
            resubmit_on: ResubmitOn::default(),
            solver_id: "solver-0".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Relation {
    Le,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Le => write!(f, "<="),
        }
    }
}

/// One linear inequality over the program's variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// (variable index, coefficient) pairs.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// The built matching program. `variables[i]` names the trade carried by
/// variable `i`; the objective is 1 on every variable (total power traded).
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub variables: Vec<TradeKey>,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Reservation-price box (seller, buyer) per variable, used to assign
    /// prices after solving.
    pub price_bounds: Vec<(f64, f64)>,
    /// Already-finalized trades carried verbatim into every solution.
    pub pins: Solution,
    /// Interval length in hours, used to convert power to energy.
    pub delta_hours: f64,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    /// Debug dump: one constraint per line,
    /// `<name>: <coef>*<var> ... <relation> <rhs>`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in &self.constraints {
            let terms: Vec<String> = c
                .terms
                .iter()
                .map(|(i, a)| format!("{}*{}", a, self.variables[*i]))
                .collect();
            out.push_str(&format!("{}: {} {} {}\n", c.name, terms.join(" + "), c.relation, c.rhs));
        }
        out
    }
}

/// Builds the pruned matching program at finalization frontier `t_f`.
///
/// Pinned trades are read from `state.finalized`; their energy consumption
/// is subtracted from the offers' budgets, and they are carried into the
/// `pins` field so every returned solution reproduces them exactly.
pub fn build_lp(
    state: &MarketState,
    t_f: Interval,
    cfg: &SolverConfig,
    delta_hours: f64,
) -> LpProblem {
    let window_end = t_f.offset(cfg.horizon);

    // Variables: matchable pairs x shared in-window intervals, in trade-key
    // order (earlier interval, then lower sell id, then lower buy id).
    let mut variables: Vec<TradeKey> = Vec::new();
    for (sid, sell) in &state.offers {
        if sell.side != Side::Selling {
            continue;
        }
        for (bid, buy) in &state.offers {
            if buy.side != Side::Buying || !is_matchable(sell, buy) {
                continue;
            }
            for t in sell.intervals.intersection(&buy.intervals) {
                if *t >= t_f && *t <= window_end {
                    variables.push(TradeKey::new(*sid, *bid, *t));
                }
            }
        }
    }
    variables.sort();

    let mut constraints: Vec<Constraint> = Vec::new();

    // Energy budget per offer: free trades plus already-pinned trades must
    // stay within the offered energy.
    let mut pinned_sold: BTreeMap<OfferId, f64> = BTreeMap::new();
    let mut pinned_bought: BTreeMap<OfferId, f64> = BTreeMap::new();
    for (key, power) in &state.finalized.trades {
        *pinned_sold.entry(key.sell).or_default() += power * delta_hours;
        *pinned_bought.entry(key.buy).or_default() += power * delta_hours;
    }

    for (oid, offer) in &state.offers {
        let vars: Vec<usize> = variables
            .iter()
            .enumerate()
            .filter(|(_, k)| match offer.side {
                Side::Selling => k.sell == *oid,
                Side::Buying => k.buy == *oid,
            })
            .map(|(i, _)| i)
            .collect();
        if vars.is_empty() {
            continue;
        }
        let pinned = match offer.side {
            Side::Selling => pinned_sold.get(oid).copied().unwrap_or(0.0),
            Side::Buying => pinned_bought.get(oid).copied().unwrap_or(0.0),
        };
        // Pins came from a feasible solution, so the remaining budget is
        // non-negative up to solver noise; clamp the noise away.
        let budget = (offer.energy - pinned).max(0.0);
        constraints.push(Constraint {
            name: format!("energy_{oid}"),
            terms: vars.iter().map(|&i| (i, delta_hours)).collect(),
            relation: Relation::Le,
            rhs: budget,
        });
    }

    // Per-interval aggregates for prosumer and group limits. Pinned trades
    // never share an interval with free variables (everything before t_f is
    // pinned, everything from t_f on is free), so these rows are pure.
    let mut prosumer_sell_terms: BTreeMap<(ProsumerId, Interval), Vec<usize>> = BTreeMap::new();
    let mut prosumer_buy_terms: BTreeMap<(ProsumerId, Interval), Vec<usize>> = BTreeMap::new();
    let mut group_sell_terms: BTreeMap<(String, Interval), Vec<usize>> = BTreeMap::new();
    let mut group_buy_terms: BTreeMap<(String, Interval), Vec<usize>> = BTreeMap::new();

    for (i, key) in variables.iter().enumerate() {
        let sell = &state.offers[&key.sell];
        let buy = &state.offers[&key.buy];
        if let Some(owner) = state.account_owner.get(&sell.account) {
            prosumer_sell_terms
                .entry((owner.clone(), key.interval))
                .or_default()
                .push(i);
        }
        if let Some(owner) = state.account_owner.get(&buy.account) {
            prosumer_buy_terms
                .entry((owner.clone(), key.interval))
                .or_default()
                .push(i);
        }
        if let Some(g) = state.account_group.get(&sell.account) {
            group_sell_terms
                .entry((g.0.clone(), key.interval))
                .or_default()
                .push(i);
        }
        if let Some(g) = state.account_group.get(&buy.account) {
            group_buy_terms
                .entry((g.0.clone(), key.interval))
                .or_default()
                .push(i);
        }
    }

    for ((prosumer, t), vars) in &prosumer_sell_terms {
        let epl = state.limits.get(prosumer).map_or(f64::INFINITY, |l| l.epl);
        if epl.is_finite() {
            constraints.push(Constraint {
                name: format!("epl_{prosumer}_{t}"),
                terms: vars.iter().map(|&i| (i, 1.0)).collect(),
                relation: Relation::Le,
                rhs: epl,
            });
        }
    }
    for ((prosumer, t), vars) in &prosumer_buy_terms {
        let ecl = state.limits.get(prosumer).map_or(f64::INFINITY, |l| l.ecl);
        if ecl.is_finite() {
            constraints.push(Constraint {
                name: format!("ecl_{prosumer}_{t}"),
                terms: vars.iter().map(|&i| (i, 1.0)).collect(),
                relation: Relation::Le,
                rhs: ecl,
            });
        }
    }

    let group_intervals: std::collections::BTreeSet<(String, Interval)> = group_sell_terms
        .keys()
        .chain(group_buy_terms.keys())
        .cloned()
        .collect();
    for (gname, t) in group_intervals {
        let Some(group) = state.groups.get(&crate::market::GroupId::new(gname.clone())) else {
            continue;
        };
        let sells = group_sell_terms.get(&(gname.clone(), t)).cloned().unwrap_or_default();
        let buys = group_buy_terms.get(&(gname.clone(), t)).cloned().unwrap_or_default();
        if group.c_int.is_finite() {
            if !sells.is_empty() {
                constraints.push(Constraint {
                    name: format!("int_sell_{gname}_{t}"),
                    terms: sells.iter().map(|&i| (i, 1.0)).collect(),
                    relation: Relation::Le,
                    rhs: group.c_int,
                });
            }
            if !buys.is_empty() {
                constraints.push(Constraint {
                    name: format!("int_buy_{gname}_{t}"),
                    terms: buys.iter().map(|&i| (i, 1.0)).collect(),
                    relation: Relation::Le,
                    rhs: group.c_int,
                });
            }
        }
        if group.c_ext.is_finite() && !(sells.is_empty() && buys.is_empty()) {
            let mut out_terms: Vec<(usize, f64)> =
                sells.iter().map(|&i| (i, 1.0)).collect();
            out_terms.extend(buys.iter().map(|&i| (i, -1.0)));
            constraints.push(Constraint {
                name: format!("ext_out_{gname}_{t}"),
                terms: out_terms.clone(),
                relation: Relation::Le,
                rhs: group.c_ext,
            });
            let in_terms: Vec<(usize, f64)> =
                out_terms.into_iter().map(|(i, a)| (i, -a)).collect();
            constraints.push(Constraint {
                name: format!("ext_in_{gname}_{t}"),
                terms: in_terms,
                relation: Relation::Le,
                rhs: group.c_ext,
            });
        }
    }

    let price_bounds = variables
        .iter()
        .map(|k| {
            (
                state.offers[&k.sell].reservation_price,
                state.offers[&k.buy].reservation_price,
            )
        })
        .collect();

    LpProblem {
        objective: vec![1.0; variables.len()],
        variables,
        constraints,
        price_bounds,
        pins: state.finalized.clone(),
        delta_hours,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    /// Pivoting broke down; carries the solver's diagnostic.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

/// Solves the matching program and assembles a full solution: optimized
/// free trades (prices at the midpoint of each reservation band) merged with
/// the pinned finalized trades carried verbatim.
///
/// Deterministic for a fixed input: the variable order is the canonical
/// trade-key order and all pivoting tie-breaks are index-based, so
/// equal-objective optima resolve toward earlier intervals and lower offer
/// ids.
pub fn solve_lp(lp: &LpProblem) -> Result<SolvedLp, SolveError> {
    let rows: Vec<Row> = lp
        .constraints
        .iter()
        .map(|c| Row { coeffs: c.terms.clone(), rhs: c.rhs })
        .collect();
    let sol = match simplex::maximize(lp.num_vars(), &lp.objective, &rows) {
        Ok(s) => s,
        Err(e @ SimplexError::IterationLimit(_)) => {
            return Err(SolveError::NumericalFailure(e.to_string()));
        }
        Err(SimplexError::Unbounded { entering }) => {
            // Every variable sits under an energy budget, so an unbounded
            // ray means the builder emitted a broken program.
            unreachable!(
                "matching LP cannot be unbounded (variable {} escaped its energy budget)",
                lp.variables[entering]
            );
        }
    };

    let mut solution = lp.pins.clone();
    for (i, &value) in sol.values.iter().enumerate() {
        if value > EPSILON {
            let key = lp.variables[i];
            let (r_s, r_b) = lp.price_bounds[i];
            solution.insert(key, value, (r_s + r_b) / 2.0);
        }
    }
    Ok(SolvedLp { solution, objective: sol.objective, iterations: sol.iterations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolvedLp {
    /// Pins plus optimized free trades.
    pub solution: Solution,
    /// Objective over the free variables only (total new power matched).
    pub objective: f64,
    pub iterations: usize,
}
