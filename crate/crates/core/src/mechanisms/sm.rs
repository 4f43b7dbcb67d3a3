//! Rules for nondecreasing submodular values (weighted coverage or additive).
//!
//! The workhorse is a proportional-price greedy run against **half** the
//! budget: repeatedly take the agent with the best marginal value per unit
//! bid, but only while the taken agent's bid stays within `B/2` scaled by its
//! marginal share of the running value. Halving is what makes the later
//! threshold payments of all winners fit inside the full budget.
//!
//! Greedy alone can be arbitrarily bad when one seller owns most of the
//! value, so the composed rules first test the best single seller `i*`
//! against an estimate of the market without it:
//!
//! * [`SmExact`] compares `alpha * v(i*)` with the exact optimum over
//!   `A \ {i*}` (exhaustive search; small markets only).
//! * [`SmFrac`] (coverage only) compares against the LP relaxation's optimum
//!   over `A \ {i*}`, which is polynomial-size but weakens the constant to
//!   the one at `rho = 2e/(e-1)`.
//!
//! If the single seller test passes, the rule buys `{i*}` alone; otherwise it
//! falls back to the half-budget greedy. Both branches are monotone in every
//! bid, which is what the payment layer needs.

use std::collections::BTreeSet;

use num::{Signed, Zero};

use crate::coverage_lp::solve_coverage_lp_excluding;
use crate::error::{Error, Result};
use crate::mechanisms::{
    affordable_agents, best_singleton, coverage_rho, sm_constants, BreakpointSet, Mechanism,
    SolveCache,
};
use crate::oracle::brute_force_opt_excluding;
use crate::rat::{rat, rat_from_f64, Rat};
use crate::types::{evaluate, BidProfile, Instance, ValuationSpec};

/// Subset-enumeration cap for exact breakpoint sets: with at most this many
/// other active agents, every state of the greedy is enumerable.
const SM_ENUM_LIMIT: usize = 13;

fn require_submodular(valuation: &ValuationSpec, mechanism: &'static str) -> Result<()> {
    match valuation {
        ValuationSpec::Coverage(_) | ValuationSpec::Additive(_) => Ok(()),
        ValuationSpec::IndependenceSystem(_) => Err(Error::NotSubmodular { mechanism }),
    }
}

/// The single-seller test weight for the exact rule, frozen to the nearest
/// double of `alpha` at `rho = 1` and lifted to an exact rational so every
/// comparison is deterministic.
fn alpha_exact() -> Rat {
    rat_from_f64(sm_constants(1.0).expect("rho = 1 is valid").alpha)
}

/// Same for the LP-backed rule, at `rho = 2e/(e-1)`.
fn alpha_fractional() -> Rat {
    rat_from_f64(sm_constants(coverage_rho()).expect("coverage rho is valid").alpha)
}

/// Half-budget proportional greedy over `active`. Adds the agent maximizing
/// marginal value per unit bid (cross-multiplied exactly; ties to the lower
/// bid, then the lower id), accepting agent `k` at state `S` only while
///
/// ```text
/// b_k * v(S ∪ {k}) ≤ half_budget * (v(S ∪ {k}) - v(S))
/// ```
///
/// and stopping outright at the first rejection. Zero-marginal agents are
/// never candidates.
pub(crate) fn greedy_sm_allocation(
    valuation: &ValuationSpec,
    bids: &BidProfile,
    active: &BTreeSet<usize>,
    half_budget: &Rat,
) -> Result<BTreeSet<usize>> {
    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    let mut value = Rat::zero();
    loop {
        let mut best: Option<(usize, Rat, Rat)> = None;
        for &i in active {
            if chosen.contains(&i) {
                continue;
            }
            let mut with = chosen.clone();
            with.insert(i);
            let value_with = evaluate(valuation, &with)?;
            let marginal = &value_with - &value;
            if !marginal.is_positive() {
                continue;
            }
            let replaces = match &best {
                None => true,
                Some((j, best_marginal, _)) => {
                    let lhs = &marginal * &bids.bids[*j];
                    let rhs = best_marginal * &bids.bids[i];
                    // Ascending iteration makes the lower-id tie rule implicit.
                    lhs > rhs || (lhs == rhs && bids.bids[i] < bids.bids[*j])
                }
            };
            if replaces {
                best = Some((i, marginal, value_with));
            }
        }
        let Some((k, marginal, value_with)) = best else {
            return Ok(chosen);
        };
        if &bids.bids[k] * &value_with > half_budget * &marginal {
            return Ok(chosen);
        }
        chosen.insert(k);
        value = value_with;
    }
}

/// Standalone half-budget greedy: filters bids above the (full) budget, then
/// runs [`greedy_sm_allocation`] against `B/2`.
pub fn greedy_sm(instance: &Instance, bids: &BidProfile) -> Result<BTreeSet<usize>> {
    require_submodular(&instance.valuation, "greedy-sm")?;
    let active = affordable_agents(instance, bids, false)?;
    let half = &instance.budget / rat(2, 1);
    greedy_sm_allocation(&instance.valuation, bids, &active, &half)
}

/// Every bid at which agent `x`'s fate inside the half-budget greedy can
/// flip, assuming the other bids stay fixed: for each reachable greedy state
/// `S` (any subset of the other active agents), the acceptance threshold at
/// `S` and the priority crossings against each remaining rival. Returns
/// `None` when the other-agent count exceeds the enumeration cap.
fn greedy_breakpoint_candidates(
    valuation: &ValuationSpec,
    bids: &BidProfile,
    budget: &Rat,
    x: usize,
) -> Result<Option<Vec<Rat>>> {
    let others: Vec<usize> = (0..bids.bids.len())
        .filter(|&i| i != x && bids.bids[i] <= *budget)
        .collect();
    if others.len() > SM_ENUM_LIMIT {
        return Ok(None);
    }
    let half = budget / rat(2, 1);
    let mut candidates = Vec::new();
    for mask in 0u32..(1u32 << others.len()) {
        let state: BTreeSet<usize> = others
            .iter()
            .enumerate()
            .filter(|(pos, _)| mask >> pos & 1 == 1)
            .map(|(_, &i)| i)
            .collect();
        let value_state = evaluate(valuation, &state)?;
        let mut with_x = state.clone();
        with_x.insert(x);
        let value_with_x = evaluate(valuation, &with_x)?;
        let marginal_x = &value_with_x - &value_state;
        if !marginal_x.is_positive() {
            continue;
        }
        candidates.push(&half * &marginal_x / &value_with_x);
        for &j in others.iter().filter(|j| !state.contains(j)) {
            let mut with_j = state.clone();
            with_j.insert(j);
            let marginal_j = evaluate(valuation, &with_j)? - &value_state;
            if marginal_j.is_positive() {
                candidates.push(&bids.bids[j] * &marginal_x / marginal_j);
            }
        }
    }
    candidates.push(budget.clone());
    Ok(Some(candidates))
}

/// Half-budget proportional greedy as a mechanism of its own.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedySm;

impl Mechanism for GreedySm {
    fn name(&self) -> &'static str {
        "greedy-sm"
    }

    fn run_cached(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        _cache: &mut SolveCache,
    ) -> Result<BTreeSet<usize>> {
        greedy_sm(instance, bids)
    }

    fn breakpoints(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        agent: usize,
    ) -> Result<BreakpointSet> {
        require_submodular(&instance.valuation, "greedy-sm")?;
        match greedy_breakpoint_candidates(&instance.valuation, bids, &instance.budget, agent)? {
            Some(candidates) => Ok(BreakpointSet::complete(candidates)),
            None => Ok(BreakpointSet::partial(vec![instance.budget.clone()])),
        }
    }
}

/// Best-single-seller test with an exhaustive benchmark, falling back to the
/// half-budget greedy. Exact but exponential in the market size.
#[derive(Debug, Clone, Copy, Default)]
pub struct SmExact;

impl SmExact {
    /// The winning branch under the given bids: `Ok(true)` means the single
    /// seller `i*` is bought alone.
    fn singleton_branch(&self, instance: &Instance, bids: &BidProfile) -> Result<Option<bool>> {
        let active = affordable_agents(instance, bids, false)?;
        let Some((star, star_value)) = best_singleton(instance, &active)? else {
            return Ok(None);
        };
        let mut excluded = BTreeSet::new();
        excluded.insert(star);
        let (_, rest_opt) = brute_force_opt_excluding(
            &instance.valuation,
            &bids.bids,
            &instance.budget,
            &excluded,
        )?;
        Ok(Some(alpha_exact() * star_value >= rest_opt))
    }
}

impl Mechanism for SmExact {
    fn name(&self) -> &'static str {
        "mechanism-sm"
    }

    fn run_cached(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        _cache: &mut SolveCache,
    ) -> Result<BTreeSet<usize>> {
        require_submodular(&instance.valuation, "mechanism-sm")?;
        let active = affordable_agents(instance, bids, false)?;
        let Some((star, _)) = best_singleton(instance, &active)? else {
            return Ok(BTreeSet::new());
        };
        if self.singleton_branch(instance, bids)? == Some(true) {
            return Ok(BTreeSet::from([star]));
        }
        let half = &instance.budget / rat(2, 1);
        greedy_sm_allocation(&instance.valuation, bids, &active, &half)
    }

    fn breakpoints(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        agent: usize,
    ) -> Result<BreakpointSet> {
        require_submodular(&instance.valuation, "mechanism-sm")?;
        let budget = &instance.budget;
        let greedy =
            greedy_breakpoint_candidates(&instance.valuation, bids, budget, agent)?;
        // `i*` has the largest singleton value among agents that can bid at
        // all; within the scan `agent` is always active, so `i*` is fixed.
        let mut market: BTreeSet<usize> =
            (0..instance.num_agents()).filter(|&i| i == agent || bids.bids[i] <= *budget).collect();
        market.insert(agent);
        let star = best_singleton(instance, &market)?.map(|(i, _)| i);
        let mut candidates = match greedy {
            Some(c) => c,
            None => {
                return Ok(BreakpointSet::partial(vec![budget.clone()]));
            }
        };
        if let Some(star) = star {
            if star != agent {
                // The benchmark over `A \ {i*}` sees `agent`'s bid through
                // budget feasibility: each rival subset `T` stops being
                // affordable together with `agent` once its bid passes
                // `B - Σ_{j ∈ T} b_j`.
                let rivals: Vec<usize> = (0..instance.num_agents())
                    .filter(|&i| i != agent && i != star && bids.bids[i] <= *budget)
                    .collect();
                if rivals.len() > SM_ENUM_LIMIT {
                    return Ok(BreakpointSet::partial(candidates));
                }
                for mask in 0u32..(1u32 << rivals.len()) {
                    let spent: Rat = rivals
                        .iter()
                        .enumerate()
                        .filter(|(pos, _)| mask >> pos & 1 == 1)
                        .map(|(_, &j)| bids.bids[j].clone())
                        .sum();
                    let left = budget - spent;
                    if !left.is_negative() {
                        candidates.push(left);
                    }
                }
            }
        }
        candidates.push(budget.clone());
        Ok(BreakpointSet::complete(candidates))
    }
}

/// Best-single-seller test against the coverage LP relaxation, falling back
/// to the half-budget greedy. Polynomial-size benchmark; coverage only.
#[derive(Debug, Clone, Copy, Default)]
pub struct SmFrac;

impl SmFrac {
    fn coverage<'a>(&self, instance: &'a Instance) -> Result<&'a crate::valuations::CoverageSpec> {
        match &instance.valuation {
            ValuationSpec::Coverage(spec) => Ok(spec),
            _ => Err(Error::NotCoverage { mechanism: "mechanism-sm-frac" }),
        }
    }
}

impl Mechanism for SmFrac {
    fn name(&self) -> &'static str {
        "mechanism-sm-frac"
    }

    fn run_cached(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        _cache: &mut SolveCache,
    ) -> Result<BTreeSet<usize>> {
        let spec = self.coverage(instance)?;
        let active = affordable_agents(instance, bids, false)?;
        let Some((star, star_value)) = best_singleton(instance, &active)? else {
            return Ok(BTreeSet::new());
        };
        let mut excluded = BTreeSet::new();
        excluded.insert(star);
        let relaxed =
            solve_coverage_lp_excluding(spec, &bids.bids, &instance.budget, &excluded)?;
        if alpha_fractional() * star_value >= relaxed.objective {
            return Ok(BTreeSet::from([star]));
        }
        let half = &instance.budget / rat(2, 1);
        greedy_sm_allocation(&instance.valuation, bids, &active, &half)
    }

    fn breakpoints(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        agent: usize,
    ) -> Result<BreakpointSet> {
        let _ = self.coverage(instance)?;
        let budget = &instance.budget;
        let mut market: BTreeSet<usize> =
            (0..instance.num_agents()).filter(|&i| bids.bids[i] <= *budget).collect();
        market.insert(agent);
        let star = best_singleton(instance, &market)?.map(|(i, _)| i);
        let greedy =
            greedy_breakpoint_candidates(&instance.valuation, bids, budget, agent)?;
        let mut candidates = greedy.clone().unwrap_or_else(|| vec![budget.clone()]);
        candidates.push(budget.clone());
        if star == Some(agent) {
            // The LP benchmark excludes `agent`, so the branch choice cannot
            // depend on its bid: the greedy flip points are everything.
            Ok(match greedy {
                Some(_) => BreakpointSet::complete(candidates),
                None => BreakpointSet::partial(candidates),
            })
        } else {
            // The benchmark's budget row sees `agent`'s bid, so the branch
            // flip point is a root of a piecewise-linear program value; the
            // scan refines it by bisection.
            Ok(BreakpointSet::partial(candidates))
        }
    }
}
