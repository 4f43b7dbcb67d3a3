//! Rules for independence-system values (matchings, matroids, set packings),
//! where a feasible purchase is an independent set and additive values live
//! on the elements. Additive values with no structure are treated as the
//! independence system in which every set is independent.
//!
//! The core rule peels sellers off an unbudgeted optimum: sort the active
//! agents by bid per unit value, worst first; while the worst remaining
//! agent's unit price exceeds `B / v(M)` — where `M` is the best independent
//! set among the remaining agents — drop that agent and re-solve. The first
//! `M` whose worst supporter passes the test is bought. The acceptance test
//! `v(M) · b_top ≤ B · v_top` is cross-multiplied, so everything stays exact.
//!
//! On top of it:
//!
//! * [`DetIsk`] first checks whether the single most valuable seller beats
//!   the peeled greedy run without it, and buys that seller alone if so.
//! * [`RandIsk`] flips one seeded coin: with probability `1/(2ρ+1)` it buys
//!   the most valuable seller, otherwise it runs the peeled greedy. `ρ` is
//!   the unbudgeted solver's approximation factor (1 for exactly solvable
//!   systems, `k` for k-dimensional matching).
//! * [`BrokenGreedyIsk`] skips the acceptance test on purpose; it exists so
//!   audits can demonstrate a budget violation.

use std::borrow::Cow;
use std::collections::BTreeSet;

use num::{One, Zero};

use crate::error::{Error, Result};
use crate::indsys::IndependenceSystemSpec;
use crate::mechanisms::{
    affordable_agents, best_singleton, BreakpointSet, CoinSource, Mechanism, SolveCache,
};
use crate::rat::{rat_int, Rat};
use crate::types::{BidProfile, Instance, ValuationSpec};

/// The instance's valuation as an independence system: borrowed when it is
/// one, synthesized (all sets independent) when it is additive.
pub(crate) fn isk_view<'a>(
    valuation: &'a ValuationSpec,
    mechanism: &'static str,
) -> Result<Cow<'a, IndependenceSystemSpec>> {
    match valuation {
        ValuationSpec::IndependenceSystem(spec) => Ok(Cow::Borrowed(spec)),
        ValuationSpec::Additive(a) => {
            Ok(Cow::Owned(IndependenceSystemSpec::free(a.values.clone())))
        }
        ValuationSpec::Coverage(_) => Err(Error::NotIndependenceSystem { mechanism }),
    }
}

/// Active agents sorted for peeling: descending bid per unit value
/// (cross-multiplied), ties by descending bid, then ascending id. Index 0 is
/// the first to be peeled.
fn peel_order(spec: &IndependenceSystemSpec, bids: &BidProfile, active: &BTreeSet<usize>) -> Vec<usize> {
    let mut order: Vec<usize> = active.iter().copied().collect();
    order.sort_by(|&a, &b| {
        let lhs = &bids.bids[a] * &spec.element_values[b];
        let rhs = &bids.bids[b] * &spec.element_values[a];
        rhs.cmp(&lhs)
            .then_with(|| bids.bids[b].cmp(&bids.bids[a]))
            .then_with(|| a.cmp(&b))
    });
    order
}

fn peeled_greedy(
    spec: &IndependenceSystemSpec,
    bids: &BidProfile,
    budget: &Rat,
    active: &BTreeSet<usize>,
    cache: &mut SolveCache,
) -> Result<BTreeSet<usize>> {
    let order = peel_order(spec, bids, active);
    for start in 0..order.len() {
        let allowed: BTreeSet<usize> = order[start..].iter().copied().collect();
        let (solution, solution_value) = cache.solve(spec, &spec.element_values, &allowed)?;
        let top = order[start];
        if &solution_value * &bids.bids[top] <= budget * &spec.element_values[top] {
            return Ok(solution);
        }
    }
    Ok(BTreeSet::new())
}

/// Peeled greedy as a standalone function: filters unaffordable and
/// zero-value agents, then peels until the worst unit price fits the budget.
pub fn greedy_isk(instance: &Instance, bids: &BidProfile) -> Result<BTreeSet<usize>> {
    GreedyIsk.run(instance, bids)
}

/// Bids at which agent `x`'s outcome under the peeled greedy (over the
/// active agents minus `exclude`) can flip:
///
/// * order crossings against each rival `j`: `b_j · v_x / v_j`;
/// * acceptance flips `B · v_x / v(f(S))`, where `S` ranges over the
///   suffixes of the rivals' fixed peel order, with and without `x` joined —
///   the only sub-markets the greedy can ever solve while `x` is present.
///
/// Together with the budget itself this covers every flip point, so the
/// resulting breakpoint sets are complete and thresholds are exact.
fn peel_breakpoint_candidates(
    spec: &IndependenceSystemSpec,
    bids: &BidProfile,
    budget: &Rat,
    active: &BTreeSet<usize>,
    x: usize,
    cache: &mut SolveCache,
) -> Result<Vec<Rat>> {
    let mut candidates = vec![budget.clone()];
    let value_x = &spec.element_values[x];
    if value_x.is_zero() {
        return Ok(candidates);
    }
    let mut rivals = active.clone();
    rivals.remove(&x);
    let order = peel_order(spec, bids, &rivals);
    for &j in &order {
        candidates.push(&bids.bids[j] * value_x / &spec.element_values[j]);
    }
    for start in 0..=order.len() {
        let suffix: BTreeSet<usize> = order[start..].iter().copied().collect();
        let (_, without) = cache.solve(spec, &spec.element_values, &suffix)?;
        if !without.is_zero() {
            candidates.push(budget * value_x / without);
        }
        let mut joined = suffix;
        joined.insert(x);
        let (_, with) = cache.solve(spec, &spec.element_values, &joined)?;
        candidates.push(budget * value_x / with);
    }
    Ok(candidates)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyIsk;

impl Mechanism for GreedyIsk {
    fn name(&self) -> &'static str {
        "greedy-isk"
    }

    fn run_cached(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        cache: &mut SolveCache,
    ) -> Result<BTreeSet<usize>> {
        let spec = isk_view(&instance.valuation, "greedy-isk")?;
        let active = affordable_agents(instance, bids, true)?;
        peeled_greedy(&spec, bids, &instance.budget, &active, cache)
    }

    fn breakpoints(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        agent: usize,
    ) -> Result<BreakpointSet> {
        let spec = isk_view(&instance.valuation, "greedy-isk")?;
        let mut active = affordable_agents(instance, bids, true)?;
        if !spec.element_values[agent].is_zero() {
            active.insert(agent);
        }
        let mut cache = SolveCache::new();
        let candidates = peel_breakpoint_candidates(
            &spec,
            bids,
            &instance.budget,
            &active,
            agent,
            &mut cache,
        )?;
        Ok(BreakpointSet::complete(candidates))
    }
}

/// Derandomized two-branch rule: buy the single most valuable seller `i*`
/// alone when its value at least matches the peeled greedy's value on the
/// market without it; otherwise buy that greedy set.
#[derive(Debug, Clone, Copy, Default)]
pub struct DetIsk;

impl Mechanism for DetIsk {
    fn name(&self) -> &'static str {
        "det-isk"
    }

    fn run_cached(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        cache: &mut SolveCache,
    ) -> Result<BTreeSet<usize>> {
        let spec = isk_view(&instance.valuation, "det-isk")?;
        let active = affordable_agents(instance, bids, true)?;
        let Some((star, star_value)) = best_singleton(instance, &active)? else {
            return Ok(BTreeSet::new());
        };
        let mut rest = active;
        rest.remove(&star);
        let fallback = peeled_greedy(&spec, bids, &instance.budget, &rest, cache)?;
        let fallback_value: Rat =
            fallback.iter().map(|&i| spec.element_values[i].clone()).sum();
        if star_value >= fallback_value {
            Ok(BTreeSet::from([star]))
        } else {
            Ok(fallback)
        }
    }

    fn breakpoints(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        agent: usize,
    ) -> Result<BreakpointSet> {
        let spec = isk_view(&instance.valuation, "det-isk")?;
        let mut market = affordable_agents(instance, bids, true)?;
        if !spec.element_values[agent].is_zero() {
            market.insert(agent);
        }
        let star = best_singleton(instance, &market)?.map(|(i, _)| i);
        if star == Some(agent) || star.is_none() {
            // The branch test compares `v(i*)` with a run that never sees
            // `i*`'s bid, so `i*` either wins at every affordable bid or at
            // none of them.
            return Ok(BreakpointSet::complete(vec![instance.budget.clone()]));
        }
        let mut rest = market;
        rest.remove(&star.unwrap());
        let mut cache = SolveCache::new();
        let candidates = peel_breakpoint_candidates(
            &spec,
            bids,
            &instance.budget,
            &rest,
            agent,
            &mut cache,
        )?;
        Ok(BreakpointSet::complete(candidates))
    }
}

/// Randomized two-branch rule with one coin, fixed by the stored seed: with
/// probability `1/(2ρ+1)` buy the most valuable seller alone, otherwise run
/// the peeled greedy on the whole market. The coin is drawn as an exact
/// dyadic rational, so the branch choice is reproducible and auditable.
#[derive(Debug, Clone, Copy)]
pub struct RandIsk {
    pub seed: u64,
}

impl RandIsk {
    pub fn new(seed: u64) -> Self {
        RandIsk { seed }
    }

    /// Probability of the single-seller branch for `spec`: `1/(2ρ+1)`.
    pub fn singleton_probability(spec: &IndependenceSystemSpec) -> Rat {
        Rat::one() / (rat_int(2) * spec.default_rho() + Rat::one())
    }

    fn takes_singleton_branch(&self, spec: &IndependenceSystemSpec) -> bool {
        let coin = CoinSource::new(self.seed).next_unit();
        coin < Self::singleton_probability(spec)
    }
}

impl Mechanism for RandIsk {
    fn name(&self) -> &'static str {
        "rand-isk"
    }

    fn run_cached(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        cache: &mut SolveCache,
    ) -> Result<BTreeSet<usize>> {
        let spec = isk_view(&instance.valuation, "rand-isk")?;
        let active = affordable_agents(instance, bids, true)?;
        if self.takes_singleton_branch(&spec) {
            return Ok(match best_singleton(instance, &active)? {
                Some((star, _)) => BTreeSet::from([star]),
                None => BTreeSet::new(),
            });
        }
        peeled_greedy(&spec, bids, &instance.budget, &active, cache)
    }

    fn breakpoints(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        agent: usize,
    ) -> Result<BreakpointSet> {
        let spec = isk_view(&instance.valuation, "rand-isk")?;
        if self.takes_singleton_branch(&spec) {
            return Ok(BreakpointSet::complete(vec![instance.budget.clone()]));
        }
        GreedyIsk.breakpoints(instance, bids, agent)
    }
}

/// Peeled greedy **without** the peeling: buys the unbudgeted optimum among
/// affordable agents outright. Its threshold payments can overrun any
/// budget, which is exactly what the audit's negative control needs.
#[derive(Debug, Clone, Copy, Default)]
pub struct BrokenGreedyIsk;

impl Mechanism for BrokenGreedyIsk {
    fn name(&self) -> &'static str {
        "broken-greedy-isk"
    }

    fn run_cached(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        cache: &mut SolveCache,
    ) -> Result<BTreeSet<usize>> {
        let spec = isk_view(&instance.valuation, "broken-greedy-isk")?;
        let active = affordable_agents(instance, bids, true)?;
        let (solution, _) = cache.solve(&spec, &spec.element_values, &active)?;
        Ok(solution)
    }

    fn breakpoints(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        _agent: usize,
    ) -> Result<BreakpointSet> {
        isk_view(&instance.valuation, "broken-greedy-isk")?;
        let _ = bids;
        Ok(BreakpointSet::complete(vec![instance.budget.clone()]))
    }
}
