//! Procurement instances and the shared vocabulary of the toolkit.
//!
//! An [`Instance`] couples a set of agents (each with a private true cost),
//! a hard payment budget, and a public valuation over agent subsets. The
//! buyer's valuation is one of:
//!
//! * weighted coverage — agents are subsets of a weighted universe,
//! * additive — each agent contributes a fixed value,
//! * independence system — agents are elements (edges, vertices,
//!   hyperedges) and `v(S)` is the best independent subset inside `S`.
//!
//! Mechanisms consume declared bids via [`BidProfile`] and produce an
//! [`Outcome`]: winners, exact rational payments, and the attained value.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::indsys::{self, IndependenceSystemSpec};
use crate::rat::Rat;
use crate::valuations::{self, AdditiveSpec, CoverageSpec};
use num::{Signed, Zero};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub id: usize,
    /// Private cost; mechanisms never read it, audits use it as the truthful bid.
    pub true_cost: Rat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValuationSpec {
    Coverage(CoverageSpec),
    Additive(AdditiveSpec),
    IndependenceSystem(IndependenceSystemSpec),
}

impl ValuationSpec {
    /// Number of agents the valuation is defined over.
    pub fn ground_size(&self) -> usize {
        match self {
            ValuationSpec::Coverage(c) => c.subsets.len(),
            ValuationSpec::Additive(a) => a.values.len(),
            ValuationSpec::IndependenceSystem(s) => s.ground_size(),
        }
    }

    /// Value of the singleton `{id}`.
    pub fn singleton_value(&self, id: usize) -> Result<Rat> {
        let mut s = BTreeSet::new();
        s.insert(id);
        evaluate(self, &s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub agents: Vec<Agent>,
    pub budget: Rat,
    pub valuation: ValuationSpec,
}

impl Instance {
    pub fn new(true_costs: Vec<Rat>, budget: Rat, valuation: ValuationSpec) -> Result<Self> {
        let agents = true_costs
            .into_iter()
            .enumerate()
            .map(|(id, true_cost)| Agent { id, true_cost })
            .collect();
        let instance = Instance { agents, budget, valuation };
        instance.validate()?;
        Ok(instance)
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    /// The bid profile in which every agent declares its true cost.
    pub fn truthful_bids(&self) -> BidProfile {
        BidProfile { bids: self.agents.iter().map(|a| a.true_cost.clone()).collect() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.budget.is_positive() {
            return Err(Error::InvalidInstance("budget must be positive".into()));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if a.id != i {
                return Err(Error::InvalidInstance(format!(
                    "agent ids must be contiguous from 0; found {} at position {i}",
                    a.id
                )));
            }
            if a.true_cost.is_negative() {
                return Err(Error::InvalidInstance(format!("agent {i} has negative cost")));
            }
        }
        if self.valuation.ground_size() != self.agents.len() {
            return Err(Error::InvalidInstance(format!(
                "valuation covers {} agents but the instance has {}",
                self.valuation.ground_size(),
                self.agents.len()
            )));
        }
        match &self.valuation {
            ValuationSpec::Coverage(c) => c.validate(),
            ValuationSpec::Additive(a) => a.validate(),
            ValuationSpec::IndependenceSystem(s) => s.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidProfile {
    pub bids: Vec<Rat>,
}

impl BidProfile {
    pub fn new(bids: Vec<Rat>) -> Self {
        BidProfile { bids }
    }

    pub fn check_for(&self, instance: &Instance) -> Result<()> {
        if self.bids.len() != instance.num_agents() {
            return Err(Error::BidCount { expected: instance.num_agents(), got: self.bids.len() });
        }
        Ok(())
    }

    /// Copy of this profile with agent `i`'s bid replaced by `bid`.
    pub fn with_bid(&self, i: usize, bid: Rat) -> BidProfile {
        let mut bids = self.bids.clone();
        bids[i] = bid;
        BidProfile { bids }
    }
}

/// Result of running a mechanism and charging threshold payments.
///
/// Invariants (checked by audits, not by construction): winners form a subset
/// of the agents, every winner's payment is at least its bid, non-winners are
/// paid 0, and `value` equals the valuation of the winner set.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub winners: BTreeSet<usize>,
    pub payments: BTreeMap<usize, Rat>,
    pub value: Rat,
}

impl Outcome {
    pub fn total_payment(&self) -> Rat {
        let mut t = Rat::zero();
        for p in self.payments.values() {
            t += p;
        }
        t
    }
}

/// Evaluates the valuation on an agent subset, exactly.
///
/// For independence systems this is the weight of a maximum-weight independent
/// subset of `s`, computed by exact search (greedy for matroids). Unknown ids
/// are rejected rather than ignored.
pub fn evaluate(valuation: &ValuationSpec, s: &BTreeSet<usize>) -> Result<Rat> {
    let n = valuation.ground_size();
    if let Some(&bad) = s.iter().find(|&&i| i >= n) {
        return Err(Error::UnknownAgent(bad));
    }
    match valuation {
        ValuationSpec::Coverage(c) => valuations::coverage_value(c, s),
        ValuationSpec::Additive(a) => {
            let mut t = Rat::zero();
            for &i in s {
                t += &a.values[i];
            }
            Ok(t)
        }
        ValuationSpec::IndependenceSystem(spec) => {
            let (_, value) = indsys::max_weight_independent(spec, s)?;
            Ok(value)
        }
    }
}

/// `evaluate` over every subset of the ground set, indexed by bitmask.
/// Exhaustive; guarded by `cap` since it is 2^n evaluations.
pub fn value_table(valuation: &ValuationSpec, cap: usize) -> Result<Vec<Rat>> {
    let n = valuation.ground_size();
    if n > cap {
        return Err(Error::CapExceeded { size: n, cap });
    }
    let mut table = Vec::with_capacity(1usize << n);
    for mask in 0u64..(1u64 << n) {
        let s: BTreeSet<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        table.push(evaluate(valuation, &s)?);
    }
    Ok(table)
}

pub fn set_from_mask(mask: u64, n: usize) -> BTreeSet<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

pub fn mask_from_set(s: &BTreeSet<usize>) -> u64 {
    s.iter().fold(0u64, |m, &i| m | 1u64 << i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat, rat_int};

    fn coverage_two_sets() -> Instance {
        // Elements {0,1,2} with unit weights; agent 0 covers {0,1}, agent 1 covers {1,2}.
        let spec = CoverageSpec::new(
            3,
            vec![BTreeSet::from([0, 1]), BTreeSet::from([1, 2])],
            vec![rat_int(1), rat_int(1), rat_int(1)],
        );
        Instance::new(
            vec![rat_int(1), rat_int(1)],
            rat_int(2),
            ValuationSpec::Coverage(spec),
        )
        .unwrap()
    }

    #[test]
    fn coverage_evaluate_counts_each_element_once() {
        let inst = coverage_two_sets();
        assert_eq!(evaluate(&inst.valuation, &BTreeSet::from([0])).unwrap(), rat_int(2));
        assert_eq!(evaluate(&inst.valuation, &BTreeSet::from([0, 1])).unwrap(), rat_int(3));
        assert_eq!(evaluate(&inst.valuation, &BTreeSet::new()).unwrap(), rat_int(0));
    }

    #[test]
    fn matching_evaluate_picks_best_independent_subset() {
        // Triangle: three mutually conflicting edges with values 3, 2, 2.
        let spec = IndependenceSystemSpec::graph_matching(
            3,
            vec![(0, 1), (1, 2), (2, 0)],
            vec![rat_int(3), rat_int(2), rat_int(2)],
        );
        let v = ValuationSpec::IndependenceSystem(spec);
        let all: BTreeSet<usize> = (0..3).collect();
        assert_eq!(evaluate(&v, &all).unwrap(), rat_int(3));
        assert_eq!(evaluate(&v, &BTreeSet::from([1, 2])).unwrap(), rat_int(2));
    }

    #[test]
    fn evaluate_rejects_unknown_ids() {
        let inst = coverage_two_sets();
        let err = evaluate(&inst.valuation, &BTreeSet::from([7])).unwrap_err();
        assert_eq!(err, Error::UnknownAgent(7));
    }

    #[test]
    fn instance_validation_catches_mismatch() {
        let spec = AdditiveSpec::new(vec![rat_int(1), rat_int(2)]);
        let r = Instance::new(vec![rat_int(1)], rat_int(5), ValuationSpec::Additive(spec));
        assert!(r.is_err());
        let spec = AdditiveSpec::new(vec![rat_int(1)]);
        let r = Instance::new(vec![rat_int(1)], rat_int(0), ValuationSpec::Additive(spec));
        assert!(r.is_err());
    }

    #[test]
    fn masks_round_trip() {
        let s = BTreeSet::from([0, 2, 5]);
        assert_eq!(set_from_mask(mask_from_set(&s), 6), s);
    }

    #[test]
    fn with_bid_replaces_one_entry() {
        let p = BidProfile::new(vec![rat_int(1), rat_int(2)]);
        let q = p.with_bid(1, rat(7, 2));
        assert_eq!(q.bids[0], rat_int(1));
        assert_eq!(q.bids[1], rat(7, 2));
        assert_eq!(p.bids[1], rat_int(2));
    }
}
