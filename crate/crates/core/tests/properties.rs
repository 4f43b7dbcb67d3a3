//! Randomized structural properties of the toolkit, checked with proptest.
//!
//! Each block states an invariant that must hold for *every* instance the
//! generator can produce (or every raw input in the stated range), not just
//! the frozen fixtures in the unit tests: valuation monotonicity, downward
//! closure, solver exactness, rounding guarantees, and the bid-independence
//! of threshold payments.

use std::collections::BTreeSet;

use num::{One, Signed, Zero};
use proptest::prelude::*;

use bfmech::coverage_lp::{linear_bound, pipage_round, potential, solve_and_round, solve_coverage_lp};
use bfmech::gen::{generate, Family, GenConfig};
use bfmech::indsys::{greedy_k_set_packing, is_independent, solve_unbudgeted, IndependenceSystemSpec};
use bfmech::mechanisms::{DetIsk, GreedyIsk, GreedySm, Mechanism, RandIsk, SmExact, SmFrac, SolveCache};
use bfmech::oracle::brute_force_opt;
use bfmech::payments::{audit, threshold_payment_detailed};
use bfmech::rat::{e_lower, rat};
use bfmech::types::set_from_mask;
use bfmech::valuations::CoverageSpec;
use bfmech::{evaluate, rat_int, Instance, Rat, ValuationSpec};

fn family_from_index(ix: usize) -> Family {
    Family::ALL[ix % Family::ALL.len()]
}

fn instance(family: Family, agents: usize, seed: u64) -> Instance {
    generate(&GenConfig::new(family, agents, seed)).expect("generator stays in range")
}

/// Exhaustive maximum-value independent subset, used as ground truth against
/// the production solvers (which must never see this code path).
fn enumeration_best(spec: &IndependenceSystemSpec) -> Rat {
    let n = spec.ground_size();
    let mut best = Rat::zero();
    for mask in 0u64..(1 << n) {
        let s = set_from_mask(mask, n);
        if is_independent(spec, &s).unwrap() {
            let total: Rat = s.iter().map(|&e| spec.element_values[e].clone()).sum();
            if total > best {
                best = total;
            }
        }
    }
    best
}

fn unit_interval_rat() -> impl Strategy<Value = Rat> {
    prop_oneof![Just(1i64), Just(3), Just(7), Just(10)]
        .prop_flat_map(|den| (0..=den).prop_map(move |num| rat(num, den)))
}

fn coverage_spec_strategy() -> impl Strategy<Value = CoverageSpec> {
    (1usize..=6, 1usize..=8).prop_flat_map(|(sets, elements)| {
        (
            proptest::collection::vec(
                proptest::collection::btree_set(0..elements, 0..=elements.min(4)),
                sets,
            ),
            proptest::collection::vec(
                (1i64..=12, prop_oneof![Just(1i64), Just(2), Just(4), Just(5)]),
                elements,
            ),
        )
            .prop_map(move |(subsets, weights)| {
                CoverageSpec::new(
                    elements,
                    subsets,
                    weights.into_iter().map(|(n, d)| rat(n, d)).collect(),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// Every supported valuation is nondecreasing: adding agents never
    /// lowers the value.
    #[test]
    fn value_is_monotone_nondecreasing(
        fam_ix in 0usize..6,
        agents in 1usize..=7,
        seed in 0u64..1_000_000,
        a in proptest::bits::u64::masked(0x7f),
        b in proptest::bits::u64::masked(0x7f),
    ) {
        let inst = instance(family_from_index(fam_ix), agents, seed);
        let n = inst.num_agents();
        let small = set_from_mask(a & b, n);
        let large = set_from_mask(a | b, n);
        let v_small = evaluate(&inst.valuation, &small).unwrap();
        let v_large = evaluate(&inst.valuation, &large).unwrap();
        prop_assert!(v_small <= v_large);
    }

    /// Independence families are downward closed: dropping any element of an
    /// independent set keeps it independent.
    #[test]
    fn independence_is_downward_closed(
        fam_ix in 1usize..5, // the four structured families
        agents in 1usize..=7,
        seed in 0u64..1_000_000,
        mask in proptest::bits::u64::masked(0x7f),
    ) {
        let inst = instance(family_from_index(fam_ix), agents, seed);
        let spec = match &inst.valuation {
            ValuationSpec::IndependenceSystem(s) => s,
            other => panic!("expected an independence system, got {other:?}"),
        };
        let s = set_from_mask(mask, inst.num_agents());
        if is_independent(spec, &s).unwrap() {
            for &e in &s {
                let mut t = s.clone();
                t.remove(&e);
                prop_assert!(is_independent(spec, &t).unwrap());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// On the families whose default solver claims factor 1 (matchings,
    /// forests, partition matroids), its value matches subset enumeration.
    #[test]
    fn exact_solvers_match_subset_enumeration(
        fam_ix in 1usize..4,
        agents in 1usize..=7,
        seed in 0u64..1_000_000,
    ) {
        let inst = instance(family_from_index(fam_ix), agents, seed);
        let spec = match &inst.valuation {
            ValuationSpec::IndependenceSystem(s) => s,
            other => panic!("expected an independence system, got {other:?}"),
        };
        let all: BTreeSet<usize> = (0..inst.num_agents()).collect();
        let (set, rho) = solve_unbudgeted(spec, &all).unwrap();
        prop_assert_eq!(rho, rat_int(1));
        prop_assert!(is_independent(spec, &set).unwrap());
        let solver_value: Rat = set.iter().map(|&e| spec.element_values[e].clone()).sum();
        prop_assert_eq!(solver_value, enumeration_best(spec));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The greedy k-set-packing output is independent and within a factor k
    /// of the best packing.
    #[test]
    fn kd_greedy_is_within_factor_k(
        agents in 1usize..=7,
        seed in 0u64..1_000_000,
    ) {
        let inst = instance(Family::KdMatching, agents, seed);
        let spec = match &inst.valuation {
            ValuationSpec::IndependenceSystem(s) => s,
            other => panic!("expected an independence system, got {other:?}"),
        };
        let all: BTreeSet<usize> = (0..inst.num_agents()).collect();
        let greedy = greedy_k_set_packing(spec, &all).unwrap();
        prop_assert!(is_independent(spec, &greedy).unwrap());
        let greedy_value: Rat = greedy.iter().map(|&e| spec.element_values[e].clone()).sum();
        let k = spec.default_rho();
        prop_assert!(&greedy_value * &k >= enumeration_best(spec));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The multilinear-style potential F dominates (1 - 1/e) times the
    /// clipped linear bound L at every point of the unit cube, checked with
    /// the conservative rational lower bracket of e.
    #[test]
    fn potential_dominates_scaled_linear_bound(
        spec in coverage_spec_strategy(),
        coords in proptest::collection::vec(unit_interval_rat(), 6),
    ) {
        let x: Vec<Rat> = coords.into_iter().take(spec.subsets.len()).collect();
        prop_assume!(x.len() == spec.subsets.len());
        let f = potential(&spec, &x).unwrap();
        let l = linear_bound(&spec, &x).unwrap();
        let e = e_lower();
        // F >= (1 - 1/e) L, cleared of denominators: e*F >= (e - 1) L.
        prop_assert!(&e * &f >= (&e - Rat::one()) * &l);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Pipage rounding keeps the cost of the fractional point, never lowers
    /// the potential, and leaves at most one fractional coordinate.
    #[test]
    fn pipage_preserves_cost_and_potential(
        agents in 1usize..=7,
        seed in 0u64..1_000_000,
    ) {
        let inst = instance(Family::Coverage, agents, seed);
        let spec = match &inst.valuation {
            ValuationSpec::Coverage(s) => s,
            other => panic!("expected coverage, got {other:?}"),
        };
        let bids: Vec<Rat> = inst.agents.iter().map(|a| a.true_cost.clone()).collect();
        let sol = solve_coverage_lp(spec, &bids, &inst.budget).unwrap();
        prop_assert!(sol.exact);
        let rounded = pipage_round(spec, &bids, &sol.x).unwrap();

        let cost = |x: &[Rat]| -> Rat { x.iter().zip(&bids).map(|(xi, c)| xi * c).sum() };
        prop_assert_eq!(cost(&rounded), cost(&sol.x));
        prop_assert!(potential(spec, &rounded).unwrap() >= potential(spec, &sol.x).unwrap());

        let fractional = rounded
            .iter()
            .filter(|v| !v.is_zero() && **v != Rat::one())
            .count();
        prop_assert!(fractional <= 1);
        for v in &rounded {
            prop_assert!(!v.is_negative() && *v <= Rat::one());
        }
    }

    /// The fractional relaxation never scores below the best integral
    /// purchase, and the rounded set respects the budget.
    #[test]
    fn lp_objective_bounds_integral_optimum(
        agents in 1usize..=7,
        seed in 0u64..1_000_000,
    ) {
        let inst = instance(Family::Coverage, agents, seed);
        let spec = match &inst.valuation {
            ValuationSpec::Coverage(s) => s,
            other => panic!("expected coverage, got {other:?}"),
        };
        let bids: Vec<Rat> = inst.agents.iter().map(|a| a.true_cost.clone()).collect();
        let (_, opt) = brute_force_opt(&inst.valuation, &bids, &inst.budget).unwrap();
        let (winners, _, sol) = solve_and_round(spec, &bids, &inst.budget).unwrap();
        prop_assert!(sol.objective >= opt);
        let spent: Rat = winners.iter().map(|&i| bids[i].clone()).sum();
        prop_assert!(spent <= inst.budget);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// A winner's threshold payment is a function of the *others'* bids: the
    /// winner can move its own bid anywhere below the threshold without
    /// changing what it is paid. Re-running the allocation is also stable.
    #[test]
    fn threshold_is_independent_of_winning_bid(
        fam_ix in 0usize..5,
        agents in 2usize..=6,
        seed in 0u64..1_000_000,
    ) {
        // The knapsack-style mechanisms accept additive and independence
        // families; coverage is excluded.
        let family = [
            Family::Matching,
            Family::Forest,
            Family::PartitionMatroid,
            Family::KdMatching,
            Family::Knapsack,
        ][fam_ix];
        let inst = instance(family, agents, seed);
        let bids = inst.truthful_bids();

        for mech in [&GreedyIsk as &dyn Mechanism, &DetIsk] {
            let mut cache = SolveCache::new();
            let winners = mech.run_cached(&inst, &bids, &mut cache).unwrap();
            prop_assert_eq!(mech.run(&inst, &bids).unwrap(), winners.clone());
            for &w in winners.iter().take(2) {
                let d1 = threshold_payment_detailed(mech, &inst, &bids, w, &mut cache).unwrap();
                prop_assert!(d1.exact);
                prop_assert!(d1.amount >= bids.bids[w]);
                let lowered = bids.with_bid(w, &bids.bids[w] / rat_int(2));
                let d2 = threshold_payment_detailed(mech, &inst, &lowered, w, &mut cache).unwrap();
                prop_assert_eq!(&d2.amount, &d1.amount);
                prop_assert!(d2.exact);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// Full audits (monotonicity, individual rationality, budget, dominance)
    /// pass on random instances for every mechanism that supports the family.
    #[test]
    fn audits_pass_on_random_instances(
        fam_ix in 0usize..6,
        agents in 2usize..=6,
        seed in 0u64..1_000_000,
    ) {
        let family = family_from_index(fam_ix);
        let inst = instance(family, agents, seed);
        let mechs: Vec<Box<dyn Mechanism>> = match family {
            Family::Knapsack => vec![
                Box::new(GreedySm),
                Box::new(SmExact),
                Box::new(GreedyIsk),
                Box::new(DetIsk),
            ],
            Family::Coverage => vec![Box::new(GreedySm), Box::new(SmExact), Box::new(SmFrac)],
            _ => vec![Box::new(GreedyIsk), Box::new(DetIsk), Box::new(RandIsk::new(7))],
        };
        for mech in &mechs {
            let report = audit(mech.as_ref(), &inst, 3).unwrap();
            prop_assert!(
                report.all_passed(),
                "{} failed {:?} on family {} seed {}",
                mech.name(),
                report.failed_properties(),
                family,
                seed
            );
        }
    }
}
