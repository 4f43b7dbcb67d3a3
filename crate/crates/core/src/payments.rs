//! Threshold payments and truthfulness audits.
//!
//! Every rule in [`crate::mechanisms`] is monotone: a winner who lowers its
//! bid keeps winning. The unique truthful payment for such a rule pays each
//! winner its *threshold* — the supremum bid at which it would still win,
//! all other bids held fixed. This module computes that threshold from the
//! allocation alone:
//!
//! 1. collect the mechanism's breakpoint candidates for the agent, plus
//!    `{0, own bid, budget}`, clipped to `[0, B]`;
//! 2. re-run the allocation at each candidate (sorted ascending) and verify
//!    the win pattern is a prefix — anything else is a hard
//!    [`Error::NonMonotone`];
//! 3. let `t*` be the largest winning candidate and `t'` the next candidate.
//!    When the candidate set is complete, the allocation is constant on
//!    `(t*, t')`, so one midpoint probe decides whether the supremum is `t'`
//!    (open — the winner cannot actually bid it) or `t*` (attained). When it
//!    is incomplete, bisection narrows `[t*, t']` to a relative width of
//!    `2^-60` and the winning lower end is paid, flagged inexact.
//!
//! The audit replays a mechanism against its own declared guarantees on one
//! instance: allocation monotonicity across a bid grid, individual
//! rationality, the budget covering the payment total, deviations never
//! beating truthful utility, and the peeled greedy's per-winner payment
//! bound. It reports structured pass/fail evidence instead of panicking, so
//! a deliberately broken rule can demonstrate a red check.

use std::collections::BTreeMap;

use num::{Signed, Zero};

use crate::error::{Error, Result};
use crate::mechanisms::{Mechanism, SolveCache};
use crate::rat::{format_rat, pow2_inv, rat_int, Rat};
use crate::types::{evaluate, BidProfile, Instance, Outcome};

/// A computed threshold payment. `exact` is false when the amount came from
/// bisection rather than a certified breakpoint; `attained` says whether the
/// winner would still win bidding exactly `amount` (as opposed to only
/// strictly below it).
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdDetail {
    pub amount: Rat,
    pub exact: bool,
    pub attained: bool,
}

/// Threshold payment for `agent`, which must win under `bids`.
pub fn threshold_payment<M: Mechanism + ?Sized>(
    mechanism: &M,
    instance: &Instance,
    bids: &BidProfile,
    agent: usize,
) -> Result<Rat> {
    let mut cache = SolveCache::new();
    Ok(threshold_payment_detailed(mechanism, instance, bids, agent, &mut cache)?.amount)
}

pub fn threshold_payment_detailed<M: Mechanism + ?Sized>(
    mechanism: &M,
    instance: &Instance,
    bids: &BidProfile,
    agent: usize,
    cache: &mut SolveCache,
) -> Result<ThresholdDetail> {
    bids.check_for(instance)?;
    if agent >= instance.num_agents() {
        return Err(Error::UnknownAgent(agent));
    }
    let wins = |cache: &mut SolveCache, t: &Rat| -> Result<bool> {
        let moved = bids.with_bid(agent, t.clone());
        Ok(mechanism.run_cached(instance, &moved, cache)?.contains(&agent))
    };
    if !wins(cache, &bids.bids[agent])? {
        return Err(Error::NotAWinner(agent));
    }
    let breakpoints = mechanism.breakpoints(instance, bids, agent)?;
    let mut candidates = breakpoints.candidates;
    candidates.push(Rat::zero());
    candidates.push(bids.bids[agent].clone());
    candidates.push(instance.budget.clone());
    candidates.retain(|t| !t.is_negative() && *t <= instance.budget);
    candidates.sort();
    candidates.dedup();

    let mut statuses = Vec::with_capacity(candidates.len());
    for t in &candidates {
        statuses.push(wins(cache, t)?);
    }
    let mut first_loss: Option<usize> = None;
    for (k, &won) in statuses.iter().enumerate() {
        match (won, first_loss) {
            (false, None) => first_loss = Some(k),
            (true, Some(f)) => {
                return Err(Error::NonMonotone {
                    agent,
                    low: Box::new(candidates[f].clone()),
                    high: Box::new(candidates[k].clone()),
                });
            }
            _ => {}
        }
    }
    let top = statuses.iter().rposition(|&w| w).expect("the agent wins at its own bid");
    let t_star = candidates[top].clone();
    let Some(t_prime) = candidates.get(top + 1) else {
        // Wins at the budget itself; every rule drops bids above it.
        return Ok(ThresholdDetail { amount: t_star, exact: true, attained: true });
    };
    if breakpoints.complete {
        let mid = (&t_star + t_prime) / rat_int(2);
        if wins(cache, &mid)? {
            // Winning throughout (t*, t'): the supremum is t', never attained.
            Ok(ThresholdDetail { amount: t_prime.clone(), exact: true, attained: false })
        } else {
            Ok(ThresholdDetail { amount: t_star, exact: true, attained: true })
        }
    } else {
        let tolerance = &instance.budget * pow2_inv(60);
        let mut lo = t_star;
        let mut hi = t_prime.clone();
        while &hi - &lo > tolerance {
            let mid = (&lo + &hi) / rat_int(2);
            if wins(cache, &mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // `lo` is a winning bid within tolerance of the supremum; paying it
        // keeps individual rationality intact.
        Ok(ThresholdDetail { amount: lo, exact: false, attained: true })
    }
}

/// Thresholds for every winner under `bids`.
pub fn payment_details<M: Mechanism + ?Sized>(
    mechanism: &M,
    instance: &Instance,
    bids: &BidProfile,
    cache: &mut SolveCache,
) -> Result<BTreeMap<usize, ThresholdDetail>> {
    let winners = mechanism.run_cached(instance, bids, cache)?;
    let mut details = BTreeMap::new();
    for &w in &winners {
        details.insert(w, threshold_payment_detailed(mechanism, instance, bids, w, cache)?);
    }
    Ok(details)
}

/// Full outcome: winners, their threshold payments, zero for everyone else,
/// and the exact value of the winning set.
pub fn run_with_payments<M: Mechanism + ?Sized>(
    mechanism: &M,
    instance: &Instance,
    bids: &BidProfile,
) -> Result<Outcome> {
    let mut cache = SolveCache::new();
    run_with_payments_cached(mechanism, instance, bids, &mut cache)
}

pub fn run_with_payments_cached<M: Mechanism + ?Sized>(
    mechanism: &M,
    instance: &Instance,
    bids: &BidProfile,
    cache: &mut SolveCache,
) -> Result<Outcome> {
    let winners = mechanism.run_cached(instance, bids, cache)?;
    let details = payment_details(mechanism, instance, bids, cache)?;
    let mut payments = BTreeMap::new();
    for i in 0..instance.num_agents() {
        let amount = details.get(&i).map(|d| d.amount.clone()).unwrap_or_else(Rat::zero);
        payments.insert(i, amount);
    }
    let value = evaluate(&instance.valuation, &winners)?;
    Ok(Outcome { winners, payments, value })
}

/// One audited property with optional failure evidence.
#[derive(Debug, Clone)]
pub struct AuditCheck {
    pub property: String,
    pub passed: bool,
    pub counterexample: Option<String>,
}

/// Result of auditing one mechanism on one instance at truthful bids.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub mechanism: String,
    /// FNV-1a hash of the canonical outcome line, for cheap change tracking.
    pub digest: u64,
    pub checks: Vec<AuditCheck>,
    pub payment_total: Rat,
    pub budget: Rat,
}

impl AuditReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_properties(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.property.as_str()).collect()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Bid grid probed for agent `i`: evenly spaced budget fractions, the
/// value-scaled crossings against every other agent's bid, the agent's own
/// bid, and the budget, clipped to `[0, B]`.
fn audit_grid(
    instance: &Instance,
    bids: &BidProfile,
    agent: usize,
    grid_points: usize,
) -> Result<Vec<Rat>> {
    let g = grid_points.max(2);
    let mut grid = Vec::new();
    for k in 0..g {
        grid.push(&instance.budget * rat_int(k as i64) / rat_int((g - 1) as i64));
    }
    let own_value = instance.valuation.singleton_value(agent)?;
    for j in 0..instance.num_agents() {
        if j == agent {
            continue;
        }
        let other_value = instance.valuation.singleton_value(j)?;
        if !other_value.is_zero() {
            grid.push(&bids.bids[j] * &own_value / other_value);
        }
    }
    grid.push(bids.bids[agent].clone());
    grid.push(instance.budget.clone());
    grid.retain(|t| !t.is_negative() && *t <= instance.budget);
    grid.sort();
    grid.dedup();
    Ok(grid)
}

/// Audits `mechanism` on `instance` at truthful bids. `grid_points` controls
/// the density of the evenly spaced part of the probe grid (see
/// [`audit_grid`]); the declared bids double as true costs throughout.
pub fn audit<M: Mechanism + ?Sized>(
    mechanism: &M,
    instance: &Instance,
    grid_points: usize,
) -> Result<AuditReport> {
    let bids = instance.truthful_bids();
    let cache = &mut SolveCache::new();
    let winners = mechanism.run_cached(instance, &bids, cache)?;
    let details = payment_details(mechanism, instance, &bids, cache)?;
    let value = evaluate(&instance.valuation, &winners)?;
    let any_inexact = details.values().any(|d| !d.exact);
    let n = instance.num_agents();

    let mut checks = Vec::new();

    // Allocation monotonicity across each agent's probe grid, recording the
    // win flags for reuse by the dominance check.
    let mut grids: Vec<Vec<(Rat, bool)>> = Vec::with_capacity(n);
    {
        let mut passed = true;
        let mut evidence = None;
        for agent in 0..n {
            let grid = audit_grid(instance, &bids, agent, grid_points)?;
            let mut flagged = Vec::with_capacity(grid.len());
            let mut lost_at: Option<&Rat> = None;
            for t in &grid {
                let moved = bids.with_bid(agent, t.clone());
                let won = mechanism.run_cached(instance, &moved, cache)?.contains(&agent);
                flagged.push((t.clone(), won));
                if won {
                    if let Some(low) = lost_at {
                        if passed {
                            passed = false;
                            evidence = Some(format!(
                                "agent {agent} loses at bid {} but wins at bid {}",
                                format_rat(low),
                                format_rat(t)
                            ));
                        }
                    }
                } else if lost_at.is_none() {
                    lost_at = Some(t);
                }
            }
            grids.push(flagged);
        }
        checks.push(AuditCheck {
            property: "monotone-allocation".into(),
            passed,
            counterexample: evidence,
        });
    }

    // Individual rationality: each winner's payment covers its declared cost.
    {
        let violation = details.iter().find(|(w, d)| d.amount < bids.bids[**w]);
        checks.push(AuditCheck {
            property: "individual-rationality".into(),
            passed: violation.is_none(),
            counterexample: violation.map(|(w, d)| {
                format!(
                    "agent {w} is paid {} for a bid of {}",
                    format_rat(&d.amount),
                    format_rat(&bids.bids[*w])
                )
            }),
        });
    }

    // Budget feasibility of the payment total, with a documented slack when
    // any payment came from bisection instead of a certified breakpoint.
    let payment_total: Rat =
        details.values().map(|d| d.amount.clone()).fold(Rat::zero(), |a, b| a + b);
    {
        let slack = if any_inexact {
            rat_int(n as i64) * &instance.budget * pow2_inv(60)
        } else {
            Rat::zero()
        };
        let limit = &instance.budget + &slack;
        let passed = payment_total <= limit;
        checks.push(AuditCheck {
            property: "budget-feasibility".into(),
            passed,
            counterexample: (!passed).then(|| {
                format!(
                    "payments total {} against a budget of {}",
                    format_rat(&payment_total),
                    format_rat(&instance.budget)
                )
            }),
        });
    }

    // Truthful dominance: no probed deviation beats truthful utility. For a
    // truthful winner, any winning deviation must keep the same threshold
    // payment; for a truthful loser, any winning deviation must pay at most
    // its cost. Up to three winning deviations per agent are verified.
    {
        let slack = if any_inexact { &instance.budget * pow2_inv(59) } else { Rat::zero() };
        let mut passed = true;
        let mut evidence = None;
        'agents: for (agent, grid) in grids.iter().enumerate() {
            let winning: Vec<&Rat> = grid
                .iter()
                .filter(|(t, won)| *won && *t != bids.bids[agent])
                .map(|(t, _)| t)
                .collect();
            if winning.is_empty() {
                continue;
            }
            let probes = [
                winning[0],
                winning[winning.len() / 2],
                winning[winning.len() - 1],
            ];
            let mut seen: Vec<&Rat> = Vec::new();
            for t in probes {
                if seen.contains(&t) {
                    continue;
                }
                seen.push(t);
                let moved = bids.with_bid(agent, t.clone());
                let deviated =
                    threshold_payment_detailed(mechanism, instance, &moved, agent, cache)?;
                let inexact_pair = !deviated.exact || any_inexact;
                let allowance = if inexact_pair { slack.clone() } else { Rat::zero() };
                if let Some(truthful) = details.get(&agent) {
                    let drift = if deviated.amount >= truthful.amount {
                        &deviated.amount - &truthful.amount
                    } else {
                        &truthful.amount - &deviated.amount
                    };
                    if drift > allowance {
                        passed = false;
                        evidence = Some(format!(
                            "winner {agent} is paid {} truthfully but {} when bidding {}",
                            format_rat(&truthful.amount),
                            format_rat(&deviated.amount),
                            format_rat(t)
                        ));
                        break 'agents;
                    }
                } else if deviated.amount > &bids.bids[agent] + &allowance {
                    passed = false;
                    evidence = Some(format!(
                        "loser {agent} with cost {} would gain {} by bidding {}",
                        format_rat(&bids.bids[agent]),
                        format_rat(&(&deviated.amount - &bids.bids[agent])),
                        format_rat(t)
                    ));
                    break 'agents;
                }
            }
        }
        checks.push(AuditCheck {
            property: "truthful-dominance".into(),
            passed,
            counterexample: evidence,
        });
    }

    // The peeled greedy additionally promises, per winner i, that
    // payment_i * v(M) ≤ v_i * B.
    if mechanism.name() == "greedy-isk" {
        let mut violation = None;
        for (&w, d) in &details {
            let own_value = instance.valuation.singleton_value(w)?;
            if &d.amount * &value > own_value * &instance.budget {
                violation = Some(format!(
                    "winner {w} paid {} against set value {}",
                    format_rat(&d.amount),
                    format_rat(&value)
                ));
                break;
            }
        }
        checks.push(AuditCheck {
            property: "peeled-greedy-payment-bound".into(),
            passed: violation.is_none(),
            counterexample: violation,
        });
    }

    let canonical = {
        let winner_list =
            winners.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",");
        let payment_list = details
            .iter()
            .map(|(w, d)| format!("{w}:{}", format_rat(&d.amount)))
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "mechanism={};budget={};winners={};payments={};value={}",
            mechanism.name(),
            format_rat(&instance.budget),
            winner_list,
            payment_list,
            format_rat(&value)
        )
    };

    Ok(AuditReport {
        mechanism: mechanism.name().to_string(),
        digest: fnv1a(canonical.as_bytes()),
        checks,
        payment_total,
        budget: instance.budget.clone(),
    })
}
