//! Allocation rules. Each mechanism maps an instance plus a bid profile to a
//! winner set; payments live in [`crate::payments`] and are derived purely
//! from the allocation via bid thresholds, so everything here must be
//! monotone: a winner who lowers its bid (all else fixed) keeps winning.
//!
//! Two families:
//!
//! * `sm`: rules for submodular values (weighted coverage, additive) that
//!   greedily buy marginal value per unit bid against half the budget, with
//!   an exact or LP-based check that may hand the whole market to the best
//!   single seller instead.
//! * `isk`: rules for independence-system values (matchings, matroids, set
//!   packings) that peel expensive sellers off an unbudgeted optimum until
//!   the per-value price fits the budget.

pub mod isk;
pub mod sm;

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::f64::consts::E;

use num::{BigInt, One, Zero};
use rand::RngCore;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use crate::error::{Error, Result};
use crate::indsys::{solve_unbudgeted, IndependenceSystemSpec};
use crate::rat::Rat;
use crate::types::{mask_from_set, set_from_mask, BidProfile, Instance};

pub use isk::{greedy_isk, BrokenGreedyIsk, DetIsk, GreedyIsk, RandIsk};
pub use sm::{greedy_sm, GreedySm, SmExact, SmFrac};

/// Candidate bids at which an agent's win/lose status may flip, used by the
/// threshold-payment scan. When `complete` is true, every flip point of the
/// allocation in that agent's bid is guaranteed to be in `candidates`, so the
/// computed threshold is exact; otherwise the scan refines by bisection and
/// flags the payment as approximate.
#[derive(Debug, Clone)]
pub struct BreakpointSet {
    pub candidates: Vec<Rat>,
    pub complete: bool,
}

impl BreakpointSet {
    pub fn complete(candidates: Vec<Rat>) -> Self {
        BreakpointSet { candidates, complete: true }
    }

    pub fn partial(candidates: Vec<Rat>) -> Self {
        BreakpointSet { candidates, complete: false }
    }
}

/// Memo for the bid-independent unbudgeted solves (`f(S)` on an independence
/// system), keyed by the allowed-agent bitmask. A cache is only meaningful
/// for a single valuation; create one per instance and thread it through
/// repeated runs — threshold scans and audits replay the same sub-markets
/// hundreds of times.
#[derive(Debug, Default)]
pub struct SolveCache {
    unbudgeted: HashMap<u64, (u64, Rat)>,
}

impl SolveCache {
    pub fn new() -> Self {
        SolveCache::default()
    }

    /// `solve_unbudgeted` with memoization. Returns the chosen set and its
    /// value (the solver's factor is a function of `spec` alone, so it is
    /// not stored).
    pub fn solve(
        &mut self,
        spec: &IndependenceSystemSpec,
        values: &[Rat],
        allowed: &BTreeSet<usize>,
    ) -> Result<(BTreeSet<usize>, Rat)> {
        let key = mask_from_set(allowed);
        if let Some((mask, value)) = self.unbudgeted.get(&key) {
            return Ok((set_from_mask(*mask, spec.ground_size()), value.clone()));
        }
        let (set, _rho) = solve_unbudgeted(spec, allowed)?;
        let value: Rat = set.iter().map(|&i| values[i].clone()).sum();
        self.unbudgeted.insert(key, (mask_from_set(&set), value.clone()));
        Ok((set, value))
    }
}

/// An allocation rule. `run` must be deterministic in `(instance, bids)` —
/// the randomized rule fixes its coin from a stored seed — and monotone in
/// each agent's bid, or threshold payments do not exist.
pub trait Mechanism {
    /// Stable identifier, also used by the command-line interface.
    fn name(&self) -> &'static str;

    fn run(&self, instance: &Instance, bids: &BidProfile) -> Result<BTreeSet<usize>> {
        self.run_cached(instance, bids, &mut SolveCache::new())
    }

    /// `run`, sharing a memo across calls with identical valuations.
    fn run_cached(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        cache: &mut SolveCache,
    ) -> Result<BTreeSet<usize>>;

    /// Candidate threshold bids for `agent`, holding the other bids fixed.
    fn breakpoints(
        &self,
        instance: &Instance,
        bids: &BidProfile,
        agent: usize,
    ) -> Result<BreakpointSet>;
}

/// Constants of the submodular rules as functions of the unbudgeted solver's
/// approximation factor `rho >= 1`:
///
/// ```text
/// gamma = sqrt(1 + 4(rho-1)e + 4(rho^2 + 4 rho + 1)e^2)
/// alpha = (1 + 2(rho+1)e + gamma) / (2(e-1))       — single-seller test weight
/// ratio = (2(rho+2)e - 1 + gamma) / (2(e-1))       — overall approximation
/// ```
///
/// At `rho = 1`: `ratio = alpha + 1 ≈ 8.3409`. The fields are IEEE-754
/// doubles; mechanisms that compare against `alpha` freeze its nearest-double
/// value into an exact rational so allocations stay deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SMConstants {
    pub rho: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub ratio: f64,
}

pub fn sm_constants(rho: f64) -> Result<SMConstants> {
    if rho < 1.0 || !rho.is_finite() {
        return Err(Error::InvalidRho(rho));
    }
    let gamma = (1.0 + 4.0 * (rho - 1.0) * E + 4.0 * (rho * rho + 4.0 * rho + 1.0) * E * E).sqrt();
    let alpha = (1.0 + 2.0 * (rho + 1.0) * E + gamma) / (2.0 * (E - 1.0));
    let ratio = (2.0 * (rho + 2.0) * E - 1.0 + gamma) / (2.0 * (E - 1.0));
    Ok(SMConstants { rho, gamma, alpha, ratio })
}

/// Factor by which pipage rounding of the coverage relaxation may fall short
/// of the fractional optimum: `2e/(e-1) ≈ 3.1640`. This is the `rho` the
/// LP-backed coverage rule plugs into [`sm_constants`].
pub fn coverage_rho() -> f64 {
    2.0 * E / (E - 1.0)
}

/// Deterministic coin stream for the randomized rule: `next_unit` draws a
/// uniform dyadic rational `k / 2^64` in `[0, 1)`, exactly representable, so
/// branch comparisons are exact.
pub struct CoinSource {
    rng: ChaCha8Rng,
}

impl CoinSource {
    pub fn new(seed: u64) -> Self {
        CoinSource { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn next_unit(&mut self) -> Rat {
        let k = self.rng.next_u64();
        Rat::new(BigInt::from(k), BigInt::one() << 64u32)
    }
}

/// Agents allowed to participate at all: bid within budget and, when
/// `require_value` is set, a strictly positive singleton value.
pub(crate) fn affordable_agents(
    instance: &Instance,
    bids: &BidProfile,
    require_value: bool,
) -> Result<BTreeSet<usize>> {
    bids.check_for(instance)?;
    let mut active = BTreeSet::new();
    for i in 0..instance.num_agents() {
        if bids.bids[i] > instance.budget {
            continue;
        }
        if require_value && instance.valuation.singleton_value(i)?.is_zero() {
            continue;
        }
        active.insert(i);
    }
    Ok(active)
}

/// Highest-singleton-value agent among `active` (ties to the lowest id).
pub(crate) fn best_singleton(
    instance: &Instance,
    active: &BTreeSet<usize>,
) -> Result<Option<(usize, Rat)>> {
    let mut best: Option<(usize, Rat)> = None;
    for &i in active {
        let v = instance.valuation.singleton_value(i)?;
        best = match best {
            None => Some((i, v)),
            Some((j, w)) => {
                if v > w {
                    Some((i, v))
                } else {
                    Some((j, w))
                }
            }
        };
    }
    Ok(best)
}
