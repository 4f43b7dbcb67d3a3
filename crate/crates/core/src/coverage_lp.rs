//! LP relaxation of budgeted maximum weighted coverage, plus pipage rounding.
//!
//! The integer program: pick sets `x_i ∈ {0,1}` subject to the budget
//! `Σ c_i x_i ≤ B`, and count each element `j` as covered (`z_j = 1`) only if
//! some chosen set contains it. The relaxation lets both `x` and `z` range
//! over `[0,1]`:
//!
//! ```text
//! maximize   Σ_j w_j z_j
//! subject to z_j ≤ Σ_{i : j ∈ S_i} x_i     for every element j
//!            Σ_i c_i x_i ≤ B
//!            0 ≤ x_i ≤ 1,  0 ≤ z_j ≤ 1
//! ```
//!
//! Sets priced above the budget are dropped before solving: they can never be
//! picked integrally, and leaving them in would let the relaxation buy useless
//! fractions of them.
//!
//! The solver is a dense tableau simplex with Bland's rule. When the variable
//! count `m + n` is at most [`EXACT_LP_LIMIT`], it pivots on exact rationals
//! and the reported objective is exact; above that it switches to doubles
//! with a `1e-9` feasibility tolerance and the result is flagged inexact.
//!
//! Rounding follows the pipage scheme: the multilinear coverage potential `F`
//! dominates `(1 - 1/e)` times the LP objective on the LP's own optimum, and
//! moving budget-balanced probability mass between two fractional
//! coordinates, always to an endpoint of the feasible move interval, never
//! decreases `F`. After at most `m - 1` moves one fractional coordinate is
//! left; it resolves by comparing rounding down against the singleton.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::rat::{rat_from_f64, rat_to_f64, Rat};
use crate::valuations::{coverage_value, CoverageSpec};
use num::{One, Signed, Zero};

/// Largest `m + n` solved on exact rationals; larger programs use doubles.
pub const EXACT_LP_LIMIT: usize = 64;

const FLOAT_TOL: f64 = 1e-9;

/// A built relaxation, ready to solve. `covering_sets[j]` lists the included
/// sets containing element `j` (the column pattern of the coverage row).
#[derive(Debug, Clone)]
pub struct CoverageLp {
    pub num_sets: usize,
    pub num_elements: usize,
    pub covering_sets: Vec<Vec<usize>>,
    pub costs: Vec<Rat>,
    pub budget: Rat,
    /// Sets that survived the `cost ≤ budget` filter, in ascending id order.
    pub included: Vec<usize>,
}

/// An optimal fractional solution. `x` and `z` are full-length (excluded sets
/// sit at 0). `exact` records whether the rational pivot path was used.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalSolution {
    pub x: Vec<Rat>,
    pub z: Vec<Rat>,
    pub objective: Rat,
    pub exact: bool,
}

impl CoverageLp {
    pub fn build(
        spec: &CoverageSpec,
        bids: &[Rat],
        budget: &Rat,
        excluded: &BTreeSet<usize>,
    ) -> Result<CoverageLp> {
        let m = spec.subsets.len();
        if bids.len() != m {
            return Err(Error::BidCount { expected: m, got: bids.len() });
        }
        if !budget.is_positive() {
            return Err(Error::InvalidInstance("budget must be positive".into()));
        }
        let included: Vec<usize> =
            (0..m).filter(|i| !excluded.contains(i) && bids[*i] <= *budget).collect();
        let mut covering_sets = vec![Vec::new(); spec.num_elements];
        for &i in &included {
            for &e in &spec.subsets[i] {
                covering_sets[e].push(i);
            }
        }
        Ok(CoverageLp {
            num_sets: m,
            num_elements: spec.num_elements,
            covering_sets,
            costs: bids.to_vec(),
            budget: budget.clone(),
            included,
        })
    }

    /// Column index of set `i` inside the reduced variable space.
    fn col_of(&self) -> Vec<Option<usize>> {
        let mut col = vec![None; self.num_sets];
        for (c, &i) in self.included.iter().enumerate() {
            col[i] = Some(c);
        }
        col
    }

    pub fn solve(&self, weights: &[Rat]) -> Result<FractionalSolution> {
        let mi = self.included.len();
        let n = self.num_elements;
        if weights.len() != n {
            return Err(Error::InvalidInstance(format!(
                "{} weights for {n} elements",
                weights.len()
            )));
        }
        let vars = mi + n;
        let exact = vars <= EXACT_LP_LIMIT;
        let (y, _) = if exact {
            let (rows, rhs, mut obj) = self.assemble_with(weights, |r| r.clone());
            let y = simplex(rows, rhs, std::mem::take(&mut obj))?;
            (y, true)
        } else {
            let (rows, rhs, mut obj) = self.assemble_with(weights, rat_to_f64);
            let y = simplex(rows, rhs, std::mem::take(&mut obj))?;
            (y.into_iter().map(clamp_unit_from_f64).collect::<Vec<Rat>>(), false)
        };
        let mut x = vec![Rat::zero(); self.num_sets];
        for (c, &i) in self.included.iter().enumerate() {
            x[i] = y[c].clone();
        }
        let z: Vec<Rat> = (0..n).map(|j| y[mi + j].clone()).collect();
        let mut objective = Rat::zero();
        for j in 0..n {
            objective += &weights[j] * &z[j];
        }
        Ok(FractionalSolution { x, z, objective, exact })
    }

    fn assemble_with<T: Scalar>(
        &self,
        weights: &[Rat],
        lift: impl Fn(&Rat) -> T + Copy,
    ) -> (Vec<Vec<T>>, Vec<T>, Vec<T>) {
        let mi = self.included.len();
        let n = self.num_elements;
        let vars = mi + n;
        let col = self.col_of();
        let mut rows: Vec<Vec<T>> = Vec::new();
        let mut rhs: Vec<T> = Vec::new();
        for j in 0..n {
            let mut row = vec![T::zero(); vars];
            row[mi + j] = T::one();
            for &i in &self.covering_sets[j] {
                let c = col[i].expect("covering set is included");
                row[c] = T::zero() - T::one();
            }
            rows.push(row);
            rhs.push(T::zero());
        }
        let mut budget_row = vec![T::zero(); vars];
        for (c, &i) in self.included.iter().enumerate() {
            budget_row[c] = lift(&self.costs[i]);
        }
        rows.push(budget_row);
        rhs.push(lift(&self.budget));
        for v in 0..vars {
            let mut row = vec![T::zero(); vars];
            row[v] = T::one();
            rows.push(row);
            rhs.push(T::one());
        }
        let mut objective = vec![T::zero(); vars];
        for j in 0..n {
            objective[mi + j] = lift(&weights[j]);
        }
        (rows, rhs, objective)
    }
}

/// Solves the relaxation for a [`CoverageSpec`] under the given bids and
/// budget.
pub fn solve_coverage_lp(
    spec: &CoverageSpec,
    bids: &[Rat],
    budget: &Rat,
) -> Result<FractionalSolution> {
    solve_coverage_lp_excluding(spec, bids, budget, &BTreeSet::new())
}

/// Same, with some sets removed from the market entirely (used to benchmark
/// the market without its most valuable set).
pub fn solve_coverage_lp_excluding(
    spec: &CoverageSpec,
    bids: &[Rat],
    budget: &Rat,
    excluded: &BTreeSet<usize>,
) -> Result<FractionalSolution> {
    let lp = CoverageLp::build(spec, bids, budget, excluded)?;
    lp.solve(&spec.weights)
}

/// Multilinear coverage potential:
/// `F(x) = Σ_j w_j (1 - Π_{i : j ∈ S_i} (1 - x_i))` — the expected covered
/// weight when each set is drawn independently with probability `x_i`.
pub fn potential(spec: &CoverageSpec, x: &[Rat]) -> Result<Rat> {
    check_point(spec, x)?;
    let mut total = Rat::zero();
    for j in 0..spec.num_elements {
        let mut miss = Rat::one();
        for (i, s) in spec.subsets.iter().enumerate() {
            if s.contains(&j) {
                miss *= Rat::one() - &x[i];
            }
        }
        total += &spec.weights[j] * (Rat::one() - miss);
    }
    Ok(total)
}

/// Concave upper envelope `L(x) = Σ_j w_j min(1, Σ_{i : j ∈ S_i} x_i)`.
/// On any box point, `F(x) ≥ (1 - 1/e) L(x)`, which is what links the LP
/// objective to the rounded set's value.
pub fn linear_bound(spec: &CoverageSpec, x: &[Rat]) -> Result<Rat> {
    check_point(spec, x)?;
    let mut total = Rat::zero();
    for j in 0..spec.num_elements {
        let mut mass = Rat::zero();
        for (i, s) in spec.subsets.iter().enumerate() {
            if s.contains(&j) {
                mass += &x[i];
            }
        }
        if mass > Rat::one() {
            mass = Rat::one();
        }
        total += &spec.weights[j] * mass;
    }
    Ok(total)
}

fn check_point(spec: &CoverageSpec, x: &[Rat]) -> Result<()> {
    if x.len() != spec.subsets.len() {
        return Err(Error::InvalidInstance(format!(
            "point has {} coordinates for {} sets",
            x.len(),
            spec.subsets.len()
        )));
    }
    if x.iter().any(|v| v.is_negative() || v > &Rat::one()) {
        return Err(Error::InvalidInstance("point leaves the unit box".into()));
    }
    Ok(())
}

/// Pipage rounding. Repeatedly takes the two lowest-index fractional
/// coordinates `i < j` and moves `(x_i, x_j)` by `(+ε, -ε c_i / c_j)` to
/// whichever endpoint of the feasible interval has the larger potential
/// (ties go left). Each move zeroes or saturates a coordinate, preserves
/// `Σ c x` exactly, and never decreases `F`; at most one fractional
/// coordinate survives.
///
/// Zero-cost fractional coordinates are saturated to 1 up front: raising them
/// is free and `F` is nondecreasing coordinate-wise.
pub fn pipage_round(spec: &CoverageSpec, costs: &[Rat], x: &[Rat]) -> Result<Vec<Rat>> {
    check_point(spec, x)?;
    if costs.len() != x.len() {
        return Err(Error::InvalidInstance("cost/point length mismatch".into()));
    }
    let mut x: Vec<Rat> = x.to_vec();
    for (i, c) in costs.iter().enumerate() {
        if c.is_zero() && !x[i].is_integer() {
            x[i] = Rat::one();
        }
    }
    loop {
        let fractional: Vec<usize> = (0..x.len()).filter(|&i| !x[i].is_integer()).collect();
        if fractional.len() <= 1 {
            return Ok(x);
        }
        let (i, j) = (fractional[0], fractional[1]);
        let (ci, cj) = (&costs[i], &costs[j]);
        let lo = {
            let a = -x[i].clone();
            let b = (&x[j] - Rat::one()) * cj / ci;
            if a > b {
                a
            } else {
                b
            }
        };
        let hi = {
            let a = Rat::one() - &x[i];
            let b = &x[j] * cj / ci;
            if a < b {
                a
            } else {
                b
            }
        };
        let shifted = |eps: &Rat| {
            let mut y = x.clone();
            y[i] = &x[i] + eps;
            y[j] = &x[j] - eps * ci / cj;
            y
        };
        let at_lo = shifted(&lo);
        let at_hi = shifted(&hi);
        let f_lo = potential(spec, &at_lo)?;
        let f_hi = potential(spec, &at_hi)?;
        x = if f_hi > f_lo { at_hi } else { at_lo };
    }
}

/// Integralizes a post-pipage point: with no fractional coordinate left, the
/// support is the answer; with exactly one, the better of "round it down" and
/// "take it alone" wins (ties keep the rounded-down set).
pub fn resolve_last_fractional(spec: &CoverageSpec, x: &[Rat]) -> Result<BTreeSet<usize>> {
    check_point(spec, x)?;
    let fractional: Vec<usize> = (0..x.len()).filter(|&i| !x[i].is_integer()).collect();
    if fractional.len() > 1 {
        return Err(Error::InvalidInstance(format!(
            "{} fractional coordinates remain; run pipage first",
            fractional.len()
        )));
    }
    let rounded_down: BTreeSet<usize> = (0..x.len()).filter(|&i| x[i].is_one()).collect();
    match fractional.first() {
        None => Ok(rounded_down),
        Some(&r) => {
            let singleton = BTreeSet::from([r]);
            if coverage_value(spec, &rounded_down)? >= coverage_value(spec, &singleton)? {
                Ok(rounded_down)
            } else {
                Ok(singleton)
            }
        }
    }
}

/// Full pipeline: solve the relaxation, round, resolve, and report the chosen
/// sets with their exact coverage value next to the fractional optimum.
pub fn solve_and_round(
    spec: &CoverageSpec,
    bids: &[Rat],
    budget: &Rat,
) -> Result<(BTreeSet<usize>, Rat, FractionalSolution)> {
    let solution = solve_coverage_lp(spec, bids, budget)?;
    let rounded = pipage_round(spec, bids, &solution.x)?;
    let winners = resolve_last_fractional(spec, &rounded)?;
    let value = coverage_value(spec, &winners)?;
    Ok((winners, value, solution))
}

trait Scalar:
    Clone
    + PartialOrd
    + Zero
    + One
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
{
    fn tolerance() -> Self;
    fn above_tol(&self) -> bool {
        *self > Self::tolerance()
    }
}

impl Scalar for f64 {
    fn tolerance() -> f64 {
        FLOAT_TOL
    }
}

impl Scalar for Rat {
    fn tolerance() -> Rat {
        Rat::zero()
    }
}

fn clamp_unit_from_f64(v: f64) -> Rat {
    rat_from_f64(v.clamp(0.0, 1.0))
}

/// Dense primal simplex for `max c·y : A y ≤ b, y ≥ 0` with `b ≥ 0`.
/// Entering column: lowest index with positive reduced cost; leaving row:
/// minimum ratio, ties to the lowest basis index (Bland's rule, so the exact
/// path cannot cycle). Returns the optimal `y` (length `c.len()`).
fn simplex<T: Scalar>(a: Vec<Vec<T>>, b: Vec<T>, c: Vec<T>) -> Result<Vec<T>> {
    let m = a.len();
    let n = c.len();
    let total = n + m;
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(m);
    for (i, base) in a.into_iter().enumerate() {
        debug_assert_eq!(base.len(), n);
        let mut row = base;
        row.resize(total, T::zero());
        row[n + i] = T::one();
        rows.push(row);
    }
    let mut rhs = b;
    let mut cost = c;
    cost.resize(total, T::zero());
    let mut basis: Vec<usize> = (n..total).collect();

    let max_iters = 1000 + 64 * total * (m + 1);
    for _ in 0..max_iters {
        let entering = (0..total).find(|&j| cost[j].above_tol());
        let Some(e) = entering else {
            let mut y = vec![T::zero(); total];
            for (i, &bv) in basis.iter().enumerate() {
                y[bv] = rhs[i].clone();
            }
            y.truncate(n);
            return Ok(y);
        };
        let mut leave: Option<(usize, T)> = None;
        for i in 0..m {
            if rows[i][e].above_tol() {
                let ratio = rhs[i].clone() / rows[i][e].clone();
                let better = match &leave {
                    None => true,
                    Some((l, best)) => {
                        ratio < *best || (ratio == *best && basis[i] < basis[*l])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((l, _)) = leave else {
            return Err(Error::LpFailure("objective is unbounded".into()));
        };
        let pivot = rows[l][e].clone();
        for v in rows[l].iter_mut() {
            *v = v.clone() / pivot.clone();
        }
        rhs[l] = rhs[l].clone() / pivot;
        let pivot_row = rows[l].clone();
        let pivot_rhs = rhs[l].clone();
        for i in 0..m {
            if i == l {
                continue;
            }
            let factor = rows[i][e].clone();
            if factor == T::zero() {
                continue;
            }
            for j in 0..total {
                rows[i][j] = rows[i][j].clone() - factor.clone() * pivot_row[j].clone();
            }
            rows[i][e] = T::zero();
            rhs[i] = rhs[i].clone() - factor * pivot_rhs.clone();
        }
        let factor = cost[e].clone();
        if factor != T::zero() {
            for j in 0..total {
                cost[j] = cost[j].clone() - factor.clone() * pivot_row[j].clone();
            }
            cost[e] = T::zero();
        }
        basis[l] = e;
    }
    Err(Error::LpFailure("iteration limit reached".into()))
}
