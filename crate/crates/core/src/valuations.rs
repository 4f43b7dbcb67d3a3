//! Weighted coverage and additive valuations, plus brute-force structure
//! checkers (submodularity and fractionally-subadditive certificates).
//!
//! The checkers are exhaustive by design: they exist to certify small
//! instances and to exhibit counterexamples, not to scale. Both take an
//! explicit cap on the ground-set size and refuse larger inputs.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::indsys::{self, IndependenceSystemSpec};
use crate::rat::Rat;
use crate::types::{evaluate, set_from_mask, value_table, ValuationSpec};
use num::{Signed, Zero};

/// Weighted coverage: agent `i` covers `subsets[i]` of a universe of
/// `num_elements` elements carrying nonnegative `weights`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageSpec {
    pub num_elements: usize,
    pub subsets: Vec<BTreeSet<usize>>,
    pub weights: Vec<Rat>,
}

impl CoverageSpec {
    pub fn new(num_elements: usize, subsets: Vec<BTreeSet<usize>>, weights: Vec<Rat>) -> Self {
        CoverageSpec { num_elements, subsets, weights }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.num_elements {
            return Err(Error::InvalidInstance(format!(
                "coverage has {} weights for {} elements",
                self.weights.len(),
                self.num_elements
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| w.is_negative()) {
            return Err(Error::InvalidInstance(format!("negative element weight {w}")));
        }
        for (i, s) in self.subsets.iter().enumerate() {
            if let Some(&e) = s.iter().find(|&&e| e >= self.num_elements) {
                return Err(Error::InvalidInstance(format!(
                    "subset {i} references element {e} outside the universe"
                )));
            }
        }
        Ok(())
    }
}

/// Additive valuation: `v(S) = sum of values over S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdditiveSpec {
    pub values: Vec<Rat>,
}

impl AdditiveSpec {
    pub fn new(values: Vec<Rat>) -> Self {
        AdditiveSpec { values }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.values.iter().find(|v| v.is_negative()) {
            return Err(Error::InvalidInstance(format!("negative additive value {v}")));
        }
        Ok(())
    }
}

/// Total weight of the union of the selected agents' subsets; each covered
/// element counts once regardless of how many selected subsets contain it.
pub fn coverage_value(spec: &CoverageSpec, s: &BTreeSet<usize>) -> Result<Rat> {
    if let Some(&bad) = s.iter().find(|&&i| i >= spec.subsets.len()) {
        return Err(Error::UnknownAgent(bad));
    }
    let mut covered = vec![false; spec.num_elements];
    for &i in s {
        for &e in &spec.subsets[i] {
            covered[e] = true;
        }
    }
    let mut total = Rat::zero();
    for (e, hit) in covered.iter().enumerate() {
        if *hit {
            total += &spec.weights[e];
        }
    }
    Ok(total)
}

/// A witnessed failure of diminishing marginal returns:
/// `marginal(smaller, element) < marginal(larger, element)` with
/// `smaller` a strict subset of `larger` and `element` outside `larger`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmodularViolation {
    pub smaller: BTreeSet<usize>,
    pub larger: BTreeSet<usize>,
    pub element: usize,
    pub smaller_marginal: Rat,
    pub larger_marginal: Rat,
}

/// Exhaustively checks diminishing marginal returns over every pair
/// `smaller ⊂ larger` and every element outside `larger`. Returns all
/// violations found (empty means the valuation is submodular on this ground).
pub fn check_submodular(
    valuation: &ValuationSpec,
    cap: usize,
) -> Result<Vec<SubmodularViolation>> {
    let n = valuation.ground_size();
    let table = value_table(valuation, cap)?;
    let mut violations = Vec::new();
    // Enumerate larger sets, then proper subsets of each via submask iteration.
    for larger in 0u64..(1u64 << n) {
        let mut smaller = (larger.wrapping_sub(1)) & larger;
        loop {
            // `smaller` ranges over proper submasks of `larger` (and 0).
            for i in 0..n {
                let bit = 1u64 << i;
                if larger & bit != 0 {
                    continue;
                }
                let m_small = &table[(smaller | bit) as usize] - &table[smaller as usize];
                let m_large = &table[(larger | bit) as usize] - &table[larger as usize];
                if m_small < m_large {
                    violations.push(SubmodularViolation {
                        smaller: set_from_mask(smaller, n),
                        larger: set_from_mask(larger, n),
                        element: i,
                        smaller_marginal: m_small,
                        larger_marginal: m_large,
                    });
                }
            }
            if smaller == 0 {
                break;
            }
            smaller = (smaller - 1) & larger;
        }
    }
    Ok(violations)
}

/// A fractionally-subadditive certificate: one additive clause per independent
/// set `M`, where clause `M` assigns `v_i` to each `i ∈ M` and 0 elsewhere.
/// The certificate is valid when for every subset `S` of the ground set,
/// `v(S) = max over clauses of the clause value restricted to S`, and the
/// maximizing clause never exceeds `v(S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct XosCertificate {
    pub clauses: Vec<BTreeSet<usize>>,
}

impl XosCertificate {
    /// Value the certificate assigns to `s`: best clause restricted to `s`.
    pub fn value(&self, spec: &IndependenceSystemSpec, s: &BTreeSet<usize>) -> Rat {
        let mut best = Rat::zero();
        for clause in &self.clauses {
            let mut total = Rat::zero();
            for i in clause.intersection(s) {
                total += &spec.element_values[*i];
            }
            if total > best {
                best = total;
            }
        }
        best
    }
}

/// Builds the clause-per-independent-set certificate for an independence
/// system valuation and verifies it against exhaustive evaluation on every
/// subset of the ground set. Errors if verification fails (it cannot, for a
/// downward-closed system with nonnegative values) or the cap is exceeded.
pub fn check_xos_certificate(
    spec: &IndependenceSystemSpec,
    cap: usize,
) -> Result<XosCertificate> {
    let n = spec.ground_size();
    if n > cap {
        return Err(Error::CapExceeded { size: n, cap });
    }
    let mut clauses = Vec::new();
    for mask in 0u64..(1u64 << n) {
        let s = set_from_mask(mask, n);
        if indsys::is_independent(spec, &s)? {
            clauses.push(s);
        }
    }
    let cert = XosCertificate { clauses };
    let valuation = ValuationSpec::IndependenceSystem(spec.clone());
    for mask in 0u64..(1u64 << n) {
        let s = set_from_mask(mask, n);
        let direct = evaluate(&valuation, &s)?;
        let via_cert = cert.value(spec, &s);
        if direct != via_cert {
            return Err(Error::InvalidInstance(format!(
                "certificate value {via_cert} disagrees with exact value {direct} on {s:?}"
            )));
        }
    }
    Ok(cert)
}
