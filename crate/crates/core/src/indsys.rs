//! Downward-closed independence systems and their unbudgeted solvers.
//!
//! Each variant fixes what "independent" means for a set of elements:
//!
//! * `Free` — every subset is independent (knapsack-style ground).
//! * `GraphMatching` — elements are edges; independent = a matching.
//! * `GraphicMatroid` — elements are edges; independent = acyclic.
//! * `PartitionMatroid` — elements fall into classes with capacities.
//! * `GraphIndependentSet` — elements are vertices; independent = no edge
//!   inside the set.
//! * `KDMatching` — elements are hyperedges with one vertex per side of a
//!   k-partite ground; independent = pairwise disjoint.
//!
//! `solve_unbudgeted` returns a maximum-weight independent subset exactly for
//! every variant except `KDMatching`, where it runs the value-greedy packing
//! heuristic whose output is within a factor `k` of optimal. The pair
//! (procedure, approximation factor rho) is what mechanisms consume.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::rat::{rat_int, Rat};
use num::Zero;

/// Cap on exhaustive search inside `max_weight_independent` for the variants
/// without a polynomial exact solver. Branch-and-bound keeps this fast at the
/// instance sizes the toolkit targets.
pub const EXACT_SEARCH_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndSysStructure {
    Free {
        size: usize,
    },
    GraphMatching {
        vertices: usize,
        edges: Vec<(usize, usize)>,
    },
    GraphicMatroid {
        vertices: usize,
        edges: Vec<(usize, usize)>,
    },
    PartitionMatroid {
        classes: Vec<Vec<usize>>,
        capacities: Vec<usize>,
    },
    GraphIndependentSet {
        vertices: usize,
        edges: Vec<(usize, usize)>,
    },
    KDMatching {
        k: usize,
        parts: Vec<usize>,
        /// Each hyperedge picks one vertex per part: `hyperedges[e][p]` is a
        /// local index into part `p`.
        hyperedges: Vec<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndependenceSystemSpec {
    pub structure: IndSysStructure,
    pub element_values: Vec<Rat>,
}

impl IndependenceSystemSpec {
    pub fn free(values: Vec<Rat>) -> Self {
        let size = values.len();
        IndependenceSystemSpec { structure: IndSysStructure::Free { size }, element_values: values }
    }

    pub fn graph_matching(vertices: usize, edges: Vec<(usize, usize)>, values: Vec<Rat>) -> Self {
        IndependenceSystemSpec {
            structure: IndSysStructure::GraphMatching { vertices, edges },
            element_values: values,
        }
    }

    pub fn graphic_matroid(vertices: usize, edges: Vec<(usize, usize)>, values: Vec<Rat>) -> Self {
        IndependenceSystemSpec {
            structure: IndSysStructure::GraphicMatroid { vertices, edges },
            element_values: values,
        }
    }

    pub fn partition_matroid(
        classes: Vec<Vec<usize>>,
        capacities: Vec<usize>,
        values: Vec<Rat>,
    ) -> Self {
        IndependenceSystemSpec {
            structure: IndSysStructure::PartitionMatroid { classes, capacities },
            element_values: values,
        }
    }

    pub fn graph_independent_set(
        vertices: usize,
        edges: Vec<(usize, usize)>,
        values: Vec<Rat>,
    ) -> Self {
        IndependenceSystemSpec {
            structure: IndSysStructure::GraphIndependentSet { vertices, edges },
            element_values: values,
        }
    }

    pub fn kd_matching(
        k: usize,
        parts: Vec<usize>,
        hyperedges: Vec<Vec<usize>>,
        values: Vec<Rat>,
    ) -> Self {
        IndependenceSystemSpec {
            structure: IndSysStructure::KDMatching { k, parts, hyperedges },
            element_values: values,
        }
    }

    pub fn ground_size(&self) -> usize {
        match &self.structure {
            IndSysStructure::Free { size } => *size,
            IndSysStructure::GraphMatching { edges, .. } => edges.len(),
            IndSysStructure::GraphicMatroid { edges, .. } => edges.len(),
            IndSysStructure::PartitionMatroid { classes, .. } => {
                classes.iter().map(|c| c.len()).sum()
            }
            IndSysStructure::GraphIndependentSet { vertices, .. } => *vertices,
            IndSysStructure::KDMatching { hyperedges, .. } => hyperedges.len(),
        }
    }

    /// Validates structural invariants; in particular every singleton must be
    /// independent (no self-loops, positive capacities, well-formed edges).
    pub fn validate(&self) -> Result<()> {
        let n = self.ground_size();
        if self.element_values.len() != n {
            return Err(Error::InvalidInstance(format!(
                "independence system has {} values for {} elements",
                self.element_values.len(),
                n
            )));
        }
        if let Some(v) = self.element_values.iter().find(|v| v < &&Rat::zero()) {
            return Err(Error::InvalidInstance(format!("negative element value {v}")));
        }
        match &self.structure {
            IndSysStructure::Free { .. } => {}
            IndSysStructure::GraphMatching { vertices, edges }
            | IndSysStructure::GraphicMatroid { vertices, edges }
            | IndSysStructure::GraphIndependentSet { vertices, edges } => {
                for &(u, v) in edges {
                    if u >= *vertices || v >= *vertices {
                        return Err(Error::InvalidInstance(format!(
                            "edge ({u}, {v}) references a vertex outside 0..{vertices}"
                        )));
                    }
                    if u == v {
                        return Err(Error::InvalidInstance(format!("self-loop at vertex {u}")));
                    }
                }
            }
            IndSysStructure::PartitionMatroid { classes, capacities } => {
                if classes.len() != capacities.len() {
                    return Err(Error::InvalidInstance(
                        "class and capacity counts differ".into(),
                    ));
                }
                if capacities.contains(&0) {
                    return Err(Error::InvalidInstance(
                        "partition capacities must be at least 1".into(),
                    ));
                }
                let mut seen = vec![false; n];
                for class in classes {
                    for &e in class {
                        if e >= n || seen[e] {
                            return Err(Error::InvalidInstance(format!(
                                "element {e} missing from or repeated across classes"
                            )));
                        }
                        seen[e] = true;
                    }
                }
                if seen.iter().any(|s| !s) {
                    return Err(Error::InvalidInstance(
                        "partition classes do not cover all elements".into(),
                    ));
                }
            }
            IndSysStructure::KDMatching { k, parts, hyperedges } => {
                if *k < 2 {
                    return Err(Error::InvalidInstance("k-dimensional matching needs k >= 2".into()));
                }
                if parts.len() != *k {
                    return Err(Error::InvalidInstance(format!(
                        "expected {k} parts, found {}",
                        parts.len()
                    )));
                }
                for (i, h) in hyperedges.iter().enumerate() {
                    if h.len() != *k {
                        return Err(Error::InvalidInstance(format!(
                            "hyperedge {i} has {} vertices, expected {k}",
                            h.len()
                        )));
                    }
                    for (p, &v) in h.iter().enumerate() {
                        if v >= parts[p] {
                            return Err(Error::InvalidInstance(format!(
                                "hyperedge {i} references vertex {v} outside part {p}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Approximation factor of the default unbudgeted solver for this variant.
    pub fn default_rho(&self) -> Rat {
        match &self.structure {
            IndSysStructure::KDMatching { k, .. } => rat_int(*k as i64),
            _ => rat_int(1),
        }
    }
}

/// Exact membership test for the independence family.
pub fn is_independent(spec: &IndependenceSystemSpec, s: &BTreeSet<usize>) -> Result<bool> {
    let n = spec.ground_size();
    if let Some(&bad) = s.iter().find(|&&i| i >= n) {
        return Err(Error::UnknownAgent(bad));
    }
    Ok(match &spec.structure {
        IndSysStructure::Free { .. } => true,
        IndSysStructure::GraphMatching { vertices, edges } => {
            let mut used = vec![false; *vertices];
            for &e in s {
                let (u, v) = edges[e];
                if used[u] || used[v] {
                    return Ok(false);
                }
                used[u] = true;
                used[v] = true;
            }
            true
        }
        IndSysStructure::GraphicMatroid { vertices, edges } => {
            let mut uf = UnionFind::new(*vertices);
            for &e in s {
                let (u, v) = edges[e];
                if !uf.union(u, v) {
                    return Ok(false);
                }
            }
            true
        }
        IndSysStructure::PartitionMatroid { classes, capacities } => {
            for (class, &cap) in classes.iter().zip(capacities) {
                let used = class.iter().filter(|e| s.contains(e)).count();
                if used > cap {
                    return Ok(false);
                }
            }
            true
        }
        IndSysStructure::GraphIndependentSet { edges, .. } => {
            !edges.iter().any(|&(u, v)| s.contains(&u) && s.contains(&v))
        }
        IndSysStructure::KDMatching { k, parts, hyperedges } => {
            let mut used: Vec<Vec<bool>> = parts.iter().map(|&p| vec![false; p]).collect();
            for &e in s {
                for p in 0..*k {
                    let v = hyperedges[e][p];
                    if used[p][v] {
                        return Ok(false);
                    }
                    used[p][v] = true;
                }
            }
            true
        }
    })
}

/// Maximum-weight independent subset of `allowed`, computed exactly.
///
/// Matroid variants use the greedy exchange argument (descending value, ties
/// by ascending element id). The packing variants run depth-first
/// branch-and-bound over elements in the same order; ties between equal-value
/// solutions resolve to the first one found, so output is deterministic.
pub fn max_weight_independent(
    spec: &IndependenceSystemSpec,
    allowed: &BTreeSet<usize>,
) -> Result<(BTreeSet<usize>, Rat)> {
    let n = spec.ground_size();
    if let Some(&bad) = allowed.iter().find(|&&i| i >= n) {
        return Err(Error::UnknownAgent(bad));
    }
    match &spec.structure {
        IndSysStructure::Free { .. } => {
            let mut total = Rat::zero();
            for &e in allowed {
                total += &spec.element_values[e];
            }
            Ok((allowed.clone(), total))
        }
        IndSysStructure::GraphicMatroid { .. } | IndSysStructure::PartitionMatroid { .. } => {
            let order = by_value_desc(spec, allowed);
            let mut chosen = BTreeSet::new();
            let mut total = Rat::zero();
            for e in order {
                let mut candidate = chosen.clone();
                candidate.insert(e);
                if is_independent(spec, &candidate)? {
                    total += &spec.element_values[e];
                    chosen = candidate;
                }
            }
            Ok((chosen, total))
        }
        _ => {
            if allowed.len() > EXACT_SEARCH_CAP {
                return Err(Error::CapExceeded { size: allowed.len(), cap: EXACT_SEARCH_CAP });
            }
            branch_and_bound(spec, allowed)
        }
    }
}

fn by_value_desc(spec: &IndependenceSystemSpec, allowed: &BTreeSet<usize>) -> Vec<usize> {
    let mut order: Vec<usize> = allowed.iter().copied().collect();
    order.sort_by(|&a, &b| {
        spec.element_values[b]
            .cmp(&spec.element_values[a])
            .then_with(|| a.cmp(&b))
    });
    order
}

fn branch_and_bound(
    spec: &IndependenceSystemSpec,
    allowed: &BTreeSet<usize>,
) -> Result<(BTreeSet<usize>, Rat)> {
    let order = by_value_desc(spec, allowed);
    // suffix_total[i] = total value of order[i..]; bounds the best completion.
    let mut suffix_total = vec![Rat::zero(); order.len() + 1];
    for i in (0..order.len()).rev() {
        suffix_total[i] = &suffix_total[i + 1] + &spec.element_values[order[i]];
    }
    let mut best_set = BTreeSet::new();
    let mut best_value = Rat::zero();
    let mut current = BTreeSet::new();
    let mut current_value = Rat::zero();
    dfs(
        spec,
        &order,
        &suffix_total,
        0,
        &mut current,
        &mut current_value,
        &mut best_set,
        &mut best_value,
    )?;
    Ok((best_set, best_value))
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    spec: &IndependenceSystemSpec,
    order: &[usize],
    suffix_total: &[Rat],
    depth: usize,
    current: &mut BTreeSet<usize>,
    current_value: &mut Rat,
    best_set: &mut BTreeSet<usize>,
    best_value: &mut Rat,
) -> Result<()> {
    if *current_value > *best_value {
        *best_value = current_value.clone();
        *best_set = current.clone();
    }
    if depth == order.len() {
        return Ok(());
    }
    // Prune when even taking the whole suffix cannot strictly improve.
    if &*current_value + &suffix_total[depth] <= *best_value {
        return Ok(());
    }
    let e = order[depth];
    current.insert(e);
    if is_independent(spec, current)? {
        *current_value += &spec.element_values[e];
        dfs(spec, order, suffix_total, depth + 1, current, current_value, best_set, best_value)?;
        *current_value -= &spec.element_values[e];
    }
    current.remove(&e);
    dfs(spec, order, suffix_total, depth + 1, current, current_value, best_set, best_value)
}

/// Greedy packing for k-dimensional matching: scan hyperedges by descending
/// value (ties by ascending id) and keep every one disjoint from the picks so
/// far. The result is within a factor `k` of the best packing.
pub fn greedy_k_set_packing(
    spec: &IndependenceSystemSpec,
    allowed: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>> {
    match &spec.structure {
        IndSysStructure::KDMatching { .. } => {}
        _ => {
            return Err(Error::InvalidInstance(
                "greedy k-set packing requires a k-dimensional matching system".into(),
            ))
        }
    }
    let n = spec.ground_size();
    if let Some(&bad) = allowed.iter().find(|&&i| i >= n) {
        return Err(Error::UnknownAgent(bad));
    }
    let mut chosen = BTreeSet::new();
    for e in by_value_desc(spec, allowed) {
        let mut candidate = chosen.clone();
        candidate.insert(e);
        if is_independent(spec, &candidate)? {
            chosen = candidate;
        }
    }
    Ok(chosen)
}

/// How an [`UnbudgetedSolver`] computes its independent set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// `max_weight_independent`: exact on every variant (rho = 1).
    Exact,
    /// `greedy_k_set_packing`: rho = k on k-dimensional matchings.
    GreedyKSetPacking,
}

/// The unbudgeted sub-procedure `f` handed to the knapsack-style mechanisms,
/// bundled with the factor `rho >= 1` by which its output may fall short of
/// the true maximum-weight independent set.
#[derive(Debug, Clone, PartialEq)]
pub struct UnbudgetedSolver {
    pub kind: SolverKind,
    pub rho: Rat,
}

impl UnbudgetedSolver {
    /// Exact solver; valid for any variant within the search cap.
    pub fn exact() -> Self {
        UnbudgetedSolver { kind: SolverKind::Exact, rho: rat_int(1) }
    }

    /// Default solver for an [`IndependenceSystemSpec`]: exact for the
    /// rho = 1 variants, greedy packing for k-dimensional matching.
    pub fn default_for(spec: &IndependenceSystemSpec) -> Self {
        match &spec.structure {
            IndSysStructure::KDMatching { .. } => {
                UnbudgetedSolver { kind: SolverKind::GreedyKSetPacking, rho: spec.default_rho() }
            }
            _ => UnbudgetedSolver::exact(),
        }
    }

    pub fn solve(
        &self,
        spec: &IndependenceSystemSpec,
        allowed: &BTreeSet<usize>,
    ) -> Result<BTreeSet<usize>> {
        match self.kind {
            SolverKind::Exact => Ok(max_weight_independent(spec, allowed)?.0),
            SolverKind::GreedyKSetPacking => greedy_k_set_packing(spec, allowed),
        }
    }
}

/// Solves the unbudgeted problem with the variant's default procedure and
/// reports the procedure's approximation factor alongside the set.
pub fn solve_unbudgeted(
    spec: &IndependenceSystemSpec,
    allowed: &BTreeSet<usize>,
) -> Result<(BTreeSet<usize>, Rat)> {
    let solver = UnbudgetedSolver::default_for(spec);
    let set = solver.solve(spec, allowed)?;
    Ok((set, solver.rho))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    /// Returns false when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}
