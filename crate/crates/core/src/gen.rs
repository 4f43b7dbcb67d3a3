//! Seeded random instance generator shared by the test suites and the
//! command-line tool. Costs, values, and weights are small rationals
//! (numerators up to 20 over denominators from {1, 2, 4, 5, 10}) so every
//! downstream computation stays exact and printable. The budget always
//! covers the single most expensive agent and never exceeds the market's
//! total cost: `B = max_c + (sum_c - max_c) * r/8` with `r` drawn from 0..=8.
//!
//! Generation is a pure function of the config: the same family, size, `k`,
//! and seed reproduce the same instance bit for bit.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use crate::error::{Error, Result};
use crate::indsys::IndependenceSystemSpec;
use crate::rat::{rat, Rat};
use crate::types::{Instance, ValuationSpec};
use crate::valuations::{AdditiveSpec, CoverageSpec};

/// Instance families the generator can draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Additive values, budget-limited only.
    Knapsack,
    /// Agents are edges of a graph; a purchase must be a matching.
    Matching,
    /// Agents are edges of a graph; a purchase must be cycle-free.
    Forest,
    /// Agents fall into classes with per-class purchase capacities.
    PartitionMatroid,
    /// Agents are k-partite hyperedges; a purchase must be a packing.
    KdMatching,
    /// Agents are weighted-coverage sets.
    Coverage,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Knapsack,
        Family::Matching,
        Family::Forest,
        Family::PartitionMatroid,
        Family::KdMatching,
        Family::Coverage,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Knapsack => "knapsack",
            Family::Matching => "matching",
            Family::Forest => "forest",
            Family::PartitionMatroid => "partition-matroid",
            Family::KdMatching => "kd-matching",
            Family::Coverage => "coverage",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown family {s:?}; expected one of knapsack, matching, forest, partition-matroid, kd-matching, coverage"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    pub family: Family,
    pub agents: usize,
    /// Hyperedge arity for `kd-matching`; ignored elsewhere.
    pub k: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(family: Family, agents: usize, seed: u64) -> Self {
        GenConfig { family, agents, k: 3, seed }
    }
}

fn random_rat(rng: &mut ChaCha8Rng) -> Rat {
    const DENOMINATORS: [i64; 5] = [1, 2, 4, 5, 10];
    let numerator = rng.gen_range(1..=20);
    let denominator = DENOMINATORS[rng.gen_range(0..DENOMINATORS.len())];
    rat(numerator, denominator)
}

fn random_budget(rng: &mut ChaCha8Rng, costs: &[Rat]) -> Rat {
    let max = costs.iter().max().expect("at least one agent").clone();
    let total: Rat = costs.iter().cloned().sum();
    let r = rng.gen_range(0..=8i64);
    &max + (total - &max) * rat(r, 8)
}

/// `count` distinct undirected non-loop edges on `vertices` vertices, in
/// draw order.
fn random_edges(rng: &mut ChaCha8Rng, vertices: usize, count: usize) -> Vec<(usize, usize)> {
    debug_assert!(vertices * (vertices - 1) / 2 >= count);
    let mut seen = BTreeSet::new();
    let mut edges = Vec::with_capacity(count);
    while edges.len() < count {
        let a = rng.gen_range(0..vertices);
        let b = rng.gen_range(0..vertices);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            edges.push(key);
        }
    }
    edges
}

pub fn generate(config: &GenConfig) -> Result<Instance> {
    let n = config.agents;
    if n == 0 {
        return Err(Error::InvalidInstance("generator needs at least one agent".into()));
    }
    if n > 64 {
        return Err(Error::InvalidInstance(format!("generator caps at 64 agents, asked for {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let costs: Vec<Rat> = (0..n).map(|_| random_rat(&mut rng)).collect();
    let values: Vec<Rat> = (0..n).map(|_| random_rat(&mut rng)).collect();
    let valuation = match config.family {
        Family::Knapsack => ValuationSpec::Additive(AdditiveSpec::new(values)),
        Family::Matching => {
            let vertices = n + 2;
            let edges = random_edges(&mut rng, vertices, n);
            ValuationSpec::IndependenceSystem(IndependenceSystemSpec::graph_matching(
                vertices, edges, values,
            ))
        }
        Family::Forest => {
            // Few vertices relative to edges, so cycles actually occur.
            let vertices = (n / 2 + 2).max(3);
            let edges = random_edges(&mut rng, vertices, n);
            ValuationSpec::IndependenceSystem(IndependenceSystemSpec::graphic_matroid(
                vertices, edges, values,
            ))
        }
        Family::PartitionMatroid => {
            let class_count = n.div_ceil(3).max(1);
            let mut classes: Vec<Vec<usize>> = vec![Vec::new(); class_count];
            for agent in 0..n {
                classes[rng.gen_range(0..class_count)].push(agent);
            }
            let mut capacities = Vec::new();
            classes.retain(|c| !c.is_empty());
            for _ in 0..classes.len() {
                capacities.push(rng.gen_range(1..=2usize));
            }
            ValuationSpec::IndependenceSystem(IndependenceSystemSpec::partition_matroid(
                classes, capacities, values,
            ))
        }
        Family::KdMatching => {
            let k = config.k.max(2);
            // Small parts relative to the edge count, so packings conflict.
            let part_size = n.div_ceil(2).max(2);
            let parts = vec![part_size; k];
            let hyperedges: Vec<Vec<usize>> = (0..n)
                .map(|_| (0..k).map(|_| rng.gen_range(0..part_size)).collect())
                .collect();
            ValuationSpec::IndependenceSystem(IndependenceSystemSpec::kd_matching(
                k, parts, hyperedges, values,
            ))
        }
        Family::Coverage => {
            let elements = rng.gen_range(3..=10usize);
            let mut subsets: Vec<BTreeSet<usize>> = Vec::with_capacity(n);
            for _ in 0..n {
                let mut set: BTreeSet<usize> =
                    (0..elements).filter(|_| rng.gen_range(0..3u8) == 0).collect();
                if set.is_empty() {
                    set.insert(rng.gen_range(0..elements));
                }
                subsets.push(set);
            }
            let weights: Vec<Rat> = (0..elements).map(|_| random_rat(&mut rng)).collect();
            ValuationSpec::Coverage(CoverageSpec::new(elements, subsets, weights))
        }
    };
    let budget = random_budget(&mut rng, &costs);
    Instance::new(costs, budget, valuation)
}
