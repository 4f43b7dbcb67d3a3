//! JSON instance documents for the `bfmech` command-line driver.
//!
//! An instance file carries the market family, the budget, the agents' true
//! costs, and a family-specific valuation block. Rationals travel as strings
//! (`"104/5"`, `"12"`) so files stay exact. [`render`] is deterministic and a
//! fixed point of `parse -> render`, so regenerating a document never churns
//! bytes.

use std::collections::BTreeSet;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use bfmech::gen::Family;
use bfmech::indsys::{IndSysStructure, IndependenceSystemSpec};
use bfmech::rat::format_rat;
use bfmech::valuations::{AdditiveSpec, CoverageSpec};
use bfmech::{parse_rat, Instance, Rat, ValuationSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub family: String,
    pub budget: String,
    pub agents: Vec<AgentDoc>,
    pub valuation: ValuationDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentDoc {
    pub id: usize,
    pub cost: String,
}

/// Family-specific valuation payload. Untagged on the wire; the `family`
/// string is the authority on which variant is expected, checked in
/// [`doc_to_instance`]. Variant order matters for parsing: the knapsack
/// shape (`values` only) is a subset of the others and must come last.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValuationDoc {
    Coverage { weights: Vec<String>, subsets: Vec<Vec<usize>> },
    Graph { vertices: usize, edges: Vec<(usize, usize)>, values: Vec<String> },
    Partition { classes: Vec<Vec<usize>>, capacities: Vec<usize>, values: Vec<String> },
    Kd { k: usize, parts: Vec<usize>, hyperedges: Vec<Vec<usize>>, values: Vec<String> },
    Knapsack { values: Vec<String> },
}

fn parse_rats(label: &str, raw: &[String]) -> Result<Vec<Rat>> {
    raw.iter()
        .map(|s| parse_rat(s).map_err(|e| anyhow!("bad {label} entry {s:?}: {e}")))
        .collect()
}

fn format_rats(values: &[Rat]) -> Vec<String> {
    values.iter().map(format_rat).collect()
}

/// Builds the in-memory instance, enforcing that the valuation block has the
/// shape the `family` string promises and that the instance validates.
pub fn doc_to_instance(doc: &InstanceDoc) -> Result<(Family, Instance)> {
    let family: Family = doc.family.parse().map_err(|e| anyhow!("{e}"))?;
    for (i, agent) in doc.agents.iter().enumerate() {
        if agent.id != i {
            bail!("agent ids must be 0..n in order; position {i} has id {}", agent.id);
        }
    }
    let costs = doc
        .agents
        .iter()
        .map(|a| parse_rat(&a.cost).map_err(|e| anyhow!("bad cost for agent {}: {e}", a.id)))
        .collect::<Result<Vec<_>>>()?;
    let budget = parse_rat(&doc.budget).map_err(|e| anyhow!("bad budget: {e}"))?;

    let valuation = match (family, &doc.valuation) {
        (Family::Coverage, ValuationDoc::Coverage { weights, subsets }) => {
            let weights = parse_rats("weight", weights)?;
            let subsets: Vec<BTreeSet<usize>> =
                subsets.iter().map(|s| s.iter().copied().collect()).collect();
            ValuationSpec::Coverage(CoverageSpec::new(weights.len(), subsets, weights))
        }
        (Family::Matching, ValuationDoc::Graph { vertices, edges, values }) => {
            ValuationSpec::IndependenceSystem(IndependenceSystemSpec::graph_matching(
                *vertices,
                edges.clone(),
                parse_rats("value", values)?,
            ))
        }
        (Family::Forest, ValuationDoc::Graph { vertices, edges, values }) => {
            ValuationSpec::IndependenceSystem(IndependenceSystemSpec::graphic_matroid(
                *vertices,
                edges.clone(),
                parse_rats("value", values)?,
            ))
        }
        (Family::PartitionMatroid, ValuationDoc::Partition { classes, capacities, values }) => {
            ValuationSpec::IndependenceSystem(IndependenceSystemSpec::partition_matroid(
                classes.clone(),
                capacities.clone(),
                parse_rats("value", values)?,
            ))
        }
        (Family::KdMatching, ValuationDoc::Kd { k, parts, hyperedges, values }) => {
            ValuationSpec::IndependenceSystem(IndependenceSystemSpec::kd_matching(
                *k,
                parts.clone(),
                hyperedges.clone(),
                parse_rats("value", values)?,
            ))
        }
        (Family::Knapsack, ValuationDoc::Knapsack { values }) => {
            ValuationSpec::Additive(AdditiveSpec::new(parse_rats("value", values)?))
        }
        (family, _) => bail!("valuation fields do not match family {family}"),
    };

    let instance = Instance::new(costs, budget, valuation).map_err(|e| anyhow!("{e}"))?;
    Ok((family, instance))
}

/// Inverse of [`doc_to_instance`] for every structure the generator emits.
pub fn instance_to_doc(instance: &Instance) -> Result<InstanceDoc> {
    let (family, valuation) = match &instance.valuation {
        ValuationSpec::Additive(a) => {
            (Family::Knapsack, ValuationDoc::Knapsack { values: format_rats(&a.values) })
        }
        ValuationSpec::Coverage(c) => (
            Family::Coverage,
            ValuationDoc::Coverage {
                weights: format_rats(&c.weights),
                subsets: c.subsets.iter().map(|s| s.iter().copied().collect()).collect(),
            },
        ),
        ValuationSpec::IndependenceSystem(spec) => {
            let values = format_rats(&spec.element_values);
            match &spec.structure {
                IndSysStructure::GraphMatching { vertices, edges } => (
                    Family::Matching,
                    ValuationDoc::Graph { vertices: *vertices, edges: edges.clone(), values },
                ),
                IndSysStructure::GraphicMatroid { vertices, edges } => (
                    Family::Forest,
                    ValuationDoc::Graph { vertices: *vertices, edges: edges.clone(), values },
                ),
                IndSysStructure::PartitionMatroid { classes, capacities } => (
                    Family::PartitionMatroid,
                    ValuationDoc::Partition {
                        classes: classes.clone(),
                        capacities: capacities.clone(),
                        values,
                    },
                ),
                IndSysStructure::KDMatching { k, parts, hyperedges } => (
                    Family::KdMatching,
                    ValuationDoc::Kd {
                        k: *k,
                        parts: parts.clone(),
                        hyperedges: hyperedges.clone(),
                        values,
                    },
                ),
                other => bail!("no document form for structure {other:?}"),
            }
        }
    };
    Ok(InstanceDoc {
        family: family.to_string(),
        budget: format_rat(&instance.budget),
        agents: instance
            .agents
            .iter()
            .map(|a| AgentDoc { id: a.id, cost: format_rat(&a.true_cost) })
            .collect(),
        valuation,
    })
}

/// Deterministic pretty rendering with a trailing newline.
pub fn render(doc: &InstanceDoc) -> Result<String> {
    let mut text = serde_json::to_string_pretty(doc).context("serializing instance")?;
    text.push('\n');
    Ok(text)
}

/// Parses a JSON instance document.
pub fn parse(text: &str) -> Result<(Family, Instance)> {
    let doc: InstanceDoc = serde_json::from_str(text).context("parsing instance document")?;
    doc_to_instance(&doc)
}
