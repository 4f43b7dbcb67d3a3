//! Truthful procurement under a hard budget.
//!
//! A buyer with budget `B` faces agents who each own one item (a subset of a
//! weighted universe, an edge, a vertex, a hyperedge, ...) and privately know
//! its cost. The toolkit implements sealed-bid mechanisms that are
//!
//! * truthful: reporting the true cost is a dominant strategy,
//! * individually rational: winners are paid at least their bid,
//! * budget feasible: total payments never exceed `B`,
//!
//! while guaranteeing a constant fraction of the optimal attainable value.
//! Payments are the exact threshold (supremum winning bid) of each winner's
//! win region, computed in arbitrary-precision rational arithmetic.
//!
//! The crate is organized around the two valuation regimes:
//!
//! * [`mechanisms::GreedySm`], [`mechanisms::SmExact`], and
//!   [`mechanisms::SmFrac`] handle nondecreasing submodular value
//!   (weighted coverage, additive), the last using the coverage LP relaxation
//!   in [`coverage_lp`] as its polynomial-time benchmark.
//! * [`mechanisms::GreedyIsk`], [`mechanisms::RandIsk`], and
//!   [`mechanisms::DetIsk`] handle independence-system knapsack valuations
//!   (matchings, matroids, vertex packings, k-dimensional matchings) built on
//!   the unbudgeted solvers in [`indsys`].
//!
//! [`payments`] turns any monotone allocation into threshold payments and
//! audits the full set of incentive properties; [`oracle`] supplies exhaustive
//! ground truth for small instances; [`gen`] produces the seeded random
//! instance families used by the test suites and the CLI.

pub mod coverage_lp;
pub mod error;
pub mod gen;
pub mod indsys;
pub mod mechanisms;
pub mod oracle;
pub mod payments;
pub mod rat;
pub mod types;
pub mod valuations;

pub use error::{Error, Result};
pub use rat::{parse_rat, rat, rat_int, Rat};
pub use types::{evaluate, Agent, BidProfile, Instance, Outcome, ValuationSpec};
