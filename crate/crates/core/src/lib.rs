//! Inference for two-level noisy-or (BN2O) belief networks.
//!
//! A BN2O network has independent binary causes ("diseases") above and
//! binary effects ("findings") below; each finding's conditional
//! distribution is a noisy-or of its parents. Negative evidence absorbs in
//! linear time; positive evidence is handled exactly by recursively
//! distributing over findings and factoring the residual graph into
//! independent components, or approximately by processing findings one at a
//! time in an informativeness order.
//!
//! - [`model`]: the data model, text formats, and validation.
//! - [`engine`]: the recursive distribute-and-partition evaluator.
//! - [`quickscore`]: the flat inclusion-exclusion baseline.
//! - [`oracle`]: brute-force enumeration, the test-suite ground truth.
//! - [`approx`]: anytime incremental refinement with settling metrics.
//! - [`gen`]: seeded network and case generators.

pub mod approx;
pub mod engine;
pub mod gen;
pub mod model;
pub mod oracle;
pub mod quickscore;

pub use engine::{
    absorb_negatives, posteriors, CostCounters, EvalResult, FindingSelection, Posteriors,
    WeightTable,
};
pub use model::{
    parse_case, parse_network, serialize_case, serialize_network, CaseEvidence, Disease, Finding,
    Network,
};
