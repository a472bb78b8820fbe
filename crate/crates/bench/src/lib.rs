//! Shared fixtures for the criterion benchmarks.

use bn2o_core::gen::{random_network, sample_case, RandomNetParams};
use bn2o_core::{CaseEvidence, Network};

/// A moderately connected diagnostic-style network.
pub fn demo_network(n_diseases: usize, n_findings: usize, seed: u64) -> Network {
    random_network(
        &RandomNetParams {
            n_diseases,
            n_findings,
            parents_min: 2,
            parents_max: 6.min(n_diseases),
            prior_range: (0.02, 0.3),
            activation_range: (0.2, 0.9),
            leak_range: (0.0, 0.05),
        },
        seed,
    )
    .expect("feasible benchmark parameters")
}

/// A forward-sampled case with roughly `fraction` of findings reported.
pub fn demo_case(net: &Network, seed: u64, fraction: f64) -> CaseEvidence {
    sample_case(net, seed, fraction)
}
