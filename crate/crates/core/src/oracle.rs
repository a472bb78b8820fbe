//! Brute-force enumeration over all disease configurations.
//!
//! Every numeric claim in the test suites is checked against this module.
//! It sums only non-negative joint terms (no cancellation), in ascending
//! configuration-bitmask order with plain f64 accumulation, which keeps it
//! more trustworthy than either production engine.

use crate::model::{CaseEvidence, Network};
use thiserror::Error;

/// Hard guard on the 2^n sweep.
pub const MAX_DISEASES: usize = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("network has {count} diseases, enumeration is capped at {cap}")]
    TooManyDiseases { count: usize, cap: usize },
    #[error("evidence has probability zero")]
    ZeroEvidence,
}

/// Probability that finding `j` stays off given the active diseases:
/// `(1 - leak) * prod over active parents of (1 - c)`.
fn failure_probability(net: &Network, j: usize, config: &[bool]) -> f64 {
    let f = &net.findings()[j];
    let mut q = 1.0 - f.leak;
    for &(d, c) in &f.parents {
        if config[d] {
            q *= 1.0 - c;
        }
    }
    q
}

/// Joint probability of a full disease assignment together with the observed
/// finding values.
pub fn joint_probability(net: &Network, config: &[bool], case: &CaseEvidence) -> f64 {
    assert_eq!(config.len(), net.n_diseases(), "full assignment required");
    let mut p = 1.0;
    for (d, &on) in net.diseases().iter().zip(config) {
        p *= if on { d.prior } else { 1.0 - d.prior };
    }
    for &j in case.positives() {
        p *= 1.0 - failure_probability(net, j, config);
    }
    for &j in case.negatives() {
        p *= failure_probability(net, j, config);
    }
    p
}

/// Exact evidence weight and posterior marginals by summing all 2^n
/// configurations.
pub fn enumerate_posteriors(
    net: &Network,
    case: &CaseEvidence,
) -> Result<(f64, Vec<f64>), OracleError> {
    let n = net.n_diseases();
    if n > MAX_DISEASES {
        return Err(OracleError::TooManyDiseases {
            count: n,
            cap: MAX_DISEASES,
        });
    }
    let mut total = 0.0;
    let mut clamped = vec![0.0; n];
    let mut config = vec![false; n];
    for mask in 0u64..(1u64 << n) {
        for (i, c) in config.iter_mut().enumerate() {
            *c = mask & (1 << i) != 0;
        }
        let p = joint_probability(net, &config, case);
        total += p;
        for (i, acc) in clamped.iter_mut().enumerate() {
            if config[i] {
                *acc += p;
            }
        }
    }
    if total <= 0.0 {
        return Err(OracleError::ZeroEvidence);
    }
    let marginals = clamped
        .iter()
        .map(|&c| (c / total).clamp(0.0, 1.0))
        .collect();
    Ok((total, marginals))
}
