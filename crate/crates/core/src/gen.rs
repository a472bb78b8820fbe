//! Seeded random network and case generation, plus deterministic structured
//! topologies for benchmarks and tests.
//!
//! All randomness comes from a private SplitMix64 stream, so a given seed
//! and parameter set always produces the same artifact on every platform.
//! The draw order is part of the contract and is documented on each
//! generator.

use crate::model::{CaseEvidence, Disease, Finding, Network};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("infeasible generator parameters: {0}")]
    Infeasible(String),
}

/// SplitMix64 (Steele, Lea & Flood's mixing constants). Small, fast, and
/// stable forever, which is what reproducible fixtures need.
pub(crate) struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub(crate) fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub(crate) fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi); degenerate ranges return lo.
    pub(crate) fn next_in(&mut self, (lo, hi): (f64, f64)) -> f64 {
        lo + self.next_f64() * (hi - lo)
    }

    /// Uniform in 0..n via modular reduction (bias is irrelevant at fixture
    /// scale).
    pub(crate) fn next_below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Parameters for [`random_network`]. Ranges are inclusive-exclusive pairs
/// `(lo, hi)`; `lo == hi` pins the value.
#[derive(Clone, Copy, Debug)]
pub struct RandomNetParams {
    pub n_diseases: usize,
    pub n_findings: usize,
    pub parents_min: usize,
    pub parents_max: usize,
    pub prior_range: (f64, f64),
    pub activation_range: (f64, f64),
    pub leak_range: (f64, f64),
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), GenError> {
    if ok {
        Ok(())
    } else {
        Err(GenError::Infeasible(msg()))
    }
}

/// Draws a network with ids `d1..dN` and `f1..fM`.
///
/// Draw order, fixed for reproducibility: all disease priors first, then per
/// finding its parent count, its parent set (partial Fisher-Yates over a
/// fresh identity array, then sorted), one activation per parent in sorted
/// order, and finally its leak.
pub fn random_network(params: &RandomNetParams, seed: u64) -> Result<Network, GenError> {
    let p = params;
    if p.n_findings > 0
        && (p.parents_min < 1 || p.parents_min > p.parents_max || p.parents_max > p.n_diseases)
    {
        return Err(GenError::Infeasible(format!(
            "parent counts {}..{} infeasible for {} diseases",
            p.parents_min, p.parents_max, p.n_diseases
        )));
    }
    let (lo, hi) = p.prior_range;
    ensure(0.0 < lo && lo <= hi && hi < 1.0, || {
        format!("prior range ({lo}, {hi}) must lie inside (0,1)")
    })?;
    let (lo, hi) = p.activation_range;
    ensure(0.0 < lo && lo <= hi && hi <= 1.0, || {
        format!("activation range ({lo}, {hi}) must lie inside (0,1]")
    })?;
    let (lo, hi) = p.leak_range;
    ensure(0.0 <= lo && lo <= hi && hi < 1.0, || {
        format!("leak range ({lo}, {hi}) must lie inside [0,1)")
    })?;

    let mut rng = SplitMix64::new(seed);
    let diseases: Vec<Disease> = (0..p.n_diseases)
        .map(|i| Disease {
            id: format!("d{}", i + 1),
            prior: rng.next_in(p.prior_range),
        })
        .collect();
    let mut findings = Vec::with_capacity(p.n_findings);
    for j in 0..p.n_findings {
        let count = p.parents_min + rng.next_below(p.parents_max - p.parents_min + 1);
        let mut pool: Vec<usize> = (0..p.n_diseases).collect();
        for t in 0..count {
            let pick = t + rng.next_below(p.n_diseases - t);
            pool.swap(t, pick);
        }
        let mut chosen: Vec<usize> = pool[..count].to_vec();
        chosen.sort_unstable();
        let parents = chosen
            .into_iter()
            .map(|d| (d, rng.next_in(p.activation_range)))
            .collect();
        findings.push(Finding {
            id: format!("f{}", j + 1),
            leak: rng.next_in(p.leak_range),
            parents,
        });
    }
    Ok(Network::new(diseases, findings).expect("generated network is valid by construction"))
}

/// A chain of `m` findings over `m + 1` diseases: finding `j` has parents
/// `d_j` and `d_{j+1}`, all with activation `c`, all priors `p`, no leak.
/// Distributing any interior finding splits the remainder in two.
pub fn chain_network(m: usize, prior: f64, activation: f64) -> Network {
    assert!(m >= 1, "chain needs at least one finding");
    assert!(prior > 0.0 && prior < 1.0, "prior must lie in (0,1)");
    assert!(
        activation > 0.0 && activation <= 1.0,
        "activation must lie in (0,1]"
    );
    let diseases = (0..=m)
        .map(|i| Disease {
            id: format!("d{}", i + 1),
            prior,
        })
        .collect();
    let findings = (0..m)
        .map(|j| Finding {
            id: format!("f{}", j + 1),
            leak: 0.0,
            parents: vec![(j, activation), (j + 1, activation)],
        })
        .collect();
    Network::new(diseases, findings).expect("chain network is valid by construction")
}

/// Forward-samples a case: a disease configuration from the priors, each
/// finding from its noisy-or conditional, then each finding's value is
/// reported independently with probability `report_fraction`.
///
/// Draw order: one uniform per disease, then per finding one uniform for its
/// value and one for whether it is reported (both always drawn).
pub fn sample_case(net: &Network, seed: u64, report_fraction: f64) -> CaseEvidence {
    assert!(
        (0.0..=1.0).contains(&report_fraction),
        "report fraction must lie in [0,1]"
    );
    let mut rng = SplitMix64::new(seed);
    let config: Vec<bool> = net
        .diseases()
        .iter()
        .map(|d| rng.next_f64() < d.prior)
        .collect();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (j, f) in net.findings().iter().enumerate() {
        let mut off = 1.0 - f.leak;
        for &(d, c) in &f.parents {
            if config[d] {
                off *= 1.0 - c;
            }
        }
        let value = rng.next_f64() < 1.0 - off;
        let reported = rng.next_f64() < report_fraction;
        if reported {
            if value {
                positives.push(j);
            } else {
                negatives.push(j);
            }
        }
    }
    CaseEvidence::new(positives, negatives, net).expect("sampled case is valid by construction")
}
