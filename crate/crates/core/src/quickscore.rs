//! Flat inclusion-exclusion over subsets of the positive findings.
//!
//! After linear absorption of the negative evidence, the evidence weight is
//!
//! ```text
//! z = sum over S of positives:
//!       (-1)^|S| * prod_{j in S} (1 - leak_j)
//!                * prod_i [ w_f[i] + w_t[i] * prod_{j in S, i in pa(j)} (1 - c_ji) ]
//! ```
//!
//! exactly 2^|positives| signed terms, each linear in the number of diseases.
//! Clamped per-disease sums accumulate inside the same subset sweep, so all
//! marginals come from one pass. Subsets are enumerated in ascending bitmask
//! order and all products run left to right, keeping results deterministic.
//! This is the cross-check baseline for the recursive engine, not the fast
//! path.

use crate::engine::{absorb_negatives, CostCounters, Posteriors, WeightTable};
use crate::model::{CaseEvidence, Network};
use thiserror::Error;

/// Default ceiling on 2^|positives| term enumeration.
pub const DEFAULT_POSITIVE_CAP: usize = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuickscoreError {
    #[error("case has {count} positive findings, enumeration is capped at {cap}")]
    TooManyPositiveFindings { count: usize, cap: usize },
    #[error("evidence has probability zero")]
    ZeroEvidence,
}

fn sweep(
    net: &Network,
    case: &CaseEvidence,
    cap: usize,
    want_marginals: bool,
) -> Result<(f64, Vec<f64>, CostCounters), QuickscoreError> {
    let m = case.positives().len();
    if m > cap {
        return Err(QuickscoreError::TooManyPositiveFindings { count: m, cap });
    }
    let n = net.n_diseases();
    let mut cost = CostCounters::default();
    let mut w = WeightTable::from_priors(net);
    absorb_negatives(net, case, &mut w, &mut cost);
    let w_t = w.true_weights();
    let w_f = w.false_weights();

    let mut z = 0.0;
    let mut z_t = vec![0.0; n];
    let mut cfactor = vec![1.0; n];
    let mut touched: Vec<usize> = Vec::with_capacity(n);
    let mut tfactor = vec![0.0; n];
    let mut block = vec![0.0; n];
    let mut prefix = vec![1.0; n];
    let mut suffix = vec![1.0; n];

    for mask in 0u64..(1u64 << m) {
        for &d in &touched {
            cfactor[d] = 1.0;
        }
        touched.clear();
        let mut leak_product = 1.0;
        let mut selected = 0u32;
        for (bit, &j) in case.positives().iter().enumerate() {
            if mask & (1 << bit) == 0 {
                continue;
            }
            selected += 1;
            let f = &net.findings()[j];
            if f.leak > 0.0 {
                cost.additions += 1;
                cost.multiplications += 1;
                leak_product *= 1.0 - f.leak;
            }
            for &(d, c) in &f.parents {
                if cfactor[d] == 1.0 {
                    touched.push(d);
                }
                cost.additions += 1;
                cost.multiplications += 1;
                cfactor[d] *= 1.0 - c;
            }
        }
        for i in 0..n {
            cost.additions += 1;
            if cfactor[i] != 1.0 {
                cost.multiplications += 1;
                tfactor[i] = w_t[i] * cfactor[i];
            } else {
                tfactor[i] = w_t[i];
            }
            block[i] = tfactor[i] + w_f[i];
        }
        let term = if n == 0 {
            1.0
        } else {
            for i in 1..n {
                cost.multiplications += 1;
                prefix[i] = prefix[i - 1] * block[i - 1];
            }
            cost.multiplications += 1;
            prefix[n - 1] * block[n - 1]
        };
        let term = if leak_product != 1.0 {
            cost.multiplications += 1;
            term * leak_product
        } else {
            term
        };
        let negative = selected % 2 == 1;
        cost.additions += 1;
        if negative {
            z -= term;
        } else {
            z += term;
        }
        if want_marginals && n > 0 {
            for i in (0..n - 1).rev() {
                cost.multiplications += 1;
                suffix[i] = suffix[i + 1] * block[i + 1];
            }
            for i in 0..n {
                cost.multiplications += 2;
                let mut t = tfactor[i] * prefix[i] * suffix[i];
                if leak_product != 1.0 {
                    cost.multiplications += 1;
                    t *= leak_product;
                }
                cost.additions += 1;
                if negative {
                    z_t[i] -= t;
                } else {
                    z_t[i] += t;
                }
            }
        }
    }
    if w.scalar() != 1.0 {
        cost.multiplications += 1;
        z *= w.scalar();
        if want_marginals {
            for v in &mut z_t {
                cost.multiplications += 1;
                *v *= w.scalar();
            }
        }
    }
    Ok((z, z_t, cost))
}

/// Evidence weight by subset enumeration.
pub fn quickscore_evidence(
    net: &Network,
    case: &CaseEvidence,
    cap: usize,
) -> Result<(f64, CostCounters), QuickscoreError> {
    let (z, _, cost) = sweep(net, case, cap, false)?;
    Ok((z.max(0.0), cost))
}

/// Evidence weight and all-disease marginals from one subset sweep.
pub fn quickscore_posteriors(
    net: &Network,
    case: &CaseEvidence,
    cap: usize,
) -> Result<Posteriors, QuickscoreError> {
    let (z, z_t, cost) = sweep(net, case, cap, true)?;
    if z <= 0.0 {
        return Err(QuickscoreError::ZeroEvidence);
    }
    let marginals = z_t.iter().map(|&v| (v / z).clamp(0.0, 1.0)).collect();
    Ok(Posteriors {
        p_evidence: z,
        marginals,
        cost,
    })
}
