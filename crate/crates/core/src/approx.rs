//! Anytime incremental refinement of posteriors.
//!
//! All negative evidence is absorbed up front; positive findings are then
//! processed one at a time in an informativeness order, with exact
//! posteriors recomputed after each step. The trace records every posterior
//! snapshot, the lowest unprocessed finding prior per step, per-step cost,
//! and the KL divergence of each snapshot from the final one, so a consumer
//! can stop early and know how settled the ranking already is.
//!
//! The ordering heuristic balances difficulty against informativeness: a
//! finding scoring `prior * sqrt(parent count) / 100` is cheap to process
//! when it has few parents and informative when its current prior is low, so
//! the smallest score goes next. The leading constant keeps the score on a
//! familiar scale; it cannot change the argmin.

use crate::engine::{self, CostCounters, EngineError};
use crate::model::{CaseEvidence, Network};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ApproxError {
    #[error("evidence has probability zero")]
    ZeroEvidence,
    #[error("given order is not a permutation of the positive findings")]
    NotAPermutation,
    #[error("marginal vectors have different lengths: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl From<EngineError> for ApproxError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::ZeroEvidence => ApproxError::ZeroEvidence,
        }
    }
}

/// How a candidate's finding prior is estimated during ordering.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PriorMode {
    /// `1 - Z(processed + candidate negative) / Z(processed)`: two engine
    /// evaluations per candidate.
    Exact,
    /// Independence approximation from the current posterior marginals;
    /// exact whenever the candidate shares no parent with the processed
    /// positives.
    #[default]
    Marginal,
}

/// Processing order for the positive findings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrderPolicy {
    /// First `phase_one` findings by ascending parent count, then greedily
    /// the candidate minimizing [`score_finding`], re-estimating priors
    /// after every step.
    Heuristic { phase_one: usize },
    /// Static, by ascending parent count.
    AscendingParents,
    /// Static, by descending parent count.
    DescendingParents,
    /// An explicit order; must be a permutation of the positives.
    Given(Vec<usize>),
}

/// Difficulty/informativeness score; lower is processed first.
pub fn score_finding(prior_est: f64, num_parents: usize) -> f64 {
    prior_est * (num_parents as f64).sqrt() / 100.0
}

/// Probability that `candidate` is positive given the processed evidence.
pub fn finding_prior(
    net: &Network,
    processed: &CaseEvidence,
    candidate: usize,
    mode: PriorMode,
) -> Result<f64, ApproxError> {
    assert!(
        !processed.positives().contains(&candidate) && !processed.negatives().contains(&candidate),
        "candidate already processed"
    );
    match mode {
        PriorMode::Exact => {
            let (z0, _) = engine::evidence_weight(net, processed);
            if z0 <= 0.0 {
                return Err(ApproxError::ZeroEvidence);
            }
            let mut negatives = processed.negatives().to_vec();
            negatives.push(candidate);
            let with_candidate = CaseEvidence::new(processed.positives().to_vec(), negatives, net)
                .expect("candidate is unprocessed");
            let (z1, _) = engine::evidence_weight(net, &with_candidate);
            Ok((1.0 - z1 / z0).clamp(0.0, 1.0))
        }
        PriorMode::Marginal => {
            let post = engine::posteriors(net, processed)?;
            Ok(prior_from_marginals(net, &post.marginals, candidate))
        }
    }
}

/// Independence estimate of `P(candidate = true)` from per-disease marginals.
fn prior_from_marginals(net: &Network, q: &[f64], candidate: usize) -> f64 {
    let f = &net.findings()[candidate];
    let mut off = 1.0 - f.leak;
    for &(d, c) in &f.parents {
        off *= (1.0 - q[d]) + q[d] * (1.0 - c);
    }
    (1.0 - off).clamp(0.0, 1.0)
}

/// Trace of one incremental run. Snapshot 0 is the negatives-only posterior;
/// snapshot `t` adds the first `t` findings of `order`.
#[derive(Clone, Debug)]
pub struct ApproxTrace {
    /// Positive findings in processing order.
    pub order: Vec<usize>,
    /// `order.len() + 1` marginal vectors.
    pub snapshots: Vec<Vec<f64>>,
    /// Lowest unprocessed finding prior after each step; 1.0 once nothing is
    /// left unprocessed.
    pub lep_curve: Vec<f64>,
    /// Divergence of each snapshot from the final one; last entry is 0.
    pub kl_curve: Vec<f64>,
    /// Cost of each step's evaluation.
    pub costs: Vec<CostCounters>,
}

impl ApproxTrace {
    /// Sum of the KL curve; the area metric used to compare orderings.
    pub fn kl_area(&self) -> f64 {
        self.kl_curve.iter().sum()
    }
}

/// Sum over diseases of the binary KL divergence `KL(final || partial)`.
/// Identical entries contribute exactly zero; otherwise the partial entry is
/// clamped away from {0,1} by 1e-12.
pub fn kl_divergence(final_m: &[f64], partial: &[f64]) -> Result<f64, ApproxError> {
    if final_m.len() != partial.len() {
        return Err(ApproxError::DimensionMismatch {
            expected: final_m.len(),
            got: partial.len(),
        });
    }
    const EPS: f64 = 1e-12;
    let mut sum = 0.0;
    for (&p, &q) in final_m.iter().zip(partial) {
        if p == q {
            continue;
        }
        let q = q.clamp(EPS, 1.0 - EPS);
        if p > 0.0 {
            sum += p * (p / q).ln();
        }
        if p < 1.0 {
            sum += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
        }
    }
    Ok(sum)
}

/// Resolves a policy to a full processing order without recording a trace.
pub fn order_findings(
    net: &Network,
    case: &CaseEvidence,
    policy: &OrderPolicy,
    mode: PriorMode,
) -> Result<Vec<usize>, ApproxError> {
    Ok(run_incremental(net, case, policy, mode)?.order)
}

fn by_parent_count_asc(net: &Network, positives: &[usize]) -> Vec<usize> {
    let mut v = positives.to_vec();
    v.sort_by_key(|&j| (net.findings()[j].parent_count(), j));
    v
}

fn by_parent_count_desc(net: &Network, positives: &[usize]) -> Vec<usize> {
    let mut v = positives.to_vec();
    v.sort_by_key(|&j| (usize::MAX - net.findings()[j].parent_count(), j));
    v
}

/// Runs the incremental protocol: negatives first, then one positive finding
/// per step under `policy`, recomputing exact posteriors each time.
pub fn run_incremental(
    net: &Network,
    case: &CaseEvidence,
    policy: &OrderPolicy,
    mode: PriorMode,
) -> Result<ApproxTrace, ApproxError> {
    let positives = case.positives();
    let static_order: Option<Vec<usize>> = match policy {
        OrderPolicy::AscendingParents => Some(by_parent_count_asc(net, positives)),
        OrderPolicy::DescendingParents => Some(by_parent_count_desc(net, positives)),
        OrderPolicy::Given(list) => {
            let mut sorted = list.clone();
            sorted.sort_unstable();
            if sorted != positives {
                return Err(ApproxError::NotAPermutation);
            }
            Some(list.clone())
        }
        OrderPolicy::Heuristic { .. } => None,
    };
    let phase_one_order = match policy {
        OrderPolicy::Heuristic { .. } => by_parent_count_asc(net, positives),
        _ => Vec::new(),
    };

    let mut remaining: Vec<usize> = positives.to_vec();
    let mut processed: Vec<usize> = Vec::new();
    let mut order = Vec::with_capacity(positives.len());
    let mut snapshots = Vec::with_capacity(positives.len() + 1);
    let mut lep_curve = Vec::with_capacity(positives.len() + 1);
    let mut costs = Vec::with_capacity(positives.len() + 1);

    loop {
        let evidence = CaseEvidence::new(processed.clone(), case.negatives().to_vec(), net)
            .expect("processed positives stay disjoint from negatives");
        let post = engine::posteriors(net, &evidence)?;
        costs.push(post.cost);

        // Candidate priors under the current evidence serve both the greedy
        // choice and the lowest-unprocessed-prior curve.
        let mut priors: Vec<(usize, f64)> = Vec::with_capacity(remaining.len());
        for &j in &remaining {
            let prior = match mode {
                PriorMode::Marginal => prior_from_marginals(net, &post.marginals, j),
                PriorMode::Exact => finding_prior(net, &evidence, j, PriorMode::Exact)?,
            };
            priors.push((j, prior));
        }
        lep_curve.push(
            priors
                .iter()
                .map(|&(_, p)| p)
                .fold(f64::INFINITY, f64::min)
                .min(1.0),
        );
        snapshots.push(post.marginals);

        if remaining.is_empty() {
            break;
        }
        let next = match policy {
            OrderPolicy::Heuristic { phase_one } => {
                if order.len() < *phase_one {
                    // Phase one consumes the static ascending-parents prefix.
                    *phase_one_order
                        .iter()
                        .find(|j| remaining.contains(j))
                        .expect("remaining findings present in phase-one order")
                } else {
                    priors
                        .iter()
                        .map(|&(j, p)| (j, score_finding(p, net.findings()[j].parent_count())))
                        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                        .expect("remaining is non-empty")
                        .0
                }
            }
            _ => static_order.as_ref().expect("static policy")[order.len()],
        };
        order.push(next);
        processed.push(next);
        remaining.retain(|&j| j != next);
    }

    let final_snapshot = snapshots.last().expect("at least one snapshot").clone();
    let kl_curve = snapshots
        .iter()
        .map(|s| kl_divergence(&final_snapshot, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ApproxTrace {
        order,
        snapshots,
        lep_curve,
        kl_curve,
        costs,
    })
}

/// Settling summary of a trace: when the top disease and the top four locked
/// in, and how low the unprocessed priors were at those points.
#[derive(Clone, Debug, PartialEq)]
pub struct SettlingMetrics {
    /// First step from which the top disease never changes.
    pub one_ip: usize,
    /// First step from which the top-four set never changes.
    pub four_is: usize,
    /// First step from which the top-four order never changes.
    pub four_ip: usize,
    /// |posterior of the final top disease at its first appearance on top
    /// minus its final posterior|.
    pub error_top: f64,
    /// Lowest unprocessed finding prior at `one_ip`.
    pub lep: f64,
    /// Lowest unprocessed finding prior at the end of processing.
    pub flep: f64,
}

/// Ranks diseases by posterior descending, ties by index ascending.
fn ranking(marginals: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..marginals.len()).collect();
    idx.sort_by(|&a, &b| marginals[b].total_cmp(&marginals[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// First index from which `stable` holds for every later snapshot.
fn settle_point<T: PartialEq>(per_step: &[T]) -> usize {
    let last = per_step.last().expect("non-empty trace");
    let mut settle = per_step.len() - 1;
    while settle > 0 && per_step[settle - 1] == *last {
        settle -= 1;
    }
    settle
}

pub fn settling_metrics(trace: &ApproxTrace) -> SettlingMetrics {
    let n = trace.snapshots.last().map_or(0, Vec::len);
    if n == 0 {
        return SettlingMetrics {
            one_ip: 0,
            four_is: 0,
            four_ip: 0,
            error_top: 0.0,
            lep: *trace.lep_curve.first().unwrap_or(&1.0),
            flep: *trace.lep_curve.last().unwrap_or(&1.0),
        };
    }
    let k = 4.min(n);
    let tops: Vec<usize> = trace.snapshots.iter().map(|s| ranking(s, 1)[0]).collect();
    let top_k: Vec<Vec<usize>> = trace.snapshots.iter().map(|s| ranking(s, k)).collect();
    let top_k_sets: Vec<Vec<usize>> = top_k
        .iter()
        .map(|v| {
            let mut s = v.clone();
            s.sort_unstable();
            s
        })
        .collect();
    let one_ip = settle_point(&tops);
    let four_is = settle_point(&top_k_sets);
    let four_ip = settle_point(&top_k);

    let final_top = *tops.last().expect("non-empty trace");
    let final_posterior = trace.snapshots.last().expect("non-empty")[final_top];
    let first_on_top = tops
        .iter()
        .position(|&t| t == final_top)
        .expect("final top appears at least at the last step");
    let error_top = (trace.snapshots[first_on_top][final_top] - final_posterior).abs();

    SettlingMetrics {
        one_ip,
        four_is,
        four_ip,
        error_top,
        lep: trace.lep_curve[one_ip],
        flep: *trace.lep_curve.last().expect("non-empty"),
    }
}

/// Renders the trace as TSV: `step finding_id lep kl mults`, one row per
/// snapshot. Step 0 (negatives only) has no finding and prints `-`.
pub fn trace_to_tsv(trace: &ApproxTrace, net: &Network) -> String {
    use crate::model::format_significant as sig;
    let mut out = String::from("step\tfinding_id\tlep\tkl\tmults\n");
    for t in 0..trace.snapshots.len() {
        let id = if t == 0 {
            "-"
        } else {
            &net.findings()[trace.order[t - 1]].id
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            t,
            id,
            sig(trace.lep_curve[t], 12),
            sig(trace.kl_curve[t], 12),
            trace.costs[t].multiplications,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_network;
    use crate::oracle;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn score_matches_formula() {
        close(score_finding(0.5, 4), 0.01, 1e-18);
        assert_eq!(score_finding(0.0, 17), 0.0);
        let narrow = score_finding(0.3, 1);
        let wide = score_finding(0.3, 100);
        close(wide / narrow, 10.0, 1e-12);
    }

    #[test]
    fn score_is_monotone() {
        assert!(score_finding(0.4, 5) > score_finding(0.3, 5));
        assert!(score_finding(0.4, 6) > score_finding(0.4, 5));
    }

    #[test]
    fn finding_prior_single_parent_no_evidence() {
        let net = parse_network("bn2o 1\ndisease d1 0.5\nfinding f1\nedge f1 d1 0.8").unwrap();
        let empty = CaseEvidence::empty();
        for mode in [PriorMode::Exact, PriorMode::Marginal] {
            close(finding_prior(&net, &empty, 0, mode).unwrap(), 0.4, 1e-12);
        }
    }

    #[test]
    fn finding_prior_tends_to_leak() {
        let net =
            parse_network("bn2o 1\ndisease d1 0.5\nfinding f1 leak=0.3\nedge f1 d1 1e-12").unwrap();
        let p = finding_prior(&net, &CaseEvidence::empty(), 0, PriorMode::Marginal).unwrap();
        close(p, 0.3, 1e-9);
    }

    #[test]
    fn modes_agree_when_parents_are_disjoint() {
        // Processed positive f1 touches d1 only; candidate f2 touches d2,d3.
        let net = parse_network(
            "bn2o 1\ndisease d1 0.4\ndisease d2 0.3\ndisease d3 0.6\n\
             finding f1\nfinding f2\nfinding f3\n\
             edge f1 d1 0.9\nedge f2 d2 0.7\nedge f2 d3 0.5\nedge f3 d2 0.4",
        )
        .unwrap();
        let processed = CaseEvidence::new(vec![0], vec![2], &net).unwrap();
        let exact = finding_prior(&net, &processed, 1, PriorMode::Exact).unwrap();
        let marginal = finding_prior(&net, &processed, 1, PriorMode::Marginal).unwrap();
        close(exact, marginal, 1e-9);
        // The exact mode agrees with direct enumeration.
        let (z0, _) = oracle::enumerate_posteriors(&net, &processed).unwrap();
        let with_neg = CaseEvidence::new(vec![0], vec![1, 2], &net).unwrap();
        let mut sum = 0.0;
        for mask in 0u64..(1 << 3) {
            let config: Vec<bool> = (0..3).map(|i| mask & (1 << i) != 0).collect();
            sum += oracle::joint_probability(&net, &config, &with_neg);
        }
        close(exact, 1.0 - sum / z0, 1e-12);
    }

    fn fan_net() -> Network {
        // Parent counts: f1 -> 4, f2 -> 2, f3 -> 7 over ten diseases.
        let mut text = String::from("bn2o 1\n");
        for i in 1..=10 {
            text.push_str(&format!("disease d{i} 0.2\n"));
        }
        text.push_str("finding f1\nfinding f2\nfinding f3\n");
        for i in 1..=4 {
            text.push_str(&format!("edge f1 d{i} 0.5\n"));
        }
        for i in 5..=6 {
            text.push_str(&format!("edge f2 d{i} 0.5\n"));
        }
        for i in 1..=7 {
            text.push_str(&format!("edge f3 d{i} 0.5\n"));
        }
        parse_network(&text).unwrap()
    }

    #[test]
    fn static_orders() {
        let net = fan_net();
        let case = CaseEvidence::new(vec![0, 1, 2], vec![], &net).unwrap();
        let asc = order_findings(
            &net,
            &case,
            &OrderPolicy::AscendingParents,
            PriorMode::Marginal,
        )
        .unwrap();
        assert_eq!(asc, vec![1, 0, 2]);
        let desc = order_findings(
            &net,
            &case,
            &OrderPolicy::DescendingParents,
            PriorMode::Marginal,
        )
        .unwrap();
        assert_eq!(desc, vec![2, 0, 1]);
    }

    #[test]
    fn heuristic_with_large_phase_one_degenerates_to_ascending() {
        let net = fan_net();
        let case = CaseEvidence::new(vec![0, 1, 2], vec![], &net).unwrap();
        let order = order_findings(
            &net,
            &case,
            &OrderPolicy::Heuristic { phase_one: 8 },
            PriorMode::Marginal,
        )
        .unwrap();
        assert_eq!(order, vec![1, 0, 2]);
    }

    #[test]
    fn given_order_must_be_a_permutation() {
        let net = fan_net();
        let case = CaseEvidence::new(vec![0, 2], vec![], &net).unwrap();
        let err = run_incremental(
            &net,
            &case,
            &OrderPolicy::Given(vec![0, 1]),
            PriorMode::Marginal,
        )
        .unwrap_err();
        assert_eq!(err, ApproxError::NotAPermutation);
        let ok = run_incremental(
            &net,
            &case,
            &OrderPolicy::Given(vec![2, 0]),
            PriorMode::Marginal,
        )
        .unwrap();
        assert_eq!(ok.order, vec![2, 0]);
        // Canonical given order lands exactly on the full posterior.
        let canonical = run_incremental(
            &net,
            &case,
            &OrderPolicy::Given(case.positives().to_vec()),
            PriorMode::Marginal,
        )
        .unwrap();
        let full = engine::posteriors(&net, &case).unwrap();
        assert_eq!(canonical.snapshots.last().unwrap(), &full.marginals);
    }

    #[test]
    fn trace_shape_and_final_agreement() {
        let net = fan_net();
        let case = CaseEvidence::new(vec![0, 2], vec![1], &net).unwrap();
        let trace = run_incremental(
            &net,
            &case,
            &OrderPolicy::Heuristic { phase_one: 1 },
            PriorMode::Marginal,
        )
        .unwrap();
        assert_eq!(trace.snapshots.len(), trace.order.len() + 1);
        assert_eq!(trace.lep_curve.len(), trace.snapshots.len());
        assert_eq!(*trace.kl_curve.last().unwrap(), 0.0);
        // The last snapshot is the full posterior.
        let full = engine::posteriors(&net, &case).unwrap();
        assert_eq!(trace.snapshots.last().unwrap(), &full.marginals);
        // All snapshots are probabilities.
        for s in &trace.snapshots {
            assert!(s.iter().all(|&m| (0.0..=1.0).contains(&m)));
        }
    }

    #[test]
    fn single_positive_finding_trace() {
        let net = parse_network("bn2o 1\ndisease d1 0.5\nfinding f1\nedge f1 d1 0.8").unwrap();
        let case = CaseEvidence::new(vec![0], vec![], &net).unwrap();
        let trace = run_incremental(
            &net,
            &case,
            &OrderPolicy::AscendingParents,
            PriorMode::Marginal,
        )
        .unwrap();
        assert_eq!(trace.snapshots.len(), 2);
        let full = engine::posteriors(&net, &case).unwrap();
        assert_eq!(trace.snapshots[1], full.marginals);
        assert_eq!(trace.kl_curve[1], 0.0);
    }

    #[test]
    fn kl_divergence_basics() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        close(
            kl_divergence(&[1.0], &[0.5]).unwrap(),
            std::f64::consts::LN_2,
            1e-12,
        );
        let ab = kl_divergence(&[0.9], &[0.4]).unwrap();
        let ba = kl_divergence(&[0.4], &[0.9]).unwrap();
        assert!((ab - ba).abs() > 1e-3, "KL should be asymmetric");
        assert!(matches!(
            kl_divergence(&[0.5], &[0.5, 0.5]),
            Err(ApproxError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn settling_constant_argmax_settles_at_zero() {
        let trace = ApproxTrace {
            order: vec![0, 1],
            snapshots: vec![
                vec![0.9, 0.5, 0.1],
                vec![0.8, 0.3, 0.4],
                vec![0.7, 0.2, 0.3],
            ],
            lep_curve: vec![0.2, 0.4, 1.0],
            kl_curve: vec![0.5, 0.1, 0.0],
            costs: vec![CostCounters::default(); 3],
        };
        let m = settling_metrics(&trace);
        assert_eq!(m.one_ip, 0);
        assert_eq!(m.four_is, 0);
        // Internal order of the top three changes between steps 0 and 1.
        assert_eq!(m.four_ip, 1);
        close(m.error_top, 0.2, 1e-15);
        close(m.lep, 0.2, 1e-15);
        close(m.flep, 1.0, 1e-15);
    }

    #[test]
    fn settling_flip_at_last_step() {
        let trace = ApproxTrace {
            order: vec![0, 1],
            snapshots: vec![vec![0.9, 0.1], vec![0.9, 0.1], vec![0.1, 0.9]],
            lep_curve: vec![0.3, 0.5, 1.0],
            kl_curve: vec![1.0, 1.0, 0.0],
            costs: vec![CostCounters::default(); 3],
        };
        let m = settling_metrics(&trace);
        assert_eq!(m.one_ip, 2);
        // Fewer than four diseases: the top set is everything and never
        // changes, internal order settles with the flip.
        assert_eq!(m.four_is, 0);
        assert_eq!(m.four_ip, 2);
        assert_eq!(m.error_top, 0.0);
        close(m.lep, 1.0, 1e-15);
    }

    #[test]
    fn four_settles_no_later_than_ordered_four() {
        let net = fan_net();
        let case = CaseEvidence::new(vec![0, 1, 2], vec![], &net).unwrap();
        let trace = run_incremental(
            &net,
            &case,
            &OrderPolicy::Heuristic { phase_one: 8 },
            PriorMode::Marginal,
        )
        .unwrap();
        let m = settling_metrics(&trace);
        assert!(m.four_is <= m.four_ip);
        assert!(m.one_ip <= trace.order.len());
    }

    #[test]
    fn tsv_has_one_row_per_snapshot() {
        let net = fan_net();
        let case = CaseEvidence::new(vec![0, 1], vec![2], &net).unwrap();
        let trace = run_incremental(
            &net,
            &case,
            &OrderPolicy::AscendingParents,
            PriorMode::Marginal,
        )
        .unwrap();
        let tsv = trace_to_tsv(&trace, &net);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "step\tfinding_id\tlep\tkl\tmults");
        assert_eq!(lines.len(), 1 + trace.snapshots.len());
        assert!(lines[1].starts_with("0\t-\t"));
    }
}
