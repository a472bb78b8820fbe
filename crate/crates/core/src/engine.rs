//! Exact inference by recursive distribution over positive findings with
//! partitioning of the residual bipartite graph.
//!
//! The evaluator works over an unnormalized measure on disease
//! configurations, held as a [`WeightTable`]: a scalar times, per disease, a
//! two-point weight `(w_t, w_f)` initialized to `(prior, 1 - prior)`.
//! Negative findings multiply their parents' `w_t` by `1 - c` and fold their
//! leak complement into the scalar, in time linear in the number of links.
//!
//! Positive findings contribute factors `1 - (1-leak) * prod c'` that cannot
//! be absorbed directly. The evaluator picks a finding, splits its factor
//! into the two distribution terms (one without the factor, one with the
//! complement product absorbed into the parents' `w_t` and a sign flip), and
//! partitions the remaining findings into connected components that share no
//! disease, so their contributions multiply independently. Both distribution
//! terms see the same remaining findings, so the partition is computed once
//! per distribution on a structural plan tree and shared by the whole
//! numeric walk.
//!
//! The walk returns, per subexpression, the evidence weight `z` together
//! with per-disease clamped weights `z_t` for every tracked disease, so all
//! posteriors come out of one evaluation instead of one evaluation per
//! disease. Diseases not referenced by any positive finding stay independent
//! of the rest given the negative evidence and read their posterior directly
//! off the weight table.
//!
//! Everything is deterministic: components are ordered by smallest finding
//! index, free diseases ascending, and all products are left-to-right, so
//! identical inputs give bit-identical results. Cost counters tally every
//! floating-point multiplication and addition/subtraction actually performed
//! (multiplications by an exact 1.0 scalar or leak complement are skipped,
//! not counted).

use crate::model::{CaseEvidence, Network};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    /// The observed evidence has probability zero under the model. Reachable
    /// only through leak-free positive findings whose parents have all been
    /// excluded by hard negative evidence.
    #[error("evidence has probability zero")]
    ZeroEvidence,
}

/// Arithmetic and structural work performed by an evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CostCounters {
    pub multiplications: u64,
    /// Additions and subtractions.
    pub additions: u64,
    /// Partition passes: one for the initial positive set plus exactly one
    /// per distribution (the pass is shared by both distribution terms).
    pub partition_calls: u64,
    /// Finding distributions performed while planning.
    pub distributions: u64,
    /// Total partitioning savings, summed as `|F| - max part size` over
    /// every partition pass.
    pub savings: u64,
}

/// The unnormalized two-point measure over disease configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTable {
    scalar: f64,
    w_true: Vec<f64>,
    w_false: Vec<f64>,
}

impl WeightTable {
    /// `w_t = prior`, `w_f = 1 - prior`, scalar 1: the measure whose total
    /// mass is 1 and whose evidence weight equals `P(E)`.
    pub fn from_priors(net: &Network) -> Self {
        WeightTable {
            scalar: 1.0,
            w_true: net.diseases().iter().map(|d| d.prior).collect(),
            w_false: net.diseases().iter().map(|d| 1.0 - d.prior).collect(),
        }
    }

    pub fn scalar(&self) -> f64 {
        self.scalar
    }

    pub fn true_weights(&self) -> &[f64] {
        &self.w_true
    }

    pub fn false_weights(&self) -> &[f64] {
        &self.w_false
    }
}

/// Multiplies each negative finding's complement strengths into its parents'
/// `w_t` and its leak complement into the scalar. Exactly
/// `sum of parent counts + number of leaky negatives` multiplications.
pub fn absorb_negatives(
    net: &Network,
    case: &CaseEvidence,
    w: &mut WeightTable,
    cost: &mut CostCounters,
) {
    for &j in case.negatives() {
        let f = &net.findings()[j];
        for &(d, c) in &f.parents {
            cost.additions += 1;
            cost.multiplications += 1;
            w.w_true[d] *= 1.0 - c;
        }
        if f.leak > 0.0 {
            cost.additions += 1;
            cost.multiplications += 1;
            w.scalar *= 1.0 - f.leak;
        }
    }
}

/// A connected component of the bipartite graph on remaining positive
/// findings and their live parents. Distinct components share no disease.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    /// Member findings, ascending.
    pub findings: Vec<usize>,
    /// Union of the members' live parents, ascending.
    pub diseases: Vec<usize>,
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(len: usize) -> Self {
        UnionFind {
            parent: (0..len).collect(),
            size: vec![1; len],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Splits `findings` into connected components over `scope` and returns the
/// scope diseases referenced by no finding. Components come back in
/// ascending order of their smallest finding index.
pub fn partition(
    findings: &[usize],
    scope: &[usize],
    net: &Network,
) -> (Vec<Component>, Vec<usize>) {
    let mut findings: Vec<usize> = findings.to_vec();
    findings.sort_unstable();
    findings.dedup();
    let mut scope: Vec<usize> = scope.to_vec();
    scope.sort_unstable();
    scope.dedup();

    let local = |d: usize| scope.binary_search(&d).ok();
    let mut uf = UnionFind::new(scope.len());
    let mut touched = vec![false; scope.len()];
    for &j in &findings {
        let mut first: Option<usize> = None;
        for &(d, _) in &net.findings()[j].parents {
            let Some(li) = local(d) else { continue };
            touched[li] = true;
            match first {
                None => first = Some(li),
                Some(f0) => uf.union(f0, li),
            }
        }
    }

    let mut comps: Vec<Component> = Vec::new();
    let mut comp_of_root: Vec<Option<usize>> = vec![None; scope.len()];
    for &j in &findings {
        let first_live = net.findings()[j]
            .parents
            .iter()
            .find_map(|&(d, _)| local(d));
        match first_live {
            None => {
                // A finding with no live parents forms a degenerate component
                // of its own; its factor is the constant 1 - (1-leak).
                comps.push(Component {
                    findings: vec![j],
                    diseases: Vec::new(),
                });
            }
            Some(li) => {
                let root = uf.find(li);
                let idx = match comp_of_root[root] {
                    Some(i) => i,
                    None => {
                        comps.push(Component {
                            findings: Vec::new(),
                            diseases: Vec::new(),
                        });
                        comp_of_root[root] = Some(comps.len() - 1);
                        comps.len() - 1
                    }
                };
                comps[idx].findings.push(j);
            }
        }
    }
    let mut free = Vec::new();
    for (li, &d) in scope.iter().enumerate() {
        if touched[li] {
            let idx = comp_of_root[uf.find(li)].expect("touched disease belongs to a component");
            comps[idx].diseases.push(d);
        } else {
            free.push(d);
        }
    }
    (comps, free)
}

/// Shape probe used to break selection ties: number of parts and largest
/// part size after removing `skip` from the component.
fn partition_shape(comp: &Component, skip: usize, net: &Network) -> (usize, usize) {
    let mut uf = UnionFind::new(comp.diseases.len());
    let local = |d: usize| {
        comp.diseases
            .binary_search(&d)
            .expect("component diseases contain member parents")
    };
    let mut root_counts = vec![0usize; comp.diseases.len()];
    let mut leafless = 0usize;
    for &j in &comp.findings {
        if j == skip {
            continue;
        }
        let mut first: Option<usize> = None;
        for &(d, _) in &net.findings()[j].parents {
            let Ok(li) = comp.diseases.binary_search(&d) else {
                continue;
            };
            match first {
                None => first = Some(li),
                Some(f0) => uf.union(f0, li),
            }
        }
        if first.is_none() {
            leafless += 1;
        }
    }
    for &j in &comp.findings {
        if j == skip {
            continue;
        }
        if let Some(&(d, _)) = net.findings()[j]
            .parents
            .iter()
            .find(|&&(d, _)| comp.diseases.binary_search(&d).is_ok())
        {
            root_counts[uf.find(local(d))] += 1;
        }
    }
    let mut parts = leafless;
    let mut largest = if leafless > 0 { 1 } else { 0 };
    for (li, &cnt) in root_counts.iter().enumerate() {
        if cnt > 0 && uf.find(li) == li {
            parts += 1;
            largest = largest.max(cnt);
        }
    }
    (parts, largest)
}

/// Which finding to distribute over next.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FindingSelection {
    /// Most live parents. Ties go to the candidate whose removal partitions
    /// the remainder finest (most parts, then smallest largest part), then to
    /// the lowest finding index. A finding with many parents is the most
    /// likely to straddle otherwise-independent groups, and the probe settles
    /// ties in favor of an actual cut.
    #[default]
    MaxParents,
    /// Fewest live parents, same tie-breaking. Exists to demonstrate that
    /// selection changes cost but not values.
    MinParents,
    /// Lowest finding index, unconditionally.
    FirstIndex,
}

fn select_finding(comp: &Component, net: &Network, sel: FindingSelection) -> usize {
    debug_assert!(!comp.findings.is_empty());
    if comp.findings.len() == 1 {
        return comp.findings[0];
    }
    if sel == FindingSelection::FirstIndex {
        return comp.findings[0];
    }
    let live = |j: usize| {
        net.findings()[j]
            .parents
            .iter()
            .filter(|&&(d, _)| comp.diseases.binary_search(&d).is_ok())
            .count()
    };
    let counts: Vec<usize> = comp.findings.iter().map(|&j| live(j)).collect();
    let target = match sel {
        FindingSelection::MaxParents => *counts.iter().max().unwrap(),
        FindingSelection::MinParents => *counts.iter().min().unwrap(),
        FindingSelection::FirstIndex => unreachable!(),
    };
    let candidates: Vec<usize> = comp
        .findings
        .iter()
        .zip(&counts)
        .filter(|&(_, &c)| c == target)
        .map(|(&j, _)| j)
        .collect();
    if candidates.len() == 1 {
        return candidates[0];
    }
    // (parts descending, largest part ascending, index ascending)
    candidates
        .into_iter()
        .map(|j| {
            let (parts, largest) = partition_shape(comp, j, net);
            ((usize::MAX - parts, largest, j), j)
        })
        .min_by_key(|&(key, _)| key)
        .expect("non-empty candidate set")
        .1
}

/// The default selection rule: the member with the most live parents, ties
/// broken toward the finest split of the remainder, then the lowest index.
pub fn choose_finding(comp: &Component, net: &Network) -> usize {
    select_finding(comp, net, FindingSelection::MaxParents)
}

/// One partition pass: the size of the set that was partitioned and the
/// resulting part sizes, in component order.
pub type PartitionEvent = (usize, Vec<usize>);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("partition sizes at event {index} sum to {sum}, expected {expected}")]
    SizesMismatch {
        index: usize,
        sum: usize,
        expected: usize,
    },
}

/// Total partitioning savings of a trace: the sum over events of
/// `set size - largest part size`. Each unit saved halves the remaining
/// expansion.
pub fn savings_metric(events: &[PartitionEvent]) -> Result<u64, TraceError> {
    let mut total = 0u64;
    for (index, (count, sizes)) in events.iter().enumerate() {
        let sum: usize = sizes.iter().sum();
        if sum != *count {
            return Err(TraceError::SizesMismatch {
                index,
                sum,
                expected: *count,
            });
        }
        let largest = sizes.iter().copied().max().unwrap_or(0);
        total += (count - largest) as u64;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Structural plan
// ---------------------------------------------------------------------------

/// Evaluation plan for a finding set over a disease scope. Built once per
/// query; the numeric walk re-traverses it once per distribution term, so
/// the partitioning work is never repeated.
struct Plan {
    components: Vec<PlanComp>,
    /// Scope diseases referenced by no remaining finding, ascending.
    free: Vec<usize>,
}

struct PlanComp {
    /// Complement strengths of the distributed finding: `(disease, c)`.
    parents: Vec<(usize, f64)>,
    leak: f64,
    /// Plan for the component minus the distributed finding, over the
    /// component's diseases. Shared by both distribution terms.
    rest: Box<Plan>,
}

fn build_plan(
    findings: &[usize],
    scope: &[usize],
    net: &Network,
    sel: FindingSelection,
    cost: &mut CostCounters,
    events: &mut Vec<PartitionEvent>,
) -> Plan {
    cost.partition_calls += 1;
    let (comps, free) = partition(findings, scope, net);
    if !findings.is_empty() {
        let sizes: Vec<usize> = comps.iter().map(|c| c.findings.len()).collect();
        let largest = sizes.iter().copied().max().unwrap_or(0);
        cost.savings += (findings.len() - largest) as u64;
        events.push((findings.len(), sizes));
    }
    let components = comps
        .into_iter()
        .map(|comp| {
            let j = select_finding(&comp, net, sel);
            cost.distributions += 1;
            let rest: Vec<usize> = comp.findings.iter().copied().filter(|&f| f != j).collect();
            let rest_plan = build_plan(&rest, &comp.diseases, net, sel, cost, events);
            let f = &net.findings()[j];
            PlanComp {
                parents: f.parents.clone(),
                leak: f.leak,
                rest: Box::new(rest_plan),
            }
        })
        .collect();
    Plan { components, free }
}

// ---------------------------------------------------------------------------
// Numeric walk
// ---------------------------------------------------------------------------

/// Which diseases need clamped weights.
enum Track<'a> {
    All,
    Mask(&'a [bool]),
    One(usize),
    None,
}

impl Track<'_> {
    #[inline]
    fn tracks(&self, d: usize) -> bool {
        match self {
            Track::All => true,
            Track::Mask(m) => m[d],
            Track::One(t) => *t == d,
            Track::None => false,
        }
    }
}

/// Result for one subexpression: evidence weight plus clamped weights for
/// the tracked diseases it covers, in block order.
struct SubResult {
    z: f64,
    z_t: Vec<(usize, f64)>,
}

fn walk(
    plan: &Plan,
    w_true: &mut [f64],
    w_false: &[f64],
    track: &Track<'_>,
    cost: &mut CostCounters,
) -> SubResult {
    let mut blocks: Vec<SubResult> = Vec::with_capacity(plan.components.len() + plan.free.len());
    for comp in &plan.components {
        // Term without the finding's factor.
        let kept = walk(&comp.rest, w_true, w_false, track, cost);
        // Term with the complement strengths absorbed; restored afterwards so
        // sibling terms see untouched weights.
        let saved: Vec<f64> = comp.parents.iter().map(|&(d, _)| w_true[d]).collect();
        for &(d, c) in &comp.parents {
            cost.additions += 1;
            cost.multiplications += 1;
            w_true[d] *= 1.0 - c;
        }
        let absorbed = walk(&comp.rest, w_true, w_false, track, cost);
        for (&(d, _), &old) in comp.parents.iter().zip(&saved) {
            w_true[d] = old;
        }
        blocks.push(subtract_term(kept, absorbed, comp.leak, cost));
    }
    for &d in &plan.free {
        cost.additions += 1;
        let z = w_true[d] + w_false[d];
        let z_t = if track.tracks(d) {
            vec![(d, w_true[d])]
        } else {
            Vec::new()
        };
        blocks.push(SubResult { z, z_t });
    }
    combine_blocks(blocks, cost)
}

/// `kept - (1 - leak) * absorbed`, entrywise over z and the tracked weights.
fn subtract_term(
    kept: SubResult,
    absorbed: SubResult,
    leak: f64,
    cost: &mut CostCounters,
) -> SubResult {
    let leaky = leak > 0.0;
    let complement = if leaky {
        cost.additions += 1;
        1.0 - leak
    } else {
        1.0
    };
    let scale = |v: f64, cost: &mut CostCounters| {
        if leaky {
            cost.multiplications += 1;
            complement * v
        } else {
            v
        }
    };
    cost.additions += 1;
    let z = kept.z - scale(absorbed.z, cost);
    debug_assert_eq!(kept.z_t.len(), absorbed.z_t.len());
    let z_t = kept
        .z_t
        .into_iter()
        .zip(absorbed.z_t)
        .map(|((d, a), (d2, b))| {
            debug_assert_eq!(d, d2);
            cost.additions += 1;
            (d, a - scale(b, cost))
        })
        .collect();
    SubResult { z, z_t }
}

/// Multiplies independent blocks together. `z` is the left-to-right product;
/// each tracked weight is scaled by the product of all other blocks via
/// prefix/suffix products, so a vanishing block zeroes everything without
/// any division.
fn combine_blocks(mut blocks: Vec<SubResult>, cost: &mut CostCounters) -> SubResult {
    match blocks.len() {
        0 => {
            return SubResult {
                z: 1.0,
                z_t: Vec::new(),
            }
        }
        1 => return blocks.pop().unwrap(),
        _ => {}
    }
    let k = blocks.len();
    let first_tracked = blocks.iter().position(|b| !b.z_t.is_empty());
    if first_tracked.is_none() {
        let mut z = blocks[0].z;
        for b in &blocks[1..] {
            cost.multiplications += 1;
            z *= b.z;
        }
        return SubResult { z, z_t: Vec::new() };
    }
    let lo = first_tracked.unwrap();
    let zs: Vec<f64> = blocks.iter().map(|b| b.z).collect();
    let mut prefix = vec![1.0; k];
    for i in 1..k {
        cost.multiplications += 1;
        prefix[i] = prefix[i - 1] * zs[i - 1];
    }
    cost.multiplications += 1;
    let z = prefix[k - 1] * zs[k - 1];
    // Suffix products are only needed from the first tracked block on, and
    // the right-to-left accumulation keeps shared entries bit-identical no
    // matter how few diseases are tracked.
    let mut suffix = vec![1.0; k];
    for i in (lo..k - 1).rev() {
        cost.multiplications += 1;
        suffix[i] = suffix[i + 1] * zs[i + 1];
    }
    let mut z_t = Vec::with_capacity(blocks.iter().map(|b| b.z_t.len()).sum());
    for (i, b) in blocks.into_iter().enumerate() {
        for (d, v) in b.z_t {
            cost.multiplications += 2;
            z_t.push((d, v * prefix[i] * suffix[i]));
        }
    }
    SubResult { z, z_t }
}

fn eval_core(
    net: &Network,
    findings: &[usize],
    scope: &[usize],
    w: &WeightTable,
    track: &Track<'_>,
    sel: FindingSelection,
    cost: &mut CostCounters,
) -> SubResult {
    let mut local_events = Vec::new();
    let plan = build_plan(findings, scope, net, sel, cost, &mut local_events);
    let mut w_true = w.w_true.clone();
    let mut result = walk(&plan, &mut w_true, &w.w_false, track, cost);
    if w.scalar != 1.0 {
        cost.multiplications += 1;
        result.z *= w.scalar;
        for (_, v) in &mut result.z_t {
            cost.multiplications += 1;
            *v *= w.scalar;
        }
    }
    result
}

/// Evidence weight plus per-disease clamped weights over a scope.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    /// Unnormalized evidence weight; equals `P(E)` when the table was
    /// initialized from priors.
    pub z: f64,
    /// `(disease, clamped weight)` for every scope disease, ascending.
    pub z_t: Vec<(usize, f64)>,
    pub cost: CostCounters,
}

/// Evaluates `findings` over `scope` against the given weights, returning
/// the evidence weight and the clamped weight of every scope disease.
///
/// Requires every finding's parents to lie inside `scope`.
pub fn eval(net: &Network, findings: &[usize], w: &WeightTable, scope: &[usize]) -> EvalResult {
    let mut scope: Vec<usize> = scope.to_vec();
    scope.sort_unstable();
    scope.dedup();
    let mut findings: Vec<usize> = findings.to_vec();
    findings.sort_unstable();
    findings.dedup();
    for &j in &findings {
        for &(d, _) in &net.findings()[j].parents {
            assert!(
                scope.binary_search(&d).is_ok(),
                "parent {d} of finding {j} outside the evaluation scope"
            );
        }
    }
    let mut cost = CostCounters::default();
    let result = eval_core(
        net,
        &findings,
        &scope,
        w,
        &Track::All,
        FindingSelection::MaxParents,
        &mut cost,
    );
    let z = result.z.max(0.0);
    let mut z_t = result.z_t;
    z_t.sort_unstable_by_key(|&(d, _)| d);
    // Guard against sign noise from cancellation; exact results always lie
    // inside [0, z].
    for (_, v) in &mut z_t {
        *v = v.clamp(0.0, z);
    }
    EvalResult { z, z_t, cost }
}

/// Evidence weight and all-disease posterior marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct Posteriors {
    pub p_evidence: f64,
    /// One entry per disease, in network order.
    pub marginals: Vec<f64>,
    pub cost: CostCounters,
}

/// Wall-clock spent in each phase of [`posteriors_timed`].
#[derive(Clone, Copy, Debug, Default)]
pub struct PhaseTimes {
    pub absorb_seconds: f64,
    pub partition_seconds: f64,
    pub evaluate_seconds: f64,
}

/// Posterior of a single target disease, with the shared evidence weight.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetPosterior {
    pub p_evidence: f64,
    pub posterior: f64,
    pub cost: CostCounters,
}

fn constrained_mask(net: &Network, case: &CaseEvidence) -> Vec<bool> {
    let mut mask = vec![false; net.n_diseases()];
    for &j in case.positives() {
        for &(d, _) in &net.findings()[j].parents {
            mask[d] = true;
        }
    }
    mask
}

/// Posterior from the absorbed table for a disease untouched by any positive
/// finding: negative evidence keeps it independent of everything else.
fn free_marginal(w: &WeightTable, d: usize) -> f64 {
    let denom = w.w_true[d] + w.w_false[d];
    if denom > 0.0 {
        (w.w_true[d] / denom).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Full pipeline: weights from priors, negative absorption, one shared
/// evaluation over the positive findings tracking every constrained disease.
pub fn posteriors(net: &Network, case: &CaseEvidence) -> Result<Posteriors, EngineError> {
    posteriors_with(net, case, FindingSelection::MaxParents)
}

pub fn posteriors_with(
    net: &Network,
    case: &CaseEvidence,
    sel: FindingSelection,
) -> Result<Posteriors, EngineError> {
    posteriors_timed(net, case, sel).map(|(p, _)| p)
}

/// As [`posteriors_with`], additionally reporting per-phase wall-clock.
pub fn posteriors_timed(
    net: &Network,
    case: &CaseEvidence,
    sel: FindingSelection,
) -> Result<(Posteriors, PhaseTimes), EngineError> {
    let mut cost = CostCounters::default();
    let mut times = PhaseTimes::default();
    let t0 = std::time::Instant::now();
    let mut w = WeightTable::from_priors(net);
    absorb_negatives(net, case, &mut w, &mut cost);
    times.absorb_seconds = t0.elapsed().as_secs_f64();

    let t1 = std::time::Instant::now();
    let scope: Vec<usize> = (0..net.n_diseases()).collect();
    let mut events = Vec::new();
    let plan = build_plan(case.positives(), &scope, net, sel, &mut cost, &mut events);
    times.partition_seconds = t1.elapsed().as_secs_f64();

    let t2 = std::time::Instant::now();
    let mask = constrained_mask(net, case);
    let track = Track::Mask(&mask);
    let mut w_true = w.w_true.clone();
    let mut result = walk(&plan, &mut w_true, &w.w_false, &track, &mut cost);
    if w.scalar != 1.0 {
        cost.multiplications += 1;
        result.z *= w.scalar;
        for (_, v) in &mut result.z_t {
            cost.multiplications += 1;
            *v *= w.scalar;
        }
    }
    let z = result.z;
    if z <= 0.0 {
        return Err(EngineError::ZeroEvidence);
    }
    let mut marginals = vec![0.0; net.n_diseases()];
    for (d, v) in result.z_t {
        marginals[d] = (v / z).clamp(0.0, 1.0);
    }
    for (d, m) in marginals.iter_mut().enumerate() {
        if !mask[d] {
            *m = free_marginal(&w, d);
        }
    }
    times.evaluate_seconds = t2.elapsed().as_secs_f64();
    Ok((
        Posteriors {
            p_evidence: z,
            marginals,
            cost,
        },
        times,
    ))
}

/// Same evaluation tracking only one disease. Bit-identical to the matching
/// entry of [`posteriors`]: the shared-weight arithmetic is unchanged, only
/// the per-disease bookkeeping is dropped.
pub fn posterior_single(
    net: &Network,
    case: &CaseEvidence,
    target: usize,
) -> Result<TargetPosterior, EngineError> {
    posterior_single_with(net, case, target, FindingSelection::MaxParents)
}

pub fn posterior_single_with(
    net: &Network,
    case: &CaseEvidence,
    target: usize,
    sel: FindingSelection,
) -> Result<TargetPosterior, EngineError> {
    assert!(target < net.n_diseases(), "target disease out of bounds");
    let mut cost = CostCounters::default();
    let mut w = WeightTable::from_priors(net);
    absorb_negatives(net, case, &mut w, &mut cost);
    let scope: Vec<usize> = (0..net.n_diseases()).collect();
    let mask = constrained_mask(net, case);
    let track = if mask[target] {
        Track::One(target)
    } else {
        Track::None
    };
    let result = eval_core(net, case.positives(), &scope, &w, &track, sel, &mut cost);
    let z = result.z;
    if z <= 0.0 {
        return Err(EngineError::ZeroEvidence);
    }
    let posterior = if mask[target] {
        let (_, v) = result
            .z_t
            .iter()
            .find(|&&(d, _)| d == target)
            .expect("tracked disease present in result");
        (v / z).clamp(0.0, 1.0)
    } else {
        free_marginal(&w, target)
    };
    Ok(TargetPosterior {
        p_evidence: z,
        posterior,
        cost,
    })
}

/// Builds the evaluation plan without walking it, returning the partition
/// trace (one event per pass over a non-empty set) and the structural
/// counters.
pub fn partition_trace(net: &Network, case: &CaseEvidence) -> (Vec<PartitionEvent>, CostCounters) {
    partition_trace_with(net, case, FindingSelection::MaxParents)
}

pub fn partition_trace_with(
    net: &Network,
    case: &CaseEvidence,
    sel: FindingSelection,
) -> (Vec<PartitionEvent>, CostCounters) {
    let mut cost = CostCounters::default();
    let mut events = Vec::new();
    let scope: Vec<usize> = (0..net.n_diseases()).collect();
    build_plan(case.positives(), &scope, net, sel, &mut cost, &mut events);
    (events, cost)
}

/// Evidence weight only (no marginals); used by the incremental refiner to
/// price candidate findings.
pub(crate) fn evidence_weight(net: &Network, case: &CaseEvidence) -> (f64, CostCounters) {
    let mut cost = CostCounters::default();
    let mut w = WeightTable::from_priors(net);
    absorb_negatives(net, case, &mut w, &mut cost);
    let scope: Vec<usize> = (0..net.n_diseases()).collect();
    let result = eval_core(
        net,
        case.positives(),
        &scope,
        &w,
        &Track::None,
        FindingSelection::MaxParents,
        &mut cost,
    );
    (result.z.max(0.0), cost)
}
