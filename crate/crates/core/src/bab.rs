//! Complete verification by branch and bound over ReLU splits.
//!
//! The loop maintains a worst-bound-first queue of unverified subdomains.
//! Each iteration pops a batch, picks one unstable neuron per domain with
//! [`babsr_score`] or [`fsb_branching`], splits it into a positive and a
//! negative child with [`batch_split`], re-optimizes every child's certified
//! lower bound and feasible upper bound in parallel, and
//! [`domain_filter`]s the results: children proved nonnegative are verified,
//! children whose bound exceeds the incumbent upper bound are pruned (this
//! subsumes infeasible split combinations, whose ascent is unbounded), and
//! the rest re-enter the queue with their bound clamped to the parent's —
//! which makes the global lower bound nondecreasing over iterations.
//!
//! Fully split domains admit no further branching; their single activation
//! pattern is resolved exactly by a small LP, so every branch path
//! terminates in a decision and the whole procedure is complete at this
//! crate's scale: with no timeout the verdict always matches exhaustive
//! enumeration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::time::Instant;

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{
    backward_bound, backward_bound_traced, concretize, BoundObjective, NeuronStatus, PreActBounds,
    SplitSet,
};
use crate::error::{Result, VerifierError};
use crate::model::{InputRegion, Network};
use crate::optimizer::{
    ascend, feasible_upper, joint_optimize, AscendOutcome, OptimizerConfig, ParamState,
};
use crate::oracle::{exact_min, pgd_attack, OracleOutcome};

/// One unverified subdomain: its split constraints, certified lower bound,
/// feasible upper bound, warm-start parameters, pre-activation bound
/// snapshot, and depth in the branching tree.
#[derive(Debug, Clone)]
pub struct Domain {
    pub splits: SplitSet,
    /// Certified lower bound on the objective over this subdomain.
    pub lower: f64,
    /// Value of the network at some feasible input (an upper bound on the
    /// subdomain minimum, hence also on the global minimum).
    pub upper: f64,
    pub params: ParamState,
    pub bounds: PreActBounds,
    pub depth: usize,
}

/// Final outcome of a verification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// The objective is proven nonnegative over the whole region.
    Verified,
    /// A concrete input in the region evaluates negative.
    Falsified,
    /// Budget exhausted (timeout, domain cap, or gap tolerance) first.
    Unknown,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Verified => "verified",
            Status::Falsified => "falsified",
            Status::Unknown => "unknown",
        })
    }
}

/// Search statistics for one run.
#[derive(Debug, Clone, Default)]
pub struct BabStats {
    /// Domains popped from the queue (the root counts as one).
    pub domains_visited: usize,
    /// Neuron splits performed (each yields two children).
    pub branches: usize,
    /// Wall-clock time; reported as 0.0 in single-threaded deterministic
    /// mode so that runs with identical inputs produce identical output.
    pub wall_seconds: f64,
}

/// Verdict with the final certified bounds and, when falsified, a witness.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub status: Status,
    /// Proven lower bound on the minimum over the region.
    pub global_lower: f64,
    /// Best feasible value found (upper bound on the minimum).
    pub global_upper: f64,
    /// Input with `forward_eval < 0` when falsified.
    pub counterexample: Option<Array1<f64>>,
    pub stats: BabStats,
}

/// Branching heuristic selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    /// Highest intercept-mass score, no lookahead.
    BabSr,
    /// Cheap one-pass lookahead over the top scored candidates.
    Fsb,
}

/// Knobs for [`run_bab`].
#[derive(Debug, Clone)]
pub struct BabConfig {
    /// Domains popped per iteration.
    pub batch: usize,
    /// Stop when the global upper/lower gap falls below this.
    pub delta: f64,
    /// Stop when the queue holds at least this many domains.
    pub eta: usize,
    /// Wall-clock budget in seconds; `None` runs to completion.
    pub timeout: Option<f64>,
    pub branching: Branching,
    /// Advisory: the run is expected to stop early on the wall clock and
    /// report bounds. The loop itself is identical to the complete mode.
    pub incomplete: bool,
    /// Ascent configuration for per-domain bounding.
    pub optimizer: OptimizerConfig,
    /// Candidate count for [`Branching::Fsb`].
    pub fsb_candidates: usize,
    /// Gradient-attack budget for the root upper bound (0 disables).
    pub pgd_steps: usize,
    pub pgd_restarts: usize,
    pub seed: u64,
    /// `<= 1` bounds children sequentially and zeroes reported timings,
    /// giving byte-identical logs across runs; larger values bound each
    /// batch in parallel.
    pub threads: usize,
    /// Recompute intermediate bounds per child instead of clamping the
    /// parent snapshot (tighter, much slower).
    pub recompute_intermediate: bool,
}

impl Default for BabConfig {
    fn default() -> Self {
        Self {
            batch: 8,
            delta: 1e-6,
            eta: 1_000_000,
            timeout: None,
            branching: Branching::BabSr,
            incomplete: false,
            optimizer: OptimizerConfig::default(),
            fsb_candidates: 3,
            pgd_steps: 50,
            pgd_restarts: 5,
            seed: 0,
            threads: 1,
            recompute_intermediate: false,
        }
    }
}

/// Branching scores for every unstable Free neuron of a domain:
/// `max(−A_{1,j}, 0) · u·l/(l−u)` under a β = 0 backward pass with the
/// domain's current α, where `A` is the coefficient row reaching the
/// neuron's layer. Only a negative coefficient selects the upper chord and
/// pays its intercept, so this is exactly the intercept mass the neuron's
/// relaxation feeds into the bound — the bias improvement potential of
/// splitting it. An empty result means the domain is fully split.
pub fn babsr_score(net: &Network, domain: &Domain) -> Result<Vec<(usize, usize, f64)>> {
    let candidates = domain.bounds.unstable_free(&domain.splits);
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let zero_beta: Vec<Array1<f64>> = net
        .hidden_dims()
        .iter()
        .map(|&d| Array1::zeros(d))
        .collect();
    let (_, trace) = backward_bound_traced(
        net,
        &domain.bounds,
        &domain.splits,
        &domain.params.objective.alpha,
        &zero_beta,
        BoundObjective::Output,
    )?;
    let mut coeff: Vec<Option<&Array1<f64>>> = vec![None; net.num_hidden()];
    for step in &trace.steps {
        coeff[step.hidden] = Some(&step.coeff);
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for (h, j) in candidates {
        let l = domain.bounds.lower[h][j];
        let u = domain.bounds.upper[h][j];
        let mass = coeff[h].map_or(0.0, |c| (-c[j]).max(0.0));
        scores.push((h, j, mass * (u * l / (l - u))));
    }
    Ok(scores)
}

/// Highest score wins; ties go to the lowest (layer, index). Scores arrive
/// in (layer, index) order, so keeping the first strict maximum implements
/// the tie rule.
fn select_babsr(scores: &[(usize, usize, f64)]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for &(h, j, s) in scores {
        if best.is_none_or(|(_, _, bs)| s > bs) {
            best = Some((h, j, s));
        }
    }
    best.map(|(h, j, _)| (h, j))
}

/// Filtered branching: rank candidates by [`babsr_score`], then bound both
/// children of the top `k` with one cheap backward pass each (β = 0, the
/// domain's current α) and pick the candidate whose worse child bound is
/// highest. Ties keep the score order. `None` means fully split.
pub fn fsb_branching(
    net: &Network,
    region: &InputRegion,
    domain: &Domain,
    k: usize,
) -> Result<Option<(usize, usize)>> {
    let mut scores = babsr_score(net, domain)?;
    if scores.is_empty() {
        return Ok(None);
    }
    scores.sort_by(|a, b| b.2.total_cmp(&a.2));
    let top = &scores[..k.max(1).min(scores.len())];
    if top.len() == 1 {
        return Ok(Some((top[0].0, top[0].1)));
    }

    let zero_beta: Vec<Array1<f64>> = net
        .hidden_dims()
        .iter()
        .map(|&d| Array1::zeros(d))
        .collect();
    let mut best: Option<((usize, usize), f64)> = None;
    for &(h, j, _) in top {
        let mut worst_child = f64::INFINITY;
        for status in [NeuronStatus::Pos, NeuronStatus::Neg] {
            let mut sp = domain.splits.clone();
            sp.set(h, j, status);
            let mut bd = domain.bounds.clone();
            let consistent = bd.clamp_splits(&sp);
            debug_assert!(consistent, "splitting an unstable entry stays consistent");
            let lb = backward_bound(
                net,
                &bd,
                &sp,
                &domain.params.objective.alpha,
                &zero_beta,
                BoundObjective::Output,
            )?;
            worst_child = worst_child.min(concretize(&lb, region));
        }
        if best.is_none_or(|(_, w)| worst_child > w) {
            best = Some(((h, j), worst_child));
        }
    }
    Ok(best.map(|(c, _)| c))
}

/// Split each domain at its chosen (unstable Free) neuron into a positive
/// and a negative child, in that order. Children inherit the parent's
/// bounds with the split entry clamped, and the parent's parameters as a
/// warm start with fresh optimizer moments and the new β entry zeroed.
/// The `lower`/`upper` fields still hold the parent's values; callers
/// re-bound the children next.
pub fn batch_split(domains: Vec<Domain>, choices: &[(usize, usize)]) -> Vec<Domain> {
    debug_assert_eq!(domains.len(), choices.len());
    let mut children = Vec::with_capacity(domains.len() * 2);
    for (dom, &(h, j)) in domains.into_iter().zip(choices) {
        debug_assert_eq!(
            dom.splits.get(h, j),
            NeuronStatus::Free,
            "split choice must be an unsplit neuron"
        );
        for status in [NeuronStatus::Pos, NeuronStatus::Neg] {
            let mut child = dom.clone();
            child.splits.set(h, j, status);
            let consistent = child.bounds.clamp_splits(&child.splits);
            debug_assert!(consistent);
            child.params.reset_moments();
            child.params.objective.beta[h][j] = 0.0;
            child.depth = dom.depth + 1;
            children.push(child);
        }
    }
    children
}

/// Optimize one domain's certified lower bound in place and return its
/// feasible upper-bound witness `(value, input)`.
///
/// `domain.lower` on entry is treated as the parent's certified bound: the
/// freshly optimized bound is clamped from below by it, sound because the
/// child region is a subset of the parent's — and the reason the global
/// lower bound never decreases across iterations.
pub fn bound_domain(
    net: &Network,
    region: &InputRegion,
    domain: &mut Domain,
    cfg: &OptimizerConfig,
    recompute_intermediate: bool,
) -> Result<(f64, Array1<f64>)> {
    let floor = domain.lower;
    let out = if recompute_intermediate {
        let joint = joint_optimize(net, region, &domain.splits, &mut domain.params, cfg)?;
        domain.bounds = joint.bounds;
        AscendOutcome {
            best: joint.bound,
            linear: joint.linear,
        }
    } else {
        ascend(
            net,
            region,
            &domain.bounds,
            &domain.splits,
            &mut domain.params,
            cfg,
        )?
    };
    domain.lower = out.best.max(floor);
    let (value, x) = feasible_upper(net, region, &out.linear)?;
    domain.upper = value;
    Ok((value, x))
}

/// Partition freshly bounded children into survivors and resolved domains.
/// Children with `lower ≥ 0` are verified; children with
/// `lower > global_upper` can hold no better point than the incumbent and
/// are pruned — including infeasible split combinations, whose ascent
/// climbs without bound. Returns the survivors and the smallest certified
/// lower among the dropped children (+∞ when none dropped), which the
/// caller folds into the global certified bound.
pub fn domain_filter(children: Vec<Domain>, global_upper: f64) -> (Vec<Domain>, f64) {
    let mut survivors = Vec::with_capacity(children.len());
    let mut resolved_floor = f64::INFINITY;
    for child in children {
        if child.lower >= 0.0 || child.lower > global_upper {
            resolved_floor = resolved_floor.min(child.lower);
        } else {
            survivors.push(child);
        }
    }
    (survivors, resolved_floor)
}

/// Exact resolution of a fully split domain: its activation pattern is
/// unique, so one pattern LP yields the true minimum (or proves the split
/// combination empty).
enum LeafOutcome {
    Empty,
    Min {
        value: f64,
        eval: f64,
        argmin: Array1<f64>,
    },
}

fn solve_leaf(net: &Network, region: &InputRegion, splits: &SplitSet) -> Result<LeafOutcome> {
    Ok(match exact_min(net, region, splits)? {
        OracleOutcome::Empty => LeafOutcome::Empty,
        OracleOutcome::Min { value, argmin } => {
            let eval = net.forward_eval(&argmin)?;
            LeafOutcome::Min {
                value,
                eval,
                argmin,
            }
        }
    })
}

/// Queue entry: min-heap on (lower bound, insertion order), so the worst
/// bound is expanded first and ties are FIFO — fully deterministic.
struct HeapEntry {
    lower: f64,
    seq: u64,
    domain: Domain,
}

impl HeapEntry {
    fn new(domain: Domain, seq: &mut u64) -> Self {
        let s = *seq;
        *seq += 1;
        Self {
            lower: domain.lower,
            seq: s,
            domain,
        }
    }
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse both keys to pop the smallest
        // (lower, seq) first
        other
            .lower
            .total_cmp(&self.lower)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Branch and bound on a merged scalar-output specification network.
///
/// Returns `Verified` when every subdomain's certified bound reaches 0,
/// `Falsified` with a counterexample as soon as any feasible input
/// evaluates negative, and `Unknown` when the gap tolerance `delta`, the
/// domain cap `eta`, or the timeout ends the search first — always with
/// the best bounds found. The run log, when given, receives one CSV row
/// `(wall_seconds, domains_live, domains_visited, global_lower,
/// global_upper)` per iteration, flushed immediately.
pub fn run_bab(
    net: &Network,
    region: &InputRegion,
    cfg: &BabConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<Verdict> {
    if net.output_dim() != 1 {
        return Err(VerifierError::NotScalarOutput {
            got: net.output_dim(),
        });
    }
    let start = Instant::now();
    let deterministic = cfg.threads <= 1;
    let elapsed = |start: &Instant| {
        if deterministic {
            0.0
        } else {
            start.elapsed().as_secs_f64()
        }
    };

    // Root: joint optimization of intermediate bounds and the objective —
    // the only place intermediate bounds are refined unless
    // `recompute_intermediate` is set.
    let splits0 = SplitSet::all_free(&net.hidden_dims());
    let mut root_params = ParamState::init(net);
    let root = joint_optimize(net, region, &splits0, &mut root_params, &cfg.optimizer)?;
    let mut visited = 1usize;
    let mut branches = 0usize;

    let (mut upper, mut witness) = feasible_upper(net, region, &root.linear)?;
    if cfg.pgd_steps > 0 && cfg.pgd_restarts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (pv, px) = pgd_attack(net, region, cfg.pgd_steps, cfg.pgd_restarts, &mut rng)?;
        if pv < upper {
            upper = pv;
            witness = px;
        }
    }

    let mut certified_floor = f64::INFINITY;
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut seq = 0u64;
    if root.bound < 0.0 {
        heap.push(HeapEntry::new(
            Domain {
                splits: splits0,
                lower: root.bound,
                upper,
                params: root_params,
                bounds: root.bounds,
                depth: 0,
            },
            &mut seq,
        ));
    } else {
        certified_floor = root.bound;
    }

    if let Some(w) = log.as_mut() {
        writeln!(
            w,
            "wall_seconds,domains_live,domains_visited,global_lower,global_upper"
        )?;
    }

    // Children ascend only until they can be dropped: a bound of 0 proves a
    // child verified, and (since the loop exits the moment the incumbent
    // goes negative) also dominates any incumbent.
    let child_cfg = {
        let mut c = cfg.optimizer.clone();
        c.prune_threshold = Some(0.0);
        c
    };

    let status;
    loop {
        let live_min = heap.peek().map_or(f64::INFINITY, |e| e.lower);
        let glob_lower = live_min.min(certified_floor);
        if let Some(w) = log.as_mut() {
            writeln!(
                w,
                "{:.3},{},{},{},{}",
                elapsed(&start),
                heap.len(),
                visited,
                glob_lower,
                upper
            )?;
            w.flush()?;
        }

        if upper < 0.0 {
            status = Status::Falsified;
            break;
        }
        if glob_lower >= 0.0 {
            status = Status::Verified;
            break;
        }
        if heap.is_empty() {
            // only reachable when a leaf resolved within float noise of zero
            status = Status::Unknown;
            break;
        }
        if upper - glob_lower <= cfg.delta {
            status = Status::Unknown;
            break;
        }
        if heap.len() >= cfg.eta {
            status = Status::Unknown;
            break;
        }
        if let Some(t) = cfg.timeout {
            if start.elapsed().as_secs_f64() >= t {
                status = Status::Unknown;
                break;
            }
        }

        let n = cfg.batch.max(1).min(heap.len());
        let mut picked = Vec::with_capacity(n);
        for _ in 0..n {
            let dom = heap.pop().expect("n <= heap len").domain;
            visited += 1;
            let choice = match cfg.branching {
                Branching::BabSr => select_babsr(&babsr_score(net, &dom)?),
                Branching::Fsb => fsb_branching(net, region, &dom, cfg.fsb_candidates)?,
            };
            match choice {
                Some(c) => picked.push((dom, c)),
                None => {
                    // fully split (possible only when the whole net is
                    // interval-stable): resolve exactly
                    match solve_leaf(net, region, &dom.splits)? {
                        LeafOutcome::Empty => {}
                        LeafOutcome::Min { value, eval, argmin } => {
                            if eval < upper {
                                upper = eval;
                                witness = argmin;
                            }
                            certified_floor = certified_floor.min(value.max(dom.lower));
                        }
                    }
                }
            }
        }

        let (doms, choices): (Vec<_>, Vec<_>) = picked.into_iter().unzip();
        branches += doms.len();
        let mut children = batch_split(doms, &choices);

        let bound_one = |child: &mut Domain| {
            bound_domain(net, region, child, &child_cfg, cfg.recompute_intermediate)
        };
        let uppers: Vec<(f64, Array1<f64>)> = if cfg.threads > 1 {
            children
                .par_iter_mut()
                .map(bound_one)
                .collect::<Result<_>>()?
        } else {
            children.iter_mut().map(bound_one).collect::<Result<_>>()?
        };
        for (value, x) in uppers {
            if value < upper {
                upper = value;
                witness = x;
            }
        }

        // Fully split children that the bound alone could not decide get the
        // exact leaf treatment; everything else goes through the filter.
        let mut undecided = Vec::with_capacity(children.len());
        for child in children {
            if child.lower < 0.0 && child.upper >= 0.0 && child.bounds.fully_split(&child.splits)
            {
                match solve_leaf(net, region, &child.splits)? {
                    LeafOutcome::Empty => {}
                    LeafOutcome::Min { value, eval, argmin } => {
                        if eval < upper {
                            upper = eval;
                            witness = argmin;
                        }
                        certified_floor = certified_floor.min(value.max(child.lower));
                    }
                }
            } else {
                undecided.push(child);
            }
        }
        let (survivors, resolved_floor) = domain_filter(undecided, upper);
        certified_floor = certified_floor.min(resolved_floor);
        for d in survivors {
            heap.push(HeapEntry::new(d, &mut seq));
        }
    }

    let live_min = heap.peek().map_or(f64::INFINITY, |e| e.lower);
    let global_lower = live_min.min(certified_floor);
    let counterexample = if status == Status::Falsified {
        debug_assert!(net.forward_eval(&witness)? < 0.0);
        Some(witness)
    } else {
        None
    };
    Ok(Verdict {
        status,
        global_lower,
        global_upper: upper,
        counterexample,
        stats: BabStats {
            domains_visited: visited,
            branches,
            wall_seconds: elapsed(&start),
        },
    })
}
