//! Trial execution: backward and forward sampling steps, normalization
//! constants, and importance-weight scoring.
//!
//! One trial starts from the evidence and executes a [`SamplingPlan`]
//! step by step. A backward step on node `j` draws a joint assignment
//! for the uninstantiated parents of `j` with probability proportional
//! to the likelihood of `j`'s current state; the proportionality
//! constant `Norm(j)` is the sum of that likelihood over every
//! assignment of the uninstantiated parents. A forward step draws the
//! node's own state from its CPT row.
//!
//! The trial weight is the ratio of the network probability of the full
//! instantiation to the probability with which the trial sampled it.
//! After cancellation that ratio collapses to
//!
//! ```text
//! Z(x) = product over unsampled nodes of P(x_i | x_parents(i))
//!      * product over backward-stepped nodes of Norm(j)
//! ```
//!
//! with each `Norm(j)` evaluated at the instantiated/uninstantiated
//! parent split that held when step `j` executed; recomputing with a
//! different split afterwards would be wrong, so the executed value is
//! carried on the result. The weight is accumulated as one factor per
//! node in node-index order, which makes it bit-for-bit independent of
//! how equivalent plans arrange their steps.
//!
//! Random-number consumption contract: exactly one draw per forward
//! step and per backward step that has something to draw (a nonempty
//! uninstantiated-parent set, or the node itself in the
//! uninstantiated-leaf form); backward steps with nothing to draw
//! consume nothing. Golden tests and the plan-equivalence property rely
//! on this.

use std::collections::HashMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::network::{advance_mixed_radix, Evidence, Instantiation, Network, NodeId};
use crate::plan::{Mode, SamplingPlan};

/// Source of uniform samples on `[0, 1)`. Implemented by
/// [`RandomStream`]; tests substitute scripted sequences to force
/// trajectories.
pub trait UnitSource {
    fn next_unit(&mut self) -> f64;
}

/// Deterministic pseudorandom stream seeded by a 64-bit value. Same
/// seed, same draw sequence, same outputs, across platforms and
/// builds (ChaCha12 keystream).
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha12Rng,
}

impl RandomStream {
    pub fn seeded(seed: u64) -> Self {
        RandomStream {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }
}

impl UnitSource for RandomStream {
    fn next_unit(&mut self) -> f64 {
        // 53 random bits into [0, 1).
        (self.rng.next_u64() >> 11) as f64 / 9007199254740992.0
    }
}

/// Cache key: node, its instantiated state, which parents were
/// instantiated (bitmask by parent position), and the instantiated
/// parents' values (mixed-radix code). The split is part of the key
/// because the same (node, state) recurs with different splits under
/// different plans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct NormKey {
    node: NodeId,
    state: usize,
    split_mask: u64,
    split_code: u64,
}

/// Memo table for normalization constants. A cached value is always
/// bit-for-bit equal to a fresh recomputation. Shared within a process
/// at the caller's discretion; per-worker caches give identical results.
#[derive(Debug, Default)]
pub struct NormCache {
    map: HashMap<NormKey, f64>,
    hits: u64,
    misses: u64,
}

impl NormCache {
    pub fn new() -> Self {
        NormCache::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }
}

/// The instantiated/uninstantiated split of a node's parent list at some
/// moment of a trial, plus the row-index arithmetic derived from it.
struct ParentSplit {
    /// Uninstantiated parents, in listed order.
    open: Vec<NodeId>,
    /// State counts of the open parents.
    radices: Vec<usize>,
    /// Row-index stride of each open parent.
    strides: Vec<usize>,
    /// Row-index contribution of the instantiated parents.
    base_index: usize,
    mask: u64,
    code: u64,
}

fn split_parents(
    net: &Network,
    node: NodeId,
    instantiated: impl Fn(NodeId) -> bool,
    value: impl Fn(NodeId) -> usize,
) -> ParentSplit {
    let parents = &net.variable(node).parents;
    debug_assert!(
        parents.len() <= 64,
        "parent bitmask is limited to 64 parents"
    );
    // stride of parent k = product of state counts of parents after k
    let mut strides = vec![1usize; parents.len()];
    for k in (0..parents.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * net.state_count(parents[k + 1]);
    }
    let mut split = ParentSplit {
        open: Vec::new(),
        radices: Vec::new(),
        strides: Vec::new(),
        base_index: 0,
        mask: 0,
        code: 0,
    };
    for (k, &p) in parents.iter().enumerate() {
        if instantiated(p) {
            split.mask |= 1 << k;
            split.code = split.code * net.state_count(p) as u64 + value(p) as u64;
            split.base_index += value(p) * strides[k];
        } else {
            split.open.push(p);
            split.radices.push(net.state_count(p));
            split.strides.push(strides[k]);
        }
    }
    split
}

/// Sum the likelihood of `state` over every assignment of the open
/// parents, in mixed-radix order.
fn norm_from_split(
    net: &Network,
    node: NodeId,
    state: usize,
    split: &ParentSplit,
    cache: &mut NormCache,
) -> f64 {
    let key = NormKey {
        node,
        state,
        split_mask: split.mask,
        split_code: split.code,
    };
    if let Some(&value) = cache.map.get(&key) {
        cache.hits += 1;
        return value;
    }
    cache.misses += 1;
    let rows = &net.variable(node).cpt.rows;
    let mut digits = vec![0usize; split.open.len()];
    let mut sum = 0.0;
    loop {
        let idx: usize = split.base_index
            + digits
                .iter()
                .zip(&split.strides)
                .map(|(&d, &s)| d * s)
                .sum::<usize>();
        sum += rows[idx][state];
        if !advance_mixed_radix(&mut digits, |k| split.radices[k]) {
            break;
        }
    }
    cache.map.insert(key, sum);
    sum
}

/// Normalization constant for backward-sampling `node` at `state`: the
/// sum of `P(state | y, instantiated parents)` over all assignments `y`
/// of the uninstantiated parents. With no uninstantiated parents this is
/// the single likelihood term. Zero is a legal return.
pub fn norm_constant(
    net: &Network,
    node: NodeId,
    state: usize,
    trial_state: &Instantiation,
    cache: &mut NormCache,
) -> f64 {
    debug_assert_eq!(trial_state.get(node), Some(state));
    let split = split_parents(
        net,
        node,
        |p| trial_state.is_set(p),
        |p| trial_state.get(p).expect("instantiated parent has a value"),
    );
    norm_from_split(net, node, state, &split, cache)
}

/// What a backward step drew and with what probability.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOutcome {
    /// Assignment written to the uninstantiated parents, in listed
    /// order. Empty when there was nothing to draw.
    pub assignment: Vec<(NodeId, usize)>,
    /// Probability of this assignment under the backward-sampling
    /// distribution; 1 when nothing was drawn.
    pub probability: f64,
    /// The normalization constant at the split that held for this step.
    pub norm: f64,
}

/// Backward-sample `node`: draw one joint assignment of its
/// uninstantiated parents with probability likelihood / Norm and write
/// it into the trial state. Returns `None` when Norm is zero: the
/// node's state is impossible under the current partial instantiation
/// and the trial must abort with weight zero.
pub fn backward_step<R: UnitSource>(
    rng: &mut R,
    net: &Network,
    node: NodeId,
    trial_state: &mut Instantiation,
    cache: &mut NormCache,
) -> Option<BackwardOutcome> {
    let state = trial_state
        .get(node)
        .expect("backward step requires an instantiated node");
    let split = split_parents(
        net,
        node,
        |p| trial_state.is_set(p),
        |p| trial_state.get(p).expect("instantiated parent has a value"),
    );
    let norm = norm_from_split(net, node, state, &split, cache);
    if norm == 0.0 {
        return None;
    }
    if split.open.is_empty() {
        return Some(BackwardOutcome {
            assignment: Vec::new(),
            probability: 1.0,
            norm,
        });
    }

    let rows = &net.variable(node).cpt.rows;
    let target = rng.next_unit() * norm;
    let mut digits = vec![0usize; split.open.len()];
    let mut cum = 0.0;
    let mut picked: Option<(Vec<usize>, f64)> = None;
    loop {
        let idx: usize = split.base_index
            + digits
                .iter()
                .zip(&split.strides)
                .map(|(&d, &s)| d * s)
                .sum::<usize>();
        let w = rows[idx][state];
        if w > 0.0 {
            cum += w;
            picked = Some((digits.clone(), w));
            if cum > target {
                break;
            }
        }
        if !advance_mixed_radix(&mut digits, |k| split.radices[k]) {
            break; // rounding slack: fall back to the last positive entry
        }
    }
    let (chosen, w) = picked.expect("norm > 0 guarantees a positive entry");
    let assignment: Vec<(NodeId, usize)> = split
        .open
        .iter()
        .zip(&chosen)
        .map(|(&p, &v)| (p, v))
        .collect();
    for &(p, v) in &assignment {
        trial_state.set(p, v);
    }
    Some(BackwardOutcome {
        assignment,
        probability: w / norm,
        norm,
    })
}

/// What a forward step drew and with what probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardOutcome {
    pub state: usize,
    /// The CPT entry of the drawn state (the row is its own sampling
    /// distribution).
    pub probability: f64,
}

/// Forward-sample `node` from its CPT row given its instantiated
/// parents and write the drawn state into the trial state.
pub fn forward_step<R: UnitSource>(
    rng: &mut R,
    net: &Network,
    node: NodeId,
    trial_state: &mut Instantiation,
) -> ForwardOutcome {
    let row = net
        .cpt_row(node, trial_state)
        .expect("forward step requires instantiated parents");
    let total: f64 = row.iter().sum();
    let target = rng.next_unit() * total;
    let mut cum = 0.0;
    let mut picked = None;
    for (s, &w) in row.iter().enumerate() {
        if w > 0.0 {
            cum += w;
            picked = Some(s);
            if cum > target {
                break;
            }
        }
    }
    let state = picked.expect("a valid CPT row has a positive entry");
    let probability = row[state];
    trial_state.set(node, state);
    ForwardOutcome { state, probability }
}

/// One draw recorded in the trial log.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// Joint assignment drawn for the uninstantiated parents (empty when
    /// the step had nothing to draw).
    Backward {
        assignment: Vec<(NodeId, usize)>,
    },
    /// Uninstantiated-leaf backward step: the node itself, uniformly.
    LeafBackward {
        state: usize,
    },
    Forward {
        state: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub step: usize,
    pub node: NodeId,
    pub outcome: StepOutcome,
    /// Sampling probability used for this draw (1 for no-draw steps).
    pub probability: f64,
}

/// A completed (or aborted) trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Full instantiation, or the partial one reached before a zero-norm
    /// abort.
    pub instantiation: Instantiation,
    /// Importance weight Z; 0 for aborted trials.
    pub weight: f64,
    pub log: Vec<LogEntry>,
    pub aborted: bool,
}

/// Execute one trial of the plan. The caller guarantees the plan is
/// valid for `(net, evidence)`; see [`crate::plan::validate_plan`].
///
/// A zero normalization constant aborts the trial with weight zero: the
/// branch explored is impossible, which is information, and the trial
/// still counts toward the total.
pub fn run_trial<R: UnitSource>(
    rng: &mut R,
    net: &Network,
    evidence: &Evidence,
    plan: &SamplingPlan,
    cache: &mut NormCache,
) -> TrialResult {
    let mut inst = Instantiation::from_evidence(net.len(), evidence);
    let mut cancelled = vec![false; net.len()];
    let mut norm_slot = vec![1.0f64; net.len()];
    let mut log = Vec::with_capacity(plan.len());

    for (i, step) in plan.steps().iter().enumerate() {
        match step.mode {
            Mode::Backward if inst.is_set(step.node) => {
                match backward_step(rng, net, step.node, &mut inst, cache) {
                    Some(outcome) => {
                        cancelled[step.node.0] = true;
                        norm_slot[step.node.0] = outcome.norm;
                        log.push(LogEntry {
                            step: i,
                            node: step.node,
                            outcome: StepOutcome::Backward {
                                assignment: outcome.assignment,
                            },
                            probability: outcome.probability,
                        });
                    }
                    None => {
                        return TrialResult {
                            instantiation: inst,
                            weight: 0.0,
                            log,
                            aborted: true,
                        };
                    }
                }
            }
            Mode::Backward => {
                // Uninstantiated leaf: equivalent to backward-sampling a
                // dummy uniform-likelihood observation below the node.
                // The node's own CPT factor stays in the weight; the
                // dummy contributes Norm = state count.
                let k = net.state_count(step.node);
                let target = rng.next_unit() * k as f64;
                let mut cum = 0.0;
                let mut state = k - 1;
                for s in 0..k {
                    cum += 1.0;
                    if cum > target {
                        state = s;
                        break;
                    }
                }
                inst.set(step.node, state);
                norm_slot[step.node.0] = k as f64;
                log.push(LogEntry {
                    step: i,
                    node: step.node,
                    outcome: StepOutcome::LeafBackward { state },
                    probability: 1.0 / k as f64,
                });
            }
            Mode::Forward => {
                let outcome = forward_step(rng, net, step.node, &mut inst);
                cancelled[step.node.0] = true;
                log.push(LogEntry {
                    step: i,
                    node: step.node,
                    outcome: StepOutcome::Forward {
                        state: outcome.state,
                    },
                    probability: outcome.probability,
                });
            }
        }
    }

    let weight = weight_from_slots(net, &inst, &cancelled, &norm_slot);
    TrialResult {
        instantiation: inst,
        weight,
        log,
        aborted: false,
    }
}

/// Canonical weight accumulation: one factor per node, in node-index
/// order. A node's factor is its CPT entry unless a step cancelled it,
/// times any norm contribution a backward step left on the node.
fn weight_from_slots(
    net: &Network,
    x: &Instantiation,
    cancelled: &[bool],
    norm_slot: &[f64],
) -> f64 {
    let mut weight = 1.0;
    for i in 0..net.len() {
        let node = NodeId(i);
        let base = if cancelled[i] {
            1.0
        } else {
            let row = net
                .cpt_row(node, x)
                .expect("scoring requires a full instantiation");
            row[x.get(node).expect("scoring requires a full instantiation")]
        };
        weight *= base * norm_slot[i];
    }
    weight
}

/// Outcome of replaying a plan's bookkeeping against a fixed full
/// instantiation.
struct Replay {
    weight: f64,
    sampling_probability: f64,
}

fn replay_plan(
    net: &Network,
    evidence: &Evidence,
    plan: &SamplingPlan,
    x: &Instantiation,
) -> Replay {
    let mut instantiated = vec![false; net.len()];
    for (node, _) in evidence.iter() {
        instantiated[node.0] = true;
    }
    let mut cancelled = vec![false; net.len()];
    let mut norm_slot = vec![1.0f64; net.len()];
    let mut sampling = 1.0;
    let mut cache = NormCache::new();

    for step in plan.steps() {
        match step.mode {
            Mode::Backward if instantiated[step.node.0] => {
                let state = x
                    .get(step.node)
                    .expect("replay requires a full instantiation");
                let split = split_parents(
                    net,
                    step.node,
                    |p| instantiated[p.0],
                    |p| x.get(p).expect("replay requires a full instantiation"),
                );
                let norm = norm_from_split(net, step.node, state, &split, &mut cache);
                if norm == 0.0 {
                    return Replay {
                        weight: 0.0,
                        sampling_probability: 0.0,
                    };
                }
                cancelled[step.node.0] = true;
                norm_slot[step.node.0] = norm;
                if !split.open.is_empty() {
                    let row = net.cpt_row(step.node, x).expect("full instantiation");
                    sampling *= row[state] / norm;
                }
            }
            Mode::Backward => {
                let k = net.state_count(step.node);
                norm_slot[step.node.0] = k as f64;
                sampling *= 1.0 / k as f64;
            }
            Mode::Forward => {
                let row = net.cpt_row(step.node, x).expect("full instantiation");
                let state = x.get(step.node).expect("full instantiation");
                cancelled[step.node.0] = true;
                sampling *= row[state];
            }
        }
        crate::plan::apply_step(net, &mut instantiated, step);
    }

    Replay {
        weight: weight_from_slots(net, x, &cancelled, &norm_slot),
        sampling_probability: sampling,
    }
}

/// Probability that one trial of `plan` produces exactly the full
/// instantiation `x` (which must be consistent with the evidence).
pub fn sampling_probability(
    net: &Network,
    evidence: &Evidence,
    plan: &SamplingPlan,
    x: &Instantiation,
) -> f64 {
    replay_plan(net, evidence, plan, x).sampling_probability
}

/// Relative tolerance for the weight identity checks.
pub const WEIGHT_CHECK_TOLERANCE: f64 = 1e-12;

/// Result of recomputing a trial's weight two independent ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightCheck {
    /// Weight carried on the trial result.
    pub scored: f64,
    /// Fresh evaluation of the simplified weight product (uncancelled
    /// CPT factors times norms), with norms recomputed from scratch.
    pub direct: f64,
    /// Network probability of the instantiation divided by the product
    /// of the sampling probabilities in the log.
    pub ratio: f64,
    /// True when both recomputations match `scored` within
    /// [`WEIGHT_CHECK_TOLERANCE`] (relative).
    pub consistent: bool,
}

fn relatively_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= WEIGHT_CHECK_TOLERANCE * a.abs().max(b.abs())
}

/// Recompute a non-aborted trial's weight (a) directly from the
/// simplified product and (b) as network probability over sampling
/// probability, and check both against the scored weight.
pub fn verify_weight(
    net: &Network,
    evidence: &Evidence,
    plan: &SamplingPlan,
    result: &TrialResult,
) -> WeightCheck {
    assert!(!result.aborted, "verify_weight requires a completed trial");
    let replay = replay_plan(net, evidence, plan, &result.instantiation);
    let joint = net
        .joint_probability(&result.instantiation)
        .expect("completed trials are fully instantiated");
    let mut sampled = 1.0;
    for entry in &result.log {
        sampled *= entry.probability;
    }
    let ratio = joint / sampled;
    let consistent =
        relatively_close(replay.weight, result.weight) && relatively_close(ratio, result.weight);
    WeightCheck {
        scored: result.weight,
        direct: replay.weight,
        ratio,
        consistent,
    }
}
