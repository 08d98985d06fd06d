//! Belief accumulation, the error metric, and the multi-run convergence
//! experiment harness.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::exact::{exact_posteriors, ExactOutcome, OracleError, PosteriorSummary};
use crate::network::{Evidence, Network, NodeId};
use crate::plan::SamplingPlan;
use crate::sim::{run_trial, NormCache, RandomStream, TrialResult};

/// Weighted state counts from a sequence of trials.
///
/// Merging accumulators from partitioned trial sets gives the same
/// result as accumulating serially; that associativity is the contract
/// that lets runs execute concurrently.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefAccumulator {
    cells: Vec<Vec<f64>>,
    total_weight: f64,
    trials: u64,
    aborted: u64,
}

impl BeliefAccumulator {
    pub fn new(net: &Network) -> Self {
        BeliefAccumulator {
            cells: net
                .node_ids()
                .map(|n| vec![0.0; net.state_count(n)])
                .collect(),
            total_weight: 0.0,
            trials: 0,
            aborted: 0,
        }
    }

    /// Fold one trial in: add its weight to every realized (node, state)
    /// cell and to the total. Aborted trials only count toward the trial
    /// total; they carry the information "this branch is impossible".
    pub fn accumulate(&mut self, trial: &TrialResult) {
        self.trials += 1;
        if trial.aborted {
            self.aborted += 1;
            return;
        }
        debug_assert!(trial.instantiation.is_full());
        for (i, cell) in self.cells.iter_mut().enumerate() {
            let state = trial
                .instantiation
                .get(NodeId(i))
                .expect("completed trials are full");
            cell[state] += trial.weight;
        }
        self.total_weight += trial.weight;
    }

    pub fn merge(&mut self, other: &BeliefAccumulator) {
        debug_assert_eq!(self.cells.len(), other.cells.len());
        for (mine, theirs) in self.cells.iter_mut().zip(&other.cells) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += t;
            }
        }
        self.total_weight += other.total_weight;
        self.trials += other.trials;
        self.aborted += other.aborted;
    }

    /// Normalized per-node belief vectors, or `None` while the total
    /// weight is zero (no signal).
    pub fn beliefs(&self) -> Option<Vec<Vec<f64>>> {
        if self.total_weight <= 0.0 {
            return None;
        }
        Some(
            self.cells
                .iter()
                .map(|cell| cell.iter().map(|v| v / self.total_weight).collect())
                .collect(),
        )
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn aborted(&self) -> u64 {
        self.aborted
    }
}

/// Which nodes enter the error sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorScope {
    /// Non-evidence nodes only (evidence nodes contribute exactly zero).
    StateNodes,
    AllNodes,
}

/// The nodes selected by a scope, in index order.
pub fn scope_nodes(net: &Network, evidence: &Evidence, scope: ErrorScope) -> Vec<NodeId> {
    net.node_ids()
        .filter(|&n| scope == ErrorScope::AllNodes || !evidence.contains(n))
        .collect()
}

/// Absolute-value error: the sum over the scope nodes and their states
/// of |belief - exact posterior|.
pub fn error_l1(beliefs: &[Vec<f64>], reference: &PosteriorSummary, scope: &[NodeId]) -> f64 {
    let mut error = 0.0;
    for &node in scope {
        for (b, p) in beliefs[node.0].iter().zip(&reference.marginals[node.0]) {
            error += (b - p).abs();
        }
    }
    error
}

/// A named sampling strategy for an experiment.
#[derive(Debug, Clone)]
pub struct Method {
    pub name: String,
    pub plan: SamplingPlan,
}

/// Configuration for [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    /// Independent runs per method, each with its own derived seed.
    pub runs: usize,
    /// Trial counts at which beliefs are snapshotted; strictly ascending.
    pub checkpoints: Vec<u64>,
    pub base_seed: u64,
    pub error_scope: ErrorScope,
    /// Guard passed to the exact oracle for the reference posterior.
    pub max_joint_states: u64,
    /// Worker cap; 1 runs everything on the calling thread. The report
    /// is identical for any value.
    pub jobs: usize,
}

/// One (method, checkpoint) row of an experiment report.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub method: String,
    pub trials: u64,
    pub runs: usize,
    pub mean_error: f64,
    pub stddev_error: f64,
}

/// Experiment output: rows ordered by (method index, checkpoint), plus
/// the reference posterior the errors were measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub reference: PosteriorSummary,
}

impl ErrorReport {
    /// Render as CSV with header `method,trials,runs,mean_error,stddev_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,trials,runs,mean_error,stddev_error\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.method, row.trials, row.runs, row.mean_error, row.stddev_error
            ));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("evidence has zero probability; no reference posterior exists")]
    ImpossibleEvidence,
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
}

/// Derive the seed for one run: a fixed SplitMix64-style mix of the base
/// seed, the method index, and the run index. Frozen: reports are only
/// reproducible if this function never changes.
pub fn run_seed(base: u64, method_index: u64, run_index: u64) -> u64 {
    let mut z = base
        .wrapping_add(method_index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(run_index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Execute one run: a fresh stream, cache, and accumulator, with the
/// error snapshotted at each checkpoint. Trials continue from the same
/// stream across checkpoints.
fn run_one(
    net: &Network,
    evidence: &Evidence,
    plan: &SamplingPlan,
    seed: u64,
    checkpoints: &[u64],
    reference: &PosteriorSummary,
    scope: &[NodeId],
) -> Vec<f64> {
    let mut rng = RandomStream::seeded(seed);
    let mut cache = NormCache::new();
    let mut acc = BeliefAccumulator::new(net);
    let mut errors = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    let last = *checkpoints.last().expect("checkpoints are nonempty");
    for t in 1..=last {
        let trial = run_trial(&mut rng, net, evidence, plan, &mut cache);
        acc.accumulate(&trial);
        if checkpoints[next] == t {
            errors.push(match acc.beliefs() {
                Some(beliefs) => error_l1(&beliefs, reference, scope),
                // No signal yet: every belief is vacuously zero, so each
                // scope node contributes its full posterior mass.
                None => scope.len() as f64,
            });
            next += 1;
        }
    }
    errors
}

/// Run the comparison experiment: for every method and every run,
/// execute trials to the last checkpoint, snapshotting the error against
/// the exact posterior; report the mean and population standard
/// deviation across runs per checkpoint.
///
/// Identical configs give identical reports, regardless of `jobs`: run
/// `k` of method `m` is seeded by `run_seed(base_seed, m, k)` and its
/// results land in a preassigned slot.
pub fn run_experiment(
    net: &Network,
    evidence: &Evidence,
    cfg: &ExperimentConfig,
) -> Result<ErrorReport, ExperimentError> {
    if cfg.methods.is_empty() {
        return Err(ExperimentError::InvalidConfig("no methods given".into()));
    }
    if cfg.runs == 0 {
        return Err(ExperimentError::InvalidConfig("runs must be >= 1".into()));
    }
    if cfg.jobs == 0 {
        return Err(ExperimentError::InvalidConfig("jobs must be >= 1".into()));
    }
    if cfg.checkpoints.is_empty() {
        return Err(ExperimentError::InvalidConfig(
            "no checkpoints given".into(),
        ));
    }
    if cfg.checkpoints[0] == 0 || cfg.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::InvalidConfig(
            "checkpoints must be strictly ascending and >= 1".into(),
        ));
    }

    let reference = match exact_posteriors(net, evidence, cfg.max_joint_states)? {
        ExactOutcome::Posterior(summary) => summary,
        ExactOutcome::ImpossibleEvidence => return Err(ExperimentError::ImpossibleEvidence),
    };
    let scope = scope_nodes(net, evidence, cfg.error_scope);

    let task_count = cfg.methods.len() * cfg.runs;
    let mut per_task: Vec<Option<Vec<f64>>> = vec![None; task_count];

    let worker = |task: usize| -> Vec<f64> {
        let method = task / cfg.runs;
        let run = task % cfg.runs;
        run_one(
            net,
            evidence,
            &cfg.methods[method].plan,
            run_seed(cfg.base_seed, method as u64, run as u64),
            &cfg.checkpoints,
            &reference,
            &scope,
        )
    };

    if cfg.jobs == 1 {
        for (task, slot) in per_task.iter_mut().enumerate() {
            *slot = Some(worker(task));
        }
    } else {
        let cursor = AtomicUsize::new(0);
        let slots = Mutex::new(&mut per_task);
        std::thread::scope(|scope_| {
            for _ in 0..cfg.jobs.min(task_count) {
                scope_.spawn(|| loop {
                    let task = cursor.fetch_add(1, Ordering::Relaxed);
                    if task >= task_count {
                        break;
                    }
                    let errors = worker(task);
                    slots.lock().expect("no panics hold the lock")[task] = Some(errors);
                });
            }
        });
    }

    let mut rows = Vec::with_capacity(cfg.methods.len() * cfg.checkpoints.len());
    for (m, method) in cfg.methods.iter().enumerate() {
        for (ci, &trials) in cfg.checkpoints.iter().enumerate() {
            let errors: Vec<f64> = (0..cfg.runs)
                .map(|k| per_task[m * cfg.runs + k].as_ref().expect("every task ran")[ci])
                .collect();
            let mean = errors.iter().sum::<f64>() / cfg.runs as f64;
            let variance =
                errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / cfg.runs as f64;
            rows.push(ErrorRow {
                method: method.name.clone(),
                trials,
                runs: cfg.runs,
                mean_error: mean,
                stddev_error: variance.sqrt(),
            });
        }
    }

    Ok(ErrorReport { rows, reference })
}
