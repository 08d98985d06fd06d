//! Approximate inference for discrete Bayesian networks by backward
//! simulation: importance sampling that starts from the observed
//! evidence and instantiates the network outward, against the arc
//! direction, weighting each trial by normalization constants instead of
//! relying on the prior to stumble onto the evidence.
//!
//! The crate also carries a forward likelihood-weighting baseline
//! (expressed as just another sampling plan), a brute-force exact oracle
//! used as ground truth, and a convergence-experiment harness. Pieces:
//!
//! * [`network`]: the data model, with variables, CPTs, evidence, and
//!   joint probability evaluation and validation.
//! * [`format`]: the network/evidence text formats.
//! * [`exact`]: exact posteriors by exhaustive enumeration.
//! * [`plan`]: sampling plans, their construction, validation, and
//!   enumeration.
//! * [`sim`]: trial execution and weight scoring.
//! * [`estimate`]: belief accumulation, the error metric, and the
//!   multi-run experiment harness.
//!
//! Everything is deterministic given seeds: streams are ChaCha-based,
//! per-run seeds derive from a frozen mixing function, and reports are
//! byte-identical across repeat runs and worker counts.

pub mod estimate;
pub mod exact;
pub mod format;
pub mod network;
pub mod plan;
pub mod sim;

#[cfg(test)]
pub(crate) mod testnets;

pub use estimate::{
    error_l1, run_experiment, run_seed, scope_nodes, BeliefAccumulator, ErrorReport, ErrorRow,
    ErrorScope, ExperimentConfig, ExperimentError, Method,
};
pub use exact::{
    exact_posteriors, ExactOutcome, OracleError, PosteriorSummary, DEFAULT_STATE_GUARD,
};
pub use format::{
    parse_evidence, parse_network, parse_network_unvalidated, serialize_evidence,
    serialize_network, ParseError,
};
pub use network::{
    validate_network, Cpt, EvalError, Evidence, Instantiation, Network, NodeId, Variable, Violation,
};
pub use plan::{
    default_plan, enumerate_plans, forward_plan, parse_plan, serialize_plan, validate_plan, Mode,
    PlanEnumeration, PlanStep, PlanViolation, SamplingPlan,
};
pub use sim::{
    backward_step, forward_step, norm_constant, run_trial, sampling_probability, verify_weight,
    BackwardOutcome, ForwardOutcome, LogEntry, NormCache, RandomStream, StepOutcome, TrialResult,
    UnitSource, WeightCheck, WEIGHT_CHECK_TOLERANCE,
};
