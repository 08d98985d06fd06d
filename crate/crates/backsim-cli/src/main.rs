//! `backsim`: approximate inference in discrete Bayesian networks by
//! backward simulation, with an exact oracle and a convergence
//! experiment harness.
//!
//! Exit codes: 0 success, 1 validation failure, 2 input error,
//! 3 oracle guard exceeded, 4 no signal (zero trials, zero total weight,
//! or impossible evidence).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use backsim::{
    default_plan, enumerate_plans, exact_posteriors, forward_plan, parse_evidence, parse_network,
    parse_network_unvalidated, parse_plan, run_experiment, run_trial, validate_network,
    validate_plan, BeliefAccumulator, ErrorScope, Evidence, ExactOutcome, ExperimentConfig,
    ExperimentError, Method as PlanMethod, Network, NormCache, OracleError, RandomStream,
    SamplingPlan, DEFAULT_STATE_GUARD,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_GUARD: u8 = 3;
const EXIT_NO_SIGNAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "backsim",
    version,
    about = "Backward-simulation inference for discrete Bayesian networks",
    after_help = "Exit codes: 0 success, 1 validation failure, 2 input error, \
                  3 guard exceeded, 4 no signal."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Evidence-outward plan built by default_plan.
    Backward,
    /// Topological-order likelihood weighting.
    Forward,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScopeArg {
    /// Non-evidence nodes only.
    StateNodes,
    /// Every node, including evidence.
    AllNodes,
}

impl From<ScopeArg> for ErrorScope {
    fn from(arg: ScopeArg) -> Self {
        match arg {
            ScopeArg::StateNodes => ErrorScope::StateNodes,
            ScopeArg::AllNodes => ErrorScope::AllNodes,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file, and optionally a plan, against every
    /// structural requirement. Exit 0 only when nothing is violated.
    Validate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        evidence: Option<PathBuf>,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Exact posterior marginals and evidence probability by exhaustive
    /// enumeration.
    Exact {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        evidence: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_STATE_GUARD)]
        max_joint_states: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run weighted trials of one sampling plan and report beliefs.
    Simulate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        evidence: Option<PathBuf>,
        /// Built-in plan to use when --plan is not given.
        #[arg(long, value_enum, default_value_t = MethodArg::Backward)]
        method: MethodArg,
        /// Explicit plan file; overrides --method.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare methods across runs and checkpoints; emit CSV.
    Experiment {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        evidence: Option<PathBuf>,
        /// Comma-separated method list; row order follows it.
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_value = "forward,backward"
        )]
        methods: Vec<MethodArg>,
        #[arg(long)]
        runs: usize,
        /// Comma-separated ascending trial counts.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker cap for runs; output is identical for any value.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value_t = ScopeArg::StateNodes)]
        error_scope: ScopeArg,
        #[arg(long, default_value_t = DEFAULT_STATE_GUARD)]
        max_joint_states: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List valid sampling plans for a network and evidence.
    Plans {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        evidence: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        limit: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<Network, Failure> {
    parse_network(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_evidence(net: &Network, path: Option<&PathBuf>) -> Result<Evidence, Failure> {
    match path {
        None => Ok(Evidence::empty()),
        Some(p) => parse_evidence(net, &read(p)?)
            .map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
    }
}

fn write_out(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display()))),
    }
}

fn method_plan(net: &Network, evidence: &Evidence, method: MethodArg) -> SamplingPlan {
    match method {
        MethodArg::Backward => default_plan(net, evidence),
        MethodArg::Forward => forward_plan(net, evidence),
    }
}

fn method_name(method: MethodArg) -> &'static str {
    match method {
        MethodArg::Backward => "backward",
        MethodArg::Forward => "forward",
    }
}

/// Beliefs as an ordered JSON map: node name -> state label -> value.
fn beliefs_json(net: &Network, beliefs: &[Vec<f64>]) -> serde_json::Value {
    let mut nodes = serde_json::Map::new();
    for (i, dist) in beliefs.iter().enumerate() {
        let var = &net.variables()[i];
        let mut states = serde_json::Map::new();
        for (s, &p) in dist.iter().enumerate() {
            states.insert(var.states[s].clone(), serde_json::json!(p));
        }
        nodes.insert(var.name.clone(), serde_json::Value::Object(states));
    }
    serde_json::Value::Object(nodes)
}

fn cmd_validate(
    network: &Path,
    evidence: Option<&PathBuf>,
    plan: Option<&PathBuf>,
) -> Result<(), Failure> {
    let net = parse_network_unvalidated(&read(network)?)
        .map_err(|e| Failure::input(format!("{}: {e}", network.display())))?;

    let mut clean = true;
    let violations = validate_network(&net);
    for v in &violations {
        println!("network: {v}");
        clean = false;
    }

    if let Some(plan_path) = plan {
        if !violations.is_empty() {
            return Err(Failure {
                code: EXIT_VALIDATION,
                message: "network invalid; skipping plan validation".into(),
            });
        }
        let ev = load_evidence(&net, evidence)?;
        let plan = parse_plan(&net, &read(plan_path)?)
            .map_err(|e| Failure::input(format!("{}: {e}", plan_path.display())))?;
        for v in validate_plan(&net, &ev, &plan) {
            println!("plan: {v}");
            clean = false;
        }
    } else if evidence.is_some() {
        // Evidence alone still gets resolution checks.
        load_evidence(&net, evidence)?;
    }

    if clean {
        println!("ok");
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VALIDATION,
            message: "validation failed".into(),
        })
    }
}

fn oracle_failure(err: OracleError) -> Failure {
    Failure {
        code: EXIT_GUARD,
        message: err.to_string(),
    }
}

fn cmd_exact(
    network: &Path,
    evidence: Option<&PathBuf>,
    max_joint_states: u64,
    out: Option<&PathBuf>,
) -> Result<(), Failure> {
    let net = load_network(network)?;
    let ev = load_evidence(&net, evidence)?;
    let outcome = exact_posteriors(&net, &ev, max_joint_states).map_err(oracle_failure)?;
    let value = match outcome {
        ExactOutcome::Posterior(summary) => serde_json::json!({
            "evidence_probability": summary.evidence_probability,
            "impossible_evidence": false,
            "marginals": beliefs_json(&net, &summary.marginals),
        }),
        ExactOutcome::ImpossibleEvidence => serde_json::json!({
            "evidence_probability": 0.0,
            "impossible_evidence": true,
            "marginals": serde_json::Value::Null,
        }),
    };
    write_out(
        out,
        &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()),
    )
}

fn cmd_simulate(
    network: &Path,
    evidence: Option<&PathBuf>,
    method: MethodArg,
    plan_path: Option<&PathBuf>,
    trials: u64,
    seed: u64,
    out: Option<&PathBuf>,
) -> Result<(), Failure> {
    let net = load_network(network)?;
    let ev = load_evidence(&net, evidence)?;
    let plan = match plan_path {
        Some(p) => parse_plan(&net, &read(p)?)
            .map_err(|e| Failure::input(format!("{}: {e}", p.display())))?,
        None => method_plan(&net, &ev, method),
    };
    let violations = validate_plan(&net, &ev, &plan);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("plan: {v}");
        }
        return Err(Failure {
            code: EXIT_VALIDATION,
            message: "plan is invalid for this network and evidence".into(),
        });
    }

    let mut rng = RandomStream::seeded(seed);
    let mut cache = NormCache::new();
    let mut acc = BeliefAccumulator::new(&net);
    for _ in 0..trials {
        acc.accumulate(&run_trial(&mut rng, &net, &ev, &plan, &mut cache));
    }

    match acc.beliefs() {
        Some(beliefs) => {
            let value = serde_json::json!({
                "trials": acc.trials(),
                "aborted_trials": acc.aborted(),
                "total_weight": acc.total_weight(),
                "beliefs": beliefs_json(&net, &beliefs),
            });
            write_out(
                out,
                &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()),
            )
        }
        None => Err(Failure {
            code: EXIT_NO_SIGNAL,
            message: format!(
                "no signal after {} trial(s): total weight is zero",
                acc.trials()
            ),
        }),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiment(
    network: &Path,
    evidence: Option<&PathBuf>,
    methods: &[MethodArg],
    runs: usize,
    checkpoints: Vec<u64>,
    seed: u64,
    jobs: usize,
    error_scope: ScopeArg,
    max_joint_states: u64,
    out: Option<&PathBuf>,
) -> Result<(), Failure> {
    let net = load_network(network)?;
    let ev = load_evidence(&net, evidence)?;
    let cfg = ExperimentConfig {
        methods: methods
            .iter()
            .map(|&m| PlanMethod {
                name: method_name(m).to_string(),
                plan: method_plan(&net, &ev, m),
            })
            .collect(),
        runs,
        checkpoints,
        base_seed: seed,
        error_scope: error_scope.into(),
        max_joint_states,
        jobs,
    };
    let report = run_experiment(&net, &ev, &cfg).map_err(|e| match e {
        ExperimentError::Oracle(err) => oracle_failure(err),
        ExperimentError::ImpossibleEvidence => Failure {
            code: EXIT_NO_SIGNAL,
            message: e.to_string(),
        },
        ExperimentError::InvalidConfig(_) => Failure::input(e.to_string()),
    })?;
    write_out(out, &report.to_csv())
}

fn cmd_plans(network: &Path, evidence: Option<&PathBuf>, limit: usize) -> Result<(), Failure> {
    let net = load_network(network)?;
    let ev = load_evidence(&net, evidence)?;
    let result = enumerate_plans(&net, &ev, limit);
    for plan in &result.plans {
        println!("{}", plan.describe(&net));
    }
    if result.truncated {
        println!("... truncated at {limit}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate {
            network,
            evidence,
            plan,
        } => cmd_validate(&network, evidence.as_ref(), plan.as_ref()),
        Command::Exact {
            network,
            evidence,
            max_joint_states,
            out,
        } => cmd_exact(&network, evidence.as_ref(), max_joint_states, out.as_ref()),
        Command::Simulate {
            network,
            evidence,
            method,
            plan,
            trials,
            seed,
            out,
        } => cmd_simulate(
            &network,
            evidence.as_ref(),
            method,
            plan.as_ref(),
            trials,
            seed,
            out.as_ref(),
        ),
        Command::Experiment {
            network,
            evidence,
            methods,
            runs,
            checkpoints,
            seed,
            jobs,
            error_scope,
            max_joint_states,
            out,
        } => cmd_experiment(
            &network,
            evidence.as_ref(),
            &methods,
            runs,
            checkpoints,
            seed,
            jobs,
            error_scope,
            max_joint_states,
            out.as_ref(),
        ),
        Command::Plans {
            network,
            evidence,
            limit,
        } => cmd_plans(&network, evidence.as_ref(), limit),
    }
}

fn main() -> ExitCode {
    eprintln!("backsim {}", env!("CARGO_PKG_VERSION"));
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
