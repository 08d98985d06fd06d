//! Sampling plans: node orderings with a per-step sampling mode.
//!
//! A plan is an ordered list of steps, each naming a node and a mode:
//!
//! * a **backward** step on an instantiated node draws a joint assignment
//!   for the node's uninstantiated parents from its normalized likelihood
//!   row;
//! * a **forward** step draws the node's own state from its CPT row.
//!
//! A plan is valid for a network and evidence when, simulating
//! instantiation bookkeeping step by step:
//!
//! 1. every backward-stepped node is instantiated when its step runs
//!    (observed as evidence, or assigned by an earlier backward draw),
//!    or is a leaf, which may be backward-stepped uninstantiated by
//!    drawing the node itself uniformly (equivalent to attaching a dummy
//!    uniform-likelihood observation below it);
//! 2. every forward-stepped node has all parents instantiated when its
//!    step runs, and is not itself already instantiated;
//! 3. after the last step every node has been stepped or is a parent of
//!    some backward-stepped node (so a full instantiation is produced).
//!
//! Evidence nodes, when present in a plan, must be backward steps: a
//! backward step whose parents are already instantiated draws nothing and
//! contributes its likelihood to the trial weight, which is exactly the
//! classical likelihood-weighting treatment of evidence. This makes the
//! forward baseline a plan rather than a second engine.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

use crate::format::ParseError;
use crate::network::{Evidence, Network, NodeId};

/// Sampling mode for one plan step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Backward,
    Forward,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Backward => write!(f, "backward"),
            Mode::Forward => write!(f, "forward"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanStep {
    pub node: NodeId,
    pub mode: Mode,
}

/// An ordered sequence of sampling steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPlan {
    steps: Vec<PlanStep>,
}

impl SamplingPlan {
    pub fn new(steps: Vec<PlanStep>) -> Self {
        SamplingPlan { steps }
    }

    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Nodes stepped by this plan, in step order.
    pub fn sampled_nodes(&self) -> Vec<NodeId> {
        self.steps.iter().map(|s| s.node).collect()
    }

    /// Nodes with backward steps, in step order.
    pub fn backward_nodes(&self) -> Vec<NodeId> {
        self.steps
            .iter()
            .filter(|s| s.mode == Mode::Backward)
            .map(|s| s.node)
            .collect()
    }

    /// Nodes with forward steps, in step order.
    pub fn forward_nodes(&self) -> Vec<NodeId> {
        self.steps
            .iter()
            .filter(|s| s.mode == Mode::Forward)
            .map(|s| s.node)
            .collect()
    }

    /// Render as "D:backward, B:backward, E:forward" for messages.
    pub fn describe(&self, net: &Network) -> String {
        self.steps
            .iter()
            .map(|s| format!("{}:{}", net.name(s.node), s.mode))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Mark everything a step instantiates: a backward step instantiates the
/// node's parents (and, in the uninstantiated-leaf case, the node
/// itself); a forward step instantiates the node.
pub(crate) fn apply_step(net: &Network, instantiated: &mut [bool], step: &PlanStep) {
    instantiated[step.node.0] = true;
    if step.mode == Mode::Backward {
        for &p in &net.variable(step.node).parents {
            instantiated[p.0] = true;
        }
    }
}

/// One violated ordering requirement. Node references are rendered as
/// names so reports stand on their own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanViolation {
    /// Backward step on a node that is neither instantiated nor a leaf.
    NotInstantiated {
        step: usize,
        node: String,
    },
    /// Forward step with at least one uninstantiated parent.
    ParentsNotInstantiated {
        step: usize,
        node: String,
        missing: Vec<String>,
    },
    /// Node neither stepped nor a parent of any backward-stepped node.
    Uncovered {
        node: String,
    },
    /// Evidence nodes must be scheduled backward.
    EvidenceForward {
        step: usize,
        node: String,
    },
    /// Forward step on a node that already has a value.
    AlreadyInstantiated {
        step: usize,
        node: String,
    },
    DuplicateNode {
        step: usize,
        node: String,
    },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanViolation::NotInstantiated { step, node } => write!(
                f,
                "step {step}: node {node:?} is backward-sampled before it is instantiated"
            ),
            PlanViolation::ParentsNotInstantiated { step, node, missing } => write!(
                f,
                "step {step}: node {node:?} is forward-sampled with uninstantiated parent(s) {}",
                missing.join(", ")
            ),
            PlanViolation::Uncovered { node } => write!(
                f,
                "node {node:?} is neither sampled nor a parent of a backward-sampled node"
            ),
            PlanViolation::EvidenceForward { step, node } => write!(
                f,
                "step {step}: evidence node {node:?} is scheduled forward; evidence must be backward"
            ),
            PlanViolation::AlreadyInstantiated { step, node } => write!(
                f,
                "step {step}: node {node:?} is forward-sampled but already instantiated"
            ),
            PlanViolation::DuplicateNode { step, node } => {
                write!(f, "step {step}: node {node:?} appears more than once")
            }
        }
    }
}

/// Simulate the plan's instantiation bookkeeping step by step and report
/// every violated requirement. Violations are data; an empty report
/// means the plan is valid for this network and evidence.
pub fn validate_plan(
    net: &Network,
    evidence: &Evidence,
    plan: &SamplingPlan,
) -> Vec<PlanViolation> {
    let mut out = Vec::new();
    let children = net.children();
    let mut instantiated = vec![false; net.len()];
    for (node, _) in evidence.iter() {
        instantiated[node.0] = true;
    }
    let mut stepped = vec![false; net.len()];

    for (i, step) in plan.steps.iter().enumerate() {
        let node = step.node;
        let name = || net.name(node).to_string();
        if stepped[node.0] {
            out.push(PlanViolation::DuplicateNode {
                step: i,
                node: name(),
            });
        }
        stepped[node.0] = true;
        match step.mode {
            Mode::Backward => {
                if !instantiated[node.0] && !children[node.0].is_empty() {
                    out.push(PlanViolation::NotInstantiated {
                        step: i,
                        node: name(),
                    });
                }
            }
            Mode::Forward => {
                if evidence.contains(node) {
                    out.push(PlanViolation::EvidenceForward {
                        step: i,
                        node: name(),
                    });
                } else if instantiated[node.0] {
                    out.push(PlanViolation::AlreadyInstantiated {
                        step: i,
                        node: name(),
                    });
                }
                let missing: Vec<String> = net
                    .variable(node)
                    .parents
                    .iter()
                    .filter(|p| !instantiated[p.0])
                    .map(|&p| net.name(p).to_string())
                    .collect();
                if !missing.is_empty() {
                    out.push(PlanViolation::ParentsNotInstantiated {
                        step: i,
                        node: name(),
                        missing,
                    });
                }
            }
        }
        // Keep simulating past violations so every problem is reported.
        apply_step(net, &mut instantiated, step);
    }

    let mut covered = stepped;
    for step in &plan.steps {
        if step.mode == Mode::Backward {
            for &p in &net.variable(step.node).parents {
                covered[p.0] = true;
            }
        }
    }
    for node in net.node_ids() {
        if !covered[node.0] {
            out.push(PlanViolation::Uncovered {
                node: net.name(node).to_string(),
            });
        }
    }

    out
}

/// Reverse-topological order of a node subset: within the subset, every
/// node is emitted after all of its in-subset descendants; ties broken
/// by ascending node index.
fn reverse_topological(net: &Network, members: &[bool]) -> Vec<NodeId> {
    let children = net.children();
    let n = net.len();
    let mut pending: Vec<usize> = vec![0; n];
    for i in 0..n {
        if members[i] {
            pending[i] = children[i].iter().filter(|c| members[c.0]).count();
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| members[i] && pending[i] == 0).collect();
    let mut order = Vec::new();
    while let Some(&i) = ready.iter().next() {
        ready.remove(&i);
        order.push(NodeId(i));
        for &p in &net.variable(NodeId(i)).parents {
            if members[p.0] {
                pending[p.0] -= 1;
                if pending[p.0] == 0 {
                    ready.insert(p.0);
                }
            }
        }
    }
    order
}

/// Build the default plan: backward-sample the evidence and every
/// evidence ancestor that has parents, descendants first; then
/// forward-sample whatever is still uninstantiated, in topological
/// order. Ties always break by ascending node index.
///
/// Parentless ancestors are left out of the backward phase: a backward
/// step on a root draws nothing, and the root's prior already enters the
/// weight through the unsampled-node product. With empty evidence this
/// degenerates to pure forward simulation.
pub fn default_plan(net: &Network, evidence: &Evidence) -> SamplingPlan {
    let n = net.len();
    let ancestors = net.ancestors_of(evidence.iter().map(|(node, _)| node));
    let mut backward = vec![false; n];
    for (node, _) in evidence.iter() {
        backward[node.0] = true;
    }
    for i in 0..n {
        if ancestors[i] && !net.variable(NodeId(i)).parents.is_empty() {
            backward[i] = true;
        }
    }

    let mut steps: Vec<PlanStep> = reverse_topological(net, &backward)
        .into_iter()
        .map(|node| PlanStep {
            node,
            mode: Mode::Backward,
        })
        .collect();

    // Everything a backward step instantiates needs no step of its own.
    let mut instantiated = vec![false; n];
    for step in &steps {
        apply_step(net, &mut instantiated, step);
    }
    let topo = net
        .topological_order()
        .expect("default_plan requires an acyclic network");
    steps.extend(
        topo.into_iter()
            .filter(|node| !instantiated[node.0])
            .map(|node| PlanStep {
                node,
                mode: Mode::Forward,
            }),
    );

    SamplingPlan::new(steps)
}

/// Build the forward-simulation baseline: every node in topological
/// order, evidence nodes backward (pure likelihood weighting), all
/// others forward.
pub fn forward_plan(net: &Network, evidence: &Evidence) -> SamplingPlan {
    let topo = net
        .topological_order()
        .expect("forward_plan requires an acyclic network");
    SamplingPlan::new(
        topo.into_iter()
            .map(|node| PlanStep {
                node,
                mode: if evidence.contains(node) {
                    Mode::Backward
                } else {
                    Mode::Forward
                },
            })
            .collect(),
    )
}

/// Result of [`enumerate_plans`]. `truncated` is set when more valid
/// plans exist beyond `limit`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanEnumeration {
    pub plans: Vec<SamplingPlan>,
    pub truncated: bool,
}

/// Enumerate distinct valid plans depth-first, trying candidate steps in
/// (node index, backward-before-forward) order. Intended for small
/// networks; stops after `limit` plans.
///
/// Enumeration only schedules backward steps on nodes already
/// instantiated at that point; the uninstantiated-leaf form is accepted
/// by [`validate_plan`] but treated as an exotic hand-written option and
/// never generated here (otherwise every leaf would double the output).
pub fn enumerate_plans(net: &Network, evidence: &Evidence, limit: usize) -> PlanEnumeration {
    struct Search<'a> {
        net: &'a Network,
        evidence: &'a Evidence,
        limit: usize,
        plans: Vec<SamplingPlan>,
        truncated: bool,
    }

    impl Search<'_> {
        fn complete(&self, stepped: &[bool], backward_covered: &[bool]) -> bool {
            (0..self.net.len()).all(|i| stepped[i] || backward_covered[i])
        }

        /// Returns false when the plan budget is exhausted.
        fn dfs(
            &mut self,
            steps: &mut Vec<PlanStep>,
            instantiated: &mut Vec<bool>,
            stepped: &mut Vec<bool>,
            backward_covered: &mut Vec<bool>,
        ) -> bool {
            if !steps.is_empty() && self.complete(stepped, backward_covered) {
                if self.plans.len() == self.limit {
                    self.truncated = true;
                    return false;
                }
                self.plans.push(SamplingPlan::new(steps.clone()));
            }
            for i in 0..self.net.len() {
                let node = NodeId(i);
                if stepped[i] {
                    continue;
                }
                for mode in [Mode::Backward, Mode::Forward] {
                    let viable = match mode {
                        Mode::Backward => instantiated[i],
                        Mode::Forward => {
                            !self.evidence.contains(node)
                                && !instantiated[i]
                                && self
                                    .net
                                    .variable(node)
                                    .parents
                                    .iter()
                                    .all(|p| instantiated[p.0])
                        }
                    };
                    if !viable {
                        continue;
                    }
                    let step = PlanStep { node, mode };
                    let mut flipped = Vec::new();
                    let mut covered_flipped = Vec::new();
                    stepped[i] = true;
                    if !instantiated[i] {
                        flipped.push(i);
                        instantiated[i] = true;
                    }
                    if mode == Mode::Backward {
                        for &p in &self.net.variable(node).parents {
                            if !instantiated[p.0] {
                                flipped.push(p.0);
                                instantiated[p.0] = true;
                            }
                            if !backward_covered[p.0] {
                                covered_flipped.push(p.0);
                                backward_covered[p.0] = true;
                            }
                        }
                    }
                    steps.push(step);
                    let keep_going = self.dfs(steps, instantiated, stepped, backward_covered);
                    steps.pop();
                    stepped[i] = false;
                    for p in flipped {
                        instantiated[p] = false;
                    }
                    for p in covered_flipped {
                        backward_covered[p] = false;
                    }
                    if !keep_going {
                        return false;
                    }
                }
            }
            true
        }
    }

    let n = net.len();
    let mut search = Search {
        net,
        evidence,
        limit,
        plans: Vec::new(),
        truncated: false,
    };
    let mut instantiated = vec![false; n];
    for (node, _) in evidence.iter() {
        instantiated[node.0] = true;
    }
    search.dfs(
        &mut Vec::new(),
        &mut instantiated,
        &mut vec![false; n],
        &mut vec![false; n],
    );
    PlanEnumeration {
        plans: search.plans,
        truncated: search.truncated,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanEntry {
    node: String,
    mode: Mode,
}

/// Parse a plan file: an ordered JSON list of `{ "node": name, "mode":
/// "backward" | "forward" }` entries, resolved against the network.
pub fn parse_plan(net: &Network, text: &str) -> Result<SamplingPlan, ParseError> {
    let entries: Vec<PlanEntry> = serde_json::from_str(text)?;
    let steps = entries
        .into_iter()
        .map(|entry| {
            let node = net
                .node_id(&entry.node)
                .ok_or(ParseError::UnknownNode { name: entry.node })?;
            Ok(PlanStep {
                node,
                mode: entry.mode,
            })
        })
        .collect::<Result<Vec<_>, ParseError>>()?;
    Ok(SamplingPlan::new(steps))
}

pub fn serialize_plan(net: &Network, plan: &SamplingPlan) -> String {
    let entries: Vec<PlanEntry> = plan
        .steps()
        .iter()
        .map(|s| PlanEntry {
            node: net.name(s.node).to_string(),
            mode: s.mode,
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("plan serialization cannot fail")
}
