//! Brute-force exact inference by exhaustive enumeration.
//!
//! The oracle sums joint probabilities over every completion of the
//! evidence, in mixed-radix order over the non-evidence nodes. A
//! state-space guard protects against accidental use on large networks.

use thiserror::Error;

use crate::network::{advance_mixed_radix, Evidence, Instantiation, Network, NodeId};

/// Default cap on the joint state space for enumeration: 2^24.
pub const DEFAULT_STATE_GUARD: u64 = 1 << 24;

/// Exact posterior marginals plus the probability of the evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    /// Per node, the posterior distribution over its states given the
    /// evidence. Evidence nodes carry a point mass on the observed state.
    pub marginals: Vec<Vec<f64>>,
    /// Probability of the observed evidence under the network.
    pub evidence_probability: f64,
}

/// Result of exact inference. Impossible evidence is a first-class
/// outcome, not an error: the marginals are undefined and withheld.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactOutcome {
    Posterior(PosteriorSummary),
    ImpossibleEvidence,
}

impl ExactOutcome {
    /// The summary, if the evidence was possible.
    pub fn posterior(&self) -> Option<&PosteriorSummary> {
        match self {
            ExactOutcome::Posterior(summary) => Some(summary),
            ExactOutcome::ImpossibleEvidence => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("joint state space has {states} states, exceeding the guard of {guard}")]
    GuardExceeded { states: u128, guard: u64 },
}

/// Compute exact posterior marginals and the evidence probability by
/// enumerating every completion of the evidence.
///
/// `guard` caps the *total* joint state space of the network (not just
/// the enumerated part), keeping runtime predictable.
pub fn exact_posteriors(
    net: &Network,
    evidence: &Evidence,
    guard: u64,
) -> Result<ExactOutcome, OracleError> {
    let states = net.joint_state_count();
    if states > guard as u128 {
        return Err(OracleError::GuardExceeded { states, guard });
    }

    let free: Vec<NodeId> = net.node_ids().filter(|n| !evidence.contains(*n)).collect();

    let mut x = Instantiation::from_evidence(net.len(), evidence);
    let mut digits = vec![0usize; free.len()];
    let mut sums: Vec<Vec<f64>> = net
        .node_ids()
        .map(|n| vec![0.0; net.state_count(n)])
        .collect();
    let mut total = 0.0;

    loop {
        for (k, &node) in free.iter().enumerate() {
            x.set(node, digits[k]);
        }
        let p = net
            .joint_probability(&x)
            .expect("enumeration always yields full instantiations");
        total += p;
        for node in net.node_ids() {
            sums[node.0][x.get(node).unwrap()] += p;
        }
        if !advance_mixed_radix(&mut digits, |k| net.state_count(free[k])) {
            break;
        }
    }

    if total == 0.0 {
        return Ok(ExactOutcome::ImpossibleEvidence);
    }

    for dist in &mut sums {
        for v in dist.iter_mut() {
            *v /= total;
        }
    }
    Ok(ExactOutcome::Posterior(PosteriorSummary {
        marginals: sums,
        evidence_probability: total,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Cpt;
    use crate::testnets::{five_node, five_node_rare, two_node};

    #[test]
    fn two_node_matches_bayes_rule() {
        let net = two_node(0.01, 0.0001);
        let ev: Evidence = [(NodeId(1), 0)].into_iter().collect();
        let summary = exact_posteriors(&net, &ev, DEFAULT_STATE_GUARD)
            .unwrap()
            .posterior()
            .cloned()
            .unwrap();
        let expected = (0.01 * 0.9999) / (0.01 * 0.9999 + 0.99 * 0.0001);
        assert!((summary.marginals[0][0] - expected).abs() < 1e-12);
        assert!((expected - 0.990196).abs() < 1e-6);
        // Evidence node is a point mass.
        assert_eq!(summary.marginals[1], vec![1.0, 0.0]);
    }

    #[test]
    fn empty_evidence_gives_priors_and_unit_probability() {
        let net = five_node();
        let summary = exact_posteriors(&net, &Evidence::empty(), DEFAULT_STATE_GUARD)
            .unwrap()
            .posterior()
            .cloned()
            .unwrap();
        assert!((summary.evidence_probability - 1.0).abs() < 1e-12);
        // Hand-computed prior marginals for the five-node fixture.
        let expected = [
            [0.2, 0.8],
            [0.32, 0.68],
            [0.08, 0.92],
            [0.32, 0.68],
            [0.616, 0.384],
        ];
        for (node, exp) in expected.iter().enumerate() {
            for (s, &e) in exp.iter().enumerate() {
                assert!(
                    (summary.marginals[node][s] - e).abs() < 1e-9,
                    "node {node} state {s}: {} vs {e}",
                    summary.marginals[node][s]
                );
            }
        }
    }

    #[test]
    fn five_node_golden_posteriors() {
        // Frozen after hand-enumerating the joint over (A, B, C) with
        // D = d2, E = e1: P(evidence) = 0.4112, P(a1 | ev) = 0.04/0.4112,
        // P(b1 | ev) = 0.04/0.4112, P(c1 | ev) = 0.0128/0.4112.
        let net = five_node();
        let ev: Evidence = [(NodeId(3), 1), (NodeId(4), 0)].into_iter().collect();
        let summary = exact_posteriors(&net, &ev, DEFAULT_STATE_GUARD)
            .unwrap()
            .posterior()
            .cloned()
            .unwrap();
        assert!((summary.evidence_probability - 0.4112).abs() < 1e-12);
        let golden = [(0, 0.04 / 0.4112), (1, 0.04 / 0.4112), (2, 0.0128 / 0.4112)];
        for (node, p1) in golden {
            assert!(
                (summary.marginals[node][0] - p1).abs() < 1e-12,
                "node {node}: {} vs {p1}",
                summary.marginals[node][0]
            );
            assert!((summary.marginals[node][1] - (1.0 - p1)).abs() < 1e-12);
        }
        assert_eq!(summary.marginals[3], vec![0.0, 1.0]);
        assert_eq!(summary.marginals[4], vec![1.0, 0.0]);
    }

    #[test]
    fn rare_variant_evidence_probability() {
        // Hand computation: P(b,c) = (0.04, 0.28, 0.04, 0.64) and
        // P(d1) = 0.001*0.04 + 0.0001*0.28 + 0.0001*0.04 + 0.05*0.64
        //       = 0.032072.
        let net = five_node_rare();
        let ev: Evidence = [(NodeId(3), 0)].into_iter().collect();
        let summary = exact_posteriors(&net, &ev, DEFAULT_STATE_GUARD)
            .unwrap()
            .posterior()
            .cloned()
            .unwrap();
        assert!((summary.evidence_probability - 0.032072).abs() < 1e-12);
        // The observation all but pins (B, C) to (b2, c2).
        assert!(summary.marginals[1][1] > 0.99);
        assert!(summary.marginals[2][1] > 0.99);
    }

    #[test]
    fn marginals_sum_to_one() {
        let net = five_node();
        let ev: Evidence = [(NodeId(3), 1)].into_iter().collect();
        let summary = exact_posteriors(&net, &ev, DEFAULT_STATE_GUARD)
            .unwrap()
            .posterior()
            .cloned()
            .unwrap();
        for dist in &summary.marginals {
            let sum: f64 = dist.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn impossible_evidence_is_distinguished() {
        // T = t1 has zero likelihood under every parent state.
        let mut net = two_node(0.5, 0.0);
        let mut vars = net.variables().to_vec();
        vars[1].cpt = Cpt::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]]);
        net = Network::new(vars);
        let ev: Evidence = [(NodeId(1), 0)].into_iter().collect();
        assert_eq!(
            exact_posteriors(&net, &ev, DEFAULT_STATE_GUARD).unwrap(),
            ExactOutcome::ImpossibleEvidence
        );
    }

    #[test]
    fn guard_is_enforced() {
        let net = five_node(); // 32 joint states
        let err = exact_posteriors(&net, &Evidence::empty(), 16).unwrap_err();
        assert_eq!(
            err,
            OracleError::GuardExceeded {
                states: 32,
                guard: 16
            }
        );
    }

    #[test]
    fn evidence_probability_invariant_under_reordering() {
        // Rebuild the five-node fixture with variables listed in reverse
        // topological positions and parent ids remapped.
        let net = five_node();
        let perm = [4usize, 2, 0, 1, 3]; // new index -> old index
        let mut inverse = [0usize; 5];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let reordered = Network::new(
            perm.iter()
                .map(|&old| {
                    let mut var = net.variable(NodeId(old)).clone();
                    var.parents = var.parents.iter().map(|p| NodeId(inverse[p.0])).collect();
                    var
                })
                .collect(),
        );
        assert!(crate::network::validate_network(&reordered).is_empty());

        let ev_orig: Evidence = [(NodeId(3), 1), (NodeId(4), 0)].into_iter().collect();
        let ev_reord: Evidence = [(NodeId(inverse[3]), 1), (NodeId(inverse[4]), 0)]
            .into_iter()
            .collect();
        let p1 = exact_posteriors(&net, &ev_orig, DEFAULT_STATE_GUARD)
            .unwrap()
            .posterior()
            .unwrap()
            .evidence_probability;
        let p2 = exact_posteriors(&reordered, &ev_reord, DEFAULT_STATE_GUARD)
            .unwrap()
            .posterior()
            .unwrap()
            .evidence_probability;
        assert!((p1 - p2).abs() <= 1e-12 * p1.max(p2));
    }
}
