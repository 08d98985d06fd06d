//! Text file formats for networks and evidence.
//!
//! A network file is a JSON object with a single `nodes` key holding an
//! ordered list of node objects; see the repository README for the full
//! schema. Unknown keys are rejected. CPT rows follow the mixed-radix
//! row convention documented in [`crate::network`].
//!
//! An evidence file is a JSON object mapping node name to state label.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{validate_network, Cpt, Evidence, Network, NodeId, Variable, Violation};

#[derive(Debug, Error)]
pub enum ParseError {
    /// Malformed text, including unknown or missing keys. Positions are
    /// 1-based line/column as reported by the JSON parser.
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate node name {name:?}")]
    DuplicateName { name: String },
    #[error("node {node:?} references unknown parent {parent:?}")]
    UnknownParent { node: String, parent: String },
    /// The file was well-formed but the network violates structural
    /// invariants; all violations are listed.
    #[error("invalid network: {}", render_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("evidence references unknown node {name:?}")]
    UnknownNode { name: String },
    #[error("evidence assigns unknown state {label:?} to node {node:?}")]
    UnknownState { node: String, label: String },
}

fn render_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<serde_json::Error> for ParseError {
    fn from(err: serde_json::Error) -> Self {
        ParseError::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    nodes: Vec<NodeEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    name: String,
    states: Vec<String>,
    parents: Vec<String>,
    cpt: Vec<Vec<f64>>,
}

/// Parse a network file without running invariant validation. Name
/// resolution still applies: duplicate node names and unknown parent
/// names cannot be represented and are rejected here.
pub fn parse_network_unvalidated(text: &str) -> Result<Network, ParseError> {
    let file: NetworkFile = serde_json::from_str(text)?;

    let mut names = std::collections::HashMap::new();
    for (i, node) in file.nodes.iter().enumerate() {
        if names.insert(node.name.clone(), NodeId(i)).is_some() {
            return Err(ParseError::DuplicateName {
                name: node.name.clone(),
            });
        }
    }

    let mut variables = Vec::with_capacity(file.nodes.len());
    for node in file.nodes {
        let parents = node
            .parents
            .iter()
            .map(|p| {
                names
                    .get(p)
                    .copied()
                    .ok_or_else(|| ParseError::UnknownParent {
                        node: node.name.clone(),
                        parent: p.clone(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        variables.push(Variable {
            name: node.name,
            states: node.states,
            parents,
            cpt: Cpt::new(node.cpt),
        });
    }
    Ok(Network::new(variables))
}

/// Parse and validate a network file. Any parse or validation failure is
/// fatal; no partial network is returned.
pub fn parse_network(text: &str) -> Result<Network, ParseError> {
    let net = parse_network_unvalidated(text)?;
    let violations = validate_network(&net);
    if violations.is_empty() {
        Ok(net)
    } else {
        Err(ParseError::Invalid(violations))
    }
}

/// Render a network in the file format. `parse_network(serialize_network(n))`
/// reproduces `n` field for field.
pub fn serialize_network(net: &Network) -> String {
    let file = NetworkFile {
        nodes: net
            .variables()
            .iter()
            .map(|var| NodeEntry {
                name: var.name.clone(),
                states: var.states.clone(),
                parents: var
                    .parents
                    .iter()
                    .map(|&p| net.name(p).to_string())
                    .collect(),
                cpt: var.cpt.rows.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("network serialization cannot fail")
}

/// Parse an evidence file against a network, resolving node names and
/// state labels to indices.
pub fn parse_evidence(net: &Network, text: &str) -> Result<Evidence, ParseError> {
    // BTreeMap keeps resolution order deterministic.
    let raw: std::collections::BTreeMap<String, String> = serde_json::from_str(text)?;
    let mut evidence = Evidence::empty();
    for (name, label) in raw {
        let node = net
            .node_id(&name)
            .ok_or(ParseError::UnknownNode { name: name.clone() })?;
        let state = net
            .state_index(node, &label)
            .ok_or(ParseError::UnknownState {
                node: name,
                label: label.clone(),
            })?;
        evidence.set(node, state);
    }
    Ok(evidence)
}

/// Render evidence as a node-name to state-label object.
pub fn serialize_evidence(net: &Network, evidence: &Evidence) -> String {
    let map: std::collections::BTreeMap<&str, &str> = evidence
        .iter()
        .map(|(node, state)| (net.name(node), net.variable(node).states[state].as_str()))
        .collect();
    serde_json::to_string_pretty(&map).expect("evidence serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE_NODE: &str = r#"{
        "nodes": [
            { "name": "S", "states": ["s1", "s2"], "parents": [], "cpt": [[0.5, 0.5]] }
        ]
    }"#;

    #[test]
    fn parses_a_minimal_network() {
        let net = parse_network(SINGLE_NODE).unwrap();
        assert_eq!(net.len(), 1);
        assert!(net.variable(NodeId(0)).parents.is_empty());
        assert_eq!(net.variable(NodeId(0)).cpt.rows, vec![vec![0.5, 0.5]]);
    }

    #[test]
    fn rejects_unknown_keys_with_position() {
        let text = r#"{ "nodes": [], "extra": 1 }"#;
        match parse_network(text) {
            Err(ParseError::Syntax { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_row_sum_as_invalid() {
        let text = r#"{
            "nodes": [
                { "name": "D", "states": ["d1", "d2"], "parents": [], "cpt": [[0.2, 0.7]] }
            ]
        }"#;
        match parse_network(text) {
            Err(ParseError::Invalid(violations)) => {
                assert!(matches!(violations[0], Violation::RowSum { .. }));
                assert!(violations[0].to_string().contains("row sum != 1"));
            }
            other => panic!("expected invalid-network error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_parent() {
        let text = r#"{
            "nodes": [
                { "name": "B", "states": ["b1", "b2"], "parents": ["A"], "cpt": [[0.5, 0.5]] }
            ]
        }"#;
        assert!(matches!(
            parse_network(text),
            Err(ParseError::UnknownParent { .. })
        ));
    }

    #[test]
    fn roundtrip_is_identity() {
        let net = parse_network(SINGLE_NODE).unwrap();
        let reparsed = parse_network(&serialize_network(&net)).unwrap();
        assert_eq!(net, reparsed);
    }

    #[test]
    fn evidence_resolves_names_and_labels() {
        let net = parse_network(SINGLE_NODE).unwrap();
        let ev = parse_evidence(&net, r#"{ "S": "s2" }"#).unwrap();
        assert_eq!(ev.get(NodeId(0)), Some(1));

        assert!(matches!(
            parse_evidence(&net, r#"{ "X": "s1" }"#),
            Err(ParseError::UnknownNode { .. })
        ));
        assert!(matches!(
            parse_evidence(&net, r#"{ "S": "s9" }"#),
            Err(ParseError::UnknownState { .. })
        ));
    }

    #[test]
    fn evidence_roundtrip() {
        let net = parse_network(SINGLE_NODE).unwrap();
        let ev = parse_evidence(&net, r#"{ "S": "s1" }"#).unwrap();
        let text = serialize_evidence(&net, &ev);
        assert_eq!(parse_evidence(&net, &text).unwrap(), ev);
    }
}
