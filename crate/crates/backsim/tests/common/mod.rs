//! Shared support for the integration suites: fixture loading, scripted
//! randomness, and seeded random-network generation.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;

use backsim::{
    parse_evidence, parse_network, Cpt, Evidence, Network, NodeId, UnitSource, Variable,
};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn load_fixture_network(name: &str) -> Network {
    let text = std::fs::read_to_string(fixture_path(name))
        .unwrap_or_else(|e| panic!("reading fixture {name}: {e}"));
    parse_network(&text).unwrap_or_else(|e| panic!("parsing fixture {name}: {e}"))
}

pub fn load_fixture_evidence(net: &Network, name: &str) -> Evidence {
    let text = std::fs::read_to_string(fixture_path(name))
        .unwrap_or_else(|e| panic!("reading fixture {name}: {e}"));
    parse_evidence(net, &text).unwrap_or_else(|e| panic!("parsing fixture {name}: {e}"))
}

/// Unit-interval source that plays back a fixed script and panics if a
/// trial draws more than scripted.
pub struct Scripted {
    values: Vec<f64>,
    pos: usize,
}

impl Scripted {
    pub fn new(values: &[f64]) -> Self {
        Scripted {
            values: values.to_vec(),
            pos: 0,
        }
    }

    pub fn exhausted(&self) -> bool {
        self.pos == self.values.len()
    }
}

impl UnitSource for Scripted {
    fn next_unit(&mut self) -> f64 {
        let v = self.values[self.pos];
        self.pos += 1;
        v
    }
}

/// Random DAG with dense indices: parents always have smaller indices,
/// at most three per node. `zero_entries` permits zero CPT entries
/// (keeping at least one positive entry per row), which makes
/// impossible branches and trial aborts reachable.
pub fn random_network(
    rng: &mut impl Rng,
    max_nodes: usize,
    max_states: usize,
    zero_entries: bool,
) -> Network {
    let n = rng.random_range(2..=max_nodes);
    let mut vars: Vec<Variable> = Vec::with_capacity(n);
    for i in 0..n {
        let k = rng.random_range(2..=max_states);
        let states = (0..k).map(|s| format!("n{i}s{s}")).collect();
        let mut parents: Vec<NodeId> = (0..i)
            .filter(|_| rng.random::<f64>() < 0.5)
            .map(NodeId)
            .collect();
        while parents.len() > 3 {
            let drop = rng.random_range(0..parents.len());
            parents.remove(drop);
        }
        let row_count: usize = parents.iter().map(|p| vars[p.0].states.len()).product();
        let rows = (0..row_count)
            .map(|_| {
                let mut row: Vec<f64> = (0..k)
                    .map(|_| {
                        if zero_entries && rng.random::<f64>() < 0.25 {
                            0.0
                        } else {
                            rng.random::<f64>() + 0.05
                        }
                    })
                    .collect();
                if row.iter().all(|&v| v == 0.0) {
                    row[0] = 1.0;
                }
                let sum: f64 = row.iter().sum();
                for v in &mut row {
                    *v /= sum;
                }
                row
            })
            .collect();
        vars.push(Variable {
            name: format!("N{i}"),
            states,
            parents,
            cpt: Cpt::new(rows),
        });
    }
    Network::new(vars)
}

/// Evidence on a random subset of nodes (possibly empty).
pub fn random_evidence(rng: &mut impl Rng, net: &Network) -> Evidence {
    let mut evidence = Evidence::empty();
    for n in net.node_ids() {
        if rng.random::<f64>() < 0.35 {
            evidence.set(n, rng.random_range(0..net.state_count(n)));
        }
    }
    evidence
}
