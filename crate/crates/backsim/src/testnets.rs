//! Networks shared by the unit tests. Mirrors the fixture files shipped
//! in `fixtures/`; `format` tests assert the two stay in sync.

use crate::network::{Cpt, Network, NodeId, Variable};

fn two_state(name: &str, parents: Vec<NodeId>, rows: Vec<Vec<f64>>) -> Variable {
    Variable {
        name: name.to_string(),
        states: vec![
            format!("{}1", name.to_lowercase()),
            format!("{}2", name.to_lowercase()),
        ],
        parents,
        cpt: Cpt::new(rows),
    }
}

/// Five binary nodes: A -> B, A -> C, {B, C} -> D, C -> E.
pub(crate) fn five_node() -> Network {
    Network::new(vec![
        two_state("A", vec![], vec![vec![0.2, 0.8]]),
        two_state("B", vec![NodeId(0)], vec![vec![0.8, 0.2], vec![0.2, 0.8]]),
        two_state("C", vec![NodeId(0)], vec![vec![0.2, 0.8], vec![0.05, 0.95]]),
        two_state(
            "D",
            vec![NodeId(1), NodeId(2)],
            vec![
                vec![0.8, 0.2],
                vec![0.8, 0.2],
                vec![0.8, 0.2],
                vec![0.05, 0.95],
            ],
        ),
        two_state("E", vec![NodeId(2)], vec![vec![0.8, 0.2], vec![0.6, 0.4]]),
    ])
}

/// The five-node network with D's table replaced by near-deterministic
/// rows, making d1 a rare observation under most parent configurations.
pub(crate) fn five_node_rare() -> Network {
    let net = five_node();
    let mut vars = net.variables().to_vec();
    vars[3].cpt = Cpt::new(vec![
        vec![0.001, 0.999],
        vec![0.0001, 0.9999],
        vec![0.0001, 0.9999],
        vec![0.05, 0.95],
    ]);
    Network::new(vars)
}

/// Two-node network: S with prior (delta, 1-delta); child T observes t1
/// with likelihood 1-epsilon under s1 and epsilon under s2.
pub(crate) fn two_node(delta: f64, epsilon: f64) -> Network {
    Network::new(vec![
        Variable {
            name: "S".into(),
            states: vec!["s1".into(), "s2".into()],
            parents: vec![],
            cpt: Cpt::new(vec![vec![delta, 1.0 - delta]]),
        },
        Variable {
            name: "T".into(),
            states: vec!["t1".into(), "t2".into()],
            parents: vec![NodeId(0)],
            cpt: Cpt::new(vec![
                vec![1.0 - epsilon, epsilon],
                vec![epsilon, 1.0 - epsilon],
            ]),
        },
    ])
}
