//! Guard the shipped fixture files: structure, key numbers, and
//! roundtrip identity. Golden values elsewhere assume exactly these
//! tables.

mod common;

use backsim::{parse_network, serialize_network, Evidence, NodeId};
use common::{load_fixture_evidence, load_fixture_network};

#[test]
fn five_node_fixture_matches_the_documented_tables() {
    let net = load_fixture_network("five_node.net.json");
    assert_eq!(net.len(), 5);
    let names: Vec<&str> = net.variables().iter().map(|v| v.name.as_str()).collect();
    assert_eq!(names, vec!["A", "B", "C", "D", "E"]);

    let d = net.node_id("D").unwrap();
    assert_eq!(
        net.variable(d).parents,
        vec![net.node_id("B").unwrap(), net.node_id("C").unwrap()]
    );
    assert_eq!(
        net.variable(net.node_id("A").unwrap()).cpt.rows,
        vec![vec![0.2, 0.8]]
    );
    assert_eq!(
        net.variable(d).cpt.rows,
        vec![
            vec![0.8, 0.2],
            vec![0.8, 0.2],
            vec![0.8, 0.2],
            vec![0.05, 0.95],
        ]
    );
    // The deliberate reading of E's table: P(e1|c1)=0.8, P(e1|c2)=0.6.
    assert_eq!(
        net.variable(net.node_id("E").unwrap()).cpt.rows,
        vec![vec![0.8, 0.2], vec![0.6, 0.4]]
    );
}

#[test]
fn rare_variant_only_changes_the_d_table() {
    let base = load_fixture_network("five_node.net.json");
    let rare = load_fixture_network("five_node_rare.net.json");
    for (a, b) in base.variables().iter().zip(rare.variables()) {
        if a.name == "D" {
            assert_eq!(
                b.cpt.rows,
                vec![
                    vec![0.001, 0.999],
                    vec![0.0001, 0.9999],
                    vec![0.0001, 0.9999],
                    vec![0.05, 0.95],
                ]
            );
        } else {
            assert_eq!(a, b);
        }
    }
}

#[test]
fn two_node_fixture_parameters() {
    let net = load_fixture_network("two_node.net.json");
    assert_eq!(net.variable(NodeId(0)).cpt.rows, vec![vec![0.01, 0.99]]);
    assert_eq!(
        net.variable(NodeId(1)).cpt.rows,
        vec![vec![0.9999, 0.0001], vec![0.0001, 0.9999]]
    );
}

#[test]
fn evidence_fixtures_resolve() {
    let net = load_fixture_network("five_node.net.json");
    let ev = load_fixture_evidence(&net, "five_node_d2_e1.ev.json");
    let expected: Evidence = [(NodeId(3), 1), (NodeId(4), 0)].into_iter().collect();
    assert_eq!(ev, expected);

    let ev = load_fixture_evidence(&net, "five_node_d2.ev.json");
    assert_eq!(ev.len(), 1);
    assert_eq!(ev.get(NodeId(3)), Some(1));

    let two = load_fixture_network("two_node.net.json");
    let ev = load_fixture_evidence(&two, "two_node_t1.ev.json");
    assert_eq!(ev.get(NodeId(1)), Some(0));
}

#[test]
fn fixtures_roundtrip_byte_for_byte_data() {
    for name in [
        "five_node.net.json",
        "five_node_rare.net.json",
        "two_node.net.json",
    ] {
        let net = load_fixture_network(name);
        assert_eq!(parse_network(&serialize_network(&net)).unwrap(), net);
    }
}
