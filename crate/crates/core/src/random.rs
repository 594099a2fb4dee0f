//! Random networks and findings for property tests and benchmarks.
//!
//! Every generator is driven by a caller-supplied RNG so runs are
//! reproducible from a seed. Node ids are assigned independently of the
//! topological order, and node lists are shuffled, so tie-breaking and
//! ordering code is exercised.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::decision::cooper_transform;
use crate::inference::{find_loop_cutset, Findings, DEFAULT_CUTSET_INSTANTIATIONS, DEFAULT_ORACLE_STATES};
use crate::model::{
    config_count, config_index, is_polytree, topological_order, ChanceNode, DecisionNode, Network, Node,
    NodeId, ValueNode,
};

#[derive(Debug, Clone)]
pub struct NetworkShape {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub min_states: usize,
    pub max_states: usize,
    pub max_parents: usize,
    /// Cap on the product of all cardinalities, so the oracle can enumerate.
    pub max_joint_states: u64,
    /// Probability that a CPT entry is forced to zero.
    pub zero_probability: f64,
}

impl NetworkShape {
    /// Up to 7 nodes with 2 or 3 states.
    pub fn small() -> Self {
        NetworkShape {
            min_nodes: 2,
            max_nodes: 7,
            min_states: 2,
            max_states: 3,
            max_parents: 3,
            max_joint_states: DEFAULT_ORACLE_STATES,
            zero_probability: 0.05,
        }
    }

    /// Up to 12 nodes with 2 to 4 states.
    pub fn desk() -> Self {
        NetworkShape { max_nodes: 12, max_states: 4, ..Self::small() }
    }
}

#[derive(Debug, Clone)]
pub struct DecisionShape {
    pub chance: NetworkShape,
    pub max_chance: usize,
    pub max_decisions: usize,
    pub max_value_parents: usize,
}

impl Default for DecisionShape {
    fn default() -> Self {
        DecisionShape {
            chance: NetworkShape { min_nodes: 1, ..NetworkShape::desk() },
            max_chance: 8,
            max_decisions: 2,
            max_value_parents: 3,
        }
    }
}

fn ids<R: Rng>(rng: &mut R, n: usize) -> Vec<NodeId> {
    let mut ids: Vec<NodeId> = (0..n).map(|i| NodeId::new(format!("N{i:02}"))).collect();
    ids.shuffle(rng);
    ids
}

fn cardinalities<R: Rng>(rng: &mut R, n: usize, shape: &NetworkShape) -> Vec<usize> {
    let mut cards: Vec<usize> =
        (0..n).map(|_| rng.random_range(shape.min_states..=shape.max_states)).collect();
    while cards.iter().map(|&c| c as u64).product::<u64>() > shape.max_joint_states {
        let reducible: Vec<usize> = (0..n).filter(|&i| cards[i] > shape.min_states).collect();
        let &i = reducible.choose(rng).expect("state floor fits the cap");
        cards[i] -= 1;
    }
    cards
}

/// A probability row with Dirichlet(1) weights, some entries zeroed.
pub fn random_row<R: Rng>(rng: &mut R, states: usize, zero_probability: f64) -> Vec<f64> {
    loop {
        let mut row: Vec<f64> = (0..states)
            .map(|_| if rng.random_bool(zero_probability) { 0.0 } else { -(1.0 - rng.random::<f64>()).ln() })
            .collect();
        let sum: f64 = row.iter().sum();
        if sum > 1e-3 {
            row.iter_mut().for_each(|x| *x /= sum);
            return row;
        }
    }
}

fn chance_nodes<R: Rng>(
    rng: &mut R,
    ids: &[NodeId],
    cards: &[usize],
    parents: &[Vec<usize>],
    zero_probability: f64,
) -> Vec<Node> {
    (0..ids.len())
        .map(|v| {
            let pcards: Vec<usize> = parents[v].iter().map(|&p| cards[p]).collect();
            let rows =
                (0..config_count(&pcards)).map(|_| random_row(rng, cards[v], zero_probability)).collect();
            let mut node = ChanceNode::new(
                ids[v].clone(),
                (0..cards[v]).map(|s| format!("s{s}")),
                parents[v].iter().map(|&p| ids[p].as_str().to_owned()),
                rows,
            );
            node.meta.display.x = v as f64 * 40.0;
            Node::Chance(node)
        })
        .collect()
}

fn node_count<R: Rng>(rng: &mut R, shape: &NetworkShape) -> usize {
    rng.random_range(shape.min_nodes..=shape.max_nodes)
}

/// A random singly connected network (possibly a forest).
pub fn random_polytree<R: Rng>(rng: &mut R, shape: &NetworkShape) -> Network {
    let n = node_count(rng, shape);
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        if rng.random_bool(0.1) {
            continue;
        }
        let j = rng.random_range(0..i);
        let downward = rng.random_bool(0.5) || parents[j].len() >= shape.max_parents;
        if downward && parents[i].len() < shape.max_parents {
            parents[i].push(j);
        } else if parents[j].len() < shape.max_parents {
            parents[j].push(i);
        } else {
            parents[i].push(j);
        }
    }
    let cards = cardinalities(rng, n, shape);
    let ids = ids(rng, n);
    let mut nodes = chance_nodes(rng, &ids, &cards, &parents, shape.zero_probability);
    nodes.shuffle(rng);
    Network::belief("random-polytree", nodes)
}

fn random_parents<R: Rng>(rng: &mut R, n: usize, max_parents: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| {
            let k = rng.random_range(0..=max_parents.min(i));
            let mut earlier: Vec<usize> = (0..i).collect();
            earlier.shuffle(rng);
            earlier.truncate(k);
            earlier.sort_unstable();
            earlier
        })
        .collect()
}

/// A random DAG, connected or not, singly connected or not.
pub fn random_dag<R: Rng>(rng: &mut R, shape: &NetworkShape) -> Network {
    let n = node_count(rng, shape);
    let parents = random_parents(rng, n, shape.max_parents);
    let cards = cardinalities(rng, n, shape);
    let ids = ids(rng, n);
    let mut nodes = chance_nodes(rng, &ids, &cards, &parents, shape.zero_probability);
    nodes.shuffle(rng);
    Network::belief("random-dag", nodes)
}

fn cutset_instantiations(network: &Network) -> u64 {
    find_loop_cutset(network)
        .iter()
        .map(|id| network.node(id.as_str()).and_then(Node::cardinality).unwrap_or(1) as u64)
        .product()
}

/// A random DAG with at least one undirected cycle whose loop cutset stays
/// within the default instantiation limit.
pub fn random_multiply_connected<R: Rng>(rng: &mut R, shape: &NetworkShape) -> Network {
    let shape = NetworkShape { min_nodes: shape.min_nodes.max(4), ..shape.clone() };
    loop {
        let net = random_dag(rng, &shape);
        if !is_polytree(&net) && cutset_instantiations(&net) <= DEFAULT_CUTSET_INSTANTIATIONS {
            return net;
        }
    }
}

/// One joint configuration drawn from the network, decisions uniformly.
pub fn forward_sample<R: Rng>(rng: &mut R, network: &Network) -> BTreeMap<NodeId, usize> {
    let order = topological_order(network).expect("acyclic");
    let mut sampled = BTreeMap::new();
    for id in &order {
        let node = network.node(id.as_str()).unwrap();
        let state = match node {
            Node::Chance(c) => {
                let pcards = network.parent_cardinalities(node).unwrap();
                let assignment: Vec<usize> = c.parents.iter().map(|p| sampled[p]).collect();
                let row = config_index(&pcards, &assignment).unwrap();
                sample(rng, &c.cpt.rows[row])
            }
            Node::Decision(d) => rng.random_range(0..d.alternatives.len()),
            Node::Value(_) => continue,
        };
        sampled.insert(id.clone(), state);
    }
    sampled
}

/// Observes up to `max` chance nodes of a forward sample, so the findings
/// always have positive probability.
pub fn random_findings<R: Rng>(rng: &mut R, network: &Network, max: usize) -> Findings {
    let sampled = forward_sample(rng, network);
    observe(rng, network, &sampled, max)
}

fn observe<R: Rng>(
    rng: &mut R,
    network: &Network,
    sampled: &BTreeMap<NodeId, usize>,
    max: usize,
) -> Findings {
    let mut chance: Vec<&NodeId> = network.chance_nodes().map(|c| &c.id).collect();
    chance.shuffle(rng);
    let k = rng.random_range(0..=max.min(chance.len()));
    chance.into_iter().take(k).map(|id| (id.clone(), sampled[id])).collect()
}

fn sample<R: Rng>(rng: &mut R, row: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// A random decision network with one value node whose transformed belief
/// network stays within the default cutset limit.
pub fn random_decision_network<R: Rng>(rng: &mut R, shape: &DecisionShape) -> Network {
    loop {
        let chance = rng.random_range(shape.chance.min_nodes..=shape.max_chance);
        let decisions = rng.random_range(1..=shape.max_decisions);
        let n = chance + decisions;
        let parents = random_parents(rng, n, shape.chance.max_parents);
        let cards = cardinalities(rng, n, &NetworkShape { max_states: 3, ..shape.chance.clone() });
        let ids = ids(rng, n);

        let mut is_decision = vec![false; n];
        let mut slots: Vec<usize> = (0..n).collect();
        slots.shuffle(rng);
        for &s in slots.iter().take(decisions) {
            is_decision[s] = true;
        }

        let mut nodes = chance_nodes(rng, &ids, &cards, &parents, shape.chance.zero_probability);
        for v in 0..n {
            if is_decision[v] {
                nodes[v] = DecisionNode::new(
                    ids[v].clone(),
                    (0..cards[v]).map(|s| format!("d{s}")),
                    parents[v].iter().map(|&p| ids[p].as_str().to_owned()),
                )
                .into();
            }
        }

        let k = rng.random_range(1..=shape.max_value_parents.min(n));
        let mut pool: Vec<usize> = (0..n).collect();
        pool.shuffle(rng);
        let mut value_parents: Vec<usize> = pool.into_iter().take(k).collect();
        if rng.random_bool(0.8) && !value_parents.iter().any(|&v| is_decision[v]) {
            let d = (0..n).find(|&v| is_decision[v]).unwrap();
            value_parents[0] = d;
        }
        let vcards: Vec<usize> = value_parents.iter().map(|&p| cards[p]).collect();
        let utilities = (0..config_count(&vcards)).map(|_| rng.random_range(-100.0..100.0)).collect();
        nodes.push(
            ValueNode::new("VALUE", value_parents.iter().map(|&p| ids[p].as_str().to_owned()), utilities)
                .into(),
        );
        nodes.shuffle(rng);
        let net = Network::decision("random-decision", nodes);

        let Ok(transformed) = cooper_transform(&net) else { continue };
        if cutset_instantiations(&transformed.network) <= DEFAULT_CUTSET_INSTANTIATIONS {
            return net;
        }
    }
}

/// Findings for a decision network: chance observations from a forward
/// sample, plus occasionally one decision of the same sample fixed as
/// background context.
pub fn random_decision_findings<R: Rng>(rng: &mut R, network: &Network, max: usize) -> Findings {
    let sampled = forward_sample(rng, network);
    let mut findings = observe(rng, network, &sampled, max);
    let decisions: Vec<&NodeId> = network.decision_nodes().map(|d| &d.id).collect();
    if decisions.len() > 1 && rng.random_bool(0.2) {
        let d = *decisions.choose(rng).unwrap();
        findings.insert(d.clone(), sampled[d]);
    }
    findings
}
