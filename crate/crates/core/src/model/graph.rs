use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use super::{Network, NodeId, NodeKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("graph contains a directed cycle through {}", join_ids(.nodes))]
    CyclicGraph { nodes: Vec<NodeId> },
    #[error("state index {index} at position {position} is out of range for cardinality {cardinality}")]
    IndexOutOfRange { position: usize, index: usize, cardinality: usize },
    #[error("assignment has {found} entries, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("configuration index {index} is out of range for {count} configurations")]
    ConfigurationOutOfRange { index: usize, count: usize },
}

fn join_ids(ids: &[NodeId]) -> String {
    ids.iter().map(NodeId::as_str).collect::<Vec<_>>().join(", ")
}

/// Number of joint configurations of variables with the given cardinalities.
pub fn config_count(cards: &[usize]) -> usize {
    cards.iter().product()
}

/// Row index of a parent configuration: row-major, last parent fastest.
pub fn config_index(cards: &[usize], assignment: &[usize]) -> Result<usize, ModelError> {
    if cards.len() != assignment.len() {
        return Err(ModelError::LengthMismatch { expected: cards.len(), found: assignment.len() });
    }
    let mut index = 0;
    for (position, (&card, &a)) in cards.iter().zip(assignment).enumerate() {
        if a >= card {
            return Err(ModelError::IndexOutOfRange { position, index: a, cardinality: card });
        }
        index = index * card + a;
    }
    Ok(index)
}

/// Inverse of [`config_index`].
pub fn config_assignment(cards: &[usize], index: usize) -> Result<Vec<usize>, ModelError> {
    let count = config_count(cards);
    if index >= count {
        return Err(ModelError::ConfigurationOutOfRange { index, count });
    }
    let mut rest = index;
    let mut assignment = vec![0; cards.len()];
    for (slot, &card) in assignment.iter_mut().zip(cards).rev() {
        *slot = rest % card;
        rest /= card;
    }
    Ok(assignment)
}

/// Parents before children; ties broken by lexicographic node id.
///
/// Parent references that do not resolve are ignored.
pub fn topological_order(network: &Network) -> Result<Vec<NodeId>, ModelError> {
    let ids: BTreeMap<&str, usize> =
        network.nodes.iter().enumerate().map(|(i, n)| (n.id().as_str(), i)).collect();
    let n = network.nodes.len();
    let mut indegree = vec![0usize; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in network.nodes.iter().enumerate() {
        for p in node.parents() {
            if let Some(&pi) = ids.get(p.as_str()) {
                indegree[i] += 1;
                children[pi].push(i);
            }
        }
    }

    let mut ready: BinaryHeap<Reverse<(&str, usize)>> = indegree
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(i, _)| Reverse((network.nodes[i].id().as_str(), i)))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, i))) = ready.pop() {
        order.push(network.nodes[i].id().clone());
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse((network.nodes[c].id().as_str(), c)));
            }
        }
    }

    if order.len() < n {
        let nodes = cycle_nodes(network);
        return Err(ModelError::CyclicGraph { nodes });
    }
    Ok(order)
}

/// Nodes lying on (or between) directed cycles, sorted by id.
///
/// Strips sources and sinks until nothing more can be removed.
pub(crate) fn cycle_nodes(network: &Network) -> Vec<NodeId> {
    let ids: BTreeMap<&str, usize> =
        network.nodes.iter().enumerate().map(|(i, n)| (n.id().as_str(), i)).collect();
    let n = network.nodes.len();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in network.nodes.iter().enumerate() {
        for p in node.parents() {
            if let Some(&pi) = ids.get(p.as_str()) {
                parents[i].push(pi);
                children[pi].push(i);
            }
        }
    }
    let mut alive = vec![true; n];
    loop {
        let mut changed = false;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            let has_parent = parents[i].iter().any(|&p| alive[p]);
            let has_child = children[i].iter().any(|&c| alive[c]);
            if !has_parent || !has_child {
                alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut out: Vec<NodeId> = (0..n).filter(|&i| alive[i]).map(|i| network.nodes[i].id().clone()).collect();
    out.sort();
    out
}

/// True iff the undirected skeleton of the chance-node subgraph has no cycle.
pub fn is_polytree(network: &Network) -> bool {
    let chance: BTreeMap<&str, usize> = network
        .nodes
        .iter()
        .filter(|n| n.kind() == NodeKind::Chance)
        .enumerate()
        .map(|(i, n)| (n.id().as_str(), i))
        .collect();
    let mut forest = UnionFind::new(chance.len());
    for node in network.nodes.iter().filter(|n| n.kind() == NodeKind::Chance) {
        let child = chance[node.id().as_str()];
        for p in node.parents() {
            if let Some(&parent) = chance.get(p.as_str()) {
                if !forest.union(parent, child) {
                    return false;
                }
            }
        }
    }
    true
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the two sets; false if they were already one.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}
