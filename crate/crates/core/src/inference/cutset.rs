//! Loop cutset selection and conditioning.
//!
//! A cutset node is instantiated in every pass and its outgoing arcs are
//! cut: each child's table is sliced at the instantiated state while the
//! cutset node itself stays in the graph as an observed leaf under its
//! own parents. The cutset is chosen so that the graph left after those
//! cuts is a forest, which implies that deleting the cutset nodes outright
//! also leaves a forest.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::UnionFind;
use crate::model::{Network, NodeId, NodeKind};

use super::compiled::Compiled;
use super::{for_each_config, normalize, polytree, InferenceError};

/// Chance nodes whose instantiation renders a network singly connected.
pub type LoopCutset = BTreeSet<NodeId>;

/// Deterministic loop cutset of the chance-node subgraph. Empty iff that
/// subgraph is already a polytree.
pub fn find_loop_cutset(network: &Network) -> LoopCutset {
    let mut ids: Vec<&NodeId> =
        network.nodes.iter().filter(|n| n.kind() == NodeKind::Chance).map(|n| n.id()).collect();
    ids.sort();
    let index: BTreeMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut arcs = Vec::new();
    for node in network.nodes.iter().filter(|n| n.kind() == NodeKind::Chance) {
        let c = index[node.id()];
        for p in node.parents() {
            if let Some(&pi) = index.get(p) {
                arcs.push((pi, c));
            }
        }
    }
    let owned: Vec<NodeId> = ids.iter().map(|&id| id.clone()).collect();
    greedy_cutset(&owned, &arcs).into_iter().map(|i| owned[i].clone()).collect()
}

/// Greedy selection over directed `arcs` (parent, child).
///
/// Repeatedly picks, among nodes with an outgoing arc that still lies on an
/// undirected cycle, the one of highest remaining degree (ties by id), and
/// cuts all of its outgoing arcs.
pub(crate) fn greedy_cutset(ids: &[NodeId], arcs: &[(usize, usize)]) -> Vec<usize> {
    let n = ids.len();
    let mut active = vec![true; arcs.len()];
    let mut chosen = Vec::new();
    loop {
        let on_cycle = arcs_on_cycles(n, arcs, &active);
        let mut degree = vec![0usize; n];
        for (e, &(p, c)) in arcs.iter().enumerate() {
            if active[e] {
                degree[p] += 1;
                degree[c] += 1;
            }
        }
        let best = arcs
            .iter()
            .enumerate()
            .filter(|&(e, _)| on_cycle[e])
            .map(|(_, &(p, _))| p)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .max_by(|&a, &b| degree[a].cmp(&degree[b]).then_with(|| ids[b].cmp(&ids[a])));
        let Some(v) = best else { break };
        chosen.push(v);
        for (e, &(p, _)) in arcs.iter().enumerate() {
            if p == v {
                active[e] = false;
            }
        }
    }
    chosen.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    chosen
}

/// An active arc lies on a cycle iff its endpoints stay connected without it.
fn arcs_on_cycles(n: usize, arcs: &[(usize, usize)], active: &[bool]) -> Vec<bool> {
    (0..arcs.len())
        .map(|e| {
            if !active[e] {
                return false;
            }
            let mut uf = UnionFind::new(n);
            for (f, &(p, c)) in arcs.iter().enumerate() {
                if f != e && active[f] {
                    uf.union(p, c);
                }
            }
            uf.find(arcs[e].0) == uf.find(arcs[e].1)
        })
        .collect()
}

/// Mixes polytree passes over every instantiation of the unobserved cutset
/// nodes, weighting each by the probability of its extended evidence.
/// Instantiations are visited in index order so sums are reproducible.
pub(crate) fn condition(
    g: &Compiled,
    evidence: &[Option<usize>],
    cutset: &[usize],
    max_instantiations: u64,
) -> Result<(Vec<Vec<f64>>, f64), InferenceError> {
    let free: Vec<usize> = cutset.iter().copied().filter(|&v| evidence[v].is_none()).collect();
    let cards: Vec<usize> = free.iter().map(|&v| g.card[v]).collect();
    let count = cards.iter().fold(1u64, |acc, &c| acc.saturating_mul(c as u64));
    if count > max_instantiations {
        return Err(InferenceError::TooLarge {
            what: "loop cutset instantiation count",
            size: count,
            limit: max_instantiations,
        });
    }

    let mut acc: Vec<Vec<f64>> = g.card.iter().map(|&c| vec![0.0; c]).collect();
    let mut total = 0.0;
    let mut failure = None;
    for_each_config(&cards, |_, assignment| {
        if failure.is_some() {
            return;
        }
        let mut extended = evidence.to_vec();
        for (&v, &s) in free.iter().zip(assignment) {
            extended[v] = Some(s);
        }
        let fixed: Vec<(usize, usize)> =
            cutset.iter().map(|&v| (v, extended[v].expect("cutset node instantiated"))).collect();
        let reduced = g.cut_outgoing(&fixed);
        match polytree::propagate(&reduced, &extended) {
            Ok(run) => {
                let w = run.evidence_probability;
                total += w;
                for (a, b) in acc.iter_mut().zip(&run.beliefs) {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += w * y;
                    }
                }
            }
            Err(InferenceError::ImpossibleEvidence) => {}
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if total <= 0.0 {
        return Err(InferenceError::ImpossibleEvidence);
    }
    for b in acc.iter_mut() {
        normalize(b).ok_or(InferenceError::ImpossibleEvidence)?;
    }
    Ok((acc, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::fixtures::{chain, diamond};
    use crate::model::{is_polytree, ChanceNode, Node};
    use crate::random::{random_dag, random_multiply_connected, NetworkShape};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// The network with `cutset` nodes (and their arcs) deleted.
    fn without(network: &Network, cutset: &LoopCutset) -> Network {
        let nodes: Vec<Node> = network
            .nodes
            .iter()
            .filter(|n| !cutset.contains(n.id()))
            .map(|n| {
                let mut n = n.clone();
                if let Node::Chance(c) = &mut n {
                    c.parents.retain(|p| !cutset.contains(p));
                }
                n
            })
            .collect();
        Network::belief("rest", nodes)
    }

    #[test]
    fn polytree_has_empty_cutset() {
        assert!(find_loop_cutset(&chain()).is_empty());
    }

    #[test]
    fn diamond_needs_one_node() {
        let net = diamond();
        let cut = find_loop_cutset(&net);
        assert_eq!(cut.len(), 1);
        assert!(is_polytree(&without(&net, &cut)));
    }

    #[test]
    fn disjoint_diamonds_need_one_node_each() {
        let mut net = diamond();
        for node in diamond().nodes {
            let Node::Chance(mut c) = node else { unreachable!() };
            c.id = NodeId::new(format!("{}2", c.id));
            c.parents = c.parents.iter().map(|p| NodeId::new(format!("{p}2"))).collect();
            net.nodes.push(c.into());
        }
        let cut = find_loop_cutset(&net);
        assert_eq!(cut.len(), 2);
        let first = cut.iter().filter(|id| !id.as_str().ends_with('2')).count();
        assert_eq!(first, 1);
        assert!(is_polytree(&without(&net, &cut)));
    }

    #[test]
    fn cutset_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = random_multiply_connected(&mut rng, &NetworkShape::small());
        let mut shuffled = net.clone();
        shuffled.nodes.reverse();
        assert_eq!(find_loop_cutset(&net), find_loop_cutset(&shuffled));
    }

    #[test]
    fn head_to_head_only_cycle_is_cut_at_a_source() {
        // A -> C <- B, A -> D <- B: the sinks C, D alone would not break the loop.
        let net = Network::belief(
            "w",
            vec![
                ChanceNode::new("A", ["t", "f"], [], vec![vec![0.5, 0.5]]).into(),
                ChanceNode::new("B", ["t", "f"], [], vec![vec![0.5, 0.5]]).into(),
                ChanceNode::new("C", ["t", "f"], ["A", "B"], vec![vec![0.5, 0.5]; 4]).into(),
                ChanceNode::new("D", ["t", "f"], ["A", "B"], vec![vec![0.5, 0.5]; 4]).into(),
            ],
        );
        let cut = find_loop_cutset(&net);
        assert!(cut.iter().all(|id| id.as_str() == "A" || id.as_str() == "B"), "{cut:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn removal_leaves_a_polytree(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_dag(&mut rng, &NetworkShape::small());
            let cut = find_loop_cutset(&net);
            prop_assert_eq!(cut.is_empty(), is_polytree(&net));
            prop_assert!(is_polytree(&without(&net, &cut)));
        }
    }
}
