use std::collections::BTreeMap;

use crate::model::{topological_order, Network, Node, NodeId};

use super::{BeliefAssignment, FindingError, Findings};

/// Index form of a validated belief network.
///
/// Nodes are numbered in topological order; `cpt[v]` is row-major with
/// `card[v]` columns and one row per configuration of `parents[v]`.
#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub ids: Vec<NodeId>,
    pub index: BTreeMap<NodeId, usize>,
    pub card: Vec<usize>,
    pub parents: Vec<Vec<usize>>,
    pub children: Vec<Vec<usize>>,
    pub cpt: Vec<Vec<f64>>,
}

impl Compiled {
    /// Expects a network that passed validation and holds chance nodes only.
    pub fn from_network(network: &Network) -> Self {
        let ids = topological_order(network).expect("validated network is acyclic");
        let index: BTreeMap<NodeId, usize> = ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
        let n = ids.len();
        let mut card = vec![0; n];
        let mut parents = vec![Vec::new(); n];
        let mut cpt = vec![Vec::new(); n];
        for node in &network.nodes {
            let Node::Chance(c) = node else { continue };
            let v = index[&c.id];
            card[v] = c.states.len();
            parents[v] = c.parents.iter().map(|p| index[p]).collect();
            cpt[v] = c.cpt.rows.iter().flatten().copied().collect();
        }
        let children = children_of(&parents);
        Compiled { ids, index, card, parents, children, cpt }
    }

    /// Directed arcs as (parent, child) index pairs.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.parents.iter().enumerate().flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c))).collect()
    }

    pub fn evidence(&self, findings: &Findings) -> Result<Vec<Option<usize>>, FindingError> {
        let mut evidence = vec![None; self.ids.len()];
        for (id, state) in findings.iter() {
            let &v = self.index.get(id).ok_or_else(|| FindingError::UnknownNode(id.clone()))?;
            if state >= self.card[v] {
                return Err(FindingError::InvalidState {
                    node: id.clone(),
                    state,
                    cardinality: self.card[v],
                });
            }
            evidence[v] = Some(state);
        }
        Ok(evidence)
    }

    pub fn assignment(&self, beliefs: Vec<Vec<f64>>) -> BeliefAssignment {
        self.ids.iter().cloned().zip(beliefs).collect()
    }

    /// Copy of this graph with every outgoing arc of the `fixed` nodes
    /// removed; each former child's table is sliced at the fixed state.
    pub fn cut_outgoing(&self, fixed: &[(usize, usize)]) -> Compiled {
        let mut value: Vec<Option<usize>> = vec![None; self.ids.len()];
        for &(v, s) in fixed {
            value[v] = Some(s);
        }
        let mut parents = self.parents.clone();
        let mut cpt = self.cpt.clone();
        for c in 0..self.ids.len() {
            if self.parents[c].iter().all(|&p| value[p].is_none()) {
                continue;
            }
            let cards: Vec<usize> = self.parents[c].iter().map(|&p| self.card[p]).collect();
            let width = self.card[c];
            let mut sliced = Vec::new();
            super::for_each_config(&cards, |row, assignment| {
                let keep =
                    self.parents[c].iter().zip(assignment).all(|(&p, &a)| value[p].is_none_or(|s| s == a));
                if keep {
                    sliced.extend_from_slice(&self.cpt[c][row * width..(row + 1) * width]);
                }
            });
            parents[c].retain(|&p| value[p].is_none());
            cpt[c] = sliced;
        }
        let children = children_of(&parents);
        Compiled {
            ids: self.ids.clone(),
            index: self.index.clone(),
            card: self.card.clone(),
            parents,
            children,
            cpt,
        }
    }
}

fn children_of(parents: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut children = vec![Vec::new(); parents.len()];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    children
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::fixtures::diamond;

    #[test]
    fn nodes_are_numbered_topologically() {
        let g = Compiled::from_network(&diamond());
        let ids: Vec<&str> = g.ids.iter().map(NodeId::as_str).collect();
        assert_eq!(ids, ["A", "B", "C", "D"]);
        assert_eq!(g.parents[3], vec![1, 2]);
        assert_eq!(g.children[0], vec![1, 2]);
        assert_eq!(g.cpt[3].len(), 8);
    }

    #[test]
    fn cutting_slices_child_tables() {
        let g = Compiled::from_network(&diamond());
        // Fix B = f: D keeps only the rows with B = f, i.e. (f,t) and (f,f).
        let cut = g.cut_outgoing(&[(1, 1)]);
        assert_eq!(cut.parents[3], vec![2]);
        assert_eq!(cut.cpt[3], vec![0.5, 0.5, 0.02, 0.98]);
        assert!(cut.children[1].is_empty());
        // B keeps its own parent.
        assert_eq!(cut.parents[1], vec![0]);
    }
}
