//! Brute-force enumeration of the joint distribution.
//!
//! Shares nothing with the propagation code beyond the network types, so
//! the two can check each other. Decision nodes that are not clamped are
//! given a uniform distribution over their alternatives.

use crate::model::{topological_order, validate, Network, Node, NodeId, NodeKind};

use super::{BeliefAssignment, Findings, InferenceError, InferenceResult, DEFAULT_ORACLE_STATES};

struct Var {
    id: NodeId,
    kind: NodeKind,
    card: usize,
    /// Positions of the parents in the enumeration order.
    parents: Vec<usize>,
    /// Row stride of each parent: product of the later parents' cardinalities.
    strides: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

struct Joint {
    vars: Vec<Var>,
    clamp: Vec<Option<usize>>,
}

impl Joint {
    fn build(network: &Network, findings: &Findings, limit: u64) -> Result<Joint, InferenceError> {
        let report = validate(network);
        if !report.is_valid() {
            return Err(InferenceError::InvalidNetwork(report));
        }
        findings.check(network)?;

        let order: Vec<NodeId> = topological_order(network)
            .expect("validated network is acyclic")
            .into_iter()
            .filter(|id| network.node(id.as_str()).map(Node::kind) != Some(NodeKind::Value))
            .collect();
        let position = |id: &NodeId| order.iter().position(|o| o == id).expect("known parent");

        let mut states: u64 = 1;
        let mut vars = Vec::with_capacity(order.len());
        for id in &order {
            let node = network.node(id.as_str()).expect("ordered node exists");
            let card = node.cardinality().expect("chance or decision node");
            states = states.saturating_mul(card as u64);
            let parents: Vec<usize> = node.parents().iter().map(position).collect();
            let cards: Vec<usize> = node
                .parents()
                .iter()
                .map(|p| network.node(p.as_str()).and_then(Node::cardinality).unwrap())
                .collect();
            let mut strides = vec![1; cards.len()];
            for k in (0..cards.len().saturating_sub(1)).rev() {
                strides[k] = strides[k + 1] * cards[k + 1];
            }
            let rows = match node {
                Node::Chance(c) => c.cpt.rows.clone(),
                _ => Vec::new(),
            };
            vars.push(Var { id: id.clone(), kind: node.kind(), card, parents, strides, rows });
        }
        if states > limit {
            return Err(InferenceError::TooLarge { what: "joint state space", size: states, limit });
        }
        let clamp = order.iter().map(|id| findings.get(id.as_str())).collect();
        Ok(Joint { vars, clamp })
    }

    /// Depth-first walk over every configuration consistent with the clamps,
    /// calling `leaf(weight, states)` for each one of nonzero weight.
    fn enumerate(&self, uniform_decisions: bool, leaf: &mut impl FnMut(f64, &[usize])) {
        let mut states = vec![0usize; self.vars.len()];
        self.descend(0, 1.0, &mut states, uniform_decisions, leaf);
    }

    fn descend(
        &self,
        depth: usize,
        weight: f64,
        states: &mut Vec<usize>,
        uniform_decisions: bool,
        leaf: &mut impl FnMut(f64, &[usize]),
    ) {
        if depth == self.vars.len() {
            leaf(weight, states);
            return;
        }
        let var = &self.vars[depth];
        let row: usize = var.parents.iter().zip(&var.strides).map(|(&p, &s)| states[p] * s).sum();
        let choices: Vec<usize> = match self.clamp[depth] {
            Some(s) => vec![s],
            None => (0..var.card).collect(),
        };
        for s in choices {
            let factor = match var.kind {
                NodeKind::Chance => var.rows[row][s],
                _ if uniform_decisions => 1.0 / var.card as f64,
                _ => 1.0,
            };
            let w = weight * factor;
            if w == 0.0 {
                continue;
            }
            states[depth] = s;
            self.descend(depth + 1, w, states, uniform_decisions, leaf);
        }
    }
}

/// Posterior of every chance node and P(findings) by full enumeration,
/// with the default state-space limit.
pub fn oracle_joint(network: &Network, findings: &Findings) -> Result<InferenceResult, InferenceError> {
    oracle_joint_with_limit(network, findings, DEFAULT_ORACLE_STATES)
}

pub fn oracle_joint_with_limit(
    network: &Network,
    findings: &Findings,
    max_states: u64,
) -> Result<InferenceResult, InferenceError> {
    let joint = Joint::build(network, findings, max_states)?;
    let mut marginals: Vec<Vec<f64>> = joint.vars.iter().map(|v| vec![0.0; v.card]).collect();
    let mut total = 0.0;
    joint.enumerate(true, &mut |w, states| {
        total += w;
        for (m, &s) in marginals.iter_mut().zip(states) {
            m[s] += w;
        }
    });
    if total <= 0.0 {
        return Err(InferenceError::ImpossibleEvidence);
    }
    let beliefs: BeliefAssignment = joint
        .vars
        .iter()
        .zip(marginals)
        .filter(|(v, _)| v.kind == NodeKind::Chance)
        .map(|(v, m)| (v.id.clone(), m.into_iter().map(|x| x / total).collect()))
        .collect();
    Ok(InferenceResult { beliefs, evidence_probability: total })
}

/// Expected utility of a decision network with every decision node clamped
/// by `clamped`: the sum over joint configurations of u(value parents)
/// times the configuration's posterior probability.
pub fn oracle_expected_utility(network: &Network, clamped: &Findings) -> Result<f64, InferenceError> {
    let value = network.value_nodes().next().ok_or(InferenceError::NotBeliefNetwork)?;
    if let Some(d) = network.decision_nodes().find(|d| !clamped.contains(d.id.as_str())) {
        return Err(InferenceError::Finding(super::FindingError::UnknownNode(d.id.clone())));
    }
    let joint = Joint::build(network, clamped, DEFAULT_ORACLE_STATES)?;
    let position = |id: &NodeId| joint.vars.iter().position(|v| &v.id == id).unwrap();
    let value_parents: Vec<usize> = value.parents.iter().map(position).collect();
    let cards: Vec<usize> = value_parents.iter().map(|&p| joint.vars[p].card).collect();

    let mut weighted = 0.0;
    let mut total = 0.0;
    joint.enumerate(false, &mut |w, states| {
        let mut index = 0;
        for (&p, &c) in value_parents.iter().zip(&cards) {
            index = index * c + states[p];
        }
        weighted += w * value.utilities.entries[index];
        total += w;
    });
    if total <= 0.0 {
        return Err(InferenceError::ImpossibleEvidence);
    }
    Ok(weighted / total)
}
