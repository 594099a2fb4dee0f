//! Exact posterior computation.
//!
//! Three routes share one result type:
//!
//! * [`oracle_joint`] enumerates every joint configuration. It is slow and
//!   independent of the other two, and anchors the test suites.
//! * [`propagate_polytree`] passes causal (pi) and diagnostic (lambda)
//!   messages over a singly connected network in one two-phase sweep.
//! * [`infer`] dispatches: polytrees go straight to propagation, multiply
//!   connected networks are handled by conditioning on a loop cutset and
//!   mixing the per-instantiation polytree results.

mod compiled;
mod cutset;
mod oracle;
mod polytree;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{validate, Network, NetworkKind, NodeId, NodeKind, ValidationReport};

use compiled::Compiled;

pub use cutset::{find_loop_cutset, LoopCutset};
pub use oracle::{oracle_expected_utility, oracle_joint, oracle_joint_with_limit};
pub use polytree::{propagate_polytree, PolytreeResult, SupportVectors};

/// Default cap on the joint state space the oracle will enumerate.
pub const DEFAULT_ORACLE_STATES: u64 = 1 << 20;

/// Default cap on loop-cutset instantiations.
pub const DEFAULT_CUTSET_INSTANTIATIONS: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FindingError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("value node {0} cannot be instantiated")]
    NotInstantiable(NodeId),
    #[error("state index {state} is out of range for node {node} with {cardinality} states")]
    InvalidState { node: NodeId, state: usize, cardinality: usize },
    #[error("node {node} has no state {label:?}")]
    UnknownLabel { node: NodeId, label: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Finding(#[from] FindingError),
    #[error("the findings have zero probability")]
    ImpossibleEvidence,
    #[error("{what} of {size} exceeds the limit of {limit}")]
    TooLarge { what: &'static str, size: u64, limit: u64 },
    #[error("network is not singly connected")]
    NotPolytree,
    #[error("operation requires a belief network")]
    NotBeliefNetwork,
    #[error("invalid network:\n{0}")]
    InvalidNetwork(ValidationReport),
}

/// Observed states: node id to state index.
///
/// Inserting a node that is already present replaces its state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Findings(BTreeMap<NodeId, usize>);

impl Findings {
    pub fn new() -> Self {
        Findings::default()
    }

    /// Returns the previous state of `node`, if any.
    pub fn insert(&mut self, node: impl Into<NodeId>, state: usize) -> Option<usize> {
        self.0.insert(node.into(), state)
    }

    pub fn remove(&mut self, node: &str) -> Option<usize> {
        self.0.remove(node)
    }

    pub fn get(&self, node: &str) -> Option<usize> {
        self.0.get(node).copied()
    }

    pub fn contains(&self, node: &str) -> bool {
        self.0.contains_key(node)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, usize)> {
        self.0.iter().map(|(k, &v)| (k, v))
    }

    /// These findings with `overlay` entries added or overriding.
    pub fn merged(&self, overlay: &Findings) -> Findings {
        let mut out = self.clone();
        for (k, v) in overlay.iter() {
            out.insert(k.clone(), v);
        }
        out
    }

    /// Checks every entry against `network`.
    pub fn check(&self, network: &Network) -> Result<(), FindingError> {
        for (id, state) in self.iter() {
            let node = network.node(id.as_str()).ok_or_else(|| FindingError::UnknownNode(id.clone()))?;
            if node.kind() == NodeKind::Value {
                return Err(FindingError::NotInstantiable(id.clone()));
            }
            let cardinality = node.cardinality().unwrap_or(0);
            if state >= cardinality {
                return Err(FindingError::InvalidState { node: id.clone(), state, cardinality });
            }
        }
        Ok(())
    }
}

impl<K: Into<NodeId>> FromIterator<(K, usize)> for Findings {
    fn from_iter<I: IntoIterator<Item = (K, usize)>>(iter: I) -> Self {
        Findings(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// Posterior distribution of each chance node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BeliefAssignment(BTreeMap<NodeId, Vec<f64>>);

impl BeliefAssignment {
    pub fn get(&self, node: &str) -> Option<&[f64]> {
        self.0.get(node).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &[f64])> {
        self.0.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn insert(&mut self, node: NodeId, belief: Vec<f64>) {
        self.0.insert(node, belief);
    }

    /// Keeps only the listed nodes.
    pub fn retain(&mut self, mut keep: impl FnMut(&NodeId) -> bool) {
        self.0.retain(|k, _| keep(k));
    }

    /// Largest absolute entry-wise difference; infinite if the two do not
    /// cover the same nodes and shapes.
    pub fn max_abs_difference(&self, other: &BeliefAssignment) -> f64 {
        if self.0.len() != other.0.len() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for (id, a) in &self.0 {
            let Some(b) = other.0.get(id) else { return f64::INFINITY };
            if a.len() != b.len() {
                return f64::INFINITY;
            }
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }
}

impl FromIterator<(NodeId, Vec<f64>)> for BeliefAssignment {
    fn from_iter<I: IntoIterator<Item = (NodeId, Vec<f64>)>>(iter: I) -> Self {
        BeliefAssignment(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub beliefs: BeliefAssignment,
    /// Probability of the findings, P(findings).
    pub evidence_probability: f64,
}

/// Exact engine prepared for one belief network: the network is validated,
/// compiled to index form and its loop cutset chosen once, so repeated
/// queries only pay for propagation.
#[derive(Debug, Clone)]
pub struct ExactEngine {
    graph: Compiled,
    cutset: Vec<usize>,
    max_instantiations: u64,
}

impl ExactEngine {
    pub fn new(network: &Network) -> Result<Self, InferenceError> {
        Self::with_limit(network, DEFAULT_CUTSET_INSTANTIATIONS)
    }

    pub fn with_limit(network: &Network, max_instantiations: u64) -> Result<Self, InferenceError> {
        let graph = compile_belief_network(network)?;
        let cutset = cutset::greedy_cutset(&graph.ids, &graph.arcs());
        Ok(ExactEngine { graph, cutset, max_instantiations })
    }

    pub fn cutset(&self) -> LoopCutset {
        self.cutset.iter().map(|&i| self.graph.ids[i].clone()).collect()
    }

    pub fn infer(&self, findings: &Findings) -> Result<InferenceResult, InferenceError> {
        let evidence = self.graph.evidence(findings)?;
        if self.cutset.is_empty() {
            let run = polytree::propagate(&self.graph, &evidence)?;
            return Ok(InferenceResult {
                beliefs: self.graph.assignment(run.beliefs),
                evidence_probability: run.evidence_probability,
            });
        }
        let (beliefs, p) = cutset::condition(&self.graph, &evidence, &self.cutset, self.max_instantiations)?;
        Ok(InferenceResult { beliefs: self.graph.assignment(beliefs), evidence_probability: p })
    }
}

/// Posterior beliefs and P(findings) for a belief network.
pub fn infer(network: &Network, findings: &Findings) -> Result<InferenceResult, InferenceError> {
    ExactEngine::new(network)?.infer(findings)
}

fn compile_belief_network(network: &Network) -> Result<Compiled, InferenceError> {
    if network.kind != NetworkKind::BeliefNetwork {
        return Err(InferenceError::NotBeliefNetwork);
    }
    let report = validate(network);
    if !report.is_valid() {
        return Err(InferenceError::InvalidNetwork(report));
    }
    Ok(Compiled::from_network(network))
}

/// Calls `f(row, assignment)` for every configuration of the given
/// cardinalities in row order, last position fastest.
pub(crate) fn for_each_config(cards: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let mut assignment = vec![0usize; cards.len()];
    let count: usize = cards.iter().product();
    for row in 0..count {
        f(row, &assignment);
        for pos in (0..cards.len()).rev() {
            assignment[pos] += 1;
            if assignment[pos] < cards[pos] {
                break;
            }
            assignment[pos] = 0;
        }
    }
}

pub(crate) fn normalize(v: &mut [f64]) -> Option<f64> {
    let sum: f64 = v.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        return None;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    Some(sum)
}
