//! Expected-utility decisions through a belief-network transform.
//!
//! [`cooper_transform`] rewrites a decision network as a belief network:
//! decision nodes become chance nodes with uniform tables, and the value
//! node becomes a binary `high`/`low` proxy with
//! `P(high | cfg) = (u(cfg) - u_min) / (u_max - u_min)`. Conditioning on a
//! decision configuration then gives
//! `EU = u_min + (u_max - u_min) * P(high | findings, configuration)`,
//! so any exact belief-network engine answers expected-utility queries.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::inference::{
    BeliefAssignment, ExactEngine, FindingError, Findings, InferenceError, InferenceResult,
};
use crate::model::{
    config_assignment, config_count, validate, ChanceNode, Cpt, Network, NetworkKind, Node, NodeId,
    ValidationReport,
};

/// Default cap on the number of decision configurations `recommend` scores.
pub const DEFAULT_MAX_CONFIGURATIONS: usize = 1024;

/// Normalized scores closer than this are ranked as ties.
pub const SCORE_RESOLUTION: f64 = 1e-9;

pub const PROXY_STATES: [&str; 2] = ["high", "low"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecisionError {
    #[error("malformed decision network:\n{0}")]
    MalformedDecisionNetwork(ValidationReport),
    #[error("operation requires a decision network")]
    NotDecisionNetwork,
    #[error("{count} decision configurations exceed the limit of {limit}")]
    TooManyConfigurations { count: usize, limit: usize },
    #[error("decision configuration does not assign {0}")]
    IncompleteConfiguration(NodeId),
    #[error("{0} is not a free decision node")]
    NotFreeDecision(NodeId),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

impl From<FindingError> for DecisionError {
    fn from(e: FindingError) -> Self {
        DecisionError::Inference(e.into())
    }
}

/// Belief network produced by [`cooper_transform`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedNetwork {
    pub network: Network,
    pub u_min: f64,
    pub u_max: f64,
    /// Id of the binary chance node standing in for the value node; it
    /// keeps the value node's id.
    pub proxy: NodeId,
}

impl TransformedNetwork {
    /// Maps the proxy's `P(high)` back to utility units.
    pub fn utility_of(&self, p_high: f64) -> f64 {
        if self.u_max > self.u_min {
            self.u_min + (self.u_max - self.u_min) * p_high
        } else {
            self.u_min
        }
    }
}

pub fn cooper_transform(network: &Network) -> Result<TransformedNetwork, DecisionError> {
    let report = validate(network);
    if !report.is_valid() {
        return Err(DecisionError::MalformedDecisionNetwork(report));
    }
    if network.kind != NetworkKind::DecisionNetwork {
        return Err(DecisionError::NotDecisionNetwork);
    }
    let value = network.value_nodes().next().expect("validated decision network");
    let (u_min, u_max) = value.utilities.range().expect("validated utility table");

    let nodes = network
        .nodes
        .iter()
        .map(|node| match node {
            Node::Chance(c) => Node::Chance(c.clone()),
            Node::Decision(d) => {
                let cards = network.parent_cardinalities(node).expect("validated parents");
                Node::Chance(ChanceNode {
                    id: d.id.clone(),
                    states: d.alternatives.clone(),
                    parents: d.parents.clone(),
                    cpt: Cpt::uniform(config_count(&cards), d.alternatives.len()),
                    meta: d.meta.clone(),
                    extensions: d.extensions.clone(),
                })
            }
            Node::Value(v) => {
                let rows = v
                    .utilities
                    .entries
                    .iter()
                    .map(|&u| {
                        let high = if u_max > u_min { (u - u_min) / (u_max - u_min) } else { 0.5 };
                        vec![high, 1.0 - high]
                    })
                    .collect();
                Node::Chance(ChanceNode {
                    id: v.id.clone(),
                    states: PROXY_STATES.iter().map(|s| s.to_string()).collect(),
                    parents: v.parents.clone(),
                    cpt: Cpt::new(rows),
                    meta: v.meta.clone(),
                    extensions: v.extensions.clone(),
                })
            }
        })
        .collect();

    let mut transformed = Network::belief(network.name.clone(), nodes);
    transformed.extensions = network.extensions.clone();
    Ok(TransformedNetwork { network: transformed, u_min, u_max, proxy: value.id.clone() })
}

/// Alternative index for each free decision node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct DecisionConfiguration(BTreeMap<NodeId, usize>);

impl DecisionConfiguration {
    pub fn get(&self, node: &str) -> Option<usize> {
        self.0.get(node).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, usize)> {
        self.0.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<K: Into<NodeId>> FromIterator<(K, usize)> for DecisionConfiguration {
    fn from_iter<I: IntoIterator<Item = (K, usize)>>(iter: I) -> Self {
        DecisionConfiguration(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatedDecision {
    pub configuration: DecisionConfiguration,
    /// Position of the configuration in enumeration order: free decision
    /// nodes sorted by id, the last one varying fastest.
    pub index: usize,
    /// `None` when the configuration is impossible given the findings.
    pub expected_utility: Option<f64>,
    /// Posterior `P(high)` of the value proxy, in `[0, 1]`.
    pub normalized_score: Option<f64>,
}

impl EvaluatedDecision {
    pub fn is_feasible(&self) -> bool {
        self.expected_utility.is_some()
    }

    fn rank_key(&self) -> Option<i64> {
        self.normalized_score.map(|s| (s / SCORE_RESOLUTION).round() as i64)
    }
}

/// Every decision configuration, best first.
///
/// Feasible configurations are ordered by descending score, where scores
/// within [`SCORE_RESOLUTION`] of each other tie and fall back to
/// ascending configuration index. Impossible configurations come last.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub ranked: Vec<EvaluatedDecision>,
    pub u_min: f64,
    pub u_max: f64,
}

impl Recommendation {
    pub fn best(&self) -> &EvaluatedDecision {
        &self.ranked[0]
    }
}

/// A decision network prepared for repeated queries: validated, transformed
/// and compiled once.
#[derive(Debug, Clone)]
pub struct DecisionEvaluator {
    network: Network,
    transformed: TransformedNetwork,
    engine: ExactEngine,
    max_configurations: usize,
}

impl DecisionEvaluator {
    pub fn new(network: &Network) -> Result<Self, DecisionError> {
        let transformed = cooper_transform(network)?;
        let engine = ExactEngine::new(&transformed.network)?;
        Ok(DecisionEvaluator {
            network: network.clone(),
            transformed,
            engine,
            max_configurations: DEFAULT_MAX_CONFIGURATIONS,
        })
    }

    pub fn with_max_configurations(mut self, limit: usize) -> Self {
        self.max_configurations = limit;
        self
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn transformed(&self) -> &TransformedNetwork {
        &self.transformed
    }

    /// Decision nodes not fixed by `findings`, sorted by id.
    pub fn free_decisions(&self, findings: &Findings) -> Vec<&NodeId> {
        let mut free: Vec<&NodeId> = self
            .network
            .decision_nodes()
            .map(|d| &d.id)
            .filter(|id| !findings.contains(id.as_str()))
            .collect();
        free.sort();
        free
    }

    /// Beliefs of the original chance nodes. Unfixed decisions are treated
    /// as uniformly random.
    pub fn beliefs(&self, findings: &Findings) -> Result<InferenceResult, InferenceError> {
        findings.check(&self.network)?;
        let mut out = self.engine.infer(findings)?;
        let chance: Vec<&NodeId> = self.network.chance_nodes().map(|c| &c.id).collect();
        out.beliefs.retain(|id| chance.contains(&id));
        Ok(out)
    }

    pub fn expected_utility(
        &self,
        findings: &Findings,
        config: &DecisionConfiguration,
    ) -> Result<f64, DecisionError> {
        let (eu, _) = self.score(findings, config)?;
        Ok(eu)
    }

    /// Expected utility and the proxy's `P(high)`.
    fn score(
        &self,
        findings: &Findings,
        config: &DecisionConfiguration,
    ) -> Result<(f64, f64), DecisionError> {
        findings.check(&self.network)?;
        let free = self.free_decisions(findings);
        for (id, _) in config.iter() {
            if !free.contains(&id) {
                return Err(DecisionError::NotFreeDecision(id.clone()));
            }
        }
        if let Some(missing) = free.iter().find(|id| config.get(id.as_str()).is_none()) {
            return Err(DecisionError::IncompleteConfiguration((*missing).clone()));
        }
        let combined: Findings = findings.merged(&config.iter().map(|(k, v)| (k.clone(), v)).collect());
        combined.check(&self.network)?;
        let out = self.engine.infer(&combined)?;
        let p_high = out.beliefs.get(self.transformed.proxy.as_str()).expect("proxy belief")[0];
        Ok((self.transformed.utility_of(p_high), p_high))
    }

    pub fn recommend(&self, findings: &Findings) -> Result<Recommendation, DecisionError> {
        findings.check(&self.network)?;
        let free = self.free_decisions(findings);
        let cards: Vec<usize> = free
            .iter()
            .map(|id| self.network.node(id.as_str()).and_then(Node::cardinality).unwrap())
            .collect();
        let count = cards.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c)).unwrap_or(usize::MAX);
        if count > self.max_configurations {
            return Err(DecisionError::TooManyConfigurations { count, limit: self.max_configurations });
        }

        let mut ranked = Vec::with_capacity(count);
        for index in 0..count {
            let assignment = config_assignment(&cards, index).expect("index in range");
            let configuration: DecisionConfiguration =
                free.iter().map(|&id| id.clone()).zip(assignment).collect();
            let (expected_utility, normalized_score) = match self.score(findings, &configuration) {
                Ok((eu, p)) => (Some(eu), Some(p)),
                Err(DecisionError::Inference(InferenceError::ImpossibleEvidence)) => (None, None),
                Err(e) => return Err(e),
            };
            ranked.push(EvaluatedDecision { configuration, index, expected_utility, normalized_score });
        }
        if ranked.iter().all(|d| !d.is_feasible()) {
            return Err(InferenceError::ImpossibleEvidence.into());
        }
        ranked.sort_by(|a, b| match (a.rank_key(), b.rank_key()) {
            (Some(x), Some(y)) => y.cmp(&x).then(a.index.cmp(&b.index)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.index.cmp(&b.index),
        });
        Ok(Recommendation { ranked, u_min: self.transformed.u_min, u_max: self.transformed.u_max })
    }
}

/// Expected utility of one complete configuration of the free decisions.
pub fn expected_utility(
    network: &Network,
    findings: &Findings,
    config: &DecisionConfiguration,
) -> Result<f64, DecisionError> {
    DecisionEvaluator::new(network)?.expected_utility(findings, config)
}

/// Scores every configuration of the decisions not fixed by `findings`.
pub fn recommend(network: &Network, findings: &Findings) -> Result<Recommendation, DecisionError> {
    DecisionEvaluator::new(network)?.recommend(findings)
}

/// Posterior beliefs of the chance nodes of a decision network.
pub fn decision_beliefs(network: &Network, findings: &Findings) -> Result<BeliefAssignment, DecisionError> {
    Ok(DecisionEvaluator::new(network)?.beliefs(findings)?.beliefs)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::model::{ChanceNode, DecisionNode, Network, ValueNode};

    /// Disease, pathophysiological state, lab test, treatment decision and
    /// a value node over state and treatment.
    pub fn figure1() -> Network {
        Network::decision(
            "figure1",
            vec![
                ChanceNode::new("DISEASE", ["present", "absent"], [], vec![vec![0.1, 0.9]]).into(),
                ChanceNode::new(
                    "PATHO-STATE",
                    ["severe", "mild"],
                    ["DISEASE"],
                    vec![vec![0.8, 0.2], vec![0.05, 0.95]],
                )
                .into(),
                ChanceNode::new(
                    "LAB-TEST",
                    ["positive", "negative"],
                    ["PATHO-STATE"],
                    vec![vec![0.9, 0.1], vec![0.2, 0.8]],
                )
                .into(),
                DecisionNode::new("TREAT?", ["treat", "no-treat"], ["LAB-TEST"]).into(),
                ValueNode::new("VALUE", ["PATHO-STATE", "TREAT?"], vec![70.0, 20.0, 90.0, 100.0]).into(),
            ],
        )
    }

    /// Value depends only on decision D: u(d1) = 10, u(d2) = 4.
    pub fn certain(utilities: [f64; 2]) -> Network {
        Network::decision(
            "certain",
            vec![
                ChanceNode::new("C", ["t", "f"], [], vec![vec![0.5, 0.5]]).into(),
                DecisionNode::new("D", ["d1", "d2"], []).into(),
                ValueNode::new("U", ["D"], utilities.to_vec()).into(),
            ],
        )
    }
}
