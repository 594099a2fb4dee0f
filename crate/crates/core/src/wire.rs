//! JSON views keyed by node id and state label, shared by the command line
//! and the HTTP service. Indices stay internal to the engine.

use std::collections::BTreeMap;

use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::consultation::{EventKind, SessionEvent};
use crate::decision::{DecisionConfiguration, EvaluatedDecision, Recommendation};
use crate::inference::{BeliefAssignment, FindingError, Findings};
use crate::model::{Network, NetworkKind, Node, NodeId, NodeKind};

/// Rounds to 7 significant digits.
pub fn round7(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.6e}").parse().expect("formatted float parses")
}

/// State label to probability, in declared state order.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(pub Vec<(String, f64)>);

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (label, p) in &self.0 {
            map.serialize_entry(label, p)?;
        }
        map.end()
    }
}

pub type BeliefsView = BTreeMap<NodeId, Distribution>;

/// Beliefs keyed by label, optionally restricted to `query` and rounded
/// with `round`.
pub fn beliefs_view(
    network: &Network,
    beliefs: &BeliefAssignment,
    query: Option<&[NodeId]>,
    round: impl Fn(f64) -> f64,
) -> BeliefsView {
    beliefs
        .iter()
        .filter(|(id, _)| query.is_none_or(|q| q.contains(id)))
        .map(|(id, b)| {
            let labels = network.node(id.as_str()).and_then(Node::labels).unwrap_or_default();
            let dist = labels.iter().cloned().zip(b.iter().map(|&p| round(p))).collect();
            (id.clone(), Distribution(dist))
        })
        .collect()
}

/// Node id to asserted state label.
pub fn findings_view(network: &Network, findings: &Findings) -> BTreeMap<NodeId, String> {
    findings.iter().map(|(id, s)| (id.clone(), label(network, id, s))).collect()
}

fn label(network: &Network, id: &NodeId, state: usize) -> String {
    network
        .node(id.as_str())
        .and_then(Node::labels)
        .and_then(|l| l.get(state))
        .cloned()
        .unwrap_or_else(|| state.to_string())
}

/// Looks up the state index of `label` on an instantiable node.
pub fn resolve_finding(network: &Network, node: &str, label: &str) -> Result<(NodeId, usize), FindingError> {
    let n = network.node(node).ok_or_else(|| FindingError::UnknownNode(NodeId::new(node)))?;
    if n.kind() == NodeKind::Value {
        return Err(FindingError::NotInstantiable(n.id().clone()));
    }
    let index = n
        .state_index(label)
        .ok_or_else(|| FindingError::UnknownLabel { node: n.id().clone(), label: label.to_owned() })?;
    Ok((n.id().clone(), index))
}

/// Findings from `(node, label)` pairs.
pub fn resolve_findings<'a>(
    network: &Network,
    pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<Findings, FindingError> {
    pairs.into_iter().map(|(n, l)| resolve_finding(network, n, l)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionView {
    pub configuration: BTreeMap<NodeId, String>,
    pub index: usize,
    pub feasible: bool,
    pub expected_utility: Option<f64>,
    pub normalized_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendationView {
    pub best: DecisionView,
    pub ranked: Vec<DecisionView>,
    pub u_min: f64,
    pub u_max: f64,
}

fn configuration_view(network: &Network, c: &DecisionConfiguration) -> BTreeMap<NodeId, String> {
    c.iter().map(|(id, s)| (id.clone(), label(network, id, s))).collect()
}

fn decision_view(network: &Network, d: &EvaluatedDecision) -> DecisionView {
    DecisionView {
        configuration: configuration_view(network, &d.configuration),
        index: d.index,
        feasible: d.is_feasible(),
        expected_utility: d.expected_utility,
        normalized_score: d.normalized_score,
    }
}

pub fn recommendation_view(network: &Network, r: &Recommendation) -> RecommendationView {
    RecommendationView {
        best: decision_view(network, r.best()),
        ranked: r.ranked.iter().map(|d| decision_view(network, d)).collect(),
        u_min: r.u_min,
        u_max: r.u_max,
    }
}

/// A session event with its state as a label. Also the element type of
/// exported session documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventView {
    pub seq: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default)]
    pub timestamp_ms: u64,
}

pub fn event_view(network: &Network, e: &SessionEvent) -> EventView {
    EventView {
        seq: e.seq,
        kind: e.kind,
        node: e.node.clone(),
        state: match (&e.node, e.state) {
            (Some(id), Some(s)) => Some(label(network, id, s)),
            _ => None,
        },
        timestamp_ms: e.timestamp_ms,
    }
}

/// Network structure and presentation data, with tables on request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkView {
    pub name: String,
    pub kind: NetworkKind,
    pub nodes: Vec<NodeView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeView {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alternatives: Option<Vec<String>>,
    pub parents: Vec<NodeId>,
    pub children: Vec<NodeId>,
    pub meta: MetaView,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cpt: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utilities: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaView {
    pub name: String,
    pub question: String,
    pub description: String,
    pub display: DisplayView,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisplayView {
    pub x: f64,
    pub y: f64,
    pub color: [u8; 3],
    pub shade: f64,
}

/// Nodes sorted by id.
pub fn network_view(network: &Network, tables: bool) -> NetworkView {
    let mut nodes: Vec<&Node> = network.nodes.iter().collect();
    nodes.sort_by(|a, b| a.id().cmp(b.id()));
    let nodes = nodes
        .into_iter()
        .map(|n| {
            let m = n.meta();
            let mut children: Vec<NodeId> =
                network.children_of(n.id().as_str()).into_iter().cloned().collect();
            children.sort();
            NodeView {
                id: n.id().clone(),
                kind: n.kind(),
                states: match n {
                    Node::Chance(c) => Some(c.states.clone()),
                    _ => None,
                },
                alternatives: match n {
                    Node::Decision(d) => Some(d.alternatives.clone()),
                    _ => None,
                },
                parents: n.parents().to_vec(),
                children,
                meta: MetaView {
                    name: m.name.clone(),
                    question: m.question.clone(),
                    description: m.description.clone(),
                    display: DisplayView {
                        x: m.display.x,
                        y: m.display.y,
                        color: m.display.color,
                        shade: m.display.shade,
                    },
                },
                cpt: match n {
                    Node::Chance(c) if tables => Some(c.cpt.rows.clone()),
                    _ => None,
                },
                utilities: match n {
                    Node::Value(v) if tables => Some(v.utilities.entries.clone()),
                    _ => None,
                },
            }
        })
        .collect();
    NetworkView { name: network.name.clone(), kind: network.kind, nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::fixtures::chain;
    use crate::inference::infer;

    #[test]
    fn seven_significant_digits() {
        assert_eq!(round7(0.18 / 0.26), 0.6923077);
        assert_eq!(round7(0.08 / 0.26), 0.3076923);
        assert_eq!(round7(1.0), 1.0);
        assert_eq!(round7(0.0), 0.0);
        assert_eq!(round7(1.23456789e-12), 1.234568e-12);
    }

    #[test]
    fn chain_posterior_as_json() {
        let net = chain();
        let findings = resolve_findings(&net, [("B", "t")]).unwrap();
        let out = infer(&net, &findings).unwrap();
        let view = beliefs_view(&net, &out.beliefs, Some(&["A".into()]), round7);
        assert_eq!(serde_json::to_string(&view).unwrap(), r#"{"A":{"t":0.6923077,"f":0.3076923}}"#);
    }

    #[test]
    fn labels_resolve_or_fail() {
        let net = chain();
        assert_eq!(resolve_finding(&net, "B", "f").unwrap(), ("B".into(), 1));
        assert!(matches!(resolve_finding(&net, "B", "x"), Err(FindingError::UnknownLabel { .. })));
        assert!(matches!(resolve_finding(&net, "Q", "t"), Err(FindingError::UnknownNode(_))));
    }

    #[test]
    fn tables_only_on_request() {
        let net = chain();
        let bare = serde_json::to_value(network_view(&net, false)).unwrap();
        assert!(bare["nodes"][0].get("cpt").is_none());
        assert_eq!(bare["nodes"][0]["children"], serde_json::json!(["B"]));
        let full = serde_json::to_value(network_view(&net, true)).unwrap();
        assert_eq!(full["nodes"][1]["cpt"], serde_json::json!([[0.9, 0.1], [0.1, 0.9]]));
    }
}
