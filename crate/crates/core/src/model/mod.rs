//! Network domain types: chance, decision and value nodes, their tables and
//! display metadata.
//!
//! All types here are plain data. A [`Network`] may be built in any shape
//! (the format parser and tests construct broken ones on purpose); call
//! [`validate`] before handing it to an inference routine.

mod graph;
mod validate;

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub(crate) use graph::UnionFind;
pub use graph::{config_assignment, config_count, config_index, is_polytree, topological_order, ModelError};
pub use validate::{validate, Rule, ValidationIssue, ValidationReport};

/// Tolerance used when checking that a CPT row sums to one.
pub const ROW_TOLERANCE: f64 = 1e-6;

/// Tolerance used for all posterior comparisons.
pub const INFERENCE_TOLERANCE: f64 = 1e-9;

/// Unknown keys carried through from a leniently parsed document.
pub type Extensions = BTreeMap<String, serde_json::Value>;

/// Identifier of a node, unique and case-sensitive within a network.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Chance,
    Decision,
    Value,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Chance => "chance",
            NodeKind::Decision => "decision",
            NodeKind::Value => "value",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NetworkKind {
    #[serde(rename = "belief")]
    BeliefNetwork,
    #[serde(rename = "decision")]
    DecisionNetwork,
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkKind::BeliefNetwork => "belief",
            NetworkKind::DecisionNetwork => "decision",
        })
    }
}

/// Conditional probability table.
///
/// Row `r` is the distribution over the child's states for the parent
/// configuration whose [`config_index`] is `r`: parents in declared order,
/// the last parent's state varying fastest. A root node has one row, its
/// prior.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cpt {
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Cpt { rows }
    }

    /// A table whose every row is uniform over `states` values.
    pub fn uniform(rows: usize, states: usize) -> Self {
        let p = 1.0 / states as f64;
        Cpt { rows: vec![vec![p; states]; rows] }
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.rows[index]
    }
}

/// Utilities indexed by parent configuration, same convention as [`Cpt`] rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UtilityTable {
    pub entries: Vec<f64>,
}

impl UtilityTable {
    pub fn new(entries: Vec<f64>) -> Self {
        UtilityTable { entries }
    }

    /// Smallest and largest entry, or `None` for an empty table.
    pub fn range(&self) -> Option<(f64, f64)> {
        let mut it = self.entries.iter().copied();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), u| (lo.min(u), hi.max(u))))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Display {
    pub x: f64,
    pub y: f64,
    pub color: [u8; 3],
    pub shade: f64,
}

impl Default for Display {
    fn default() -> Self {
        Display { x: 0.0, y: 0.0, color: [0, 0, 0], shade: 0.0 }
    }
}

/// Presentation data attached to every node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMeta {
    pub name: String,
    pub question: String,
    pub description: String,
    pub display: Display,
}

impl NodeMeta {
    /// Default metadata: display name equal to the id, everything else empty.
    pub fn for_id(id: &NodeId) -> Self {
        NodeMeta {
            name: id.as_str().to_owned(),
            question: String::new(),
            description: String::new(),
            display: Display::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChanceNode {
    pub id: NodeId,
    pub states: Vec<String>,
    pub parents: Vec<NodeId>,
    pub cpt: Cpt,
    pub meta: NodeMeta,
    pub extensions: Extensions,
}

impl ChanceNode {
    pub fn new<S: Into<String>>(
        id: impl Into<NodeId>,
        states: impl IntoIterator<Item = S>,
        parents: impl IntoIterator<Item = S>,
        rows: Vec<Vec<f64>>,
    ) -> Self {
        let id = id.into();
        ChanceNode {
            meta: NodeMeta::for_id(&id),
            id,
            states: states.into_iter().map(Into::into).collect(),
            parents: parents.into_iter().map(|p| NodeId::new(p)).collect(),
            cpt: Cpt::new(rows),
            extensions: Extensions::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionNode {
    pub id: NodeId,
    pub alternatives: Vec<String>,
    /// Informational predecessors.
    pub parents: Vec<NodeId>,
    pub meta: NodeMeta,
    pub extensions: Extensions,
}

impl DecisionNode {
    pub fn new<S: Into<String>>(
        id: impl Into<NodeId>,
        alternatives: impl IntoIterator<Item = S>,
        parents: impl IntoIterator<Item = S>,
    ) -> Self {
        let id = id.into();
        DecisionNode {
            meta: NodeMeta::for_id(&id),
            id,
            alternatives: alternatives.into_iter().map(Into::into).collect(),
            parents: parents.into_iter().map(|p| NodeId::new(p)).collect(),
            extensions: Extensions::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueNode {
    pub id: NodeId,
    pub parents: Vec<NodeId>,
    pub utilities: UtilityTable,
    pub meta: NodeMeta,
    pub extensions: Extensions,
}

impl ValueNode {
    pub fn new<S: Into<String>>(
        id: impl Into<NodeId>,
        parents: impl IntoIterator<Item = S>,
        utilities: Vec<f64>,
    ) -> Self {
        let id = id.into();
        ValueNode {
            meta: NodeMeta::for_id(&id),
            id,
            parents: parents.into_iter().map(|p| NodeId::new(p)).collect(),
            utilities: UtilityTable::new(utilities),
            extensions: Extensions::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Chance(ChanceNode),
    Decision(DecisionNode),
    Value(ValueNode),
}

impl Node {
    pub fn id(&self) -> &NodeId {
        match self {
            Node::Chance(n) => &n.id,
            Node::Decision(n) => &n.id,
            Node::Value(n) => &n.id,
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Node::Chance(_) => NodeKind::Chance,
            Node::Decision(_) => NodeKind::Decision,
            Node::Value(_) => NodeKind::Value,
        }
    }

    pub fn parents(&self) -> &[NodeId] {
        match self {
            Node::Chance(n) => &n.parents,
            Node::Decision(n) => &n.parents,
            Node::Value(n) => &n.parents,
        }
    }

    pub fn meta(&self) -> &NodeMeta {
        match self {
            Node::Chance(n) => &n.meta,
            Node::Decision(n) => &n.meta,
            Node::Value(n) => &n.meta,
        }
    }

    pub fn meta_mut(&mut self) -> &mut NodeMeta {
        match self {
            Node::Chance(n) => &mut n.meta,
            Node::Decision(n) => &mut n.meta,
            Node::Value(n) => &mut n.meta,
        }
    }

    pub fn extensions(&self) -> &Extensions {
        match self {
            Node::Chance(n) => &n.extensions,
            Node::Decision(n) => &n.extensions,
            Node::Value(n) => &n.extensions,
        }
    }

    /// State labels of a chance node or alternatives of a decision node.
    /// Value nodes have none.
    pub fn labels(&self) -> Option<&[String]> {
        match self {
            Node::Chance(n) => Some(&n.states),
            Node::Decision(n) => Some(&n.alternatives),
            Node::Value(_) => None,
        }
    }

    pub fn cardinality(&self) -> Option<usize> {
        self.labels().map(<[String]>::len)
    }

    /// Position of `label` among this node's states, matched case-sensitively.
    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.labels()?.iter().position(|s| s == label)
    }
}

impl From<ChanceNode> for Node {
    fn from(n: ChanceNode) -> Self {
        Node::Chance(n)
    }
}

impl From<DecisionNode> for Node {
    fn from(n: DecisionNode) -> Self {
        Node::Decision(n)
    }
}

impl From<ValueNode> for Node {
    fn from(n: ValueNode) -> Self {
        Node::Value(n)
    }
}

/// A knowledge base: typed nodes whose parent lists declare the arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub name: String,
    pub kind: NetworkKind,
    pub nodes: Vec<Node>,
    pub extensions: Extensions,
}

impl Network {
    pub fn new(name: impl Into<String>, kind: NetworkKind, nodes: Vec<Node>) -> Self {
        Network { name: name.into(), kind, nodes, extensions: Extensions::new() }
    }

    pub fn belief(name: impl Into<String>, nodes: Vec<Node>) -> Self {
        Self::new(name, NetworkKind::BeliefNetwork, nodes)
    }

    pub fn decision(name: impl Into<String>, nodes: Vec<Node>) -> Self {
        Self::new(name, NetworkKind::DecisionNetwork, nodes)
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id().as_str() == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id().as_str() == id)
    }

    pub fn is_decision_network(&self) -> bool {
        self.kind == NetworkKind::DecisionNetwork
    }

    pub fn chance_nodes(&self) -> impl Iterator<Item = &ChanceNode> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Chance(c) => Some(c),
            _ => None,
        })
    }

    pub fn decision_nodes(&self) -> impl Iterator<Item = &DecisionNode> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Decision(d) => Some(d),
            _ => None,
        })
    }

    pub fn value_nodes(&self) -> impl Iterator<Item = &ValueNode> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Value(v) => Some(v),
            _ => None,
        })
    }

    /// Cardinalities of the given node's parents, in declared order.
    /// `None` if a parent is missing or is a value node.
    pub fn parent_cardinalities(&self, node: &Node) -> Option<Vec<usize>> {
        node.parents().iter().map(|p| self.node(p.as_str()).and_then(Node::cardinality)).collect()
    }

    /// Ids of every node listing `id` among its parents.
    pub fn children_of(&self, id: &str) -> Vec<&NodeId> {
        self.nodes.iter().filter(|n| n.parents().iter().any(|p| p.as_str() == id)).map(Node::id).collect()
    }
}
