use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::graph::cycle_nodes;
use super::{config_count, Network, NetworkKind, Node, NodeId, NodeKind, NodeMeta, ROW_TOLERANCE};

/// Name of a violated network invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rule {
    EmptyId,
    DuplicateId,
    UnknownParent,
    DuplicateParent,
    Acyclicity,
    TooFewStates,
    DuplicateState,
    CptShape,
    ProbabilityRange,
    RowNormalization,
    UtilityShape,
    NonFiniteUtility,
    ValueNodeWithoutParents,
    ValueNodeHasChildren,
    DisplayRange,
    NodeKindNotAllowed,
    MissingDecisionNode,
    MissingValueNode,
    MultipleValueNodes,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub rule: Rule,
    pub nodes: Vec<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    pub detail: String,
}

impl ValidationIssue {
    fn new(rule: Rule, nodes: Vec<NodeId>, detail: impl Into<String>) -> Self {
        ValidationIssue { rule, nodes, row: None, detail: detail.into() }
    }

    fn at_row(mut self, row: usize) -> Self {
        self.row = Some(row);
        self
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rule)?;
        if !self.nodes.is_empty() {
            let ids: Vec<&str> = self.nodes.iter().map(NodeId::as_str).collect();
            write!(f, " [{}]", ids.join(", "))?;
        }
        if let Some(row) = self.row {
            write!(f, " row {row}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Every violated invariant of a network. Empty iff the network is valid.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.errors.iter().any(|e| e.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.errors.is_empty() {
            return f.write_str("valid");
        }
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Checks every structural and numeric invariant of `network`.
pub fn validate(network: &Network) -> ValidationReport {
    let mut errors = Vec::new();
    let by_id = check_ids(network, &mut errors);

    for node in &network.nodes {
        check_parents(node, &by_id, &mut errors);
        check_meta(node.id(), node.meta(), &mut errors);
        match node {
            Node::Chance(c) => {
                check_labels(&c.id, &c.states, "state", &mut errors);
                check_cpt(network, node, &c.cpt.rows, c.states.len(), &mut errors);
            }
            Node::Decision(d) => {
                check_labels(&d.id, &d.alternatives, "alternative", &mut errors);
            }
            Node::Value(v) => {
                if v.parents.is_empty() {
                    errors.push(ValidationIssue::new(
                        Rule::ValueNodeWithoutParents,
                        vec![v.id.clone()],
                        "value node needs at least one parent",
                    ));
                }
                let children = network.children_of(v.id.as_str());
                if !children.is_empty() {
                    let mut nodes = vec![v.id.clone()];
                    nodes.extend(children.into_iter().cloned());
                    errors.push(ValidationIssue::new(
                        Rule::ValueNodeHasChildren,
                        nodes,
                        "value nodes must not have children",
                    ));
                }
                if let Some(cards) = network.parent_cardinalities(node) {
                    let expected = config_count(&cards);
                    if v.utilities.entries.len() != expected {
                        errors.push(ValidationIssue::new(
                            Rule::UtilityShape,
                            vec![v.id.clone()],
                            format!("expected {expected} utilities, found {}", v.utilities.entries.len()),
                        ));
                    }
                }
                for (i, u) in v.utilities.entries.iter().enumerate() {
                    if !u.is_finite() {
                        errors.push(
                            ValidationIssue::new(
                                Rule::NonFiniteUtility,
                                vec![v.id.clone()],
                                format!("utility {u} is not finite"),
                            )
                            .at_row(i),
                        );
                    }
                }
            }
        }
    }

    let cyclic = cycle_nodes(network);
    if !cyclic.is_empty() {
        errors.push(ValidationIssue::new(Rule::Acyclicity, cyclic, "arcs form a directed cycle"));
    }

    check_network_kind(network, &mut errors);
    ValidationReport { errors }
}

fn check_ids<'a>(network: &'a Network, errors: &mut Vec<ValidationIssue>) -> BTreeMap<&'a str, &'a Node> {
    let mut by_id = BTreeMap::new();
    let mut reported = BTreeSet::new();
    for node in &network.nodes {
        let id = node.id();
        if id.as_str().is_empty() {
            errors.push(ValidationIssue::new(Rule::EmptyId, vec![id.clone()], "node id is empty"));
        }
        if by_id.insert(id.as_str(), node).is_some() && reported.insert(id.as_str()) {
            errors.push(ValidationIssue::new(
                Rule::DuplicateId,
                vec![id.clone()],
                format!("node id {id:?} is declared more than once"),
            ));
        }
    }
    by_id
}

fn check_parents(node: &Node, by_id: &BTreeMap<&str, &Node>, errors: &mut Vec<ValidationIssue>) {
    let mut seen = BTreeSet::new();
    for p in node.parents() {
        if !seen.insert(p.as_str()) {
            errors.push(ValidationIssue::new(
                Rule::DuplicateParent,
                vec![node.id().clone(), p.clone()],
                format!("parent {p} listed more than once"),
            ));
        }
        if !by_id.contains_key(p.as_str()) {
            errors.push(ValidationIssue::new(
                Rule::UnknownParent,
                vec![node.id().clone(), p.clone()],
                format!("parent {p} does not exist"),
            ));
        }
    }
}

fn check_labels(id: &NodeId, labels: &[String], what: &str, errors: &mut Vec<ValidationIssue>) {
    if labels.len() < 2 {
        errors.push(ValidationIssue::new(
            Rule::TooFewStates,
            vec![id.clone()],
            format!("needs at least 2 {what}s, found {}", labels.len()),
        ));
    }
    let mut seen = BTreeSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            errors.push(ValidationIssue::new(
                Rule::DuplicateState,
                vec![id.clone()],
                format!("{what} {l:?} appears more than once"),
            ));
        }
    }
}

fn check_cpt(
    network: &Network,
    node: &Node,
    rows: &[Vec<f64>],
    states: usize,
    errors: &mut Vec<ValidationIssue>,
) {
    let id = node.id();
    if let Some(cards) = network.parent_cardinalities(node) {
        let expected = config_count(&cards);
        if rows.len() != expected {
            errors.push(ValidationIssue::new(
                Rule::CptShape,
                vec![id.clone()],
                format!("expected {expected} rows, found {}", rows.len()),
            ));
        }
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != states {
            errors.push(
                ValidationIssue::new(
                    Rule::CptShape,
                    vec![id.clone()],
                    format!("expected {states} columns, found {}", row.len()),
                )
                .at_row(r),
            );
            continue;
        }
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
            errors.push(
                ValidationIssue::new(Rule::ProbabilityRange, vec![id.clone()], "entries must lie in [0, 1]")
                    .at_row(r),
            );
            continue;
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOLERANCE {
            errors.push(
                ValidationIssue::new(Rule::RowNormalization, vec![id.clone()], format!("row sums to {sum}"))
                    .at_row(r),
            );
        }
    }
}

fn check_meta(id: &NodeId, meta: &NodeMeta, errors: &mut Vec<ValidationIssue>) {
    let d = &meta.display;
    if !d.x.is_finite() || !d.y.is_finite() {
        errors.push(ValidationIssue::new(
            Rule::DisplayRange,
            vec![id.clone()],
            "display coordinates must be finite",
        ));
    }
    if !(0.0..=1.0).contains(&d.shade) {
        errors.push(ValidationIssue::new(
            Rule::DisplayRange,
            vec![id.clone()],
            format!("shade {} outside [0, 1]", d.shade),
        ));
    }
}

fn check_network_kind(network: &Network, errors: &mut Vec<ValidationIssue>) {
    let of_kind = |kind: NodeKind| -> Vec<NodeId> {
        network.nodes.iter().filter(|n| n.kind() == kind).map(|n| n.id().clone()).collect()
    };
    let decisions = of_kind(NodeKind::Decision);
    let values = of_kind(NodeKind::Value);
    match network.kind {
        NetworkKind::BeliefNetwork => {
            let mut offending = decisions;
            offending.extend(values);
            if !offending.is_empty() {
                errors.push(ValidationIssue::new(
                    Rule::NodeKindNotAllowed,
                    offending,
                    "belief networks hold chance nodes only",
                ));
            }
        }
        NetworkKind::DecisionNetwork => {
            if decisions.is_empty() {
                errors.push(ValidationIssue::new(
                    Rule::MissingDecisionNode,
                    vec![],
                    "decision networks need at least one decision node",
                ));
            }
            match values.len() {
                0 => errors.push(ValidationIssue::new(
                    Rule::MissingValueNode,
                    vec![],
                    "decision networks need exactly one value node",
                )),
                1 => {}
                _ => errors.push(ValidationIssue::new(
                    Rule::MultipleValueNodes,
                    values,
                    "decision networks need exactly one value node",
                )),
            }
        }
    }
}
