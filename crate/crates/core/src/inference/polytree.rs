//! Causal/diagnostic support propagation on singly connected networks.
//!
//! For a node `x` with parents `u_1..u_n` and children `y_1..y_m`:
//!
//! ```text
//! pi(x)          = sum_u P(x | u) * prod_k pi_{u_k -> x}(u_k)
//! lambda(x)      = e(x) * prod_j lambda_{y_j -> x}(x)
//! belief(x)      ∝ pi(x) * lambda(x)
//! pi_{x -> y_j}  = pi(x) * e(x) * prod_{i != j} lambda_{y_i -> x}(x)
//! lambda_{x -> u_k}(u_k) = sum_x lambda(x) sum_{u \ u_k} P(x | u) prod_{i != k} pi_{u_i -> x}(u_i)
//! ```
//!
//! `e(x)` is the indicator of an observed state (all ones otherwise).
//! Messages are never normalized, so at any node of a connected component
//! `sum_x pi(x) lambda(x)` equals the probability of that component's
//! evidence. Outgoing pi messages are exclusion products; nothing is
//! divided out.

use std::collections::BTreeMap;

use crate::model::{Network, NodeId};

use super::compiled::Compiled;
use super::{compile_belief_network, for_each_config, BeliefAssignment, Findings, InferenceError};

/// Per-node support vectors and per-arc messages of one propagation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SupportVectors {
    /// Causal support from parents.
    pub pi: BTreeMap<NodeId, Vec<f64>>,
    /// Diagnostic support from children and the node's own evidence.
    pub lambda: BTreeMap<NodeId, Vec<f64>>,
    /// Parent-to-child messages keyed by (parent, child).
    pub pi_messages: BTreeMap<(NodeId, NodeId), Vec<f64>>,
    /// Child-to-parent messages keyed by (parent, child).
    pub lambda_messages: BTreeMap<(NodeId, NodeId), Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolytreeResult {
    pub beliefs: BeliefAssignment,
    pub support: SupportVectors,
    pub evidence_probability: f64,
}

/// Exact beliefs on a singly connected belief network.
pub fn propagate_polytree(network: &Network, findings: &Findings) -> Result<PolytreeResult, InferenceError> {
    let graph = compile_belief_network(network)?;
    let evidence = graph.evidence(findings)?;
    let run = propagate(&graph, &evidence)?;

    let mut support = SupportVectors::default();
    for v in 0..graph.ids.len() {
        let id = &graph.ids[v];
        support.pi.insert(id.clone(), run.pi[v].clone());
        support.lambda.insert(id.clone(), run.lambda[v].clone());
        for (k, &p) in graph.parents[v].iter().enumerate() {
            let key = (graph.ids[p].clone(), id.clone());
            support.pi_messages.insert(key, run.pi_in[v][k].clone());
        }
        for (j, &c) in graph.children[v].iter().enumerate() {
            let key = (id.clone(), graph.ids[c].clone());
            support.lambda_messages.insert(key, run.lambda_in[v][j].clone());
        }
    }
    Ok(PolytreeResult {
        beliefs: graph.assignment(run.beliefs),
        support,
        evidence_probability: run.evidence_probability,
    })
}

pub(crate) struct Propagation {
    pub beliefs: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    /// `pi_in[v][k]`: message from `parents[v][k]` to `v`.
    pub pi_in: Vec<Vec<Vec<f64>>>,
    /// `lambda_in[v][j]`: message from `children[v][j]` to `v`.
    pub lambda_in: Vec<Vec<Vec<f64>>>,
    pub evidence_probability: f64,
}

#[derive(Clone, Copy)]
enum Link {
    Parent(usize),
    Child(usize),
}

struct Sweep<'a> {
    g: &'a Compiled,
    evidence: &'a [Option<usize>],
    /// For `v` and parent slot `k`: the slot of `v` in that parent's children.
    slot_in_parent: Vec<Vec<usize>>,
    /// For `v` and child slot `j`: the slot of `v` in that child's parents.
    slot_in_child: Vec<Vec<usize>>,
    pi_in: Vec<Vec<Vec<f64>>>,
    lambda_in: Vec<Vec<Vec<f64>>>,
}

impl<'a> Sweep<'a> {
    fn new(g: &'a Compiled, evidence: &'a [Option<usize>]) -> Self {
        let n = g.ids.len();
        let slot_in_parent = (0..n)
            .map(|v| {
                g.parents[v].iter().map(|&p| g.children[p].iter().position(|&c| c == v).unwrap()).collect()
            })
            .collect();
        let slot_in_child = (0..n)
            .map(|v| {
                g.children[v].iter().map(|&c| g.parents[c].iter().position(|&p| p == v).unwrap()).collect()
            })
            .collect();
        Sweep {
            g,
            evidence,
            slot_in_parent,
            slot_in_child,
            pi_in: (0..n).map(|v| vec![Vec::new(); g.parents[v].len()]).collect(),
            lambda_in: (0..n).map(|v| vec![Vec::new(); g.children[v].len()]).collect(),
        }
    }

    fn indicator(&self, v: usize) -> Vec<f64> {
        match self.evidence[v] {
            Some(s) => (0..self.g.card[v]).map(|x| if x == s { 1.0 } else { 0.0 }).collect(),
            None => vec![1.0; self.g.card[v]],
        }
    }

    fn pi(&self, v: usize) -> Vec<f64> {
        let g = self.g;
        let width = g.card[v];
        if g.parents[v].is_empty() {
            return g.cpt[v][..width].to_vec();
        }
        let cards: Vec<usize> = g.parents[v].iter().map(|&p| g.card[p]).collect();
        let mut out = vec![0.0; width];
        for_each_config(&cards, |row, assignment| {
            let w: f64 = assignment.iter().enumerate().map(|(k, &a)| self.pi_in[v][k][a]).product();
            if w == 0.0 {
                return;
            }
            for (o, &p) in out.iter_mut().zip(&g.cpt[v][row * width..(row + 1) * width]) {
                *o += w * p;
            }
        });
        out
    }

    /// Evidence times every child message except `skip`.
    fn lambda_except(&self, v: usize, skip: Option<usize>) -> Vec<f64> {
        let mut out = self.indicator(v);
        for (j, msg) in self.lambda_in[v].iter().enumerate() {
            if Some(j) == skip {
                continue;
            }
            for (o, m) in out.iter_mut().zip(msg) {
                *o *= m;
            }
        }
        out
    }

    fn send_to_parent(&mut self, v: usize, k: usize) {
        let g = self.g;
        let lambda = self.lambda_except(v, None);
        let width = g.card[v];
        let parent = g.parents[v][k];
        let cards: Vec<usize> = g.parents[v].iter().map(|&p| g.card[p]).collect();
        let mut msg = vec![0.0; g.card[parent]];
        for_each_config(&cards, |row, assignment| {
            let w: f64 = assignment
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(i, &a)| self.pi_in[v][i][a])
                .product();
            if w == 0.0 {
                return;
            }
            let s: f64 =
                g.cpt[v][row * width..(row + 1) * width].iter().zip(&lambda).map(|(p, l)| p * l).sum();
            msg[assignment[k]] += w * s;
        });
        let slot = self.slot_in_parent[v][k];
        self.lambda_in[parent][slot] = msg;
    }

    fn send_to_child(&mut self, v: usize, j: usize) {
        let pi = self.pi(v);
        let rest = self.lambda_except(v, Some(j));
        let msg = pi.iter().zip(&rest).map(|(p, l)| p * l).collect();
        let child = self.g.children[v][j];
        let slot = self.slot_in_child[v][j];
        self.pi_in[child][slot] = msg;
    }

    fn send(&mut self, v: usize, link: Link) {
        match link {
            Link::Parent(k) => self.send_to_parent(v, k),
            Link::Child(j) => self.send_to_child(v, j),
        }
    }

    fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, Link)> + '_ {
        let g = self.g;
        let ups = g.parents[v].iter().enumerate().map(|(k, &p)| (p, Link::Parent(k)));
        let downs = g.children[v].iter().enumerate().map(|(j, &c)| (c, Link::Child(j)));
        ups.chain(downs)
    }
}

/// Spanning order of each connected component from its lowest-numbered
/// node, with the link from every other node toward that pivot.
struct Tree {
    order: Vec<usize>,
    upstream: Vec<Option<(usize, Link)>>,
    pivots: Vec<usize>,
}

fn spanning_tree(sweep: &Sweep<'_>) -> Result<Tree, InferenceError> {
    let n = sweep.g.ids.len();
    let mut visited = vec![false; n];
    let mut upstream: Vec<Option<(usize, Link)>> = vec![None; n];
    let mut order = Vec::with_capacity(n);
    let mut pivots = Vec::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        pivots.push(root);
        visited[root] = true;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            order.push(v);
            let came_from = upstream[v].map(|(u, _)| u);
            for (w, _) in sweep.neighbors(v) {
                if Some(w) == came_from {
                    continue;
                }
                if visited[w] {
                    return Err(InferenceError::NotPolytree);
                }
                visited[w] = true;
                let back = sweep.neighbors(w).find(|&(x, _)| x == v).map(|(_, link)| link).unwrap();
                upstream[w] = Some((v, back));
                stack.push(w);
            }
        }
    }
    Ok(Tree { order, upstream, pivots })
}

/// Two-phase sweep: every node sends toward its pivot once all its
/// downstream neighbors have reported, then messages flow back out.
pub(crate) fn propagate(g: &Compiled, evidence: &[Option<usize>]) -> Result<Propagation, InferenceError> {
    let mut sweep = Sweep::new(g, evidence);
    let tree = spanning_tree(&sweep)?;

    for &v in tree.order.iter().rev() {
        if let Some((_, link)) = tree.upstream[v] {
            sweep.send(v, link);
        }
    }
    for &v in &tree.order {
        let came_from = tree.upstream[v].map(|(u, _)| u);
        let outward: Vec<Link> =
            sweep.neighbors(v).filter(|&(w, _)| Some(w) != came_from).map(|(_, link)| link).collect();
        for link in outward {
            sweep.send(v, link);
        }
    }

    let n = g.ids.len();
    let pi: Vec<Vec<f64>> = (0..n).map(|v| sweep.pi(v)).collect();
    let lambda: Vec<Vec<f64>> = (0..n).map(|v| sweep.lambda_except(v, None)).collect();

    let mut evidence_probability = 1.0;
    for &pivot in &tree.pivots {
        let z: f64 = pi[pivot].iter().zip(&lambda[pivot]).map(|(p, l)| p * l).sum();
        evidence_probability *= z;
    }
    if evidence_probability <= 0.0 {
        return Err(InferenceError::ImpossibleEvidence);
    }

    let mut beliefs = Vec::with_capacity(n);
    for v in 0..n {
        let mut b: Vec<f64> = pi[v].iter().zip(&lambda[v]).map(|(p, l)| p * l).collect();
        super::normalize(&mut b).ok_or(InferenceError::ImpossibleEvidence)?;
        beliefs.push(b);
    }

    Ok(Propagation {
        beliefs,
        pi,
        lambda,
        pi_in: sweep.pi_in,
        lambda_in: sweep.lambda_in,
        evidence_probability,
    })
}
