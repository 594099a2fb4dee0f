//! Consultation sessions: findings asserted and retracted one at a time
//! over a shared, prepared network, with beliefs kept current and every
//! change recorded in a replayable history.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::decision::{DecisionError, Recommendation};
use crate::engine::PreparedNetwork;
use crate::inference::{BeliefAssignment, FindingError, Findings, InferenceError, InferenceResult};
use crate::model::{Network, NodeId};
use crate::wire::{event_view, resolve_finding, EventView};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error(transparent)]
    Finding(#[from] FindingError),
    #[error("the findings have zero probability")]
    ImpossibleEvidence,
    #[error("node {0} has no asserted finding")]
    NotAsserted(NodeId),
    #[error("recommendations require a decision network")]
    NotDecisionNetwork,
    #[error(transparent)]
    Inference(InferenceError),
    #[error(transparent)]
    Decision(DecisionError),
    #[error("session document is for knowledge base {found:?}, not {expected:?}")]
    WrongKb { expected: String, found: String },
    #[error("replay diverged at event {seq}: {reason}")]
    ReplayDiverged { seq: u64, reason: String },
}

impl From<InferenceError> for SessionError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::ImpossibleEvidence => SessionError::ImpossibleEvidence,
            InferenceError::Finding(f) => SessionError::Finding(f),
            other => SessionError::Inference(other),
        }
    }
}

impl From<DecisionError> for SessionError {
    fn from(e: DecisionError) -> Self {
        match e {
            DecisionError::Inference(i) => i.into(),
            DecisionError::NotDecisionNetwork => SessionError::NotDecisionNetwork,
            other => SessionError::Decision(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Created,
    Asserted,
    Retracted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub node: Option<NodeId>,
    pub state: Option<usize>,
    /// Milliseconds since the Unix epoch; informational only.
    pub timestamp_ms: u64,
}

/// Exported session: the knowledge-base name and the event history with
/// states as labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub kb_name: String,
    pub events: Vec<EventView>,
}

/// Result of a hypothetical query.
#[derive(Debug, Clone, PartialEq)]
pub struct WhatIf {
    pub findings: Findings,
    pub beliefs: BeliefAssignment,
    pub evidence_probability: f64,
    pub recommendation: Option<Recommendation>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    kb_name: String,
    network: Arc<PreparedNetwork>,
    findings: Findings,
    beliefs: BeliefAssignment,
    evidence_probability: f64,
    recommendation: Option<Recommendation>,
    history: Vec<SessionEvent>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl Session {
    /// Starts a session with no findings; beliefs are the prior marginals.
    pub fn new(network: Arc<PreparedNetwork>, kb_name: impl Into<String>) -> Result<Self, SessionError> {
        let prior = network.beliefs(&Findings::new())?;
        let mut session = Session {
            id: Uuid::new_v4().to_string(),
            kb_name: kb_name.into(),
            network,
            findings: Findings::new(),
            beliefs: prior.beliefs,
            evidence_probability: prior.evidence_probability,
            recommendation: None,
            history: Vec::new(),
        };
        session.record(EventKind::Created, None, None);
        Ok(session)
    }

    /// Prepares `network` and starts a session on it.
    pub fn for_network(network: Network, kb_name: impl Into<String>) -> Result<Self, SessionError> {
        Self::new(Arc::new(PreparedNetwork::new(network)?), kb_name)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kb_name(&self) -> &str {
        &self.kb_name
    }

    pub fn network(&self) -> &Network {
        self.network.network()
    }

    pub fn prepared(&self) -> &Arc<PreparedNetwork> {
        &self.network
    }

    pub fn findings(&self) -> &Findings {
        &self.findings
    }

    pub fn beliefs(&self) -> &BeliefAssignment {
        &self.beliefs
    }

    pub fn evidence_probability(&self) -> f64 {
        self.evidence_probability
    }

    pub fn history(&self) -> &[SessionEvent] {
        &self.history
    }

    fn record(&mut self, kind: EventKind, node: Option<NodeId>, state: Option<usize>) {
        let seq = self.history.len() as u64;
        self.history.push(SessionEvent { seq, kind, node, state, timestamp_ms: now_ms() });
    }

    fn apply(&mut self, findings: Findings, result: InferenceResult) {
        self.findings = findings;
        self.beliefs = result.beliefs;
        self.evidence_probability = result.evidence_probability;
        self.recommendation = None;
    }

    /// Sets `node` to `state`, replacing any earlier finding on it.
    ///
    /// Findings with zero probability are rejected: the session keeps its
    /// state and only a `Rejected` event is added.
    pub fn assert_finding(&mut self, node: &str, state: usize) -> Result<&BeliefAssignment, SessionError> {
        let single: Findings = [(node, state)].into_iter().collect();
        single.check(self.network())?;
        let id = self.network().node(node).expect("checked").id().clone();
        let mut next = self.findings.clone();
        next.insert(id.clone(), state);
        match self.network.beliefs(&next) {
            Ok(result) => {
                self.apply(next, result);
                self.record(EventKind::Asserted, Some(id), Some(state));
                Ok(&self.beliefs)
            }
            Err(InferenceError::ImpossibleEvidence) => {
                self.record(EventKind::Rejected, Some(id), Some(state));
                Err(SessionError::ImpossibleEvidence)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// [`assert_finding`](Self::assert_finding) with the state given by label.
    pub fn assert_label(&mut self, node: &str, label: &str) -> Result<&BeliefAssignment, SessionError> {
        let (id, state) = resolve_finding(self.network(), node, label)?;
        self.assert_finding(id.as_str(), state)
    }

    pub fn retract_finding(&mut self, node: &str) -> Result<&BeliefAssignment, SessionError> {
        if !self.findings.contains(node) {
            return Err(SessionError::NotAsserted(NodeId::new(node)));
        }
        let mut next = self.findings.clone();
        next.remove(node);
        let result = self.network.beliefs(&next)?;
        self.apply(next, result);
        self.record(EventKind::Retracted, Some(NodeId::new(node)), None);
        Ok(&self.beliefs)
    }

    /// Beliefs (and the recommendation, on decision networks) under the
    /// current findings overridden by `overlay`. The session is untouched.
    pub fn what_if(&self, overlay: &Findings) -> Result<WhatIf, SessionError> {
        overlay.check(self.network())?;
        let findings = self.findings.merged(overlay);
        let result = self.network.beliefs(&findings)?;
        let recommendation =
            if self.network.is_decision_network() { Some(self.network.recommend(&findings)?) } else { None };
        Ok(WhatIf {
            findings,
            beliefs: result.beliefs,
            evidence_probability: result.evidence_probability,
            recommendation,
        })
    }

    /// Ranked decisions under the current findings, computed on first use
    /// after each change.
    pub fn recommendation(&mut self) -> Result<&Recommendation, SessionError> {
        if !self.network.is_decision_network() {
            return Err(SessionError::NotDecisionNetwork);
        }
        if self.recommendation.is_none() {
            self.recommendation = Some(self.network.recommend(&self.findings)?);
        }
        Ok(self.recommendation.as_ref().expect("just computed"))
    }

    /// The cached recommendation, if one has been computed since the last
    /// change.
    pub fn cached_recommendation(&self) -> Option<&Recommendation> {
        self.recommendation.as_ref()
    }

    /// Re-applies the events of another session's history to a fresh
    /// session over `network`. Each event must have the same outcome it had
    /// originally.
    pub fn replay(
        network: Arc<PreparedNetwork>,
        kb_name: impl Into<String>,
        events: &[SessionEvent],
    ) -> Result<Session, SessionError> {
        let mut session = Session::new(network, kb_name)?;
        for e in events {
            session.replay_event(e.seq, e.kind, e.node.as_ref(), e.state)?;
        }
        Ok(session)
    }

    fn replay_event(
        &mut self,
        seq: u64,
        kind: EventKind,
        node: Option<&NodeId>,
        state: Option<usize>,
    ) -> Result<(), SessionError> {
        let diverged = |reason: String| SessionError::ReplayDiverged { seq, reason };
        let missing = || diverged(format!("{kind:?} event without node and state"));
        match kind {
            EventKind::Created if seq == 0 => Ok(()),
            EventKind::Created => Err(diverged("Created must be the first event".into())),
            EventKind::Asserted => {
                let (node, state) = node.zip(state).ok_or_else(missing)?;
                self.assert_finding(node.as_str(), state).map(|_| ()).map_err(|e| diverged(e.to_string()))
            }
            EventKind::Rejected => {
                let (node, state) = node.zip(state).ok_or_else(missing)?;
                match self.assert_finding(node.as_str(), state) {
                    Err(SessionError::ImpossibleEvidence) => Ok(()),
                    Ok(_) => Err(diverged("finding was accepted".into())),
                    Err(e) => Err(diverged(e.to_string())),
                }
            }
            EventKind::Retracted => {
                let node = node.ok_or_else(missing)?;
                self.retract_finding(node.as_str()).map(|_| ()).map_err(|e| diverged(e.to_string()))
            }
        }
    }

    pub fn export(&self) -> SessionDocument {
        SessionDocument {
            kb_name: self.kb_name.clone(),
            events: self.history.iter().map(|e| event_view(self.network(), e)).collect(),
        }
    }

    /// Rebuilds a session from an exported document.
    pub fn import(network: Arc<PreparedNetwork>, doc: &SessionDocument) -> Result<Session, SessionError> {
        let mut session = Session::new(network, doc.kb_name.clone())?;
        for e in &doc.events {
            let state = match (&e.node, &e.state) {
                (Some(node), Some(label)) => {
                    Some(resolve_finding(session.network(), node.as_str(), label)?.1)
                }
                _ => None,
            };
            session.replay_event(e.seq, e.kind, e.node.as_ref(), state)?;
        }
        Ok(session)
    }

    /// Like [`import`](Self::import), refusing documents for another
    /// knowledge base.
    pub fn import_for(
        network: Arc<PreparedNetwork>,
        kb_name: &str,
        doc: &SessionDocument,
    ) -> Result<Session, SessionError> {
        if doc.kb_name != kb_name {
            return Err(SessionError::WrongKb { expected: kb_name.into(), found: doc.kb_name.clone() });
        }
        Self::import(network, doc)
    }
}
