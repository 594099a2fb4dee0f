//! Belief networks and influence diagrams: exact inference, expected-utility
//! decisions, a JSON knowledge-base format and consultation sessions.

pub mod consultation;
pub mod decision;
pub mod engine;
pub mod inference;
pub mod kbformat;
pub mod model;
#[cfg(feature = "random")]
pub mod random;
pub mod wire;

pub use consultation::{Session, SessionDocument, SessionError, SessionEvent};
pub use decision::{
    cooper_transform, recommend, DecisionConfiguration, DecisionError, DecisionEvaluator, EvaluatedDecision,
    Recommendation, TransformedNetwork,
};
pub use engine::{posterior, EngineChoice, PreparedNetwork};
pub use inference::{
    find_loop_cutset, infer, oracle_joint, BeliefAssignment, ExactEngine, FindingError, Findings,
    InferenceError, InferenceResult,
};
pub use kbformat::KbError;
pub use model::{Network, NetworkKind, Node, NodeId, NodeKind};
