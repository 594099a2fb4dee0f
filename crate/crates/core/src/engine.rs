//! One entry point over belief and decision networks.

use std::fmt;
use std::str::FromStr;

use crate::decision::{DecisionError, DecisionEvaluator, Recommendation};
use crate::inference::{oracle_joint, ExactEngine, Findings, InferenceError, InferenceResult};
use crate::model::{Network, NetworkKind};

/// Which algorithm answers posterior queries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum EngineChoice {
    /// Propagation, with cutset conditioning when needed.
    #[default]
    Auto,
    /// Full joint enumeration.
    Oracle,
    /// Same as `Auto`; kept as an explicit name for the exact route.
    Exact,
}

impl FromStr for EngineChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(EngineChoice::Auto),
            "oracle" => Ok(EngineChoice::Oracle),
            "exact" => Ok(EngineChoice::Exact),
            other => Err(format!("unknown engine {other:?} (expected auto, oracle or exact)")),
        }
    }
}

impl fmt::Display for EngineChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineChoice::Auto => "auto",
            EngineChoice::Oracle => "oracle",
            EngineChoice::Exact => "exact",
        })
    }
}

/// A validated network compiled for repeated queries.
#[derive(Debug, Clone)]
pub enum PreparedNetwork {
    Belief { network: Network, engine: ExactEngine },
    Decision(DecisionEvaluator),
}

impl PreparedNetwork {
    pub fn new(network: Network) -> Result<Self, DecisionError> {
        match network.kind {
            NetworkKind::BeliefNetwork => {
                let engine = ExactEngine::new(&network)?;
                Ok(PreparedNetwork::Belief { network, engine })
            }
            NetworkKind::DecisionNetwork => Ok(PreparedNetwork::Decision(DecisionEvaluator::new(&network)?)),
        }
    }

    pub fn network(&self) -> &Network {
        match self {
            PreparedNetwork::Belief { network, .. } => network,
            PreparedNetwork::Decision(eval) => eval.network(),
        }
    }

    pub fn is_decision_network(&self) -> bool {
        matches!(self, PreparedNetwork::Decision(_))
    }

    /// Posterior beliefs of the chance nodes.
    pub fn beliefs(&self, findings: &Findings) -> Result<InferenceResult, InferenceError> {
        match self {
            PreparedNetwork::Belief { network, engine } => {
                findings.check(network)?;
                engine.infer(findings)
            }
            PreparedNetwork::Decision(eval) => eval.beliefs(findings),
        }
    }

    pub fn recommend(&self, findings: &Findings) -> Result<Recommendation, DecisionError> {
        match self {
            PreparedNetwork::Belief { .. } => Err(DecisionError::NotDecisionNetwork),
            PreparedNetwork::Decision(eval) => eval.recommend(findings),
        }
    }
}

/// Posterior of the chance nodes of any network with the chosen engine.
/// On decision networks, decisions not in `findings` are uniformly random.
pub fn posterior(
    network: &Network,
    findings: &Findings,
    choice: EngineChoice,
) -> Result<InferenceResult, DecisionError> {
    match choice {
        EngineChoice::Oracle => Ok(oracle_joint(network, findings)?),
        EngineChoice::Auto | EngineChoice::Exact => {
            Ok(PreparedNetwork::new(network.clone())?.beliefs(findings)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::fixtures::figure1;
    use crate::inference::fixtures::diamond;

    #[test]
    fn engines_agree_on_both_kinds() {
        for net in [diamond(), figure1()] {
            let findings = Findings::new();
            let a = posterior(&net, &findings, EngineChoice::Auto).unwrap();
            let o = posterior(&net, &findings, EngineChoice::Oracle).unwrap();
            assert!(a.beliefs.max_abs_difference(&o.beliefs) < 1e-12);
        }
    }

    #[test]
    fn belief_networks_have_no_recommendation() {
        let prepared = PreparedNetwork::new(diamond()).unwrap();
        assert!(matches!(prepared.recommend(&Findings::new()), Err(DecisionError::NotDecisionNetwork)));
    }

    #[test]
    fn engine_names_round_trip() {
        for e in [EngineChoice::Auto, EngineChoice::Oracle, EngineChoice::Exact] {
            assert_eq!(e.to_string().parse::<EngineChoice>().unwrap(), e);
        }
        assert!("fast".parse::<EngineChoice>().is_err());
    }
}
