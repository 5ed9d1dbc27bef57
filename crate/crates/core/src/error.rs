use thiserror::Error;

use crate::engine::{CombatantId, ResolvedAction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid task spec: field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("failed to parse task spec: {0}")]
    Parse(String),
    #[error("failed to read {path}: {message}")]
    Io { path: String, message: String },
}

impl ConfigError {
    /// The offending field, when the error names one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("turn queue is empty")]
    EmptyQueue,
    #[error("illegal action {0:?}")]
    IllegalAction(ResolvedAction),
    #[error("no decision is pending")]
    NoDecision,
    #[error("unknown combatant {0}")]
    UnknownCombatant(CombatantId),
}
