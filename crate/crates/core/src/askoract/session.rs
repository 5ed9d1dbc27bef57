use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::corpus::{Hint, HintOracle};
use crate::interface::TaTriple;
use crate::metrics::FamilyScore;
use crate::observation::StructuredObservation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AskChoice {
    Ask,
    Act,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskDecision {
    pub task_id: u8,
    pub k: u32,
    pub choice: AskChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    /// Logical position in the evaluation's decision order.
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum AskError {
    #[error("this episode already asked")]
    AlreadyAsked,
    #[error("the ask-or-act choice was already made for this episode")]
    AlreadyDecided,
    #[error("combat has started; asking is closed")]
    CombatStarted,
    #[error("an ask needs a question")]
    MissingQuestion,
}

/// Per-episode ask state: at most one hint, fixed before the first combat
/// decision and attached to every observation afterwards.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AskSession {
    decision: Option<AskDecision>,
    hint: Option<Hint>,
    started: bool,
    rejected_asks: u32,
}

impl AskSession {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the pre-episode choice. An ask is answered by `oracle`.
    pub fn decide(
        &mut self,
        decision: AskDecision,
        oracle: &dyn HintOracle,
    ) -> Result<Option<&Hint>, AskError> {
        if self.started {
            self.rejected_asks += u32::from(decision.choice == AskChoice::Ask);
            return Err(AskError::CombatStarted);
        }
        if let Some(prev) = &self.decision {
            let err = if prev.choice == AskChoice::Ask {
                AskError::AlreadyAsked
            } else {
                AskError::AlreadyDecided
            };
            self.rejected_asks += u32::from(decision.choice == AskChoice::Ask);
            return Err(err);
        }
        if decision.choice == AskChoice::Ask {
            let question = decision.question.as_deref().map(str::trim).unwrap_or("");
            if question.is_empty() {
                return Err(AskError::MissingQuestion);
            }
            self.hint = Some(oracle.answer(question, decision.task_id));
        }
        self.decision = Some(decision);
        Ok(self.hint.as_ref())
    }

    /// Closes the ask window. An undecided episode is recorded as acting.
    pub fn start_combat(&mut self, task_id: u8, k: u32, seq: u64) {
        if self.decision.is_none() {
            self.decision = Some(AskDecision {
                task_id,
                k,
                choice: AskChoice::Act,
                question: None,
                seq,
            });
        }
        self.started = true;
    }

    pub fn asked(&self) -> bool {
        self.decision
            .as_ref()
            .is_some_and(|d| d.choice == AskChoice::Ask)
    }

    pub fn decision(&self) -> Option<&AskDecision> {
        self.decision.as_ref()
    }

    pub fn hint(&self) -> Option<&Hint> {
        self.hint.as_ref()
    }

    pub fn rejected_asks(&self) -> u32 {
        self.rejected_asks
    }

    /// Attaches the persisted hint, if any, to an outgoing observation.
    pub fn persist(&self, obs: &mut StructuredObservation) {
        obs.hint = self.hint.as_ref().map(|h| h.text.clone());
    }
}

/// Free-standing form of [`AskSession::persist`].
pub fn persist_hint(session: &AskSession, obs: &mut StructuredObservation) {
    session.persist(obs);
}

/// One line per evaluated episode, shown to the agent at later ask points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLogEntry {
    pub task_id: u8,
    pub k: u32,
    pub choice: AskChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    pub action_summary: String,
    pub outcome: String,
    pub result: FamilyScore,
}

/// Run-length summary of an action sequence, e.g. `0.1.4x3 2.0.4`.
pub fn summarize_actions(actions: &[TaTriple]) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < actions.len() {
        let a = actions[i];
        let mut run = 1;
        while i + run < actions.len() && actions[i + run] == a {
            run += 1;
        }
        let token = format!("{}.{}.{}", a.c, a.m, a.t);
        parts.push(if run > 1 {
            format!("{token}x{run}")
        } else {
            token
        });
        i += run;
    }
    parts.join(" ")
}
