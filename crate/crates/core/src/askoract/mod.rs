//! The pre-episode ask-or-act point.
//!
//! In tool-assisted evaluations the agent may ask one question before an
//! episode. The answer comes from a frozen local corpus through
//! deterministic lexical retrieval, is screened for anything resembling a
//! coordinate or action string, and is attached to every observation of that
//! episode only.

mod corpus;
mod session;

pub use corpus::{
    contains_action_string, screen_and_trim, tokenize, Corpus, DocEntry, Hint, HintOracle, Passage,
    HINT_CAP, NO_GUIDANCE,
};
pub use session::{
    persist_hint, summarize_actions, AskChoice, AskDecision, AskError, AskSession, DecisionLogEntry,
};

/// Free-standing retrieval over a corpus.
pub fn retrieve_hint(question: &str, corpus: &Corpus, task_id: u8) -> Hint {
    corpus.retrieve(question, task_id)
}
