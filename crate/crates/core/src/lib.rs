//! Turn-based squad-combat simulator with a dual-regime agent evaluation
//! harness.
//!
//! Agents play either by pointing at a rendered 1920x1080 frame (direct
//! control) or by emitting `(character, move, target)` triples against a
//! structured text record (tool-assisted). Both regimes drive the same
//! seeded [`engine::Battle`], and every episode is scored with the same
//! [`metrics`].

pub mod askoract;
pub mod engine;
pub mod error;
pub mod harness;
pub mod interface;
pub mod metrics;
pub mod observation;

pub use engine::{Battle, BattleState, Decision, Family, ResolvedAction, TaskSpec, Termination};
pub use error::{ConfigError, EngineError};
