//! Deterministic combat state machine: latent state, transition kernel and
//! termination rules.

mod battle;
pub mod kit;
pub mod rng;
mod state;
pub mod task;
mod types;

pub use battle::Battle;
pub use kit::{
    AllyKit, Archetype, Effect, EffectScope, EnemyAttack, EnemySpec, MoveSpec, Targeting,
};
pub use state::{ActiveTurn, BattleState, QueueEntry, ScoreEvent};
pub use task::{
    builtin_task, builtin_tasks, AsWeights, EngineConfig, Family, RewardCalibration, TaskSpec, Wave,
};
pub use types::*;

#[cfg(test)]
mod tests;
