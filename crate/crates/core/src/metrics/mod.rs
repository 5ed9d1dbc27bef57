//! Episode scoring: the per-step HP/damage reward, the family scores and
//! the ask-or-act diagnostics, plus the small aggregation helpers used by
//! reports.

mod ask;
mod family;
mod reward;
mod stats;

pub use ask::{
    ask_metrics, efficiency, AskLedger, AskMetrics, AskRecord, DEFAULT_ASK_OPPORTUNITIES,
};
pub use family::{
    as_score, moc_cycles, moc_score, pf_score, FamilyScore, CYCLE_AV, FIRST_CYCLE_AV, PF_AV_MAX,
};
pub use reward::{
    episode_reward, normalized_damage, sign, step_reward, HpSnapshot, RewardAccumulator,
    RewardRecord, RewardTrace, StepReward,
};
pub use stats::{mean_sd, round1, MeanSd};
