//! Evaluation harness: episodes, agents, logs, reports and hosting.
//!
//! An [`Episode`] alternates requests and agent outputs. In direct control
//! the request carries a PNG frame and the agent answers with clicks and
//! keys; in the tool-assisted regimes it carries the structured record and
//! the legal mask, and the agent answers with triples. The ask-enabled
//! regime opens each episode with one ask-or-act exchange.

mod agent;
mod episode;
mod replay;
mod report;
mod runner;
mod service;
mod wire;

#[cfg(test)]
mod tests;

pub use agent::{
    autobattle_policy, random_policy, Agent, AutobattleAgent, FnAgent, RandomAgent, ScriptedAgent,
    SubprocessAgent,
};
pub use episode::{
    builtin_oracle, family_score, hp_depleted_pct, AbortReason, AgentOutput, Episode,
    EpisodeConfig, EpisodeError, EpisodeLogHeader, EpisodeResult, ExchangeRecord, LogRecord,
    Outcome, Phase, Resolution, SharedOracle, EXCHANGES_PER_STEP,
};
pub use replay::{parse_log, read_log, replay, restore, ReplayError, ReplayReport};
pub use report::{EvaluationReport, TaskRow};
pub use runner::{
    log_file_name, play, run_episode, run_evaluation, AgentFactory, EvalError, EvaluationPlan,
};
pub use service::{
    CreateEpisode, EpisodeInfo, EpisodeService, ServiceError, SubmitReceipt, TaskInfo,
};
pub use wire::{
    parse_response, read_frame, reply_request_id, write_frame, EpisodeHeader, ObservationPayload,
    Regime, Request, Response, MAX_FRAME_BYTES, SCHEMA_VERSION,
};
