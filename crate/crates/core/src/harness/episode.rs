//! One evaluation episode as a request/submit state machine.
//!
//! The episode owns the battle, the regime-specific interface state and the
//! step log. Callers alternate [`Episode::request`] and [`Episode::submit`];
//! every submitted output is appended to the log before the next request is
//! built, so the log alone is enough to replay the episode.

use std::io::{self, Write};
use std::sync::{Arc, OnceLock};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::wire::{
    parse_response, EpisodeHeader, ObservationPayload, Regime, Request, Response, SCHEMA_VERSION,
};
use crate::askoract::{
    AskChoice, AskDecision, AskError, AskSession, Corpus, DecisionLogEntry, Hint, HintOracle,
};
use crate::engine::{
    ActionOutcome, Battle, Decision, Family, ResolvedAction, TaskSpec, Termination,
};
use crate::error::{ConfigError, EngineError};
use crate::interface::{
    encode_ta, execute_dc, execute_ta, legal_mask, DcPrimitive, DcStepResult, FailureCounter,
    IllegalReason, MissReason, PendingSelection, TaTriple, MAX_CONSECUTIVE_FAILURES,
};
use crate::metrics::{
    as_score, moc_cycles, moc_score, pf_score, AskRecord, FamilyScore, RewardAccumulator,
    RewardRecord, PF_AV_MAX,
};
use crate::observation::{render_frame, textify, FrameObservation, StructuredObservation};

/// Default exchange allowance per step of budget.
pub const EXCHANGES_PER_STEP: u64 = 16;

pub type SharedOracle = Arc<dyn HintOracle>;

/// The shipped corpus as a shareable oracle.
pub fn builtin_oracle() -> SharedOracle {
    static CELL: OnceLock<Arc<Corpus>> = OnceLock::new();
    CELL.get_or_init(|| Arc::new(Corpus::builtin().clone()))
        .clone()
}

/// What the transport delivered for one request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentOutput {
    Raw { text: String },
    Timeout,
    Transport { error: String },
}

impl AgentOutput {
    pub fn raw(text: impl Into<String>) -> Self {
        AgentOutput::Raw { text: text.into() }
    }

    pub fn response(r: &Response) -> Self {
        AgentOutput::Raw { text: r.to_json() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    DcLocalization,
    InvalidAction,
    Transport,
    ExchangeCap,
}

impl AbortReason {
    pub fn as_str(self) -> &'static str {
        match self {
            AbortReason::DcLocalization => "dc_localization",
            AbortReason::InvalidAction => "invalid_action",
            AbortReason::Transport => "transport",
            AbortReason::ExchangeCap => "exchange_cap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Victory,
    Defeat,
    BudgetExhausted,
    Aborted { reason: AbortReason },
}

impl Outcome {
    pub fn label(&self) -> String {
        match self {
            Outcome::Victory => "victory".into(),
            Outcome::Defeat => "defeat".into(),
            Outcome::BudgetExhausted => "budget_exhausted".into(),
            Outcome::Aborted { reason } => format!("aborted:{}", reason.as_str()),
        }
    }

    fn from_termination(t: Termination) -> Option<Outcome> {
        match t {
            Termination::Ongoing => None,
            Termination::Victory => Some(Outcome::Victory),
            Termination::Defeat => Some(Outcome::Defeat),
            Termination::BudgetExhausted => Some(Outcome::BudgetExhausted),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AskPoint,
    Decide,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub regime: Regime,
    pub seed: u64,
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default)]
    pub agent: String,
    /// Total agent exchanges allowed; defaults to 16 per step of budget.
    #[serde(default)]
    pub exchange_cap: Option<u64>,
    #[serde(default = "default_failure_limit")]
    pub failure_limit: u32,
    /// Position of this episode's ask point in the evaluation order.
    #[serde(default)]
    pub ask_seq: u64,
}

fn default_k() -> u32 {
    1
}

fn default_failure_limit() -> u32 {
    MAX_CONSECUTIVE_FAILURES
}

impl EpisodeConfig {
    pub fn new(regime: Regime, seed: u64) -> Self {
        EpisodeConfig {
            regime,
            seed,
            k: 1,
            agent: String::new(),
            exchange_cap: None,
            failure_limit: MAX_CONSECUTIVE_FAILURES,
            ask_seq: 0,
        }
    }

    pub fn with_agent(mut self, agent: impl Into<String>) -> Self {
        self.agent = agent.into();
        self
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = k;
        self
    }
}

/// How one exchange was resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Resolution {
    AskPoint {
        choice: AskChoice,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        question: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hint: Option<Hint>,
    },
    Staged {
        selection: PendingSelection,
    },
    Executed {
        action: ResolvedAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        triple: Option<TaTriple>,
    },
    Miss {
        reason: MissReason,
        consecutive: u32,
    },
    Illegal {
        reason: IllegalReason,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        triple: Option<TaTriple>,
        consecutive: u32,
    },
    AskRejected {
        error: AskError,
        consecutive: u32,
    },
    /// No output in time; the pending decision was passed.
    Timeout,
    TransportFailure {
        error: String,
    },
}

impl Resolution {
    pub fn is_rejection(&self) -> bool {
        matches!(
            self,
            Resolution::Miss { .. } | Resolution::Illegal { .. } | Resolution::AskRejected { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRecord {
    /// 1-based exchange number.
    pub index: u64,
    pub phase: Phase,
    /// Decisions resolved before this exchange.
    pub step: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    pub observation_digest: String,
    pub output: AgentOutput,
    pub resolution: Resolution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<ActionOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardRecord>,
    pub state_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLogHeader {
    pub schema: u32,
    pub config: EpisodeConfig,
    pub exchange_cap: u64,
    pub task: TaskSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_digest: Option<String>,
    pub initial_digest: String,
}

/// One line of the JSONL step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header(Box<EpisodeLogHeader>),
    Exchange(Box<ExchangeRecord>),
    Result(Box<EpisodeResult>),
}

/// Everything reported about a finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: u8,
    pub task_name: String,
    pub family: Family,
    pub regime: Regime,
    pub agent: String,
    pub seed: u64,
    pub k: u32,
    pub step_budget: u32,
    pub outcome: Outcome,
    /// Resolved decisions, including passed ones.
    pub steps: u32,
    /// Steps to victory; absent (infinite) otherwise.
    pub t_steps: Option<u32>,
    pub exchanges: u64,
    pub rejections: u32,
    pub av_used: f64,
    pub r_total: f64,
    pub r_scaled: f64,
    pub score: FamilyScore,
    /// Set in the ask-enabled regime only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asked: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    #[serde(default)]
    pub rejected_asks: u32,
    pub action_summary: String,
    pub final_digest: String,
}

impl EpisodeResult {
    pub fn victory(&self) -> bool {
        self.outcome == Outcome::Victory
    }

    pub fn ask_record(&self) -> Option<AskRecord> {
        self.asked.map(|asked| AskRecord {
            task_id: self.task_id,
            k: self.k,
            asked,
            score: self.score.ledger_value(self.step_budget),
        })
    }

    pub fn decision_log_entry(&self) -> DecisionLogEntry {
        DecisionLogEntry {
            task_id: self.task_id,
            k: self.k,
            choice: if self.asked == Some(true) {
                AskChoice::Ask
            } else {
                AskChoice::Act
            },
            question: self.question.clone(),
            hint: self.hint.clone(),
            action_summary: self.action_summary.clone(),
            outcome: self.outcome.label(),
            result: self.score.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("the episode has finished")]
    Finished,
    #[error("writing the step log failed: {0}")]
    Log(#[from] io::Error),
}

struct Pending {
    request: Request,
    digest: String,
    frame: Option<FrameObservation>,
}

pub struct Episode {
    spec: Arc<TaskSpec>,
    config: EpisodeConfig,
    exchange_cap: u64,
    battle: Battle,
    phase: Phase,
    selection: PendingSelection,
    failures: FailureCounter,
    ask: AskSession,
    oracle: SharedOracle,
    decision_log: Vec<DecisionLogEntry>,
    reward: RewardAccumulator,
    exchanges: u64,
    rejections: u32,
    actions: Vec<TaTriple>,
    records: Vec<LogRecord>,
    sink: Option<Box<dyn Write + Send>>,
    pending: Option<Pending>,
    result: Option<EpisodeResult>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Episode {
    pub fn new(spec: Arc<TaskSpec>, config: EpisodeConfig) -> Result<Self, EpisodeError> {
        Self::with_oracle(spec, config, builtin_oracle())
    }

    pub fn with_oracle(
        spec: Arc<TaskSpec>,
        config: EpisodeConfig,
        oracle: SharedOracle,
    ) -> Result<Self, EpisodeError> {
        let mut battle = Battle::new(Arc::clone(&spec), config.seed)?;
        let initial_digest = battle.digest();
        battle.advance()?;
        let reward = RewardAccumulator::new(battle.state().ally_hp_vector(), spec.dmg_ref());
        let exchange_cap = config
            .exchange_cap
            .unwrap_or(EXCHANGES_PER_STEP * (u64::from(spec.step_budget) + 1));
        let header = EpisodeLogHeader {
            schema: SCHEMA_VERSION,
            config: config.clone(),
            exchange_cap,
            task: (*spec).clone(),
            oracle_digest: (config.regime == Regime::TaAsk).then(|| oracle.digest()),
            initial_digest,
        };
        let mut ep = Episode {
            failures: FailureCounter::new(config.failure_limit),
            phase: if config.regime == Regime::TaAsk {
                Phase::AskPoint
            } else {
                Phase::Decide
            },
            spec,
            config,
            exchange_cap,
            battle,
            selection: PendingSelection::default(),
            ask: AskSession::new(),
            oracle,
            decision_log: Vec::new(),
            reward,
            exchanges: 0,
            rejections: 0,
            actions: Vec::new(),
            records: vec![LogRecord::Header(Box::new(header))],
            sink: None,
            pending: None,
            result: None,
        };
        if let Some(outcome) = Outcome::from_termination(ep.battle.termination()) {
            ep.finish(outcome);
            let result = ep.result.clone().expect("finished");
            ep.records.push(LogRecord::Result(Box::new(result)));
        }
        Ok(ep)
    }

    /// Entries shown to the agent at this episode's ask point.
    pub fn set_decision_log(&mut self, entries: Vec<DecisionLogEntry>) {
        self.decision_log = entries;
        if self.phase == Phase::AskPoint {
            self.pending = None;
        }
    }

    /// Streams the log to `sink`, starting with every record written so far.
    pub fn attach_log(&mut self, mut sink: Box<dyn Write + Send>) -> io::Result<()> {
        for r in &self.records {
            write_record(&mut sink, r)?;
        }
        self.sink = Some(sink);
        Ok(())
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn battle(&self) -> &Battle {
        &self.battle
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    pub fn result(&self) -> Option<&EpisodeResult> {
        self.result.as_ref()
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    /// The log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        let mut buf = Vec::new();
        for r in &self.records {
            write_record(&mut buf, r).expect("writing to memory");
        }
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn exchanges(&self) -> u64 {
        self.exchanges
    }

    pub fn exchange_cap(&self) -> u64 {
        self.exchange_cap
    }

    pub fn selection(&self) -> &PendingSelection {
        &self.selection
    }

    pub fn failures(&self) -> &FailureCounter {
        &self.failures
    }

    pub fn ask_session(&self) -> &AskSession {
        &self.ask
    }

    pub fn digest(&self) -> String {
        self.battle.digest()
    }

    fn header(&self) -> EpisodeHeader {
        EpisodeHeader {
            task_id: self.spec.task_id,
            task_name: self.spec.name.clone(),
            family: self.spec.family,
            regime: self.config.regime,
            seed: self.config.seed,
            k: self.config.k,
            step_budget: self.spec.step_budget,
        }
    }

    /// The rendered frame with the staged selection outlined.
    pub fn frame(&self) -> FrameObservation {
        let mut frame = render_frame(&self.battle);
        for rect in self.selection.highlight_rects(&frame) {
            frame.mark(rect);
        }
        frame
    }

    /// The structured record, with the episode's hint attached.
    pub fn structured(&self) -> StructuredObservation {
        let mut obs = textify(&self.battle, self.config.regime.ocr());
        if self.config.regime == Regime::TaAsk {
            self.ask.persist(&mut obs);
        }
        obs
    }

    fn build_pending(&self) -> Pending {
        let request_id = self.exchanges + 1;
        match self.phase {
            Phase::AskPoint | Phase::Finished => {
                let request = Request::AskPoint {
                    schema: SCHEMA_VERSION,
                    request_id,
                    header: self.header(),
                    decision_log: self.decision_log.clone(),
                };
                let digest = sha256_hex(
                    serde_json::to_string(&self.decision_log)
                        .unwrap_or_default()
                        .as_bytes(),
                );
                Pending {
                    request,
                    digest,
                    frame: None,
                }
            }
            Phase::Decide if self.config.regime == Regime::Dc => {
                let frame = self.frame();
                let png = base64::engine::general_purpose::STANDARD.encode(frame.to_png());
                let request = Request::Decide {
                    schema: SCHEMA_VERSION,
                    request_id,
                    header: self.header(),
                    step: self.battle.state().step_count,
                    observation: ObservationPayload::Frame {
                        frame_id: frame.frame_id,
                        width: frame.width(),
                        height: frame.height(),
                        png,
                    },
                    mask: None,
                };
                let digest = frame.pixel_digest();
                Pending {
                    request,
                    digest,
                    frame: Some(frame),
                }
            }
            Phase::Decide => {
                let obs = self.structured();
                let digest = sha256_hex(&serde_json::to_vec(&obs).expect("observations serialize"));
                let request = Request::Decide {
                    schema: SCHEMA_VERSION,
                    request_id,
                    header: self.header(),
                    step: self.battle.state().step_count,
                    observation: ObservationPayload::Structured(Box::new(obs)),
                    mask: Some(legal_mask(&self.battle)),
                };
                Pending {
                    request,
                    digest,
                    frame: None,
                }
            }
        }
    }

    /// The envelope for the next exchange; `None` once finished.
    pub fn request(&mut self) -> Option<Request> {
        if self.is_finished() {
            return None;
        }
        if self.pending.is_none() {
            self.pending = Some(self.build_pending());
        }
        self.pending.as_ref().map(|p| p.request.clone())
    }

    /// Resolves one agent output and appends it to the log.
    pub fn submit(&mut self, output: AgentOutput) -> Result<ExchangeRecord, EpisodeError> {
        if self.is_finished() {
            return Err(EpisodeError::Finished);
        }
        let pending = match self.pending.take() {
            Some(p) => p,
            None => self.build_pending(),
        };
        self.exchanges += 1;
        let phase = self.phase;
        let step = self.battle.state().step_count;
        let decision = self.battle.decision();
        let mut effect = StepEffect::default();
        let resolution = match phase {
            Phase::AskPoint => self.resolve_ask_point(&output),
            Phase::Decide => self.resolve_decision(&output, pending.frame.as_ref(), &mut effect)?,
            Phase::Finished => unreachable!("checked above"),
        };
        if !self.is_finished() && self.exchanges >= self.exchange_cap {
            self.finish(Outcome::Aborted {
                reason: AbortReason::ExchangeCap,
            });
        }
        let record = ExchangeRecord {
            index: self.exchanges,
            phase,
            step,
            decision: (phase == Phase::Decide).then_some(decision).flatten(),
            observation_digest: pending.digest,
            output,
            resolution,
            outcome: effect.outcome,
            reward: effect.reward,
            state_digest: self.battle.digest(),
            finished: self.result.as_ref().map(|r| r.outcome),
        };
        self.log(LogRecord::Exchange(Box::new(record.clone())))?;
        if let Some(result) = self.result.clone() {
            self.log(LogRecord::Result(Box::new(result)))?;
        }
        Ok(record)
    }

    fn log(&mut self, record: LogRecord) -> io::Result<()> {
        if let Some(sink) = self.sink.as_mut() {
            write_record(sink, &record)?;
        }
        self.records.push(record);
        Ok(())
    }

    fn resolve_ask_point(&mut self, output: &AgentOutput) -> Resolution {
        if let AgentOutput::Transport { error } = output {
            self.finish(Outcome::Aborted {
                reason: AbortReason::Transport,
            });
            return Resolution::TransportFailure {
                error: error.clone(),
            };
        }
        let question = match output {
            AgentOutput::Raw { text } => match parse_response(text) {
                Ok(Response::Ask { question }) if !question.trim().is_empty() => Some(question),
                _ => None,
            },
            _ => None,
        };
        let decision = AskDecision {
            task_id: self.spec.task_id,
            k: self.config.k,
            choice: if question.is_some() {
                AskChoice::Ask
            } else {
                AskChoice::Act
            },
            question: question.clone(),
            seq: self.config.ask_seq,
        };
        let choice = decision.choice;
        self.ask
            .decide(decision, self.oracle.as_ref())
            .expect("the first choice of a fresh session with a non-empty question is accepted");
        self.ask
            .start_combat(self.spec.task_id, self.config.k, self.config.ask_seq);
        self.phase = Phase::Decide;
        Resolution::AskPoint {
            choice,
            question,
            hint: self.ask.hint().cloned(),
        }
    }

    fn resolve_decision(
        &mut self,
        output: &AgentOutput,
        frame: Option<&FrameObservation>,
        effect: &mut StepEffect,
    ) -> Result<Resolution, EpisodeError> {
        let text = match output {
            AgentOutput::Transport { error } => {
                self.finish(Outcome::Aborted {
                    reason: AbortReason::Transport,
                });
                return Ok(Resolution::TransportFailure {
                    error: error.clone(),
                });
            }
            AgentOutput::Timeout => {
                self.selection.clear();
                self.battle.apply_noop()?;
                self.after_step(ActionOutcome::default(), effect)?;
                return Ok(Resolution::Timeout);
            }
            AgentOutput::Raw { text } => text,
        };
        let parsed = parse_response(text);
        if self.config.regime == Regime::Dc {
            let prim = parsed.map(|r| r.as_dc()).unwrap_or(DcPrimitive::Empty);
            let owned;
            let frame = match frame {
                Some(f) => f,
                None => {
                    owned = self.frame();
                    &owned
                }
            };
            return match execute_dc(&self.battle, frame, &prim, &mut self.selection) {
                DcStepResult::Staged { selection } => Ok(Resolution::Staged { selection }),
                DcStepResult::Miss { reason } => {
                    let consecutive = self.reject(AbortReason::DcLocalization);
                    Ok(Resolution::Miss {
                        reason,
                        consecutive,
                    })
                }
                DcStepResult::Resolved { action } => {
                    self.selection.clear();
                    self.execute(action, effect)
                }
            };
        }
        match parsed {
            Ok(Response::Ask { question }) if self.config.regime == Regime::TaAsk => {
                let decision = AskDecision {
                    task_id: self.spec.task_id,
                    k: self.config.k,
                    choice: AskChoice::Ask,
                    question: Some(question),
                    seq: self.config.ask_seq,
                };
                let error = self
                    .ask
                    .decide(decision, self.oracle.as_ref())
                    .err()
                    .unwrap_or(AskError::CombatStarted);
                let consecutive = self.reject(AbortReason::InvalidAction);
                Ok(Resolution::AskRejected { error, consecutive })
            }
            Ok(r) => match r.as_triple() {
                Some(triple) => match execute_ta(&self.battle, triple) {
                    Ok(action) => self.execute(action, effect),
                    Err(reason) => {
                        let consecutive = self.reject(AbortReason::InvalidAction);
                        Ok(Resolution::Illegal {
                            reason,
                            triple: Some(triple),
                            consecutive,
                        })
                    }
                },
                None => {
                    let consecutive = self.reject(AbortReason::InvalidAction);
                    Ok(Resolution::Illegal {
                        reason: IllegalReason::Malformed,
                        triple: None,
                        consecutive,
                    })
                }
            },
            Err(_) => {
                let consecutive = self.reject(AbortReason::InvalidAction);
                Ok(Resolution::Illegal {
                    reason: IllegalReason::Malformed,
                    triple: None,
                    consecutive,
                })
            }
        }
    }

    /// Counts a rejection; returns the consecutive count after it.
    fn reject(&mut self, reason: AbortReason) -> u32 {
        self.rejections += 1;
        if self.failures.reject() {
            self.finish(Outcome::Aborted { reason });
        }
        self.failures.consecutive()
    }

    fn execute(
        &mut self,
        action: ResolvedAction,
        effect: &mut StepEffect,
    ) -> Result<Resolution, EpisodeError> {
        let triple = encode_ta(&self.battle, &action);
        let outcome = self.battle.apply_action(action)?;
        self.failures.accept();
        if let Some(t) = triple {
            self.actions.push(t);
        }
        self.after_step(outcome, effect)?;
        Ok(Resolution::Executed { action, triple })
    }

    fn after_step(
        &mut self,
        outcome: ActionOutcome,
        effect: &mut StepEffect,
    ) -> Result<(), EpisodeError> {
        self.battle.advance()?;
        let (_, record) = self
            .reward
            .push(self.battle.state().ally_hp_vector(), outcome.damage_dealt);
        effect.reward = Some(record);
        effect.outcome = Some(outcome);
        if let Some(end) = Outcome::from_termination(self.battle.termination()) {
            self.finish(end);
        }
        Ok(())
    }

    fn finish(&mut self, outcome: Outcome) {
        self.phase = Phase::Finished;
        self.pending = None;
        let state = self.battle.state();
        let spec = &self.spec;
        let victory = outcome == Outcome::Victory;
        let (r_min, r_max) = spec.reward_bounds();
        let trace = self.reward.trace();
        let score = family_score(
            &self.battle,
            victory,
            trace.total(),
            trace.scaled(r_min, r_max),
        );
        let tool_ask = self.config.regime == Regime::TaAsk;
        self.result = Some(EpisodeResult {
            task_id: spec.task_id,
            task_name: spec.name.clone(),
            family: spec.family,
            regime: self.config.regime,
            agent: self.config.agent.clone(),
            seed: self.config.seed,
            k: self.config.k,
            step_budget: spec.step_budget,
            outcome,
            steps: state.step_count,
            t_steps: victory.then_some(state.step_count),
            exchanges: self.exchanges,
            rejections: self.rejections,
            av_used: state.av_clock,
            r_total: trace.total(),
            r_scaled: trace.scaled(r_min, r_max),
            score,
            asked: tool_ask.then(|| self.ask.asked()),
            question: self.ask.decision().and_then(|d| d.question.clone()),
            hint: self.ask.hint().map(|h| h.text.clone()),
            rejected_asks: self.ask.rejected_asks(),
            action_summary: crate::askoract::summarize_actions(&self.actions),
            final_digest: self.battle.digest(),
        });
    }
}

#[derive(Default)]
struct StepEffect {
    outcome: Option<ActionOutcome>,
    reward: Option<RewardRecord>,
}

fn write_record<W: Write + ?Sized>(w: &mut W, record: &LogRecord) -> io::Result<()> {
    let line = serde_json::to_string(record).map_err(io::Error::other)?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Scores the battle's current state for its family.
pub fn family_score(battle: &Battle, victory: bool, r_eow: f64, r_scaled: f64) -> FamilyScore {
    let spec = battle.spec();
    let state = battle.state();
    match spec.family {
        Family::EoW => FamilyScore::EoW {
            t_steps: victory.then_some(state.step_count),
            r_eow,
            r_scaled,
        },
        Family::MoC => {
            let c_max = spec.c_max.unwrap_or(0);
            let c_used = moc_cycles(state.av_clock);
            FamilyScore::MoC {
                c_used,
                c_max,
                s_moc: victory.then(|| moc_score(c_max, c_used)),
            }
        }
        Family::PF => {
            let events: Vec<(f64, f64)> = state
                .score_events
                .iter()
                .map(|e| (e.av_stamp, e.points))
                .collect();
            FamilyScore::PF {
                s_pf: pf_score(&events, spec.av_budget.unwrap_or(PF_AV_MAX)),
            }
        }
        Family::AS => {
            let hp_depleted_pct = hp_depleted_pct(battle);
            let av_rem = match (victory, spec.av_budget) {
                (true, Some(budget)) => (budget - state.av_clock).max(0.0),
                _ => 0.0,
            };
            FamilyScore::AS {
                hp_depleted_pct,
                av_rem,
                s_as: as_score(hp_depleted_pct, av_rem, spec.as_weights_or_default()),
            }
        }
    }
}

/// Percentage of the stage's total enemy HP removed so far.
pub fn hp_depleted_pct(battle: &Battle) -> f64 {
    let spec = battle.spec();
    let state = battle.state();
    let wave = state.wave_index as usize;
    let total: f64 = spec
        .waves
        .iter()
        .flat_map(|w| w.enemies.iter())
        .map(|e| e.max_hp)
        .sum();
    if total <= 0.0 {
        return 0.0;
    }
    let current: f64 = state.enemies().map(|c| c.hp.max(0.0)).sum();
    let future: f64 = spec
        .waves
        .iter()
        .skip(wave + 1)
        .flat_map(|w| w.enemies.iter())
        .map(|e| e.max_hp)
        .sum();
    (100.0 * (total - current - future) / total).clamp(0.0, 100.0)
}
