//! Driving agents through episodes and whole evaluations.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use super::agent::Agent;
use super::episode::{
    builtin_oracle, Episode, EpisodeConfig, EpisodeError, EpisodeResult, SharedOracle,
};
use super::report::EvaluationReport;
use super::wire::Regime;
use crate::engine::TaskSpec;

/// Runs `episode` to completion against `agent`.
pub fn run_episode(
    episode: &mut Episode,
    agent: &mut dyn Agent,
) -> Result<EpisodeResult, EpisodeError> {
    while let Some(request) = episode.request() {
        let output = agent.respond(&request);
        episode.submit(output)?;
    }
    Ok(episode
        .result()
        .cloned()
        .expect("a finished episode has a result"))
}

/// Builds and runs one episode of `spec` in `regime`.
pub fn play(
    spec: &Arc<TaskSpec>,
    regime: Regime,
    seed: u64,
    agent: &mut dyn Agent,
) -> Result<EpisodeResult, EpisodeError> {
    let config = EpisodeConfig::new(regime, seed).with_agent(agent.name());
    let mut ep = Episode::new(Arc::clone(spec), config)?;
    run_episode(&mut ep, agent)
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error("creating log {path}: {message}")]
    Log { path: String, message: String },
    #[error("starting agent: {0}")]
    Agent(String),
}

/// Supplies a fresh agent for each episode of an evaluation.
pub type AgentFactory<'a> =
    dyn FnMut(&TaskSpec, &EpisodeConfig) -> Result<Box<dyn Agent>, String> + 'a;

#[derive(Clone)]
pub struct EvaluationPlan {
    pub tasks: Vec<Arc<TaskSpec>>,
    pub regime: Regime,
    pub trials: u32,
    /// Episode `i` of every task uses seed `seed_base + i`.
    pub seed_base: u64,
    pub agent: String,
    pub log_dir: Option<PathBuf>,
    pub exchange_cap: Option<u64>,
    pub oracle: SharedOracle,
}

impl EvaluationPlan {
    pub fn new(tasks: Vec<Arc<TaskSpec>>, regime: Regime, trials: u32) -> Self {
        EvaluationPlan {
            tasks,
            regime,
            trials,
            seed_base: 0,
            agent: String::new(),
            log_dir: None,
            exchange_cap: None,
            oracle: builtin_oracle(),
        }
    }
}

pub fn log_file_name(agent: &str, regime: Regime, task_id: u8, k: u32, seed: u64) -> String {
    let agent: String = agent
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .take(40)
        .collect();
    let agent = if agent.is_empty() {
        "agent".to_string()
    } else {
        agent
    };
    format!("{agent}_{}_t{task_id}_k{k}_s{seed}.jsonl", regime.as_str())
}

fn open_log(dir: &Path, name: &str) -> Result<BufWriter<File>, EvalError> {
    let path = dir.join(name);
    let err = |e: std::io::Error| EvalError::Log {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(err)?;
    File::create(&path).map(BufWriter::new).map_err(err)
}

/// Runs every task for `plan.trials` episodes, in task order and then
/// episode order. `factory` supplies a fresh agent for each episode.
///
/// With asking enabled each ask point sees the decision log of every
/// episode evaluated before it.
pub fn run_evaluation(
    plan: &EvaluationPlan,
    factory: &mut AgentFactory<'_>,
) -> Result<EvaluationReport, EvalError> {
    let mut results = Vec::new();
    let mut decision_log = Vec::new();
    let mut ask_seq = 0u64;
    for spec in &plan.tasks {
        for i in 0..plan.trials {
            let seed = plan.seed_base + u64::from(i);
            let mut config = EpisodeConfig::new(plan.regime, seed)
                .with_agent(plan.agent.clone())
                .with_k(i + 1);
            config.exchange_cap = plan.exchange_cap;
            config.ask_seq = ask_seq;
            ask_seq += 1;
            let mut agent = factory(spec, &config).map_err(EvalError::Agent)?;
            if config.agent.is_empty() {
                config.agent = agent.name();
            }
            let mut episode =
                Episode::with_oracle(Arc::clone(spec), config, Arc::clone(&plan.oracle))?;
            if plan.regime == Regime::TaAsk {
                episode.set_decision_log(decision_log.clone());
            }
            if let Some(dir) = &plan.log_dir {
                let name = log_file_name(
                    &episode.config().agent,
                    plan.regime,
                    spec.task_id,
                    i + 1,
                    seed,
                );
                let sink = open_log(dir, &name)?;
                episode
                    .attach_log(Box::new(sink))
                    .map_err(EpisodeError::from)?;
            }
            let result = run_episode(&mut episode, agent.as_mut())?;
            if plan.regime == Regime::TaAsk {
                decision_log.push(result.decision_log_entry());
            }
            results.push(result);
        }
    }
    let agent = results
        .first()
        .map(|r| r.agent.clone())
        .unwrap_or_else(|| plan.agent.clone());
    Ok(EvaluationReport::from_results(&agent, plan.regime, results))
}
