//! Episodes hosted for remote controllers.
//!
//! Each submission may carry the `seq` it answers (the `request_id` of the
//! envelope it saw). A submission whose `seq` is stale, or that races
//! another submission to the same episode, is refused as a conflict, so
//! exactly one controller's output is applied per exchange.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, TryLockError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::episode::{
    builtin_oracle, AgentOutput, Episode, EpisodeConfig, EpisodeError, EpisodeResult,
    ExchangeRecord, Outcome, Phase, SharedOracle,
};
use super::replay::{read_log, restore, ReplayError};
use super::wire::{Regime, Request};
use crate::engine::{builtin_tasks, Family, TaskSpec};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown task {0}")]
    UnknownTask(u8),
    #[error("no episode {0}")]
    NotFound(String),
    #[error("stale submission: expected seq {expected}, got {got}")]
    Conflict { expected: u64, got: u64 },
    #[error("another submission to this episode is in progress")]
    Busy,
    #[error("the episode has finished")]
    Terminal,
    #[error("the episode has not finished")]
    NotFinished,
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateEpisode {
    pub task_id: u8,
    pub regime: Regime,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub k: Option<u32>,
    #[serde(default)]
    pub agent: Option<String>,
    #[serde(default)]
    pub exchange_cap: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeInfo {
    pub id: String,
    pub task_id: u8,
    pub regime: Regime,
    pub seed: u64,
    pub phase: Phase,
    /// The `seq` the next submission must carry.
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub task_id: u8,
    pub name: String,
    pub family: Family,
    pub step_budget: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub av_budget: Option<f64>,
    pub waves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitReceipt {
    pub info: EpisodeInfo,
    pub record: ExchangeRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<EpisodeResult>,
}

type Slot = Arc<Mutex<Episode>>;

pub struct EpisodeService {
    tasks: BTreeMap<u8, Arc<TaskSpec>>,
    log_dir: Option<PathBuf>,
    oracle: SharedOracle,
    episodes: Mutex<BTreeMap<String, Slot>>,
    next_id: Mutex<u64>,
}

fn info(id: &str, ep: &Episode) -> EpisodeInfo {
    EpisodeInfo {
        id: id.to_string(),
        task_id: ep.spec().task_id,
        regime: ep.config().regime,
        seed: ep.config().seed,
        phase: ep.phase(),
        seq: ep.exchanges() + 1,
        outcome: ep.result().map(|r| r.outcome),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Io(format!("{}: {e}", path.display()))
}

impl EpisodeService {
    pub fn new(tasks: Vec<TaskSpec>, log_dir: Option<PathBuf>) -> Self {
        EpisodeService {
            tasks: tasks
                .into_iter()
                .map(|t| (t.task_id, Arc::new(t)))
                .collect(),
            log_dir,
            oracle: builtin_oracle(),
            episodes: Mutex::new(BTreeMap::new()),
            next_id: Mutex::new(1),
        }
    }

    pub fn builtin(log_dir: Option<PathBuf>) -> Self {
        Self::new(builtin_tasks(), log_dir)
    }

    pub fn tasks(&self) -> Vec<TaskInfo> {
        self.tasks
            .values()
            .map(|t| TaskInfo {
                task_id: t.task_id,
                name: t.name.clone(),
                family: t.family,
                step_budget: t.step_budget,
                av_budget: t.effective_av_budget(),
                waves: t.waves.len(),
            })
            .collect()
    }

    fn slot(&self, id: &str) -> Result<Slot, ServiceError> {
        self.episodes
            .lock()
            .expect("episode table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.log_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    pub fn create(&self, req: CreateEpisode) -> Result<EpisodeInfo, ServiceError> {
        let spec = self
            .tasks
            .get(&req.task_id)
            .ok_or(ServiceError::UnknownTask(req.task_id))?;
        let mut config = EpisodeConfig::new(req.regime, req.seed).with_k(req.k.unwrap_or(1));
        config.agent = req.agent.unwrap_or_else(|| "remote".into());
        config.exchange_cap = req.exchange_cap;
        let mut episode = Episode::with_oracle(Arc::clone(spec), config, Arc::clone(&self.oracle))?;
        let id = {
            let mut next = self.next_id.lock().expect("id lock");
            let id = format!("ep-{:06}", *next);
            *next += 1;
            id
        };
        if let Some(path) = self.log_path(&id) {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            }
            let file = File::create(&path).map_err(|e| io_err(&path, e))?;
            episode
                .attach_log(Box::new(BufWriter::new(file)))
                .map_err(|e| io_err(&path, e))?;
        }
        let view = info(&id, &episode);
        self.episodes
            .lock()
            .expect("episode table lock")
            .insert(id, Arc::new(Mutex::new(episode)));
        Ok(view)
    }

    pub fn info(&self, id: &str) -> Result<EpisodeInfo, ServiceError> {
        let slot = self.slot(id)?;
        let ep = slot.lock().expect("episode lock");
        Ok(info(id, &ep))
    }

    pub fn list(&self) -> Vec<EpisodeInfo> {
        let slots: Vec<(String, Slot)> = self
            .episodes
            .lock()
            .expect("episode table lock")
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        slots
            .into_iter()
            .map(|(id, slot)| {
                let ep = slot.lock().expect("episode lock");
                info(&id, &ep)
            })
            .collect()
    }

    /// The envelope awaiting an answer.
    pub fn observation(&self, id: &str) -> Result<Request, ServiceError> {
        let slot = self.slot(id)?;
        let mut ep = slot.lock().expect("episode lock");
        ep.request().ok_or(ServiceError::Terminal)
    }

    pub fn submit(
        &self,
        id: &str,
        seq: Option<u64>,
        output: AgentOutput,
    ) -> Result<SubmitReceipt, ServiceError> {
        let slot = self.slot(id)?;
        let mut ep = match slot.try_lock() {
            Ok(guard) => guard,
            Err(TryLockError::WouldBlock) => return Err(ServiceError::Busy),
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
        };
        if ep.is_finished() {
            return Err(ServiceError::Terminal);
        }
        let expected = ep.exchanges() + 1;
        if let Some(got) = seq {
            if got != expected {
                return Err(ServiceError::Conflict { expected, got });
            }
        }
        let record = ep.submit(output)?;
        Ok(SubmitReceipt {
            info: info(id, &ep),
            record,
            result: ep.result().cloned(),
        })
    }

    pub fn result(&self, id: &str) -> Result<EpisodeResult, ServiceError> {
        let slot = self.slot(id)?;
        let ep = slot.lock().expect("episode lock");
        ep.result().cloned().ok_or(ServiceError::NotFinished)
    }

    pub fn log(&self, id: &str) -> Result<String, ServiceError> {
        let slot = self.slot(id)?;
        let ep = slot.lock().expect("episode lock");
        Ok(ep.log_jsonl())
    }

    /// PNG of the current frame (direct-control episodes only).
    pub fn frame_png(&self, id: &str) -> Result<Vec<u8>, ServiceError> {
        let slot = self.slot(id)?;
        let ep = slot.lock().expect("episode lock");
        if ep.config().regime != Regime::Dc {
            return Err(ServiceError::BadRequest(
                "frames are served for direct-control episodes only".into(),
            ));
        }
        Ok(ep.frame().to_png())
    }

    /// Reloads every episode log in the log directory, resuming unfinished
    /// episodes where their logs end. Returns the ids restored.
    pub fn recover(&self) -> Result<Vec<String>, ServiceError> {
        let Some(dir) = &self.log_dir else {
            return Ok(Vec::new());
        };
        let entries = match std::fs::read_dir(dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(dir, e)),
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut restored = Vec::new();
        for path in paths {
            let Some(id) = path
                .file_stem()
                .and_then(|s| s.to_str())
                .map(str::to_string)
            else {
                continue;
            };
            let Some(n) = id.strip_prefix("ep-").and_then(|n| n.parse::<u64>().ok()) else {
                continue;
            };
            let records = read_log(&path)?;
            let mut episode = restore(&records, Arc::clone(&self.oracle))?;
            // Rewrite the log so a cut-short final line is not left behind.
            let file = OpenOptions::new()
                .write(true)
                .truncate(true)
                .open(&path)
                .map_err(|e| io_err(&path, e))?;
            episode
                .attach_log(Box::new(BufWriter::new(file)))
                .map_err(|e| io_err(&path, e))?;
            {
                let mut next = self.next_id.lock().expect("id lock");
                *next = (*next).max(n + 1);
            }
            self.episodes
                .lock()
                .expect("episode table lock")
                .insert(id.clone(), Arc::new(Mutex::new(episode)));
            restored.push(id);
        }
        Ok(restored)
    }
}
