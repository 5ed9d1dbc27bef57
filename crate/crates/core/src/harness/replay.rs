//! Reading step logs back and re-executing them.

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use super::episode::{
    Episode, EpisodeError, EpisodeLogHeader, EpisodeResult, ExchangeRecord, LogRecord, SharedOracle,
};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("the log does not start with a header record")]
    MissingHeader,
    #[error("the log was written with oracle {logged} but replay uses {current}")]
    OracleMismatch { logged: String, current: String },
    #[error("exchange {index}: state digest {actual} does not match the logged {expected}")]
    Diverged {
        index: u64,
        expected: String,
        actual: String,
    },
    #[error("the rebuilt episode does not match the logged header")]
    HeaderMismatch,
    #[error("replayed result differs from the logged result")]
    ResultMismatch,
    #[error("the log continues after the episode finished")]
    TrailingRecords,
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error("failed to read {path}: {message}")]
    Io { path: String, message: String },
}

/// Parses JSONL records. An unterminated, unparseable last line (a write
/// cut short) is dropped.
pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, ReplayError> {
    let mut out = Vec::new();
    let lines: Vec<&str> = text.split('\n').collect();
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogRecord>(line) {
            Ok(r) => out.push(r),
            Err(_) if i == last && !text.ends_with('\n') => break,
            Err(e) => {
                return Err(ReplayError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, ReplayError> {
    let text = std::fs::read_to_string(path).map_err(|e| ReplayError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_log(&text)
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub exchanges: u64,
    pub final_digest: String,
    pub result: Option<EpisodeResult>,
    /// True when the log ended before the episode did.
    pub incomplete: bool,
}

/// Re-executes a log into a live episode, checking each logged state
/// digest. The episode can keep going if the log was incomplete.
pub fn restore(records: &[LogRecord], oracle: SharedOracle) -> Result<Episode, ReplayError> {
    let Some(LogRecord::Header(header)) = records.first() else {
        return Err(ReplayError::MissingHeader);
    };
    let EpisodeLogHeader {
        config,
        task,
        oracle_digest,
        ..
    } = header.as_ref();
    if let Some(logged) = oracle_digest {
        let current = oracle.digest();
        if *logged != current {
            return Err(ReplayError::OracleMismatch {
                logged: logged.clone(),
                current,
            });
        }
    }
    let mut episode = Episode::with_oracle(Arc::new(task.clone()), config.clone(), oracle)?;
    if episode.records().first() != records.first() {
        return Err(ReplayError::HeaderMismatch);
    }
    let mut logged_result = None;
    for record in &records[1..] {
        match record {
            LogRecord::Header(_) => {
                return Err(ReplayError::Parse {
                    line: 0,
                    message: "second header".into(),
                })
            }
            LogRecord::Exchange(x) => {
                if episode.is_finished() {
                    return Err(ReplayError::TrailingRecords);
                }
                check(&mut episode, x)?;
            }
            LogRecord::Result(r) => logged_result = Some(r.as_ref().clone()),
        }
    }
    if let Some(logged) = logged_result {
        if episode.result() != Some(&logged) {
            return Err(ReplayError::ResultMismatch);
        }
    }
    Ok(episode)
}

fn check(episode: &mut Episode, x: &ExchangeRecord) -> Result<(), ReplayError> {
    let got = episode.submit(x.output.clone())?;
    if got.state_digest != x.state_digest {
        return Err(ReplayError::Diverged {
            index: x.index,
            expected: x.state_digest.clone(),
            actual: got.state_digest,
        });
    }
    Ok(())
}

/// Replays a log from scratch and reports where it ends up.
pub fn replay(records: &[LogRecord], oracle: SharedOracle) -> Result<ReplayReport, ReplayError> {
    let episode = restore(records, oracle)?;
    Ok(ReplayReport {
        exchanges: episode.exchanges(),
        final_digest: episode.digest(),
        result: episode.result().cloned(),
        incomplete: !episode.is_finished(),
    })
}
