//! Agents: anything that answers requests.

use std::collections::VecDeque;
use std::io::{BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::episode::AgentOutput;
use super::wire::{read_frame, reply_request_id, write_frame, Request, Response};
use crate::engine::rng::mix64;
use crate::engine::UltKind;
use crate::interface::{TaTriple, M_BASIC, M_HOLD, M_SKILL, M_ULTIMATE};
use crate::observation::{DecisionKind, StructuredObservation};

pub trait Agent: Send {
    fn name(&self) -> String;
    fn respond(&mut self, request: &Request) -> AgentOutput;
}

/// Uniform choice over the legal mask.
pub fn random_policy(mask: &[TaTriple], rng: &mut impl Rng) -> Option<TaTriple> {
    if mask.is_empty() {
        return None;
    }
    Some(mask[rng.gen_range(0..mask.len())])
}

/// The in-game automatic battle heuristic.
///
/// Ultimates are released as soon as they are offered, except healing ones,
/// which wait until some living ally is below half HP. On its own turn an
/// ally uses its skill when at least two skill points remain and a living
/// enemy is weak to its element, and its basic attack otherwise. Single
/// enemy targets go to the lowest-HP enemy weak to the actor's element, or
/// the lowest-HP enemy if none is. Single ally targets go to the lowest-HP
/// ally other than the actor.
pub fn autobattle_policy(obs: &StructuredObservation, mask: &[TaTriple]) -> Option<TaTriple> {
    let decision = obs.decision?;
    let c = i64::from(decision.actor_slot);
    let actor = obs.allies.get(decision.actor_slot as usize)?;
    let weak_to_actor = |e: &&crate::observation::EnemyView| {
        e.weaknesses
            .as_ref()
            .is_some_and(|w| w.contains(&actor.element))
    };

    let pick = |m: u8| -> Option<TaTriple> {
        let options: Vec<TaTriple> = mask
            .iter()
            .copied()
            .filter(|t| t.c == c && t.m == i64::from(m))
            .collect();
        if options.is_empty() {
            return None;
        }
        if let Some(all) = options.iter().find(|t| t.t == 9) {
            return Some(*all);
        }
        let key = |hp: Option<f64>| hp.unwrap_or(100.0);
        if options.iter().any(|t| (4..=8).contains(&t.t)) {
            let pool: Vec<_> = obs.enemies.iter().filter(weak_to_actor).collect();
            let pool = if pool.is_empty() {
                obs.enemies.iter().collect()
            } else {
                pool
            };
            let best = pool
                .into_iter()
                .filter(|e| options.iter().any(|t| t.t == i64::from(e.index)))
                .min_by(|a, b| {
                    key(a.hp_pct)
                        .total_cmp(&key(b.hp_pct))
                        .then(a.index.cmp(&b.index))
                })?;
            return Some(TaTriple::new(c, i64::from(m), i64::from(best.index)));
        }
        let best = obs
            .allies
            .iter()
            .filter(|a| a.alive && options.iter().any(|t| t.t == i64::from(a.slot)))
            .min_by(|a, b| {
                (a.slot == actor.slot)
                    .cmp(&(b.slot == actor.slot))
                    .then(key(a.hp_pct).total_cmp(&key(b.hp_pct)))
                    .then(a.slot.cmp(&b.slot))
            })?;
        Some(TaTriple::new(c, i64::from(m), i64::from(best.slot)))
    };

    let chosen = match decision.kind {
        DecisionKind::Interrupt => {
            let release = match actor.ult_kind {
                UltKind::Damage => true,
                UltKind::Healing => obs
                    .allies
                    .iter()
                    .any(|a| a.alive && a.hp_pct.is_some_and(|h| h < 50.0)),
            };
            if release { pick(M_ULTIMATE) } else { None }.or(Some(TaTriple::new(
                c,
                i64::from(M_HOLD),
                9,
            )))
        }
        DecisionKind::OnTurn => {
            let sp = obs.skill_points.unwrap_or(0);
            let weakness_present = obs.enemies.iter().any(|e| weak_to_actor(&e));
            let skill = if sp >= 2 && weakness_present {
                pick(M_SKILL)
            } else {
                None
            };
            skill.or_else(|| pick(M_BASIC))
        }
    };
    match chosen {
        Some(t) if mask.contains(&t) => Some(t),
        _ => mask.first().copied(),
    }
}

fn triple_output(t: Option<TaTriple>) -> AgentOutput {
    match t {
        Some(t) => AgentOutput::response(&Response::triple(t)),
        None => AgentOutput::response(&Response::Empty),
    }
}

/// Uniformly random legal actions from a private seeded stream.
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        RandomAgent {
            rng: ChaCha8Rng::seed_from_u64(mix64(seed ^ 0x5241_4e44)),
        }
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> String {
        "random".into()
    }

    fn respond(&mut self, request: &Request) -> AgentOutput {
        match request {
            Request::AskPoint { .. } => AgentOutput::response(&Response::Act),
            Request::Decide { .. } => {
                triple_output(request.mask().and_then(|m| random_policy(m, &mut self.rng)))
            }
        }
    }
}

pub struct AutobattleAgent;

impl Agent for AutobattleAgent {
    fn name(&self) -> String {
        "autobattle".into()
    }

    fn respond(&mut self, request: &Request) -> AgentOutput {
        match request {
            Request::AskPoint { .. } => AgentOutput::response(&Response::Act),
            Request::Decide { .. } => {
                let choice = match (request.structured(), request.mask()) {
                    (Some(obs), Some(mask)) => autobattle_policy(obs, mask),
                    _ => None,
                };
                triple_output(choice)
            }
        }
    }
}

/// Plays back a fixed list of outputs, then answers empty.
pub struct ScriptedAgent {
    outputs: VecDeque<AgentOutput>,
}

impl ScriptedAgent {
    pub fn new(outputs: impl IntoIterator<Item = AgentOutput>) -> Self {
        ScriptedAgent {
            outputs: outputs.into_iter().collect(),
        }
    }

    pub fn from_responses<'a>(responses: impl IntoIterator<Item = &'a Response>) -> Self {
        Self::new(responses.into_iter().map(AgentOutput::response))
    }
}

impl Agent for ScriptedAgent {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn respond(&mut self, _request: &Request) -> AgentOutput {
        self.outputs
            .pop_front()
            .unwrap_or_else(|| AgentOutput::response(&Response::Empty))
    }
}

/// Wraps a closure.
pub struct FnAgent<F> {
    name: String,
    f: F,
}

impl<F: FnMut(&Request) -> AgentOutput + Send> FnAgent<F> {
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnAgent {
            name: name.into(),
            f,
        }
    }
}

impl<F: FnMut(&Request) -> AgentOutput + Send> Agent for FnAgent<F> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn respond(&mut self, request: &Request) -> AgentOutput {
        (self.f)(request)
    }
}

type FrameResult = Result<Option<String>, String>;

/// An external program speaking the framed protocol on stdin/stdout.
pub struct SubprocessAgent {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    rx: Receiver<FrameResult>,
    timeout: Option<Duration>,
    next_id: u64,
    closed: Option<String>,
}

impl SubprocessAgent {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str, timeout: Option<Duration>) -> std::io::Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let item = read_frame(&mut reader).map_err(|e| e.to_string());
                let done = !matches!(item, Ok(Some(_)));
                if tx.send(item).is_err() || done {
                    break;
                }
            }
        });
        Ok(SubprocessAgent {
            command: command.to_string(),
            child,
            stdin,
            rx,
            timeout,
            next_id: 0,
            closed: None,
        })
    }

    fn transport(&mut self, error: String) -> AgentOutput {
        self.closed = Some(error.clone());
        AgentOutput::Transport { error }
    }
}

impl Agent for SubprocessAgent {
    fn name(&self) -> String {
        self.command.clone()
    }

    fn respond(&mut self, request: &Request) -> AgentOutput {
        if let Some(err) = &self.closed {
            return AgentOutput::Transport { error: err.clone() };
        }
        self.next_id += 1;
        let mut request = request.clone();
        request.set_request_id(self.next_id);
        let body = serde_json::to_string(&request).expect("requests serialize");
        let Some(stdin) = self.stdin.as_mut() else {
            return self.transport("agent stdin is closed".into());
        };
        if let Err(e) = write_frame(stdin, &body).and_then(|_| stdin.flush()) {
            return self.transport(format!("writing to agent: {e}"));
        }
        let deadline = self.timeout.map(|t| Instant::now() + t);
        loop {
            let received = match deadline {
                Some(d) => self
                    .rx
                    .recv_timeout(d.saturating_duration_since(Instant::now())),
                None => self.rx.recv().map_err(|_| RecvTimeoutError::Disconnected),
            };
            match received {
                Ok(Ok(Some(frame))) => match reply_request_id(&frame) {
                    Some(id) if id != self.next_id => continue,
                    _ => return AgentOutput::Raw { text: frame },
                },
                Ok(Ok(None)) => return self.transport("agent closed its output".into()),
                Ok(Err(e)) => return self.transport(format!("reading from agent: {e}")),
                Err(RecvTimeoutError::Timeout) => return AgentOutput::Timeout,
                Err(RecvTimeoutError::Disconnected) => {
                    return self.transport("agent output ended".into())
                }
            }
        }
    }
}

impl Drop for SubprocessAgent {
    fn drop(&mut self) {
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
