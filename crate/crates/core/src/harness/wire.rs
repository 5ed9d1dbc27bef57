//! Agent envelopes and their stdio framing.
//!
//! Each message is a decimal byte length, a newline, then that many bytes of
//! JSON. The same JSON bodies travel over HTTP.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::askoract::DecisionLogEntry;
use crate::engine::Family;
use crate::interface::{DcPrimitive, TaTriple};
use crate::observation::StructuredObservation;

pub const SCHEMA_VERSION: u32 = 1;

/// Largest frame accepted from an agent.
pub const MAX_FRAME_BYTES: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "DC")]
    Dc,
    #[serde(rename = "TA")]
    Ta,
    #[serde(rename = "TA-NO-OCR")]
    TaNoOcr,
    #[serde(rename = "TA-Ask")]
    TaAsk,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Dc, Regime::Ta, Regime::TaNoOcr, Regime::TaAsk];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Dc => "DC",
            Regime::Ta => "TA",
            Regime::TaNoOcr => "TA-NO-OCR",
            Regime::TaAsk => "TA-Ask",
        }
    }

    pub fn is_tool_assisted(self) -> bool {
        self != Regime::Dc
    }

    pub fn ocr(self) -> bool {
        matches!(self, Regime::Ta | Regime::TaAsk)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        match norm.as_str() {
            "DC" => Ok(Regime::Dc),
            "TA" => Ok(Regime::Ta),
            "TA-NO-OCR" => Ok(Regime::TaNoOcr),
            "TA-ASK" => Ok(Regime::TaAsk),
            _ => Err(format!(
                "unknown regime {s:?}; expected DC, TA, TA-NO-OCR or TA-Ask"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub task_id: u8,
    pub task_name: String,
    pub family: Family,
    pub regime: Regime,
    pub seed: u64,
    /// 1-based position of this episode within its task's trials.
    pub k: u32,
    pub step_budget: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservationPayload {
    Frame {
        frame_id: u64,
        width: u32,
        height: u32,
        /// Base64 PNG.
        png: String,
    },
    Structured(Box<StructuredObservation>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    AskPoint {
        schema: u32,
        request_id: u64,
        header: EpisodeHeader,
        decision_log: Vec<DecisionLogEntry>,
    },
    Decide {
        schema: u32,
        request_id: u64,
        header: EpisodeHeader,
        /// Decisions resolved so far.
        step: u32,
        observation: ObservationPayload,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<Vec<TaTriple>>,
    },
}

impl Request {
    pub fn request_id(&self) -> u64 {
        match self {
            Request::AskPoint { request_id, .. } | Request::Decide { request_id, .. } => {
                *request_id
            }
        }
    }

    pub fn set_request_id(&mut self, id: u64) {
        match self {
            Request::AskPoint { request_id, .. } | Request::Decide { request_id, .. } => {
                *request_id = id
            }
        }
    }

    pub fn header(&self) -> &EpisodeHeader {
        match self {
            Request::AskPoint { header, .. } | Request::Decide { header, .. } => header,
        }
    }

    pub fn structured(&self) -> Option<&StructuredObservation> {
        match self {
            Request::Decide {
                observation: ObservationPayload::Structured(o),
                ..
            } => Some(o),
            _ => None,
        }
    }

    pub fn mask(&self) -> Option<&[TaTriple]> {
        match self {
            Request::Decide { mask, .. } => mask.as_deref(),
            _ => None,
        }
    }
}

/// Everything an agent may answer with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    Click { x: i64, y: i64 },
    Key { key: String },
    Triple { c: i64, m: i64, t: i64 },
    Ask { question: String },
    Act,
    Empty,
}

impl Response {
    pub fn triple(t: TaTriple) -> Self {
        Response::Triple {
            c: t.c,
            m: t.m,
            t: t.t,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("responses serialize")
    }

    pub fn as_dc(&self) -> DcPrimitive {
        match self {
            Response::Click { x, y } => DcPrimitive::Click { x: *x, y: *y },
            Response::Key { key } => DcPrimitive::Key { key: key.clone() },
            _ => DcPrimitive::Empty,
        }
    }

    pub fn as_triple(&self) -> Option<TaTriple> {
        match self {
            Response::Triple { c, m, t } => Some(TaTriple::new(*c, *m, *t)),
            _ => None,
        }
    }
}

/// Parses raw agent output. Blank output is [`Response::Empty`]; unknown
/// fields are ignored.
pub fn parse_response(raw: &str) -> Result<Response, String> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Ok(Response::Empty);
    }
    serde_json::from_str(trimmed).map_err(|e| e.to_string())
}

/// The `request_id` a reply refers to, if it names one.
pub fn reply_request_id(raw: &str) -> Option<u64> {
    let v: serde_json::Value = serde_json::from_str(raw.trim()).ok()?;
    v.get("request_id")?.as_u64()
}

pub fn write_frame<W: Write>(w: &mut W, body: &str) -> io::Result<()> {
    writeln!(w, "{}", body.len())?;
    w.write_all(body.as_bytes())?;
    w.flush()
}

/// Reads one frame; `Ok(None)` on a clean end of stream.
pub fn read_frame<R: BufRead>(r: &mut R) -> io::Result<Option<String>> {
    let mut line = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        if !line.trim().is_empty() {
            break;
        }
    }
    let len: usize = line.trim().parse().map_err(|_| {
        io::Error::new(
            io::ErrorKind::InvalidData,
            format!("bad frame length {:?}", line.trim()),
        )
    })?;
    if len > MAX_FRAME_BYTES {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds limit"),
        ));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf)
        .map(Some)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
