use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;

/// Longest hint ever returned, in characters.
pub const HINT_CAP: usize = 1200;
pub const NO_GUIDANCE: &str = "no guidance available";

/// Score multiplier for documents written for a different task.
const OFF_TASK_WEIGHT: f64 = 0.5;

const MANIFEST: &str = include_str!("../../corpus/index.toml");
const FILES: &[(&str, &str)] = &[
    (
        "turn_order.txt",
        include_str!("../../corpus/turn_order.txt"),
    ),
    (
        "skill_points.txt",
        include_str!("../../corpus/skill_points.txt"),
    ),
    (
        "weakness_break.txt",
        include_str!("../../corpus/weakness_break.txt"),
    ),
    ("ultimates.txt", include_str!("../../corpus/ultimates.txt")),
    ("team.txt", include_str!("../../corpus/team.txt")),
    (
        "task_cocolia.txt",
        include_str!("../../corpus/task_cocolia.txt"),
    ),
    (
        "task_phantylia.txt",
        include_str!("../../corpus/task_phantylia.txt"),
    ),
    (
        "task_swarm_king.txt",
        include_str!("../../corpus/task_swarm_king.txt"),
    ),
    (
        "task_theater.txt",
        include_str!("../../corpus/task_theater.txt"),
    ),
    (
        "task_feixiao.txt",
        include_str!("../../corpus/task_feixiao.txt"),
    ),
    (
        "task_xianzhou.txt",
        include_str!("../../corpus/task_xianzhou.txt"),
    ),
    (
        "task_cliched.txt",
        include_str!("../../corpus/task_cliched.txt"),
    ),
    (
        "task_stardevourer.txt",
        include_str!("../../corpus/task_stardevourer.txt"),
    ),
];

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "can", "do", "does", "for", "from", "how",
    "i", "if", "in", "is", "it", "its", "me", "my", "of", "on", "or", "should", "so", "that",
    "the", "their", "then", "there", "this", "to", "use", "was", "what", "when", "which", "who",
    "why", "will", "with", "you", "your",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocEntry {
    pub id: String,
    pub file: String,
    pub title: String,
    #[serde(default)]
    pub tasks: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    #[serde(rename = "doc")]
    docs: Vec<DocEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Passage {
    pub doc_index: usize,
    pub paragraph: usize,
    pub text: String,
    terms: BTreeSet<String>,
}

/// One bounded textual answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hint {
    pub text: String,
    pub source_keys: Vec<String>,
}

impl Hint {
    pub fn none() -> Self {
        Hint {
            text: NO_GUIDANCE.to_string(),
            source_keys: Vec::new(),
        }
    }
}

/// Anything that can answer an ask. The lexical corpus is the built-in one.
pub trait HintOracle: Send + Sync {
    fn answer(&self, question: &str, task_id: u8) -> Hint;

    /// Content digest used to show the oracle stayed frozen.
    fn digest(&self) -> String;
}

/// A read-only document set, split into paragraph passages.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    docs: Vec<DocEntry>,
    passages: Vec<Passage>,
    df: BTreeMap<String, usize>,
    digest: String,
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| w.len() > 1 && !STOPWORDS.contains(&w.as_str()))
        .collect()
}

fn screen_patterns() -> &'static [Regex] {
    static CELL: OnceLock<Vec<Regex>> = OnceLock::new();
    CELL.get_or_init(|| {
        [
            // pixel pairs and action triples in any bracket style
            r"[\(\[]\s*-?\d+\s*,\s*-?\d+\s*(,\s*-?\d+\s*)?[\)\]]",
            r"(?i)\b[xy]\s*[=:]\s*-?\d+",
            r"(?i)\b[cmt]\s*=\s*\d",
        ]
        .iter()
        .map(|p| Regex::new(p).expect("static pattern"))
        .collect()
    })
}

/// True when `text` contains something that looks like a coordinate, a
/// click target or an action triple.
pub fn contains_action_string(text: &str) -> bool {
    screen_patterns().iter().any(|re| re.is_match(text))
}

fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for i in 0..bytes.len() {
        let end_mark = matches!(bytes[i], b'.' | b'!' | b'?');
        let at_break = i + 1 == bytes.len() || bytes[i + 1].is_ascii_whitespace();
        if end_mark && at_break {
            out.push(text[start..=i].trim());
            start = i + 1;
        }
    }
    if start < text.len() && !text[start..].trim().is_empty() {
        out.push(text[start..].trim());
    }
    out
}

/// Drops offending sentences and trims to the cap on a word boundary.
pub fn screen_and_trim(text: &str, cap: usize) -> String {
    let kept: Vec<&str> = split_sentences(text)
        .into_iter()
        .filter(|s| !contains_action_string(s))
        .collect();
    let joined = kept.join(" ");
    if joined.chars().count() <= cap {
        return joined;
    }
    let cut: String = joined.chars().take(cap).collect();
    match cut.rfind(char::is_whitespace) {
        Some(pos) if pos > 0 => cut[..pos].trim_end().to_string(),
        _ => cut,
    }
}

impl Corpus {
    /// The corpus shipped with the crate; built once.
    pub fn builtin() -> &'static Corpus {
        static CELL: OnceLock<Corpus> = OnceLock::new();
        CELL.get_or_init(|| {
            let files = FILES
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect();
            Corpus::from_sources(MANIFEST, &files).expect("shipped corpus is valid")
        })
    }

    pub fn from_dir(dir: &Path) -> Result<Corpus, ConfigError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| ConfigError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })
        };
        let manifest = read(&dir.join("index.toml"))?;
        let parsed: Manifest =
            toml::from_str(&manifest).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut files = BTreeMap::new();
        for d in &parsed.docs {
            files.insert(d.file.clone(), read(&dir.join(&d.file))?);
        }
        Corpus::from_sources(&manifest, &files)
    }

    pub fn from_sources(
        manifest: &str,
        files: &BTreeMap<String, String>,
    ) -> Result<Corpus, ConfigError> {
        let parsed: Manifest =
            toml::from_str(manifest).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut hasher = Sha256::new();
        hasher.update(manifest.as_bytes());
        let mut passages = Vec::new();
        let mut ids = BTreeSet::new();
        for (doc_index, d) in parsed.docs.iter().enumerate() {
            if !ids.insert(d.id.clone()) {
                return Err(ConfigError::Invalid {
                    field: "doc.id".into(),
                    message: format!("duplicate id {}", d.id),
                });
            }
            let text = files.get(&d.file).ok_or_else(|| ConfigError::Invalid {
                field: "doc.file".into(),
                message: format!("missing file {}", d.file),
            })?;
            hasher.update([0u8]);
            hasher.update(d.file.as_bytes());
            hasher.update([0u8]);
            hasher.update(text.as_bytes());
            let paragraphs = text.split("\n\n").map(str::trim).filter(|p| !p.is_empty());
            for (paragraph, p) in paragraphs.enumerate() {
                let flat = p.split_whitespace().collect::<Vec<_>>().join(" ");
                let terms = tokenize(&flat).into_iter().collect();
                passages.push(Passage {
                    doc_index,
                    paragraph,
                    text: flat,
                    terms,
                });
            }
        }
        let mut df = BTreeMap::new();
        for p in &passages {
            for t in &p.terms {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        Ok(Corpus {
            docs: parsed.docs,
            passages,
            df,
            digest: hex::encode(hasher.finalize()),
        })
    }

    pub fn docs(&self) -> &[DocEntry] {
        &self.docs
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.passages.len() as f64;
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        (1.0 + n / (1.0 + df)).ln()
    }

    /// Retrieval score of passage `i` for the question terms.
    pub fn score(&self, i: usize, question_terms: &BTreeSet<String>, task_id: u8) -> f64 {
        let p = &self.passages[i];
        let overlap: f64 = question_terms
            .iter()
            .filter(|t| p.terms.contains(*t))
            .map(|t| self.idf(t))
            .sum();
        let doc = &self.docs[p.doc_index];
        if doc.tasks.is_empty() || doc.tasks.contains(&task_id) {
            overlap
        } else {
            overlap * OFF_TASK_WEIGHT
        }
    }

    /// Best passage for the question, screened and capped.
    pub fn retrieve(&self, question: &str, task_id: u8) -> Hint {
        let terms: BTreeSet<String> = tokenize(question).into_iter().collect();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.passages.len() {
            let s = self.score(i, &terms, task_id);
            // strict comparison keeps the earliest passage on ties
            if s > 0.0 && best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        let Some((i, _)) = best else {
            return Hint::none();
        };
        let p = &self.passages[i];
        let text = screen_and_trim(&p.text, HINT_CAP);
        if text.is_empty() {
            return Hint::none();
        }
        Hint {
            text,
            source_keys: vec![format!("{}#{}", self.docs[p.doc_index].id, p.paragraph)],
        }
    }
}

impl HintOracle for Corpus {
    fn answer(&self, question: &str, task_id: u8) -> Hint {
        self.retrieve(question, task_id)
    }

    fn digest(&self) -> String {
        self.digest.clone()
    }
}
