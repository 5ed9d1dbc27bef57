//! Aggregated tables over finished episodes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::episode::EpisodeResult;
use super::wire::Regime;
use crate::engine::Family;
use crate::metrics::{
    ask_metrics, mean_sd, round1, AskLedger, AskMetrics, MeanSd, DEFAULT_ASK_OPPORTUNITIES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: u8,
    pub task_name: String,
    pub family: Family,
    pub episodes: u32,
    pub victories: u32,
    /// Success rate in percent.
    pub sr: f64,
    /// Steps to victory over victorious episodes; absent when none won.
    pub steps: Option<MeanSd>,
    pub r_scaled: Option<MeanSd>,
    /// Family headline over episodes where it is finite.
    pub score: Option<MeanSd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ask: Option<AskMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub agent: String,
    pub regime: Regime,
    pub rows: Vec<TaskRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ask: Option<AskMetrics>,
    pub results: Vec<EpisodeResult>,
}

fn ask_ledger<'a>(results: impl Iterator<Item = &'a EpisodeResult>) -> Option<AskLedger> {
    let records: Vec<_> = results.filter_map(EpisodeResult::ask_record).collect();
    (!records.is_empty()).then_some(AskLedger {
        records,
        opportunities: DEFAULT_ASK_OPPORTUNITIES,
    })
}

impl TaskRow {
    pub fn from_results(results: &[&EpisodeResult]) -> Option<TaskRow> {
        let first = results.first()?;
        let episodes = results.len() as u32;
        let victories = results.iter().filter(|r| r.victory()).count() as u32;
        let steps: Vec<f64> = results
            .iter()
            .filter_map(|r| r.t_steps)
            .map(f64::from)
            .collect();
        let r_scaled: Vec<f64> = results.iter().map(|r| r.r_scaled).collect();
        let score: Vec<f64> = results.iter().filter_map(|r| r.score.headline()).collect();
        Some(TaskRow {
            task_id: first.task_id,
            task_name: first.task_name.clone(),
            family: first.family,
            episodes,
            victories,
            sr: 100.0 * f64::from(victories) / f64::from(episodes),
            steps: mean_sd(&steps),
            r_scaled: mean_sd(&r_scaled),
            score: mean_sd(&score),
            ask: ask_ledger(results.iter().copied()).map(|l| ask_metrics(&l)),
        })
    }
}

impl EvaluationReport {
    /// Builds a report from results of one agent in one regime.
    pub fn from_results(
        agent: &str,
        regime: Regime,
        results: Vec<EpisodeResult>,
    ) -> EvaluationReport {
        let mut by_task: BTreeMap<u8, Vec<&EpisodeResult>> = BTreeMap::new();
        for r in &results {
            by_task.entry(r.task_id).or_default().push(r);
        }
        let rows = by_task
            .values()
            .filter_map(|rs| TaskRow::from_results(rs))
            .collect();
        let ask = ask_ledger(results.iter()).map(|l| ask_metrics(&l));
        EvaluationReport {
            agent: agent.to_string(),
            regime,
            rows,
            ask,
            results,
        }
    }

    /// Splits mixed results into one report per (agent, regime).
    pub fn group(results: Vec<EpisodeResult>) -> Vec<EvaluationReport> {
        let mut groups: BTreeMap<(String, Regime), Vec<EpisodeResult>> = BTreeMap::new();
        for r in results {
            groups
                .entry((r.agent.clone(), r.regime))
                .or_default()
                .push(r);
        }
        groups
            .into_iter()
            .map(|((agent, regime), mut rs)| {
                rs.sort_by_key(|r| (r.task_id, r.k, r.seed));
                EvaluationReport::from_results(&agent, regime, rs)
            })
            .collect()
    }

    pub fn row(&self, task_id: u8) -> Option<&TaskRow> {
        self.rows.iter().find(|r| r.task_id == task_id)
    }

    /// Plain-text table; infinite step counts print as `∞`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let agent = if self.agent.is_empty() {
            "-"
        } else {
            &self.agent
        };
        let _ = writeln!(out, "agent: {agent}  regime: {}", self.regime);
        let _ = writeln!(
            out,
            "{:<4} {:<28} {:<4} {:>5} {:>7} {:>16} {:>14} {:>20}",
            "task", "name", "fam", "n", "SR%", "steps", "R_scaled", "score"
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<4} {:<28} {:<4} {:>5} {:>7} {:>16} {:>14} {:>20}",
                row.task_id,
                truncate(&row.task_name, 28),
                row.family.to_string(),
                row.episodes,
                format!("{:.1}", round1(row.sr)),
                row.steps.map(fmt_mean_sd).unwrap_or_else(|| "∞".into()),
                row.r_scaled.map(fmt_mean_sd).unwrap_or_else(|| "-".into()),
                row.score.map(fmt_mean_sd).unwrap_or_else(|| "∞".into()),
            );
        }
        if let Some(ask) = &self.ask {
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "{:<4} {:>7} {:>10} {:>11}",
                "task", "AR%", "Effect", "Efficiency"
            );
            for row in &self.rows {
                if let Some(a) = &row.ask {
                    let _ = writeln!(out, "{}", fmt_ask(&row.task_id.to_string(), a));
                }
            }
            let _ = writeln!(out, "{}", fmt_ask("all", ask));
        }
        out
    }
}

fn fmt_ask(label: &str, a: &AskMetrics) -> String {
    format!(
        "{:<4} {:>7.1} {:>10.1} {:>11.1}",
        label,
        round1(a.ar),
        round1(a.effect),
        round1(a.efficiency)
    )
}

fn fmt_mean_sd(m: MeanSd) -> String {
    format!("{:.1}±{:.1}", round1(m.mean), round1(m.sd))
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}
