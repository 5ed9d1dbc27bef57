use serde::{Deserialize, Serialize};

use crate::engine::{AsWeights, Family};

pub const FIRST_CYCLE_AV: f64 = 150.0;
pub const CYCLE_AV: f64 = 100.0;
pub const PF_AV_MAX: f64 = 450.0;

/// Cycles consumed by `av_used` action value.
pub fn moc_cycles(av_used: f64) -> u32 {
    if av_used < FIRST_CYCLE_AV {
        return 0;
    }
    1 + ((av_used - FIRST_CYCLE_AV) / CYCLE_AV).floor().max(0.0) as u32
}

pub fn moc_score(c_max: u32, c_used: u32) -> u32 {
    c_max.saturating_sub(c_used)
}

/// Sum of elimination scores stamped within the budget (inclusive).
pub fn pf_score(events: &[(f64, f64)], av_max: f64) -> f64 {
    events
        .iter()
        .filter(|(av, _)| *av <= av_max)
        .map(|(_, s)| *s)
        .sum()
}

pub fn as_score(hp_depleted_pct: f64, av_rem: f64, weights: AsWeights) -> f64 {
    weights.w_hp * hp_depleted_pct + weights.w_av * av_rem
}

/// Family-specific outcome of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum FamilyScore {
    EoW {
        /// `None` stands for an infinite step count (no victory).
        t_steps: Option<u32>,
        r_eow: f64,
        r_scaled: f64,
    },
    MoC {
        c_used: u32,
        c_max: u32,
        /// `None` when the waves were not cleared.
        s_moc: Option<u32>,
    },
    PF {
        s_pf: f64,
    },
    AS {
        hp_depleted_pct: f64,
        av_rem: f64,
        s_as: f64,
    },
}

impl FamilyScore {
    pub fn family(&self) -> Family {
        match self {
            FamilyScore::EoW { .. } => Family::EoW,
            FamilyScore::MoC { .. } => Family::MoC,
            FamilyScore::PF { .. } => Family::PF,
            FamilyScore::AS { .. } => Family::AS,
        }
    }

    /// The headline number for this family, if finite.
    pub fn headline(&self) -> Option<f64> {
        match self {
            FamilyScore::EoW { t_steps, .. } => t_steps.map(f64::from),
            FamilyScore::MoC { s_moc, .. } => s_moc.map(f64::from),
            FamilyScore::PF { s_pf } => Some(*s_pf),
            FamilyScore::AS { s_as, .. } => Some(*s_as),
        }
    }

    /// The score `S` used by the ask diagnostics, where higher is better.
    /// Failures map to finite sentinels strictly below every success.
    pub fn ledger_value(&self, step_budget: u32) -> f64 {
        match self {
            FamilyScore::EoW {
                t_steps: Some(n), ..
            } => -f64::from(*n),
            FamilyScore::EoW { t_steps: None, .. } => -f64::from(step_budget + 1),
            FamilyScore::MoC { s_moc: Some(s), .. } => f64::from(*s),
            FamilyScore::MoC { s_moc: None, .. } => -1.0,
            FamilyScore::PF { s_pf } => *s_pf,
            FamilyScore::AS { s_as, .. } => *s_as,
        }
    }
}
