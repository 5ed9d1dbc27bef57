//! Turns regime-specific agent output into engine actions.
//!
//! Direct control goes through a small selection protocol (stage a move,
//! stage a target, confirm). Tool-assisted control decodes `(c, m, t)`
//! triples. Both paths reject without touching the battle, and both feed the
//! same [`FailureCounter`].

mod dc;
mod ta;

use serde::{Deserialize, Serialize};

pub use dc::{
    canonical_dc, clip, execute_dc, DcPrimitive, DcStepResult, MissReason, PendingSelection,
};
pub use ta::{
    encode_ta, execute_ta, legal_mask, IllegalReason, TaTriple, M_BASIC, M_HOLD, M_SKILL,
    M_ULTIMATE, T_ALL, T_FIRST_ENEMY, T_LAST_ENEMY,
};

/// Consecutive rejections tolerated before an episode is aborted.
pub const MAX_CONSECUTIVE_FAILURES: u32 = 10;

/// Counts consecutive rejected outputs. Resets only on an accepted action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCounter {
    consecutive: u32,
    limit: u32,
}

impl Default for FailureCounter {
    fn default() -> Self {
        Self::new(MAX_CONSECUTIVE_FAILURES)
    }
}

impl FailureCounter {
    pub fn new(limit: u32) -> Self {
        FailureCounter {
            consecutive: 0,
            limit,
        }
    }

    /// Returns true when this rejection reaches the limit.
    pub fn reject(&mut self) -> bool {
        self.consecutive += 1;
        self.consecutive >= self.limit
    }

    pub fn accept(&mut self) {
        self.consecutive = 0;
    }

    pub fn consecutive(&self) -> u32 {
        self.consecutive
    }

    pub fn limit(&self) -> u32 {
        self.limit
    }
}
