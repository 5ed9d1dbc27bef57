use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::rng::EngineRng;
use super::types::{Combatant, CombatantId, Side, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub id: CombatantId,
    pub av_to_act: f64,
}

/// The turn currently being played (popped from the queue).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveTurn {
    pub id: CombatantId,
    pub extra: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreEvent {
    pub av_stamp: f64,
    pub points: f64,
}

/// Full latent battle state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BattleState {
    /// Allies in team-slot order, then the current wave's enemies in spawn order.
    pub roster: Vec<Combatant>,
    pub skill_points: u32,
    /// Total AV consumed since the battle started.
    pub av_clock: f64,
    /// Sorted by (av_to_act, allies first, roster index).
    pub turn_queue: Vec<QueueEntry>,
    pub wave_index: u32,
    pub pending_interrupts: Vec<CombatantId>,
    pub current: Option<ActiveTurn>,
    pub extra_turn: Option<CombatantId>,
    pub rng: EngineRng,
    pub score_events: Vec<ScoreEvent>,
    /// Agent decisions resolved so far.
    pub step_count: u32,
    pub last_action_damage: f64,
    pub next_enemy_id: u32,
    pub termination: Termination,
}

impl BattleState {
    pub fn index_of(&self, id: CombatantId) -> Option<usize> {
        self.roster.iter().position(|c| c.id == id)
    }

    pub fn get(&self, id: CombatantId) -> Option<&Combatant> {
        self.roster.iter().find(|c| c.id == id)
    }

    pub fn get_mut(&mut self, id: CombatantId) -> Option<&mut Combatant> {
        self.roster.iter_mut().find(|c| c.id == id)
    }

    pub fn allies(&self) -> impl Iterator<Item = &Combatant> {
        self.roster.iter().filter(|c| c.side == Side::Ally)
    }

    pub fn enemies(&self) -> impl Iterator<Item = &Combatant> {
        self.roster.iter().filter(|c| c.side == Side::Enemy)
    }

    /// Living enemies in spawn order; position `i` is target index `4 + i`.
    pub fn living_enemies(&self) -> impl Iterator<Item = &Combatant> {
        self.enemies().filter(|c| c.is_alive())
    }

    pub fn living_allies(&self) -> impl Iterator<Item = &Combatant> {
        self.allies().filter(|c| c.is_alive())
    }

    pub fn ally_slot(&self, slot: usize) -> Option<&Combatant> {
        self.allies().nth(slot)
    }

    pub fn in_queue(&self, id: CombatantId) -> bool {
        self.turn_queue.iter().any(|e| e.id == id)
    }

    /// Normalized HP of the four allies in slot order.
    pub fn ally_hp_vector(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (slot, c) in self.allies().take(4).enumerate() {
            out[slot] = c.hp_fraction().clamp(0.0, 1.0);
        }
        out
    }

    /// SHA-256 over the canonical JSON encoding, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("battle state serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
