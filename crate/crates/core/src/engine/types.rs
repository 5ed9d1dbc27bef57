use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Elemental damage types. Enemies list the subset they are weak to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Element {
    Physical,
    Fire,
    Ice,
    Lightning,
    Wind,
    Quantum,
    Imaginary,
}

impl Element {
    pub const ALL: [Element; 7] = [
        Element::Physical,
        Element::Fire,
        Element::Ice,
        Element::Lightning,
        Element::Wind,
        Element::Quantum,
        Element::Imaginary,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Ally,
    Enemy,
}

/// Stable identifier of a combatant. Allies use their team slot (0..=3);
/// enemies are numbered from 10 upward in spawn order across waves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct CombatantId(pub u32);

/// Accepts a number or, as JSON map keys are, a numeric string.
impl<'de> Deserialize<'de> for CombatantId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = CombatantId;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a combatant id")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<CombatantId, E> {
                u32::try_from(v).map(CombatantId).map_err(E::custom)
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<CombatantId, E> {
                u32::try_from(v).map(CombatantId).map_err(E::custom)
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<CombatantId, E> {
                v.parse().map(CombatantId).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

impl fmt::Display for CombatantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

pub const FIRST_ENEMY_ID: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatusKind {
    Buff,
    Debuff,
}

/// Which stat a status modifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatAffected {
    Speed,
    DamageDealt,
    DamageTaken,
    Defense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub kind: StatusKind,
    pub name: String,
    pub magnitude: f64,
    pub remaining_turns: u32,
    pub affects: StatAffected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UltKind {
    Damage,
    Healing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combatant {
    pub id: CombatantId,
    pub name: String,
    pub side: Side,
    pub max_hp: f64,
    pub hp: f64,
    pub speed: f64,
    pub energy: f64,
    pub energy_max: f64,
    pub element: Element,
    pub weaknesses: Vec<Element>,
    pub toughness: f64,
    pub toughness_max: f64,
    pub broken: bool,
    pub statuses: Vec<Status>,
    pub ult_kind: Option<UltKind>,
    /// Allies: set after holding an ultimate offer, cleared at the ally's turn end.
    pub ult_declined: bool,
    /// Index of the kit (ally slot) or enemy spec (within its wave).
    pub kit_index: usize,
    pub turns_taken: u32,
    /// Score awarded on elimination (score-attack tasks).
    pub score: f64,
}

impl Combatant {
    pub fn is_alive(&self) -> bool {
        self.hp > 0.0
    }

    pub fn is_ally(&self) -> bool {
        self.side == Side::Ally
    }

    pub fn energy_full(&self) -> bool {
        self.energy >= self.energy_max
    }

    pub fn hp_fraction(&self) -> f64 {
        self.hp / self.max_hp
    }

    /// Sum of status magnitudes affecting `stat`.
    pub fn stat_sum(&self, stat: StatAffected) -> f64 {
        self.statuses
            .iter()
            .filter(|s| s.affects == stat)
            .map(|s| s.magnitude)
            .sum()
    }

    pub fn effective_speed(&self) -> f64 {
        (self.speed * (1.0 + self.stat_sum(StatAffected::Speed))).max(1.0)
    }

    /// Additive modifier on incoming damage: damage-taken statuses raise it,
    /// defense statuses lower it, and a broken enemy takes `break_vulnerability` more.
    pub fn incoming_modifier(&self, break_vulnerability: f64) -> f64 {
        let mut m = self.stat_sum(StatAffected::DamageTaken) - self.stat_sum(StatAffected::Defense);
        if self.broken {
            m += break_vulnerability;
        }
        m
    }

    pub fn add_status(&mut self, status: Status) {
        if let Some(existing) = self.statuses.iter_mut().find(|s| s.name == status.name) {
            *existing = status;
        } else {
            self.statuses.push(status);
        }
    }

    /// One owner-turn tick: decrement every status, dropping expired ones.
    pub fn tick_statuses(&mut self) {
        for s in &mut self.statuses {
            s.remaining_turns = s.remaining_turns.saturating_sub(1);
        }
        self.statuses.retain(|s| s.remaining_turns > 0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Move {
    Basic,
    Skill,
    Ultimate,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum Target {
    Single(CombatantId),
    AllEnemies,
    AllAllies,
    None,
}

/// An engine-level action: who does what to whom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResolvedAction {
    pub actor: CombatantId,
    #[serde(rename = "move")]
    pub mv: Move,
    pub target: Target,
    pub off_turn: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub damage_dealt: f64,
    pub toughness_delta: f64,
    pub break_triggered: bool,
    pub sp_delta: i32,
    pub energy_gains: BTreeMap<CombatantId, f64>,
    pub hp_deltas: BTreeMap<CombatantId, f64>,
    pub kills: Vec<CombatantId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Ongoing,
    Victory,
    Defeat,
    BudgetExhausted,
}

/// Who must decide next, and in what capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "actor")]
pub enum Decision {
    OnTurn(CombatantId),
    Interrupt(CombatantId),
}

impl Decision {
    pub fn actor(&self) -> CombatantId {
        match *self {
            Decision::OnTurn(id) | Decision::Interrupt(id) => id,
        }
    }

    pub fn is_interrupt(&self) -> bool {
        matches!(self, Decision::Interrupt(_))
    }
}
