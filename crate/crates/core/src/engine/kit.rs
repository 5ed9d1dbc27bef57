//! Ability definitions for allies and enemies.
//!
//! Kits are plain config: every number here can be overridden from a task
//! file. The default team mirrors four archetypes: a dealer that earns an
//! extra turn on kills, a support that advances an ally's turn, a debuffer
//! that implants weaknesses, and a defender with team mitigation and a
//! healing ultimate.

use serde::{Deserialize, Serialize};

use super::types::{Element, StatAffected, StatusKind, UltKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targeting {
    SingleEnemy,
    AllEnemies,
    SingleAlly,
    AllAllies,
}

impl Targeting {
    pub fn is_all(self) -> bool {
        matches!(self, Targeting::AllEnemies | Targeting::AllAllies)
    }

    pub fn hits_enemies(self) -> bool {
        matches!(self, Targeting::SingleEnemy | Targeting::AllEnemies)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectScope {
    /// Each resolved target of the move.
    Target,
    Actor,
    AllAllies,
    AllEnemies,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Effect {
    Status {
        on: EffectScope,
        kind: StatusKind,
        name: String,
        affects: StatAffected,
        magnitude: f64,
        turns: u32,
        #[serde(default = "one")]
        chance: f64,
    },
    /// Pull the target's next turn forward by `fraction` of its base interval.
    AdvanceTurn {
        fraction: f64,
    },
    ImplantWeakness {
        element: Element,
    },
    /// Restore `fraction` of max HP to each target.
    Heal {
        fraction: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveSpec {
    pub targeting: Targeting,
    #[serde(default)]
    pub damage: f64,
    #[serde(default)]
    pub toughness: f64,
    #[serde(default)]
    pub energy_gain: f64,
    #[serde(default)]
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Dealer,
    Support,
    Debuffer,
    Defender,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllyKit {
    pub name: String,
    pub archetype: Archetype,
    pub element: Element,
    pub max_hp: f64,
    pub speed: f64,
    pub energy_max: f64,
    #[serde(default)]
    pub crit_rate: f64,
    #[serde(default)]
    pub crit_damage: f64,
    pub ult_kind: UltKind,
    #[serde(default)]
    pub extra_turn_on_kill: bool,
    pub basic: MoveSpec,
    pub skill: MoveSpec,
    pub ultimate: MoveSpec,
}

impl AllyKit {
    pub fn move_spec(&self, mv: super::types::Move) -> Option<&MoveSpec> {
        use super::types::Move;
        match mv {
            Move::Basic => Some(&self.basic),
            Move::Skill => Some(&self.skill),
            Move::Ultimate => Some(&self.ultimate),
            Move::Hold => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnemyAttack {
    pub name: String,
    pub damage: f64,
    /// Hits every living ally instead of the lowest-HP one.
    #[serde(default)]
    pub area: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnemySpec {
    pub name: String,
    pub max_hp: f64,
    pub speed: f64,
    pub element: Element,
    #[serde(default)]
    pub weaknesses: Vec<Element>,
    #[serde(default)]
    pub toughness: f64,
    pub attacks: Vec<EnemyAttack>,
    #[serde(default)]
    pub score: f64,
}

fn status(
    on: EffectScope,
    kind: StatusKind,
    name: &str,
    affects: StatAffected,
    magnitude: f64,
    turns: u32,
    chance: f64,
) -> Effect {
    Effect::Status {
        on,
        kind,
        name: name.to_string(),
        affects,
        magnitude,
        turns,
        chance,
    }
}

fn single(damage: f64, toughness: f64, energy_gain: f64, effects: Vec<Effect>) -> MoveSpec {
    MoveSpec {
        targeting: Targeting::SingleEnemy,
        damage,
        toughness,
        energy_gain,
        effects,
    }
}

/// The shared four-character team used by every shipped task.
pub fn standard_team() -> Vec<AllyKit> {
    use EffectScope::*;
    use StatAffected::*;
    use StatusKind::*;
    vec![
        AllyKit {
            name: "Seele".into(),
            archetype: Archetype::Dealer,
            element: Element::Quantum,
            max_hp: 3100.0,
            speed: 115.0,
            energy_max: 120.0,
            crit_rate: 0.5,
            crit_damage: 1.0,
            ult_kind: UltKind::Damage,
            extra_turn_on_kill: true,
            basic: single(900.0, 30.0, 20.0, vec![]),
            skill: single(
                2000.0,
                60.0,
                30.0,
                vec![status(Actor, Buff, "sheathed-blade", Speed, 0.25, 2, 1.0)],
            ),
            ultimate: single(5200.0, 90.0, 5.0, vec![]),
        },
        AllyKit {
            name: "Sparkle".into(),
            archetype: Archetype::Support,
            element: Element::Quantum,
            max_hp: 3400.0,
            speed: 106.0,
            energy_max: 110.0,
            crit_rate: 0.15,
            crit_damage: 0.5,
            ult_kind: UltKind::Damage,
            extra_turn_on_kill: false,
            basic: single(600.0, 30.0, 20.0, vec![]),
            skill: MoveSpec {
                targeting: Targeting::SingleAlly,
                damage: 0.0,
                toughness: 0.0,
                energy_gain: 30.0,
                effects: vec![
                    Effect::AdvanceTurn { fraction: 0.5 },
                    status(Target, Buff, "dreamdiver", DamageDealt, 0.3, 2, 1.0),
                ],
            },
            ultimate: MoveSpec {
                targeting: Targeting::AllAllies,
                damage: 0.0,
                toughness: 0.0,
                energy_gain: 5.0,
                effects: vec![status(Target, Buff, "cipher", DamageDealt, 0.4, 2, 1.0)],
            },
        },
        AllyKit {
            name: "Silver Wolf".into(),
            archetype: Archetype::Debuffer,
            element: Element::Quantum,
            max_hp: 3000.0,
            speed: 107.0,
            energy_max: 110.0,
            crit_rate: 0.15,
            crit_damage: 0.5,
            ult_kind: UltKind::Damage,
            extra_turn_on_kill: false,
            basic: single(700.0, 30.0, 20.0, vec![]),
            skill: single(
                1100.0,
                60.0,
                30.0,
                vec![
                    Effect::ImplantWeakness {
                        element: Element::Quantum,
                    },
                    status(Target, Debuff, "vulnerability", DamageTaken, 0.2, 3, 0.85),
                ],
            ),
            ultimate: single(
                2600.0,
                90.0,
                5.0,
                vec![status(
                    Target,
                    Debuff,
                    "def-shred",
                    DamageTaken,
                    0.25,
                    3,
                    1.0,
                )],
            ),
        },
        AllyKit {
            name: "Fu Xuan".into(),
            archetype: Archetype::Defender,
            element: Element::Quantum,
            max_hp: 4600.0,
            speed: 100.0,
            energy_max: 135.0,
            crit_rate: 0.1,
            crit_damage: 0.5,
            ult_kind: UltKind::Healing,
            extra_turn_on_kill: false,
            basic: single(500.0, 30.0, 20.0, vec![]),
            skill: MoveSpec {
                targeting: Targeting::AllAllies,
                damage: 0.0,
                toughness: 0.0,
                energy_gain: 30.0,
                effects: vec![status(Target, Buff, "matrix", Defense, 0.3, 3, 1.0)],
            },
            ultimate: MoveSpec {
                targeting: Targeting::AllAllies,
                damage: 0.0,
                toughness: 0.0,
                energy_gain: 5.0,
                effects: vec![Effect::Heal { fraction: 0.45 }],
            },
        },
    ]
}
