use serde::{Deserialize, Serialize};

use crate::engine::{Battle, CombatantId, Decision, Element, Family, StatusKind, UltKind};

/// How many upcoming actors the turn-order track exposes.
pub const TURN_ORDER_DEPTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    OnTurn,
    Interrupt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionView {
    pub kind: DecisionKind,
    /// Team slot of the deciding ally; this is the `c` of a TA triple.
    pub actor_slot: u8,
    pub actor_id: CombatantId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusView {
    pub name: String,
    pub kind: StatusKind,
    pub remaining_turns: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnemyView {
    /// Target index `t` of a TA triple (4 + position among living enemies).
    pub index: u8,
    pub id: CombatantId,
    pub name: String,
    pub element: Element,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hp_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toughness_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weaknesses: Option<Vec<Element>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub broken: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statuses: Option<Vec<StatusView>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllyView {
    pub slot: u8,
    pub id: CombatantId,
    pub name: String,
    pub element: Element,
    pub ult_kind: UltKind,
    pub alive: bool,
    /// Ultimate indicator glow.
    pub ult_ready: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hp_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statuses: Option<Vec<StatusView>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlFlags {
    pub basic_enabled: bool,
    pub skill_enabled: bool,
    pub auto_enabled: bool,
}

/// The tool-assisted observation: a compact record of what a detector and
/// OCR stack would read off the screen. With OCR off only identities,
/// presence and enabled flags remain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredObservation {
    pub task_id: u8,
    pub family: Family,
    pub wave: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<DecisionView>,
    pub enemies: Vec<EnemyView>,
    pub allies: Vec<AllyView>,
    pub controls: ControlFlags,
    pub turn_order: Vec<CombatantId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skill_points: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_turn_damage: Option<f64>,
    pub ocr_fields_present: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

impl StructuredObservation {
    pub fn enemy(&self, id: CombatantId) -> Option<&EnemyView> {
        self.enemies.iter().find(|e| e.id == id)
    }

    pub fn ally(&self, id: CombatantId) -> Option<&AllyView> {
        self.allies.iter().find(|a| a.id == id)
    }
}

fn pct(value: f64, max: f64) -> f64 {
    if max > 0.0 {
        value * 100.0 / max
    } else {
        0.0
    }
}

fn gate<T>(on: bool, value: T) -> Option<T> {
    on.then_some(value)
}

fn statuses(c: &crate::engine::Combatant) -> Vec<StatusView> {
    c.statuses
        .iter()
        .map(|s| StatusView {
            name: s.name.clone(),
            kind: s.kind,
            remaining_turns: s.remaining_turns,
        })
        .collect()
}

pub fn textify(battle: &Battle, ocr_enabled: bool) -> StructuredObservation {
    let state = battle.state();
    let spec = battle.spec();
    let decision = battle.decision();

    let enemies = state
        .living_enemies()
        .enumerate()
        .map(|(i, e)| EnemyView {
            index: 4 + i as u8,
            id: e.id,
            name: e.name.clone(),
            element: e.element,
            hp_pct: gate(ocr_enabled, pct(e.hp, e.max_hp)),
            toughness_pct: gate(ocr_enabled, pct(e.toughness, e.toughness_max)),
            weaknesses: gate(ocr_enabled, e.weaknesses.clone()),
            broken: gate(ocr_enabled, e.broken),
            statuses: gate(ocr_enabled, statuses(e)),
        })
        .collect();

    let allies = state
        .allies()
        .enumerate()
        .map(|(slot, a)| AllyView {
            slot: slot as u8,
            id: a.id,
            name: a.name.clone(),
            element: a.element,
            ult_kind: a.ult_kind.unwrap_or(UltKind::Damage),
            alive: a.is_alive(),
            ult_ready: a.is_alive() && a.energy_full(),
            hp_pct: gate(ocr_enabled, pct(a.hp, a.max_hp)),
            energy_pct: gate(ocr_enabled, pct(a.energy, a.energy_max)),
            statuses: gate(ocr_enabled, statuses(a)),
        })
        .collect();

    let decision_view = decision.and_then(|d| {
        let slot = state.allies().position(|a| a.id == d.actor())?;
        Some(DecisionView {
            kind: if d.is_interrupt() {
                DecisionKind::Interrupt
            } else {
                DecisionKind::OnTurn
            },
            actor_slot: slot as u8,
            actor_id: d.actor(),
        })
    });

    StructuredObservation {
        task_id: spec.task_id,
        family: spec.family,
        wave: state.wave_index,
        decision: decision_view,
        enemies,
        allies,
        controls: ControlFlags {
            basic_enabled: matches!(decision, Some(Decision::OnTurn(_))),
            skill_enabled: state.skill_points >= 1,
            auto_enabled: false,
        },
        turn_order: state
            .turn_queue
            .iter()
            .take(TURN_ORDER_DEPTH)
            .map(|e| e.id)
            .collect(),
        skill_points: gate(ocr_enabled, state.skill_points),
        last_turn_damage: gate(ocr_enabled, state.last_action_damage),
        ocr_fields_present: ocr_enabled,
        hint: None,
    }
}
