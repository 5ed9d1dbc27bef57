use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{Battle, CombatantId, Decision, Move, ResolvedAction, Target, Targeting};

pub const M_BASIC: u8 = 0;
pub const M_SKILL: u8 = 1;
pub const M_ULTIMATE: u8 = 2;
pub const M_HOLD: u8 = 3;
pub const T_FIRST_ENEMY: u8 = 4;
pub const T_LAST_ENEMY: u8 = 8;
pub const T_ALL: u8 = 9;

/// A tool-assisted action `(character, move, target)`.
///
/// Fields are kept wide so that out-of-range agent output can be decoded and
/// rejected with a reason instead of failing to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaTriple {
    pub c: i64,
    pub m: i64,
    pub t: i64,
}

impl TaTriple {
    pub const fn new(c: i64, m: i64, t: i64) -> Self {
        TaTriple { c, m, t }
    }
}

impl fmt::Display for TaTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.c, self.m, self.t)
    }
}

/// Machine-readable reason a triple was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IllegalReason {
    WrongActor,
    NoSkillPoints,
    UltNotReady,
    DeadTarget,
    BadTargetSide,
    BadMultiplicity,
    OutOfRangeIndex,
    /// The output could not be parsed as a triple at all.
    Malformed,
}

impl IllegalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            IllegalReason::WrongActor => "wrong_actor",
            IllegalReason::NoSkillPoints => "no_skill_points",
            IllegalReason::UltNotReady => "ult_not_ready",
            IllegalReason::DeadTarget => "dead_target",
            IllegalReason::BadTargetSide => "bad_target_side",
            IllegalReason::BadMultiplicity => "bad_multiplicity",
            IllegalReason::OutOfRangeIndex => "out_of_range_index",
            IllegalReason::Malformed => "malformed",
        }
    }
}

impl fmt::Display for IllegalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn decode_move(m: i64) -> Option<Move> {
    match m {
        0 => Some(Move::Basic),
        1 => Some(Move::Skill),
        2 => Some(Move::Ultimate),
        3 => Some(Move::Hold),
        _ => None,
    }
}

fn encode_move(mv: Move) -> u8 {
    match mv {
        Move::Basic => M_BASIC,
        Move::Skill => M_SKILL,
        Move::Ultimate => M_ULTIMATE,
        Move::Hold => M_HOLD,
    }
}

/// The kit targeting of `mv` for the ally at `actor`.
pub(crate) fn targeting_of(battle: &Battle, actor: CombatantId, mv: Move) -> Option<Targeting> {
    let c = battle.state().get(actor)?;
    battle
        .spec()
        .allies
        .get(c.kit_index)?
        .move_spec(mv)
        .map(|s| s.targeting)
}

/// Decodes a triple against the pending decision.
pub fn execute_ta(battle: &Battle, triple: TaTriple) -> Result<ResolvedAction, IllegalReason> {
    let TaTriple { c, m, t } = triple;
    if !(0..=3).contains(&c) || !(0..=3).contains(&m) || !(0..=i64::from(T_ALL)).contains(&t) {
        return Err(IllegalReason::OutOfRangeIndex);
    }
    let state = battle.state();
    let decision = battle.decision().ok_or(IllegalReason::WrongActor)?;
    let actor = state
        .ally_slot(c as usize)
        .ok_or(IllegalReason::OutOfRangeIndex)?;
    if actor.id != decision.actor() {
        return Err(IllegalReason::WrongActor);
    }
    let mv = decode_move(m).expect("range checked");
    let off_turn = decision.is_interrupt();
    match (decision, mv) {
        (Decision::Interrupt(_), Move::Basic | Move::Skill) => {
            return Err(IllegalReason::WrongActor)
        }
        (Decision::Interrupt(_), Move::Hold) => {
            return Ok(ResolvedAction {
                actor: actor.id,
                mv,
                target: Target::None,
                off_turn,
            });
        }
        (Decision::OnTurn(_), Move::Hold) => return Err(IllegalReason::UltNotReady),
        (Decision::OnTurn(_), Move::Skill) if state.skill_points < 1 => {
            return Err(IllegalReason::NoSkillPoints)
        }
        (_, Move::Ultimate) if !actor.energy_full() => return Err(IllegalReason::UltNotReady),
        _ => {}
    }
    let targeting = targeting_of(battle, actor.id, mv).ok_or(IllegalReason::WrongActor)?;
    let target = decode_target(battle, targeting, t)?;
    let action = ResolvedAction {
        actor: actor.id,
        mv,
        target,
        off_turn,
    };
    if battle.legal_actions(actor.id).contains(&action) {
        Ok(action)
    } else {
        Err(IllegalReason::WrongActor)
    }
}

fn decode_target(battle: &Battle, targeting: Targeting, t: i64) -> Result<Target, IllegalReason> {
    let state = battle.state();
    let t = t as u8;
    if t == T_ALL {
        return match targeting {
            Targeting::AllEnemies => Ok(Target::AllEnemies),
            Targeting::AllAllies => Ok(Target::AllAllies),
            _ => Err(IllegalReason::BadMultiplicity),
        };
    }
    if targeting.is_all() {
        return Err(IllegalReason::BadMultiplicity);
    }
    if t < T_FIRST_ENEMY {
        if targeting.hits_enemies() {
            return Err(IllegalReason::BadTargetSide);
        }
        let ally = state
            .ally_slot(usize::from(t))
            .ok_or(IllegalReason::OutOfRangeIndex)?;
        if !ally.is_alive() {
            return Err(IllegalReason::DeadTarget);
        }
        return Ok(Target::Single(ally.id));
    }
    if !targeting.hits_enemies() {
        return Err(IllegalReason::BadTargetSide);
    }
    let enemy = state
        .living_enemies()
        .nth(usize::from(t - T_FIRST_ENEMY))
        .ok_or(IllegalReason::OutOfRangeIndex)?;
    Ok(Target::Single(enemy.id))
}

/// The unique triple that decodes to `action` in the current state.
pub fn encode_ta(battle: &Battle, action: &ResolvedAction) -> Option<TaTriple> {
    let state = battle.state();
    let c = state.allies().position(|a| a.id == action.actor)?;
    let t = match action.target {
        Target::AllEnemies | Target::AllAllies | Target::None => T_ALL,
        Target::Single(id) => {
            if let Some(slot) = state.allies().position(|a| a.id == id) {
                slot as u8
            } else {
                T_FIRST_ENEMY + state.living_enemies().position(|e| e.id == id)? as u8
            }
        }
    };
    Some(TaTriple::new(
        c as i64,
        i64::from(encode_move(action.mv)),
        i64::from(t),
    ))
}

/// Every triple that is currently accepted, in legal-action order.
pub fn legal_mask(battle: &Battle) -> Vec<TaTriple> {
    battle
        .current_legal_actions()
        .iter()
        .filter_map(|a| encode_ta(battle, a))
        .collect()
}
