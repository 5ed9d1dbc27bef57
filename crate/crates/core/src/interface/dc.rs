use std::fmt;

use serde::{Deserialize, Serialize};

use super::ta::targeting_of;
use crate::engine::{Battle, CombatantId, Decision, Move, ResolvedAction, Target, Targeting};
use crate::observation::{FrameObservation, Rect, WidgetKind, FRAME_HEIGHT, FRAME_WIDTH};

/// Clamps a click into the frame.
pub fn clip(x: i64, y: i64) -> (u32, u32) {
    (
        x.clamp(0, i64::from(FRAME_WIDTH) - 1) as u32,
        y.clamp(0, i64::from(FRAME_HEIGHT) - 1) as u32,
    )
}

/// One direct-control output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DcPrimitive {
    Click { x: i64, y: i64 },
    Key { key: String },
    Empty,
}

impl DcPrimitive {
    pub fn click(x: i64, y: i64) -> Self {
        DcPrimitive::Click { x, y }
    }

    pub fn key(key: &str) -> Self {
        DcPrimitive::Key {
            key: key.to_string(),
        }
    }

    pub fn confirm() -> Self {
        Self::key("space")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KeyAction {
    Confirm,
    Hold,
}

fn parse_key(key: &str) -> Option<KeyAction> {
    match key.trim().to_ascii_lowercase().as_str() {
        "space" | " " | "enter" | "return" | "confirm" => Some(KeyAction::Confirm),
        "escape" | "esc" => Some(KeyAction::Hold),
        _ => None,
    }
}

/// Move, target and confirmation collected across several outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingSelection {
    pub staged_move: Option<(CombatantId, Move)>,
    pub staged_target: Option<CombatantId>,
    /// True once the staged move has every target it needs.
    pub confirm_armed: bool,
}

impl PendingSelection {
    pub fn clear(&mut self) {
        *self = PendingSelection::default();
    }

    pub fn is_empty(&self) -> bool {
        self.staged_move.is_none() && self.staged_target.is_none()
    }

    fn rearm(&mut self, battle: &Battle) {
        self.confirm_armed = match self.staged_move {
            None => false,
            Some((_, Move::Hold)) => true,
            Some((actor, mv)) => match targeting_of(battle, actor, mv) {
                Some(t) if t.is_all() => true,
                Some(_) => self.staged_target.is_some(),
                None => false,
            },
        };
    }

    /// Rects to outline so the staged choice is visible on the next frame.
    pub fn highlight_rects(&self, frame: &FrameObservation) -> Vec<Rect> {
        let mut out = Vec::new();
        if let Some((actor, mv)) = self.staged_move {
            let w = match mv {
                Move::Basic => frame.widget(WidgetKind::BasicButton, 0),
                Move::Skill => frame.widget(WidgetKind::SkillButton, 0),
                Move::Ultimate => frame.widget_for(WidgetKind::UltIcon, actor),
                Move::Hold => None,
            };
            out.extend(w.map(|w| w.rect));
        }
        if let Some(id) = self.staged_target {
            let w = frame
                .widget_for(WidgetKind::TargetFrame, id)
                .or_else(|| frame.widget_for(WidgetKind::AllyFrame, id));
            out.extend(w.map(|w| w.rect));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissReason {
    Empty,
    Background,
    Disabled,
    NotActionable,
    UnknownKey,
    IncompleteSelection,
    Illegal,
}

impl fmt::Display for MissReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MissReason::Empty => "empty",
            MissReason::Background => "background",
            MissReason::Disabled => "disabled",
            MissReason::NotActionable => "not_actionable",
            MissReason::UnknownKey => "unknown_key",
            MissReason::IncompleteSelection => "incomplete_selection",
            MissReason::Illegal => "illegal",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum DcStepResult {
    /// The selection changed; nothing was executed.
    Staged {
        selection: PendingSelection,
    },
    Resolved {
        action: ResolvedAction,
    },
    Miss {
        reason: MissReason,
    },
}

/// Applies one primitive to the selection, emitting an action on a complete
/// confirm. Misses leave the selection unchanged.
pub fn execute_dc(
    battle: &Battle,
    frame: &FrameObservation,
    prim: &DcPrimitive,
    sel: &mut PendingSelection,
) -> DcStepResult {
    let miss = |reason| DcStepResult::Miss { reason };
    let Some(decision) = battle.decision() else {
        return miss(MissReason::NotActionable);
    };
    let actor = decision.actor();
    match prim {
        DcPrimitive::Empty => miss(MissReason::Empty),
        DcPrimitive::Key { key } => match parse_key(key) {
            None => miss(MissReason::UnknownKey),
            Some(KeyAction::Hold) => {
                if !decision.is_interrupt() {
                    return miss(MissReason::NotActionable);
                }
                sel.staged_move = Some((actor, Move::Hold));
                sel.staged_target = None;
                sel.rearm(battle);
                DcStepResult::Staged { selection: *sel }
            }
            Some(KeyAction::Confirm) => confirm(battle, decision, sel),
        },
        DcPrimitive::Click { x, y } => {
            let (cx, cy) = clip(*x, *y);
            let Some(w) = frame.hit_test(cx, cy) else {
                return miss(MissReason::Background);
            };
            if !w.enabled {
                return miss(MissReason::Disabled);
            }
            let staged = match (w.kind, decision) {
                (WidgetKind::BasicButton, Decision::OnTurn(_)) => Some(Move::Basic),
                (WidgetKind::SkillButton, Decision::OnTurn(_)) => Some(Move::Skill),
                (WidgetKind::UltIcon, _) if w.bound_id == Some(actor) => Some(Move::Ultimate),
                (WidgetKind::TargetFrame | WidgetKind::AllyFrame, _) => {
                    let Some(id) = w.bound_id else {
                        return miss(MissReason::Disabled);
                    };
                    sel.staged_target = Some(id);
                    sel.rearm(battle);
                    return DcStepResult::Staged { selection: *sel };
                }
                _ => None,
            };
            match staged {
                Some(mv) => {
                    sel.staged_move = Some((actor, mv));
                    sel.rearm(battle);
                    DcStepResult::Staged { selection: *sel }
                }
                None => miss(MissReason::NotActionable),
            }
        }
    }
}

fn confirm(battle: &Battle, decision: Decision, sel: &mut PendingSelection) -> DcStepResult {
    let miss = |reason| DcStepResult::Miss { reason };
    let Some((actor, mv)) = sel.staged_move else {
        return miss(MissReason::IncompleteSelection);
    };
    if actor != decision.actor() {
        return miss(MissReason::Illegal);
    }
    let target = if mv == Move::Hold {
        Target::None
    } else {
        match targeting_of(battle, actor, mv) {
            Some(Targeting::AllEnemies) => Target::AllEnemies,
            Some(Targeting::AllAllies) => Target::AllAllies,
            Some(_) => match sel.staged_target {
                Some(id) => Target::Single(id),
                None => return miss(MissReason::IncompleteSelection),
            },
            None => return miss(MissReason::Illegal),
        }
    };
    let action = ResolvedAction {
        actor,
        mv,
        target,
        off_turn: decision.is_interrupt(),
    };
    if battle.legal_actions(actor).contains(&action) {
        sel.clear();
        DcStepResult::Resolved { action }
    } else {
        miss(MissReason::Illegal)
    }
}

/// The documented click sequence for `action`: move widget, then the target
/// frame for single-target moves, then the confirm key. Hold is the escape
/// key followed by confirm.
pub fn canonical_dc(frame: &FrameObservation, action: &ResolvedAction) -> Option<Vec<DcPrimitive>> {
    let center = |kind: WidgetKind, slot_or_id: Result<usize, CombatantId>| {
        let w = match slot_or_id {
            Ok(slot) => frame.widget(kind, slot),
            Err(id) => frame.widget_for(kind, id),
        }?;
        let (x, y) = w.rect.center();
        Some(DcPrimitive::click(i64::from(x), i64::from(y)))
    };
    let mut seq = Vec::with_capacity(3);
    match action.mv {
        Move::Hold => {
            seq.push(DcPrimitive::key("escape"));
            seq.push(DcPrimitive::confirm());
            return Some(seq);
        }
        Move::Basic => seq.push(center(WidgetKind::BasicButton, Ok(0))?),
        Move::Skill => seq.push(center(WidgetKind::SkillButton, Ok(0))?),
        Move::Ultimate => seq.push(center(WidgetKind::UltIcon, Err(action.actor))?),
    }
    if let Target::Single(id) = action.target {
        let click = center(WidgetKind::TargetFrame, Err(id))
            .or_else(|| center(WidgetKind::AllyFrame, Err(id)))?;
        seq.push(click);
    }
    seq.push(DcPrimitive::confirm());
    Some(seq)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::engine::builtin_task;
    use crate::observation::render_frame;

    fn on_turn(slot: u32) -> Battle {
        let mut b = Battle::new(Arc::new(builtin_task(1).unwrap()), 4).unwrap();
        loop {
            match b.advance().unwrap().unwrap() {
                Decision::OnTurn(id) if id.0 == slot => return b,
                _ => {
                    let a = *b.current_legal_actions().last().unwrap();
                    b.apply_action(a).unwrap();
                }
            }
        }
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip(2500, -3), (1919, 0));
        assert_eq!(clip(0, 1079), (0, 1079));
        assert_eq!(clip(960, 540), (960, 540));
    }

    #[test]
    fn skill_then_enemy_then_confirm() {
        let mut b = on_turn(0);
        b.state_mut().skill_points = 2;
        let f = render_frame(&b);
        let mut sel = PendingSelection::default();
        let skill = f.widget(WidgetKind::SkillButton, 0).unwrap().rect.center();
        let enemy = f.widget(WidgetKind::TargetFrame, 0).unwrap();
        let r = execute_dc(
            &b,
            &f,
            &DcPrimitive::click(skill.0.into(), skill.1.into()),
            &mut sel,
        );
        assert!(matches!(r, DcStepResult::Staged { .. }));
        assert!(!sel.confirm_armed);
        let (ex, ey) = enemy.rect.center();
        execute_dc(&b, &f, &DcPrimitive::click(ex.into(), ey.into()), &mut sel);
        assert!(sel.confirm_armed);
        let r = execute_dc(&b, &f, &DcPrimitive::confirm(), &mut sel);
        assert_eq!(
            r,
            DcStepResult::Resolved {
                action: ResolvedAction {
                    actor: CombatantId(0),
                    mv: Move::Skill,
                    target: Target::Single(enemy.bound_id.unwrap()),
                    off_turn: false,
                }
            }
        );
        assert!(sel.is_empty());
    }

    #[test]
    fn background_and_empty_are_misses() {
        let b = on_turn(0);
        let f = render_frame(&b);
        let mut sel = PendingSelection::default();
        assert_eq!(
            execute_dc(&b, &f, &DcPrimitive::click(5, 5), &mut sel),
            DcStepResult::Miss {
                reason: MissReason::Background
            }
        );
        assert_eq!(
            execute_dc(&b, &f, &DcPrimitive::Empty, &mut sel),
            DcStepResult::Miss {
                reason: MissReason::Empty
            }
        );
        assert!(sel.is_empty());
    }

    #[test]
    fn disabled_skill_is_a_miss() {
        let mut b = on_turn(0);
        b.state_mut().skill_points = 0;
        let f = render_frame(&b);
        let (x, y) = f.widget(WidgetKind::SkillButton, 0).unwrap().rect.center();
        let mut sel = PendingSelection::default();
        assert_eq!(
            execute_dc(&b, &f, &DcPrimitive::click(x.into(), y.into()), &mut sel),
            DcStepResult::Miss {
                reason: MissReason::Disabled
            }
        );
    }

    #[test]
    fn confirm_without_target_keeps_selection() {
        let b = on_turn(0);
        let f = render_frame(&b);
        let (x, y) = f.widget(WidgetKind::BasicButton, 0).unwrap().rect.center();
        let mut sel = PendingSelection::default();
        execute_dc(&b, &f, &DcPrimitive::click(x.into(), y.into()), &mut sel);
        let before = sel;
        assert_eq!(
            execute_dc(&b, &f, &DcPrimitive::confirm(), &mut sel),
            DcStepResult::Miss {
                reason: MissReason::IncompleteSelection
            }
        );
        assert_eq!(sel, before);
    }

    #[test]
    fn all_target_move_needs_no_target() {
        let mut b = on_turn(3);
        b.state_mut().skill_points = 2;
        let f = render_frame(&b);
        let seq = canonical_dc(
            &f,
            &b.legal_actions(CombatantId(3))
                .into_iter()
                .find(|a| a.mv == Move::Skill)
                .unwrap(),
        )
        .unwrap();
        assert_eq!(seq.len(), 2);
        let mut sel = PendingSelection::default();
        let mut last = None;
        for p in &seq {
            last = Some(execute_dc(&b, &f, p, &mut sel));
        }
        assert!(
            matches!(last, Some(DcStepResult::Resolved { action }) if action.target == Target::AllAllies)
        );
    }

    #[test]
    fn escape_stages_hold_only_on_offers() {
        let b = on_turn(0);
        let f = render_frame(&b);
        let mut sel = PendingSelection::default();
        assert_eq!(
            execute_dc(&b, &f, &DcPrimitive::key("escape"), &mut sel),
            DcStepResult::Miss {
                reason: MissReason::NotActionable
            }
        );

        let mut b = Battle::new(Arc::new(builtin_task(1).unwrap()), 1).unwrap();
        b.state_mut().roster[0].energy = 120.0;
        b.advance().unwrap();
        let f = render_frame(&b);
        let mut sel = PendingSelection::default();
        execute_dc(&b, &f, &DcPrimitive::key("Escape"), &mut sel);
        assert!(sel.confirm_armed);
        let r = execute_dc(&b, &f, &DcPrimitive::confirm(), &mut sel);
        assert!(matches!(r, DcStepResult::Resolved { action } if action.mv == Move::Hold));
    }

    #[test]
    fn unknown_key_is_a_miss() {
        let b = on_turn(0);
        let f = render_frame(&b);
        let mut sel = PendingSelection::default();
        assert_eq!(
            execute_dc(&b, &f, &DcPrimitive::key("q"), &mut sel),
            DcStepResult::Miss {
                reason: MissReason::UnknownKey
            }
        );
    }

    #[test]
    fn retargeting_before_confirm() {
        let mut b = on_turn(1);
        b.state_mut().skill_points = 2;
        let f = render_frame(&b);
        let mut sel = PendingSelection::default();
        let click = |kind, slot| {
            let (x, y) = f.widget(kind, slot).unwrap().rect.center();
            DcPrimitive::click(x.into(), y.into())
        };
        execute_dc(&b, &f, &click(WidgetKind::SkillButton, 0), &mut sel);
        execute_dc(&b, &f, &click(WidgetKind::AllyFrame, 2), &mut sel);
        execute_dc(&b, &f, &click(WidgetKind::AllyFrame, 0), &mut sel);
        let r = execute_dc(&b, &f, &DcPrimitive::confirm(), &mut sel);
        assert!(
            matches!(r, DcStepResult::Resolved { action } if action.target == Target::Single(CombatantId(0)))
        );
    }

    #[test]
    fn every_legal_action_has_a_click_path() {
        for slot in 0..4 {
            let mut b = on_turn(slot);
            b.state_mut().skill_points = 3;
            let e = b.state().roster[slot as usize].energy_max;
            b.state_mut().roster[slot as usize].energy = e;
            let f = render_frame(&b);
            for action in b.current_legal_actions() {
                let mut sel = PendingSelection::default();
                let mut result = None;
                for p in canonical_dc(&f, &action).unwrap() {
                    result = Some(execute_dc(&b, &f, &p, &mut sel));
                }
                assert_eq!(result, Some(DcStepResult::Resolved { action }));
            }
        }
    }
}
