use std::sync::Arc;

use proptest::prelude::*;

use super::*;

fn cocolia() -> Arc<TaskSpec> {
    Arc::new(builtin_task(1).unwrap())
}

fn with_speeds(ally: f64, enemy: f64) -> Arc<TaskSpec> {
    let mut spec = builtin_task(1).unwrap();
    for kit in &mut spec.allies {
        kit.speed = ally;
    }
    spec.waves[0].enemies[0].speed = enemy;
    Arc::new(spec)
}

#[test]
fn load_eow_initial_state() {
    let b = Battle::new(cocolia(), 7).unwrap();
    let s = b.state();
    assert_eq!(s.allies().count(), 4);
    assert_eq!(s.enemies().count(), 1);
    assert_eq!(s.av_clock, 0.0);
    assert_eq!(s.skill_points, 3);
    assert_eq!(s.turn_queue.len(), 5);
}

#[test]
fn load_moc_stages_waves() {
    let spec = Arc::new(builtin_task(6).unwrap());
    let b = Battle::new(spec.clone(), 7).unwrap();
    assert_eq!(b.state().wave_index, 0);
    assert_eq!(b.state().enemies().count(), spec.waves[0].enemies.len());
    assert!(b
        .state()
        .enemies()
        .all(|e| e.kit_index < spec.waves[0].enemies.len()));
}

#[test]
fn load_is_deterministic() {
    let a = Battle::new(cocolia(), 7).unwrap();
    let b = Battle::new(cocolia(), 7).unwrap();
    assert_eq!(
        serde_json::to_vec(a.state()).unwrap(),
        serde_json::to_vec(b.state()).unwrap()
    );
    let c = Battle::new(cocolia(), 8).unwrap();
    assert_ne!(a.digest(), c.digest());
}

#[test]
fn invalid_spec_names_field() {
    let mut spec = builtin_task(1).unwrap();
    spec.c_max = Some(3);
    let err = Battle::new(Arc::new(spec), 0).unwrap_err();
    assert_eq!(err.field(), Some("c_max"));

    let mut spec = builtin_task(6).unwrap();
    spec.c_max = None;
    assert_eq!(spec.validate().unwrap_err().field(), Some("c_max"));

    let mut spec = builtin_task(1).unwrap();
    spec.allies.pop();
    assert_eq!(spec.validate().unwrap_err().field(), Some("allies"));
}

#[test]
fn next_turn_reciprocal_speed() {
    let mut b = Battle::new(with_speeds(100.0, 134.0), 0).unwrap();
    let (id, adv) = b.next_turn().unwrap();
    assert!(id.0 >= FIRST_ENEMY_ID);
    assert!((adv - 10000.0 / 134.0).abs() < 1e-9);
    assert!((b.state().av_clock - adv).abs() < 1e-12);
    // every ally rebased from 100 to 100 - 74.63
    for e in &b.state().turn_queue {
        assert!((e.av_to_act - (100.0 - adv)).abs() < 1e-9);
    }
}

#[test]
fn next_turn_single_living_combatant() {
    let mut b = Battle::new(cocolia(), 0).unwrap();
    let keep = b.state().turn_queue[2];
    b.state_mut().turn_queue = vec![keep];
    let (id, adv) = b.next_turn().unwrap();
    assert_eq!(id, keep.id);
    assert_eq!(adv, keep.av_to_act);
}

#[test]
fn next_turn_empty_queue_is_error() {
    let mut b = Battle::new(cocolia(), 0).unwrap();
    b.state_mut().turn_queue.clear();
    assert_eq!(b.next_turn(), Err(crate::EngineError::EmptyQueue));
}

#[test]
fn tie_break_allies_first() {
    let mut b = Battle::new(with_speeds(100.0, 100.0), 0).unwrap();
    let order: Vec<u32> = b.state().turn_queue.iter().map(|e| e.id.0).collect();
    assert_eq!(order, vec![0, 1, 2, 3, FIRST_ENEMY_ID]);
    let (id, _) = b.next_turn().unwrap();
    assert_eq!(id, CombatantId(0));
}

/// Advance to the first on-turn decision for `slot`, answering every other
/// decision with a basic attack or a hold.
fn advance_to_turn_of(b: &mut Battle, slot: u32) -> Decision {
    loop {
        let d = b.advance().unwrap().expect("battle still running");
        match d {
            Decision::OnTurn(id) if id.0 == slot => return d,
            Decision::Interrupt(id) => {
                let hold = ResolvedAction {
                    actor: id,
                    mv: Move::Hold,
                    target: Target::None,
                    off_turn: true,
                };
                b.apply_action(hold).unwrap();
            }
            Decision::OnTurn(_) => {
                let basic = b
                    .current_legal_actions()
                    .into_iter()
                    .find(|a| a.mv == Move::Basic)
                    .unwrap();
                b.apply_action(basic).unwrap();
            }
        }
    }
}

#[test]
fn no_skill_without_points() {
    let mut b = Battle::new(cocolia(), 1).unwrap();
    let d = advance_to_turn_of(&mut b, 0);
    b.state_mut().skill_points = 0;
    let legal = b.legal_actions(d.actor());
    assert!(legal.iter().all(|a| a.mv != Move::Skill));
    assert!(legal.iter().any(|a| a.mv == Move::Basic));
}

#[test]
fn no_ultimate_below_full_energy() {
    let mut b = Battle::new(cocolia(), 1).unwrap();
    let d = advance_to_turn_of(&mut b, 0);
    for c in b.state_mut().roster.iter_mut() {
        c.energy = 0.0;
    }
    assert!(b
        .legal_actions(d.actor())
        .iter()
        .all(|a| a.mv != Move::Ultimate));
}

#[test]
fn interrupt_offer_is_release_or_hold() {
    let mut b = Battle::new(cocolia(), 1).unwrap();
    b.state_mut().roster[0].energy = 120.0;
    let d = b.advance().unwrap().unwrap();
    assert_eq!(d, Decision::Interrupt(CombatantId(0)));
    let legal = b.legal_actions(CombatantId(0));
    let boss = b.state().living_enemies().next().unwrap().id;
    assert_eq!(
        legal,
        vec![
            ResolvedAction {
                actor: CombatantId(0),
                mv: Move::Ultimate,
                target: Target::Single(boss),
                off_turn: true
            },
            ResolvedAction {
                actor: CombatantId(0),
                mv: Move::Hold,
                target: Target::None,
                off_turn: true
            },
        ]
    );
    // other characters cannot act while the offer is pending
    assert!(b.legal_actions(CombatantId(1)).is_empty());
}

#[test]
fn hold_declines_until_own_turn_ends() {
    let mut b = Battle::new(cocolia(), 1).unwrap();
    b.state_mut().roster[3].energy = 135.0;
    let d = b.advance().unwrap().unwrap();
    assert_eq!(d, Decision::Interrupt(CombatantId(3)));
    b.apply_action(ResolvedAction {
        actor: CombatantId(3),
        mv: Move::Hold,
        target: Target::None,
        off_turn: true,
    })
    .unwrap();
    assert!(b.state().roster[3].ult_declined);
    // the next decisions are never a repeat offer for slot 3 until slot 3 acts
    loop {
        match b.advance().unwrap().unwrap() {
            Decision::Interrupt(id) => assert_ne!(id, CombatantId(3)),
            Decision::OnTurn(id) if id == CombatantId(3) => {
                // on-turn ultimate stays available
                assert!(b.legal_actions(id).iter().any(|a| a.mv == Move::Ultimate));
                break;
            }
            Decision::OnTurn(_) => {
                let basic = b.current_legal_actions()[0];
                b.apply_action(basic).unwrap();
            }
        }
    }
}

#[test]
fn basic_caps_skill_points() {
    let mut b = Battle::new(cocolia(), 2).unwrap();
    let d = advance_to_turn_of(&mut b, 1);
    b.state_mut().skill_points = 4;
    let basic = b
        .legal_actions(d.actor())
        .into_iter()
        .find(|a| a.mv == Move::Basic)
        .unwrap();
    let out = b.apply_action(basic).unwrap();
    assert_eq!(out.sp_delta, 1);
    assert_eq!(b.state().skill_points, 5);
    let d = advance_to_turn_of(&mut b, 1);
    let basic = b
        .legal_actions(d.actor())
        .into_iter()
        .find(|a| a.mv == Move::Basic)
        .unwrap();
    b.apply_action(basic).unwrap();
    assert_eq!(b.state().skill_points, 5);
}

#[test]
fn matching_skill_breaks_at_boundary() {
    let mut b = Battle::new(cocolia(), 3).unwrap();
    let d = advance_to_turn_of(&mut b, 0);
    let boss = b.state().living_enemies().next().unwrap().id;
    {
        let st = b.state_mut();
        st.get_mut(boss).unwrap().toughness = 30.0;
        st.skill_points = 3;
    }
    // Seele's skill deals 60 toughness; clamp to the 30 remaining
    let skill = b
        .legal_actions(d.actor())
        .into_iter()
        .find(|a| a.mv == Move::Skill)
        .unwrap();
    let av_before = b
        .state()
        .turn_queue
        .iter()
        .find(|e| e.id == boss)
        .unwrap()
        .av_to_act;
    let out = b.apply_action(skill).unwrap();
    assert!(out.break_triggered);
    assert_eq!(out.toughness_delta, -30.0);
    let boss_state = b.state().get(boss).unwrap();
    assert!(boss_state.broken);
    assert_eq!(boss_state.toughness, 0.0);
    let av_after = b
        .state()
        .turn_queue
        .iter()
        .find(|e| e.id == boss)
        .unwrap()
        .av_to_act;
    // delayed by 25% of 10000/100
    assert!((av_after - av_before - 25.0).abs() < 1e-9);
}

#[test]
fn non_matching_element_never_reduces_toughness() {
    let mut spec = builtin_task(1).unwrap();
    spec.waves[0].enemies[0].weaknesses = vec![Element::Fire];
    let mut b = Battle::new(Arc::new(spec), 3).unwrap();
    for _ in 0..12 {
        let d = b.advance().unwrap().unwrap();
        let a = b.legal_actions(d.actor())[0];
        let out = b.apply_action(a).unwrap();
        assert_eq!(out.toughness_delta, 0.0);
        assert!(!out.break_triggered);
    }
}

#[test]
fn replay_produces_identical_outcomes() {
    let run = || {
        let mut b = Battle::new(cocolia(), 9).unwrap();
        let mut outcomes = Vec::new();
        for i in 0..40 {
            let Some(d) = b.advance().unwrap() else { break };
            let legal = b.legal_actions(d.actor());
            let a = legal[i % legal.len()];
            outcomes.push(serde_json::to_string(&b.apply_action(a).unwrap()).unwrap());
        }
        (outcomes, b.digest())
    };
    assert_eq!(run(), run());
}

#[test]
fn illegal_action_leaves_state_untouched() {
    let mut b = Battle::new(cocolia(), 4).unwrap();
    let d = b.advance().unwrap().unwrap();
    let before = b.digest();
    let bogus = ResolvedAction {
        actor: d.actor(),
        mv: Move::Basic,
        target: Target::Single(CombatantId(99)),
        off_turn: false,
    };
    assert!(b.apply_action(bogus).is_err());
    assert_eq!(b.digest(), before);
}

#[test]
fn termination_victory_defeat_budget() {
    let mut b = Battle::new(cocolia(), 0).unwrap();
    for e in b.state_mut().roster.iter_mut().filter(|c| !c.is_ally()) {
        e.hp = 0.0;
    }
    assert_eq!(b.check_termination(), Termination::Victory);

    let mut b = Battle::new(cocolia(), 0).unwrap();
    for a in b.state_mut().roster.iter_mut().filter(|c| c.is_ally()) {
        a.hp = 0.0;
    }
    assert_eq!(b.check_termination(), Termination::Defeat);

    let mut b = Battle::new(cocolia(), 0).unwrap();
    b.state_mut().step_count = 150;
    assert_eq!(b.check_termination(), Termination::Ongoing);
    b.state_mut().step_count = 151;
    assert_eq!(b.check_termination(), Termination::BudgetExhausted);
}

#[test]
fn wave_transition_keeps_allies() {
    let spec = Arc::new(builtin_task(6).unwrap());
    let mut b = Battle::new(spec.clone(), 0).unwrap();
    b.advance().unwrap();
    b.state_mut().roster[0].hp = 1234.0;
    for e in b.state_mut().roster.iter_mut().filter(|c| !c.is_ally()) {
        e.hp = 0.0;
    }
    assert_eq!(b.check_termination(), Termination::Ongoing);
    assert_eq!(b.state().wave_index, 1);
    assert_eq!(b.state().roster[0].hp, 1234.0);
    assert_eq!(
        b.state().living_enemies().count(),
        spec.waves[1].enemies.len()
    );
    for e in b.state().living_enemies() {
        assert!(b.state().in_queue(e.id));
    }
}

#[test]
fn av_budget_exhausts_pure_fiction() {
    let spec = Arc::new(builtin_task(7).unwrap());
    let mut b = Battle::new(spec, 0).unwrap();
    b.state_mut().av_clock = 450.0;
    assert_eq!(b.check_termination(), Termination::Ongoing);
    b.state_mut().av_clock = 450.5;
    assert_eq!(b.check_termination(), Termination::BudgetExhausted);
}

fn check_invariants(b: &Battle, prev_clock: f64) {
    let s = b.state();
    let cap = b.spec().engine.sp_cap;
    assert!(s.skill_points <= cap);
    assert!(s.av_clock >= prev_clock);
    for c in &s.roster {
        assert!(c.hp >= 0.0 && c.hp <= c.max_hp);
        assert!(c.energy >= 0.0 && c.energy <= c.energy_max);
        assert!(c.toughness <= c.toughness_max);
        if !c.is_ally() && !c.weaknesses.is_empty() {
            assert_eq!(c.broken, c.toughness == 0.0, "{c:?}");
        }
        if !c.is_alive() {
            assert!(!s.in_queue(c.id));
        }
    }
    for w in s.turn_queue.windows(2) {
        assert!(w[0].av_to_act <= w[1].av_to_act);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_play_preserves_invariants(
        task in 1u8..=8,
        seed in 0u64..1000,
        picks in proptest::collection::vec(any::<u16>(), 1..200),
    ) {
        let spec = Arc::new(builtin_task(task).unwrap());
        let mut b = Battle::new(spec.clone(), seed).unwrap();
        let mut clock = 0.0;
        let mut sp_fold = spec.engine.sp_initial;
        for pick in picks {
            let Some(d) = b.advance().unwrap() else { break };
            check_invariants(&b, clock);
            clock = b.state().av_clock;
            let legal = b.legal_actions(d.actor());
            prop_assert!(!legal.is_empty());
            let a = legal[pick as usize % legal.len()];
            if a.mv == Move::Skill {
                prop_assert!(b.state().skill_points >= 1);
            }
            let targets_before: Vec<(CombatantId, f64, f64, Vec<Element>)> = b
                .state()
                .roster
                .iter()
                .map(|c| (c.id, c.hp, c.toughness, c.weaknesses.clone()))
                .collect();
            let element = b.spec().allies[b.state().get(a.actor).unwrap().kit_index].element;
            let out = b.apply_action(a).unwrap();
            match a.mv {
                Move::Basic => { prop_assert_eq!(out.sp_delta, 1); sp_fold = (sp_fold + 1).min(spec.engine.sp_cap); }
                Move::Skill => { prop_assert_eq!(out.sp_delta, -1); sp_fold -= 1; }
                _ => prop_assert_eq!(out.sp_delta, 0),
            }
            prop_assert_eq!(b.state().skill_points, sp_fold);
            if out.break_triggered {
                let hit = targets_before.iter().any(|(_, _, t, w)| *t > 0.0 && w.contains(&element));
                prop_assert!(hit);
            }
            for k in &out.kills {
                prop_assert!(!b.state().in_queue(*k));
                prop_assert!(b
                    .current_legal_actions()
                    .iter()
                    .all(|x| x.target != Target::Single(*k)));
            }
            check_invariants(&b, clock);
        }
    }

    #[test]
    fn next_turn_selects_global_minimum(task in 1u8..=8, seed in 0u64..500, steps in 1usize..60) {
        let spec = Arc::new(builtin_task(task).unwrap());
        let mut b = Battle::new(spec, seed).unwrap();
        for _ in 0..steps {
            let min_av = b.state().turn_queue.iter().map(|e| e.av_to_act).fold(f64::INFINITY, f64::min);
            let clock = b.state().av_clock;
            let Ok((_, adv)) = b.next_turn() else { break };
            prop_assert_eq!(adv, min_av.max(0.0));
            prop_assert!(b.state().av_clock >= clock);
            b.state_mut().current = None;
            b.state_mut().pending_interrupts.clear();
        }
    }
}
