//! Transition kernel.
//!
//! A [`Battle`] owns its task spec and latent state. Enemy turns resolve
//! automatically inside [`Battle::advance`]; it stops whenever an ally
//! decision is required (an on-turn move or an off-turn ultimate offer) or
//! the battle ends. Rejected actions never touch the state.

use std::cmp::Ordering;
use std::sync::Arc;

use super::kit::{AllyKit, Effect, EffectScope, MoveSpec, Targeting};
use super::rng::{derive_seed, EngineRng};
use super::state::{ActiveTurn, BattleState, QueueEntry, ScoreEvent};
use super::task::{EngineConfig, TaskSpec};
use super::types::*;
use crate::error::{ConfigError, EngineError};

#[derive(Debug, Clone, PartialEq)]
pub struct Battle {
    spec: Arc<TaskSpec>,
    state: BattleState,
}

fn enemy_from_spec(spec: &super::kit::EnemySpec, id: u32, kit_index: usize) -> Combatant {
    let mut weaknesses = spec.weaknesses.clone();
    weaknesses.sort();
    weaknesses.dedup();
    Combatant {
        id: CombatantId(id),
        name: spec.name.clone(),
        side: Side::Enemy,
        max_hp: spec.max_hp,
        hp: spec.max_hp,
        speed: spec.speed,
        energy: 0.0,
        energy_max: 1.0,
        element: spec.element,
        weaknesses,
        toughness: spec.toughness,
        toughness_max: spec.toughness,
        broken: false,
        statuses: Vec::new(),
        ult_kind: None,
        ult_declined: false,
        kit_index,
        turns_taken: 0,
        score: spec.score,
    }
}

fn ally_from_kit(kit: &AllyKit, slot: usize, cfg: &EngineConfig) -> Combatant {
    Combatant {
        id: CombatantId(slot as u32),
        name: kit.name.clone(),
        side: Side::Ally,
        max_hp: kit.max_hp,
        hp: kit.max_hp,
        speed: kit.speed,
        energy: kit.energy_max * cfg.initial_energy,
        energy_max: kit.energy_max,
        element: kit.element,
        weaknesses: Vec::new(),
        toughness: 0.0,
        toughness_max: 0.0,
        broken: false,
        statuses: Vec::new(),
        ult_kind: Some(kit.ult_kind),
        ult_declined: false,
        kit_index: slot,
        turns_taken: 0,
        score: 0.0,
    }
}

impl Battle {
    /// Instantiate a task for one episode.
    pub fn new(spec: Arc<TaskSpec>, seed: u64) -> Result<Self, ConfigError> {
        spec.validate()?;
        let cfg = &spec.engine;
        let mut roster: Vec<Combatant> = spec
            .allies
            .iter()
            .enumerate()
            .map(|(slot, kit)| ally_from_kit(kit, slot, cfg))
            .collect();
        let mut next_enemy_id = FIRST_ENEMY_ID;
        for (i, en) in spec.waves[0].enemies.iter().enumerate() {
            roster.push(enemy_from_spec(en, next_enemy_id, i));
            next_enemy_id += 1;
        }
        let state = BattleState {
            roster,
            skill_points: cfg.sp_initial,
            av_clock: 0.0,
            turn_queue: Vec::new(),
            wave_index: 0,
            pending_interrupts: Vec::new(),
            current: None,
            extra_turn: None,
            rng: EngineRng::new(derive_seed(spec.seed_base, seed)),
            score_events: Vec::new(),
            step_count: 0,
            last_action_damage: 0.0,
            next_enemy_id,
            termination: Termination::Ongoing,
        };
        let mut battle = Battle { spec, state };
        let ids: Vec<CombatantId> = battle.state.roster.iter().map(|c| c.id).collect();
        for id in ids {
            let av = battle.base_interval(id);
            battle.enqueue(id, av);
        }
        Ok(battle)
    }

    /// Rebuild a battle around a previously captured state.
    pub fn from_parts(spec: Arc<TaskSpec>, state: BattleState) -> Self {
        Battle { spec, state }
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn spec_arc(&self) -> &Arc<TaskSpec> {
        &self.spec
    }

    pub fn state(&self) -> &BattleState {
        &self.state
    }

    #[cfg(test)]
    pub(crate) fn state_mut(&mut self) -> &mut BattleState {
        &mut self.state
    }

    pub fn digest(&self) -> String {
        self.state.digest()
    }

    fn cfg(&self) -> &EngineConfig {
        &self.spec.engine
    }

    fn combatant(&self, id: CombatantId) -> &Combatant {
        self.state.get(id).expect("combatant id refers to roster")
    }

    fn combatant_mut(&mut self, id: CombatantId) -> &mut Combatant {
        self.state
            .get_mut(id)
            .expect("combatant id refers to roster")
    }

    fn kit_of(&self, id: CombatantId) -> &AllyKit {
        &self.spec.allies[self.combatant(id).kit_index]
    }

    fn base_interval(&self, id: CombatantId) -> f64 {
        self.cfg().av_base / self.combatant(id).effective_speed()
    }

    fn queue_key(&self, entry: &QueueEntry) -> (f64, u8, usize) {
        let idx = self.state.index_of(entry.id).unwrap_or(usize::MAX);
        let side = match self.state.roster.get(idx).map(|c| c.side) {
            Some(Side::Ally) => 0,
            _ => 1,
        };
        (entry.av_to_act, side, idx)
    }

    fn cmp_entries(&self, a: &QueueEntry, b: &QueueEntry) -> Ordering {
        let (av_a, side_a, idx_a) = self.queue_key(a);
        let (av_b, side_b, idx_b) = self.queue_key(b);
        av_a.total_cmp(&av_b)
            .then(side_a.cmp(&side_b))
            .then(idx_a.cmp(&idx_b))
    }

    fn sort_queue(&mut self) {
        let mut queue = std::mem::take(&mut self.state.turn_queue);
        queue.sort_by(|a, b| self.cmp_entries(a, b));
        self.state.turn_queue = queue;
    }

    fn enqueue(&mut self, id: CombatantId, av_to_act: f64) {
        self.state.turn_queue.retain(|e| e.id != id);
        self.state.turn_queue.push(QueueEntry { id, av_to_act });
        self.sort_queue();
    }

    /// Pop the next actor, advance the AV clock, and hand the turn over.
    /// Full-energy allies receive an ultimate offer before the new turn starts.
    pub fn next_turn(&mut self) -> Result<(CombatantId, f64), EngineError> {
        if self.state.turn_queue.is_empty() {
            return Err(EngineError::EmptyQueue);
        }
        let entry = self.state.turn_queue.remove(0);
        let advanced = entry.av_to_act.max(0.0);
        self.state.av_clock += advanced;
        for e in &mut self.state.turn_queue {
            e.av_to_act = (e.av_to_act - advanced).max(0.0);
        }
        self.sort_queue();
        self.state.current = Some(ActiveTurn {
            id: entry.id,
            extra: false,
        });
        self.offer_interrupts();
        Ok((entry.id, advanced))
    }

    fn offer_interrupts(&mut self) {
        let ready: Vec<CombatantId> = self
            .state
            .living_allies()
            .filter(|c| c.energy_full() && !c.ult_declined)
            .map(|c| c.id)
            .collect();
        for id in ready {
            if !self.state.pending_interrupts.contains(&id) {
                self.state.pending_interrupts.push(id);
            }
        }
    }

    /// The decision currently awaiting an agent, if any.
    pub fn decision(&self) -> Option<Decision> {
        if self.state.termination != Termination::Ongoing {
            return None;
        }
        if let Some(&id) = self.state.pending_interrupts.first() {
            let c = self.state.get(id)?;
            if c.is_alive() && c.energy_full() {
                return Some(Decision::Interrupt(id));
            }
        }
        let turn = self.state.current?;
        let c = self.state.get(turn.id)?;
        (c.is_ally() && c.is_alive()).then_some(Decision::OnTurn(turn.id))
    }

    /// Run enemy turns and turn handovers until an ally decision is needed or
    /// the battle ends.
    pub fn advance(&mut self) -> Result<Option<Decision>, EngineError> {
        loop {
            if self.check_termination() != Termination::Ongoing {
                return Ok(None);
            }
            while let Some(&id) = self.state.pending_interrupts.first() {
                let c = self.combatant(id);
                if c.is_alive() && c.energy_full() {
                    return Ok(Some(Decision::Interrupt(id)));
                }
                self.state.pending_interrupts.remove(0);
            }
            match self.state.current {
                Some(turn) => {
                    let c = self.combatant(turn.id);
                    if !c.is_alive() {
                        self.state.current = None;
                    } else if c.is_ally() {
                        return Ok(Some(Decision::OnTurn(turn.id)));
                    } else {
                        self.enemy_turn(turn.id);
                    }
                }
                None => {
                    if let Some(id) = self.state.extra_turn.take() {
                        if self.combatant(id).is_alive() {
                            self.state.current = Some(ActiveTurn { id, extra: true });
                            self.offer_interrupts();
                        }
                        continue;
                    }
                    self.next_turn()?;
                }
            }
        }
    }

    fn targets_for(&self, targeting: Targeting) -> Vec<Target> {
        match targeting {
            Targeting::SingleEnemy => self
                .state
                .living_enemies()
                .map(|c| Target::Single(c.id))
                .collect(),
            Targeting::SingleAlly => self
                .state
                .living_allies()
                .map(|c| Target::Single(c.id))
                .collect(),
            Targeting::AllEnemies => vec![Target::AllEnemies],
            Targeting::AllAllies => vec![Target::AllAllies],
        }
    }

    /// Every action `actor` may take right now; empty unless `actor` holds
    /// the pending decision.
    pub fn legal_actions(&self, actor: CombatantId) -> Vec<ResolvedAction> {
        let Some(decision) = self.decision() else {
            return Vec::new();
        };
        if decision.actor() != actor {
            return Vec::new();
        }
        let kit = self.kit_of(actor);
        let mut out = Vec::new();
        let push = |mv: Move, spec: &MoveSpec, off_turn: bool, out: &mut Vec<ResolvedAction>| {
            for target in self.targets_for(spec.targeting) {
                out.push(ResolvedAction {
                    actor,
                    mv,
                    target,
                    off_turn,
                });
            }
        };
        match decision {
            Decision::Interrupt(_) => {
                push(Move::Ultimate, &kit.ultimate, true, &mut out);
                out.push(ResolvedAction {
                    actor,
                    mv: Move::Hold,
                    target: Target::None,
                    off_turn: true,
                });
            }
            Decision::OnTurn(_) => {
                push(Move::Basic, &kit.basic, false, &mut out);
                if self.state.skill_points >= 1 {
                    push(Move::Skill, &kit.skill, false, &mut out);
                }
                if self.combatant(actor).energy_full() {
                    push(Move::Ultimate, &kit.ultimate, false, &mut out);
                }
            }
        }
        out
    }

    pub fn current_legal_actions(&self) -> Vec<ResolvedAction> {
        self.decision()
            .map(|d| self.legal_actions(d.actor()))
            .unwrap_or_default()
    }

    /// Resolve an agent action. Illegal actions are rejected without mutation.
    pub fn apply_action(&mut self, action: ResolvedAction) -> Result<ActionOutcome, EngineError> {
        let decision = self.decision().ok_or(EngineError::NoDecision)?;
        if !self.legal_actions(decision.actor()).contains(&action) {
            return Err(EngineError::IllegalAction(action));
        }
        let outcome = match action.mv {
            Move::Hold => {
                self.state.pending_interrupts.remove(0);
                self.combatant_mut(action.actor).ult_declined = true;
                ActionOutcome::default()
            }
            Move::Ultimate => {
                let outcome = self.resolve_move(action);
                if action.off_turn {
                    self.state
                        .pending_interrupts
                        .retain(|&id| id != action.actor);
                }
                outcome
            }
            Move::Basic | Move::Skill => {
                let outcome = self.resolve_move(action);
                let killed_enemy = !outcome.kills.is_empty();
                self.end_turn(killed_enemy);
                outcome
            }
        };
        if action.mv != Move::Hold {
            self.state.last_action_damage = outcome.damage_dealt;
        }
        self.state.step_count += 1;
        Ok(outcome)
    }

    /// A timed-out decision: holds an ultimate offer or passes the turn.
    /// Counts toward the step budget like any other decision.
    pub fn apply_noop(&mut self) -> Result<(), EngineError> {
        match self.decision().ok_or(EngineError::NoDecision)? {
            Decision::Interrupt(id) => {
                self.state.pending_interrupts.remove(0);
                self.combatant_mut(id).ult_declined = true;
            }
            Decision::OnTurn(_) => self.end_turn(false),
        }
        self.state.step_count += 1;
        Ok(())
    }

    fn resolve_move(&mut self, action: ResolvedAction) -> ActionOutcome {
        let spec = Arc::clone(&self.spec);
        let kit = &spec.allies[self.combatant(action.actor).kit_index];
        let mv = kit.move_spec(action.mv).expect("hold handled by caller");
        let mut outcome = ActionOutcome::default();

        let targets: Vec<CombatantId> = match action.target {
            Target::Single(id) => vec![id],
            Target::AllEnemies => self.state.living_enemies().map(|c| c.id).collect(),
            Target::AllAllies => self.state.living_allies().map(|c| c.id).collect(),
            Target::None => Vec::new(),
        };

        if action.mv == Move::Ultimate {
            self.combatant_mut(action.actor).energy = 0.0;
        }

        if mv.damage > 0.0 && mv.targeting.hits_enemies() {
            for &t in &targets {
                self.hit_enemy(action.actor, t, kit, mv, &mut outcome);
            }
        }

        for effect in &mv.effects {
            self.apply_effect(action.actor, &targets, effect, &mut outcome);
        }

        let actor = self.combatant_mut(action.actor);
        let before = actor.energy;
        actor.energy = (actor.energy + mv.energy_gain).min(actor.energy_max);
        let gained = actor.energy - before;
        *outcome.energy_gains.entry(action.actor).or_insert(0.0) += gained;

        let cap = self.cfg().sp_cap;
        match action.mv {
            Move::Basic => {
                self.state.skill_points = (self.state.skill_points + 1).min(cap);
                outcome.sp_delta = 1;
            }
            Move::Skill => {
                self.state.skill_points -= 1;
                outcome.sp_delta = -1;
            }
            _ => {}
        }
        outcome
    }

    fn hit_enemy(
        &mut self,
        actor: CombatantId,
        target: CombatantId,
        kit: &AllyKit,
        mv: &MoveSpec,
        outcome: &mut ActionOutcome,
    ) {
        let vulnerability = self.cfg().break_vulnerability;
        let dealt = (1.0 + self.combatant(actor).stat_sum(StatAffected::DamageDealt)).max(0.0);
        let taken = (1.0 + self.combatant(target).incoming_modifier(vulnerability)).max(0.0);
        let roll = self.state.rng.unit();
        let crit = if roll < kit.crit_rate {
            1.0 + kit.crit_damage
        } else {
            1.0
        };
        let damage = mv.damage * dealt * taken * crit;
        outcome.damage_dealt += damage;

        let element = kit.element;
        let t = self.combatant_mut(target);
        let hp_before = t.hp;
        t.hp = (t.hp - damage).max(0.0);
        let hp_delta = t.hp - hp_before;
        let mut broke = false;
        if mv.toughness > 0.0 && t.toughness > 0.0 && t.weaknesses.contains(&element) {
            let before = t.toughness;
            t.toughness = (t.toughness - mv.toughness).max(0.0);
            outcome.toughness_delta += t.toughness - before;
            if t.toughness == 0.0 {
                t.broken = true;
                broke = true;
            }
        }
        let died = hp_before > 0.0 && t.hp == 0.0;
        *outcome.hp_deltas.entry(target).or_insert(0.0) += hp_delta;

        if broke {
            outcome.break_triggered = true;
            if !died {
                let delay = self.cfg().break_delay * self.base_interval(target);
                self.delay(target, delay);
            }
        }
        if died {
            self.kill(target, outcome);
        }
    }

    fn delay(&mut self, id: CombatantId, amount: f64) {
        if let Some(turn) = self.state.current {
            if turn.id == id {
                // Broken before its pending turn started: push the turn back.
                self.state.current = None;
                self.enqueue(id, amount);
                return;
            }
        }
        if let Some(e) = self.state.turn_queue.iter_mut().find(|e| e.id == id) {
            e.av_to_act += amount;
            self.sort_queue();
        }
    }

    fn kill(&mut self, id: CombatantId, outcome: &mut ActionOutcome) {
        self.state.turn_queue.retain(|e| e.id != id);
        self.state.pending_interrupts.retain(|&p| p != id);
        if self.state.current.map(|t| t.id) == Some(id) {
            self.state.current = None;
        }
        if self.state.extra_turn == Some(id) {
            self.state.extra_turn = None;
        }
        let c = self.combatant(id);
        if c.side == Side::Enemy {
            let points = c.score;
            let stamp = self.state.av_clock;
            self.state.score_events.push(ScoreEvent {
                av_stamp: stamp,
                points,
            });
        }
        outcome.kills.push(id);
    }

    fn recipients(
        &self,
        actor: CombatantId,
        targets: &[CombatantId],
        scope: EffectScope,
    ) -> Vec<CombatantId> {
        let ids: Vec<CombatantId> = match scope {
            EffectScope::Target => targets.to_vec(),
            EffectScope::Actor => vec![actor],
            EffectScope::AllAllies => self.state.living_allies().map(|c| c.id).collect(),
            EffectScope::AllEnemies => self.state.living_enemies().map(|c| c.id).collect(),
        };
        ids.into_iter()
            .filter(|&id| self.combatant(id).is_alive())
            .collect()
    }

    fn apply_effect(
        &mut self,
        actor: CombatantId,
        targets: &[CombatantId],
        effect: &Effect,
        outcome: &mut ActionOutcome,
    ) {
        match effect {
            Effect::Status {
                on,
                kind,
                name,
                affects,
                magnitude,
                turns,
                chance,
            } => {
                for id in self.recipients(actor, targets, *on) {
                    if *chance < 1.0 && self.state.rng.unit() >= *chance {
                        continue;
                    }
                    self.combatant_mut(id).add_status(Status {
                        kind: *kind,
                        name: name.clone(),
                        magnitude: *magnitude,
                        remaining_turns: *turns,
                        affects: *affects,
                    });
                }
            }
            Effect::AdvanceTurn { fraction } => {
                for id in self.recipients(actor, targets, EffectScope::Target) {
                    let amount = fraction * self.base_interval(id);
                    if let Some(e) = self.state.turn_queue.iter_mut().find(|e| e.id == id) {
                        e.av_to_act = (e.av_to_act - amount).max(0.0);
                    }
                }
                self.sort_queue();
            }
            Effect::ImplantWeakness { element } => {
                for id in self.recipients(actor, targets, EffectScope::Target) {
                    let c = self.combatant_mut(id);
                    if c.side == Side::Enemy && !c.weaknesses.contains(element) {
                        c.weaknesses.push(*element);
                        c.weaknesses.sort();
                    }
                }
            }
            Effect::Heal { fraction } => {
                for id in self.recipients(actor, targets, EffectScope::Target) {
                    let c = self.combatant_mut(id);
                    let before = c.hp;
                    c.hp = (c.hp + fraction * c.max_hp).min(c.max_hp);
                    let delta = c.hp - before;
                    *outcome.hp_deltas.entry(id).or_insert(0.0) += delta;
                }
            }
        }
    }

    fn end_turn(&mut self, killed_enemy: bool) {
        let Some(turn) = self.state.current.take() else {
            return;
        };
        let id = turn.id;
        let c = self.combatant_mut(id);
        c.tick_statuses();
        c.turns_taken += 1;
        let is_ally = c.is_ally();
        if is_ally {
            c.ult_declined = false;
        } else if c.broken {
            c.toughness = c.toughness_max;
            c.broken = false;
        }
        let alive = c.is_alive();
        if alive && !turn.extra {
            let av = self.base_interval(id);
            self.enqueue(id, av);
        }
        if alive && is_ally && killed_enemy && !turn.extra && self.kit_of(id).extra_turn_on_kill {
            self.state.extra_turn = Some(id);
        }
    }

    fn enemy_turn(&mut self, id: CombatantId) {
        let spec = Arc::clone(&self.spec);
        let enemy = self.combatant(id);
        let wave = &spec.waves[self.state.wave_index as usize];
        let attacks = &wave.enemies[enemy.kit_index].attacks;
        let attack = &attacks[enemy.turns_taken as usize % attacks.len()];
        let dealt = (1.0 + enemy.stat_sum(StatAffected::DamageDealt)).max(0.0);

        let victims: Vec<CombatantId> = if attack.area {
            self.state.living_allies().map(|c| c.id).collect()
        } else {
            self.state
                .living_allies()
                .min_by(|a, b| a.hp.total_cmp(&b.hp))
                .map(|c| vec![c.id])
                .unwrap_or_default()
        };
        let energy_on_hit = self.cfg().energy_on_hit;
        let mut scratch = ActionOutcome::default();
        for v in victims {
            let ally = self.combatant_mut(v);
            let taken = (1.0 + ally.incoming_modifier(0.0)).max(0.0);
            let damage = attack.damage * dealt * taken;
            ally.hp = (ally.hp - damage).max(0.0);
            if ally.is_alive() {
                ally.energy = (ally.energy + energy_on_hit).min(ally.energy_max);
            } else {
                self.kill(v, &mut scratch);
            }
        }
        self.end_turn(false);
    }

    /// Evaluate (and latch) the battle outcome. Clearing a non-final wave
    /// spawns the next one, keeping ally state.
    pub fn check_termination(&mut self) -> Termination {
        if self.state.termination != Termination::Ongoing {
            return self.state.termination;
        }
        let result = loop {
            if self.state.living_allies().next().is_none() {
                break Termination::Defeat;
            }
            if self.state.living_enemies().next().is_none() {
                if (self.state.wave_index as usize) + 1 < self.spec.waves.len() {
                    self.spawn_next_wave();
                    continue;
                }
                break Termination::Victory;
            }
            if self.state.step_count > self.spec.step_budget {
                break Termination::BudgetExhausted;
            }
            if let Some(budget) = self.spec.effective_av_budget() {
                if self.state.av_clock > budget {
                    break Termination::BudgetExhausted;
                }
            }
            break Termination::Ongoing;
        };
        self.state.termination = result;
        result
    }

    fn spawn_next_wave(&mut self) {
        self.state.roster.retain(|c| c.side == Side::Ally);
        self.state.turn_queue.retain(|e| (e.id.0) < FIRST_ENEMY_ID);
        if let Some(turn) = self.state.current {
            if turn.id.0 >= FIRST_ENEMY_ID {
                self.state.current = None;
            }
        }
        self.state.wave_index += 1;
        let spec = Arc::clone(&self.spec);
        let wave = &spec.waves[self.state.wave_index as usize];
        for (i, en) in wave.enemies.iter().enumerate() {
            let id = self.state.next_enemy_id;
            self.state.next_enemy_id += 1;
            self.state.roster.push(enemy_from_spec(en, id, i));
            let c = CombatantId(id);
            let av = self.base_interval(c);
            self.enqueue(c, av);
        }
    }

    pub fn termination(&self) -> Termination {
        self.state.termination
    }
}
