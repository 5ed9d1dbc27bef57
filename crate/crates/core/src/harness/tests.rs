use std::sync::Arc;
use std::time::Duration;

use super::*;
use crate::engine::{builtin_task, TaskSpec};
use crate::interface::{canonical_dc, execute_ta, DcPrimitive, IllegalReason, MissReason};

fn task(id: u8) -> Arc<TaskSpec> {
    Arc::new(builtin_task(id).unwrap())
}

fn episode(id: u8, regime: Regime, seed: u64) -> Episode {
    Episode::new(task(id), EpisodeConfig::new(regime, seed)).unwrap()
}

fn raw(r: Response) -> AgentOutput {
    AgentOutput::response(&r)
}

fn prim_response(p: &DcPrimitive) -> Response {
    match p {
        DcPrimitive::Click { x, y } => Response::Click { x: *x, y: *y },
        DcPrimitive::Key { key } => Response::Key { key: key.clone() },
        DcPrimitive::Empty => Response::Empty,
    }
}

/// Plays a direct-control episode by clicking out the autobattle choice.
fn play_dc_autobattle(ep: &mut Episode) {
    while !ep.is_finished() {
        ep.request();
        let obs = crate::observation::textify(ep.battle(), true);
        let mask = crate::interface::legal_mask(ep.battle());
        let triple = autobattle_policy(&obs, &mask).unwrap();
        let action = execute_ta(ep.battle(), triple).unwrap();
        let frame = ep.frame();
        for p in canonical_dc(&frame, &action).unwrap() {
            ep.submit(raw(prim_response(&p))).unwrap();
        }
    }
}

#[test]
fn baselines_finish_every_task() {
    for id in 1..=8 {
        let spec = task(id);
        let r = play(&spec, Regime::Ta, 3, &mut AutobattleAgent).unwrap();
        assert_eq!(r.t_steps.is_some(), r.victory(), "task {id}");
        assert_eq!(r.rejections, 0);
        assert!(r.steps <= spec.step_budget + 1);
        let r = play(&spec, Regime::TaNoOcr, 3, &mut RandomAgent::new(3)).unwrap();
        assert_eq!(r.rejections, 0, "random draws from the mask");
        assert_eq!(r.family, spec.family);
    }
}

#[test]
fn same_seed_same_log() {
    let run = || {
        let mut ep = episode(2, Regime::Ta, 11);
        run_episode(&mut ep, &mut RandomAgent::new(5)).unwrap();
        (ep.result().cloned().unwrap(), ep.log_jsonl())
    };
    let (a, log_a) = run();
    let (b, log_b) = run();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_eq!(log_a, log_b);
}

#[test]
fn replay_reproduces_the_result() {
    for regime in [Regime::Ta, Regime::TaAsk] {
        let mut ep = episode(1, regime, 4);
        run_episode(&mut ep, &mut AutobattleAgent).unwrap();
        let records = parse_log(&ep.log_jsonl()).unwrap();
        let report = replay(&records, builtin_oracle()).unwrap();
        assert_eq!(report.final_digest, ep.digest());
        assert_eq!(report.result.as_ref(), ep.result());
        assert!(!report.incomplete);
    }
}

#[test]
fn tampered_log_diverges() {
    let mut ep = episode(1, Regime::Ta, 4);
    run_episode(&mut ep, &mut AutobattleAgent).unwrap();
    let mut records = parse_log(&ep.log_jsonl()).unwrap();
    if let LogRecord::Exchange(x) = &mut records[3] {
        x.state_digest = "0".repeat(64);
    }
    assert!(matches!(
        replay(&records, builtin_oracle()),
        Err(ReplayError::Diverged { index: 3, .. })
    ));
}

#[test]
fn cut_log_resumes_to_the_same_end() {
    let mut full = episode(3, Regime::Ta, 9);
    run_episode(&mut full, &mut AutobattleAgent).unwrap();
    let text = full.log_jsonl();
    // Keep the header and a few exchanges, then half of the next line.
    let lines: Vec<&str> = text.lines().collect();
    let mut cut = lines[..6].join("\n");
    cut.push('\n');
    cut.push_str(&lines[6][..lines[6].len() / 2]);
    let records = parse_log(&cut).unwrap();
    assert_eq!(records.len(), 6);
    let mut resumed = restore(&records, builtin_oracle()).unwrap();
    assert!(!resumed.is_finished());
    run_episode(&mut resumed, &mut AutobattleAgent).unwrap();
    assert_eq!(resumed.result(), full.result());
    assert_eq!(resumed.log_jsonl(), text);
}

#[test]
fn ta_aborts_on_the_tenth_rejection() {
    let mut ep = episode(1, Regime::Ta, 0);
    for i in 1..=9 {
        let rec = ep.submit(AgentOutput::raw("not json")).unwrap();
        assert_eq!(
            rec.resolution,
            Resolution::Illegal {
                reason: IllegalReason::Malformed,
                triple: None,
                consecutive: i
            }
        );
    }
    assert!(!ep.is_finished());
    let legal = crate::interface::legal_mask(ep.battle())[0];
    ep.submit(raw(Response::triple(legal))).unwrap();
    assert_eq!(ep.failures().consecutive(), 0);
    for _ in 0..9 {
        ep.submit(raw(Response::Triple { c: 0, m: 7, t: 4 }))
            .unwrap();
    }
    assert!(!ep.is_finished());
    ep.submit(raw(Response::Triple { c: 0, m: 7, t: 4 }))
        .unwrap();
    let r = ep.result().unwrap();
    assert_eq!(
        r.outcome,
        Outcome::Aborted {
            reason: AbortReason::InvalidAction
        }
    );
    assert_eq!(r.steps, 1);
    assert_eq!(r.rejections, 19);
    assert!(matches!(
        ep.submit(AgentOutput::raw("")),
        Err(EpisodeError::Finished)
    ));
}

#[test]
fn rejections_do_not_touch_the_battle() {
    let mut ep = episode(1, Regime::Ta, 0);
    let before = ep.digest();
    for out in [
        AgentOutput::raw("{}"),
        raw(Response::Triple { c: 9, m: 0, t: 4 }),
        raw(Response::Act),
    ] {
        let rec = ep.submit(out).unwrap();
        assert!(rec.resolution.is_rejection());
        assert_eq!(rec.state_digest, before);
    }
}

#[test]
fn dc_staging_is_neutral_and_misses_abort() {
    let mut ep = episode(1, Regime::Dc, 0);
    ep.request();
    let frame = ep.frame();
    let basic = frame
        .widget(crate::observation::WidgetKind::BasicButton, 0)
        .unwrap()
        .rect
        .center();
    for i in 1..=9 {
        let rec = ep.submit(raw(Response::Click { x: 5, y: 5 })).unwrap();
        assert_eq!(
            rec.resolution,
            Resolution::Miss {
                reason: MissReason::Background,
                consecutive: i
            }
        );
    }
    let rec = ep
        .submit(raw(Response::Click {
            x: i64::from(basic.0),
            y: i64::from(basic.1),
        }))
        .unwrap();
    assert!(matches!(rec.resolution, Resolution::Staged { .. }));
    assert_eq!(ep.failures().consecutive(), 9);
    assert!(!ep.is_finished());
    ep.submit(AgentOutput::raw("garbage")).unwrap();
    assert_eq!(
        ep.result().unwrap().outcome,
        Outcome::Aborted {
            reason: AbortReason::DcLocalization
        }
    );
}

#[test]
fn dc_clicks_reach_the_same_end_as_triples() {
    for id in [1, 4, 7] {
        let mut dc = episode(id, Regime::Dc, 2);
        play_dc_autobattle(&mut dc);
        let mut ta = episode(id, Regime::Ta, 2);
        run_episode(&mut ta, &mut AutobattleAgent).unwrap();
        let (d, t) = (dc.result().unwrap(), ta.result().unwrap());
        assert_eq!(d.final_digest, t.final_digest, "task {id}");
        assert_eq!(d.outcome, t.outcome);
        assert_eq!(d.score, t.score);
        assert_eq!(d.steps, t.steps);
        assert!(d.exchanges >= t.exchanges);
    }
}

#[test]
fn timeouts_pass_the_decision() {
    let mut ep = episode(1, Regime::Ta, 0);
    let rec = ep.submit(AgentOutput::Timeout).unwrap();
    assert_eq!(rec.resolution, Resolution::Timeout);
    assert_eq!(ep.battle().state().step_count, 1);
    assert_eq!(ep.failures().consecutive(), 0);
    assert!(rec.reward.is_some());
}

#[test]
fn transport_failure_aborts() {
    let mut ep = episode(1, Regime::Dc, 0);
    ep.submit(AgentOutput::Transport {
        error: "pipe closed".into(),
    })
    .unwrap();
    assert_eq!(
        ep.result().unwrap().outcome,
        Outcome::Aborted {
            reason: AbortReason::Transport
        }
    );
}

#[test]
fn endless_staging_hits_the_exchange_cap() {
    let mut config = EpisodeConfig::new(Regime::Dc, 0);
    config.exchange_cap = Some(40);
    let mut ep = Episode::new(task(1), config).unwrap();
    let frame = ep.frame();
    let (x, y) = frame
        .widget(crate::observation::WidgetKind::BasicButton, 0)
        .unwrap()
        .rect
        .center();
    let mut agent = ScriptedAgent::new((0..100).map(|_| {
        raw(Response::Click {
            x: i64::from(x),
            y: i64::from(y),
        })
    }));
    let r = run_episode(&mut ep, &mut agent).unwrap();
    assert_eq!(
        r.outcome,
        Outcome::Aborted {
            reason: AbortReason::ExchangeCap
        }
    );
    assert_eq!(r.exchanges, 40);
    assert_eq!(r.steps, 0);
}

#[test]
fn envelopes_stay_within_their_regime() {
    let mut dc = episode(1, Regime::Dc, 0);
    let v = serde_json::to_value(dc.request().unwrap()).unwrap();
    assert!(v.get("mask").is_none());
    assert_eq!(v["observation"]["kind"], "frame");
    assert!(v["observation"].get("enemies").is_none());
    assert!(v.to_string().find("hint").is_none());

    let mut ta = episode(1, Regime::Ta, 0);
    let v = serde_json::to_value(ta.request().unwrap()).unwrap();
    assert_eq!(v["observation"]["kind"], "structured");
    assert!(v["mask"].as_array().is_some_and(|m| !m.is_empty()));
    assert!(v["observation"].get("hint").is_none());
    assert!(v["observation"]["enemies"][0].get("hp_pct").is_some());

    let mut no_ocr = episode(1, Regime::TaNoOcr, 0);
    let v = serde_json::to_value(no_ocr.request().unwrap()).unwrap();
    assert!(v["observation"]["enemies"][0].get("hp_pct").is_none());
    assert!(v["observation"].get("skill_points").is_none());
}

#[test]
fn ask_point_hint_persists_for_the_episode() {
    let mut ep = episode(1, Regime::TaAsk, 0);
    assert!(matches!(ep.request(), Some(Request::AskPoint { .. })));
    let rec = ep
        .submit(raw(Response::Ask {
            question: "what is the boss weak to?".into(),
        }))
        .unwrap();
    let Resolution::AskPoint { choice, hint, .. } = rec.resolution else {
        panic!("ask point")
    };
    assert_eq!(choice, crate::askoract::AskChoice::Ask);
    let hint = hint.unwrap().text;
    assert_eq!(rec.state_digest, ep.digest());

    let rec = ep
        .submit(raw(Response::Ask {
            question: "again?".into(),
        }))
        .unwrap();
    assert!(matches!(
        rec.resolution,
        Resolution::AskRejected {
            error: crate::askoract::AskError::CombatStarted,
            consecutive: 1
        }
    ));
    let mut seen = 0;
    while let Some(req) = ep.request() {
        assert_eq!(
            req.structured().unwrap().hint.as_deref(),
            Some(hint.as_str())
        );
        seen += 1;
        ep.submit(AutobattleAgent.respond(&req)).unwrap();
    }
    assert!(seen > 3);
    let r = ep.result().unwrap();
    assert_eq!(r.asked, Some(true));
    assert_eq!(r.rejected_asks, 1);
    assert_eq!(r.hint.as_deref(), Some(hint.as_str()));
}

#[test]
fn acting_leaves_no_hint() {
    let mut ep = episode(2, Regime::TaAsk, 0);
    ep.submit(raw(Response::Act)).unwrap();
    let req = ep.request().unwrap();
    assert!(req.structured().unwrap().hint.is_none());
    let mut bad = episode(2, Regime::TaAsk, 0);
    bad.submit(AgentOutput::raw("what?")).unwrap();
    assert!(!bad.ask_session().asked());
}

#[test]
fn evaluation_feeds_the_decision_log_forward() {
    let mut plan = EvaluationPlan::new(vec![task(1), task(3)], Regime::TaAsk, 3);
    plan.agent = "probe".into();
    let report = run_evaluation(&plan, &mut |_, config| {
        let k = config.k;
        let mut first = true;
        Ok(Box::new(FnAgent::new(
            "probe",
            move |req: &Request| match req {
                Request::AskPoint { .. } if first => {
                    first = false;
                    if k % 2 == 0 {
                        AgentOutput::response(&Response::Ask {
                            question: "skill points".into(),
                        })
                    } else {
                        AgentOutput::response(&Response::Act)
                    }
                }
                _ => AutobattleAgent.respond(req),
            },
        )))
    })
    .unwrap();
    assert_eq!(report.results.len(), 6);
    assert_eq!(
        report
            .results
            .iter()
            .filter(|r| r.asked == Some(true))
            .count(),
        2
    );
    let ask = report.ask.unwrap();
    assert!((ask.ar - 100.0 / 3.0).abs() < 1e-9);
    assert_eq!(ask.m, 2);
    assert_eq!(report.rows.len(), 2);
}

#[test]
fn ask_point_lists_earlier_episodes() {
    let plan = EvaluationPlan::new(vec![task(1)], Regime::TaAsk, 3);
    let lens = Arc::new(std::sync::Mutex::new(Vec::new()));
    let sink = Arc::clone(&lens);
    run_evaluation(&plan, &mut |_, _| {
        let sink = sink.clone();
        Ok(Box::new(FnAgent::new("a", move |req: &Request| {
            if let Request::AskPoint { decision_log, .. } = req {
                sink.lock().unwrap().push(decision_log.len());
            }
            AutobattleAgent.respond(req)
        })))
    })
    .unwrap();
    assert_eq!(*lens.lock().unwrap(), vec![0, 1, 2]);
}

#[test]
fn report_marks_infinite_steps() {
    let spec = task(1);
    let results: Vec<EpisodeResult> = (0..4)
        .map(|s| {
            let mut ep = Episode::new(
                Arc::clone(&spec),
                EpisodeConfig::new(Regime::Ta, s).with_agent("x"),
            )
            .unwrap();
            for _ in 0..10 {
                ep.submit(AgentOutput::raw("no")).unwrap();
            }
            ep.result().cloned().unwrap()
        })
        .collect();
    let report = EvaluationReport::from_results("x", Regime::Ta, results);
    let row = report.row(1).unwrap();
    assert_eq!(row.sr, 0.0);
    assert!(row.steps.is_none());
    assert!(report.to_text().contains('∞'));
}

#[test]
fn report_rows_recompute_from_results() {
    let plan = EvaluationPlan::new(vec![task(1), task(5)], Regime::Ta, 6);
    let report = run_evaluation(&plan, &mut |_, c| Ok(Box::new(RandomAgent::new(c.seed)))).unwrap();
    for row in &report.rows {
        let mine: Vec<_> = report
            .results
            .iter()
            .filter(|r| r.task_id == row.task_id)
            .collect();
        assert_eq!(row.episodes as usize, mine.len());
        let wins = mine.iter().filter(|r| r.victory()).count();
        assert!((row.sr - 100.0 * wins as f64 / mine.len() as f64).abs() < 1e-12);
    }
    let regrouped = EvaluationReport::group(report.results.clone());
    assert_eq!(regrouped.len(), 1);
    assert_eq!(regrouped[0].rows, report.rows);
}

#[test]
fn service_conflicts_and_terminal_errors() {
    let svc = EpisodeService::builtin(None);
    let info = svc
        .create(CreateEpisode {
            task_id: 1,
            regime: Regime::Ta,
            seed: 0,
            k: None,
            agent: None,
            exchange_cap: None,
        })
        .unwrap();
    assert_eq!(info.seq, 1);
    let req = svc.observation(&info.id).unwrap();
    let t = req.mask().unwrap()[0];
    let out = AgentOutput::response(&Response::triple(t));
    let receipt = svc.submit(&info.id, Some(1), out.clone()).unwrap();
    assert_eq!(receipt.info.seq, 2);
    assert!(matches!(
        svc.submit(&info.id, Some(1), out),
        Err(ServiceError::Conflict {
            expected: 2,
            got: 1
        })
    ));
    for _ in 0..10 {
        let _ = svc.submit(&info.id, None, AgentOutput::raw("x"));
    }
    assert!(matches!(
        svc.submit(&info.id, None, AgentOutput::raw("x")),
        Err(ServiceError::Terminal)
    ));
    assert!(matches!(
        svc.observation(&info.id),
        Err(ServiceError::Terminal)
    ));
    assert!(svc.result(&info.id).is_ok());
    assert!(matches!(
        svc.info("ep-999999"),
        Err(ServiceError::NotFound(_))
    ));
    assert!(matches!(
        svc.create(CreateEpisode {
            task_id: 42,
            regime: Regime::Ta,
            seed: 0,
            k: None,
            agent: None,
            exchange_cap: None
        }),
        Err(ServiceError::UnknownTask(42))
    ));
}

#[test]
fn service_recovers_from_its_logs() {
    let dir = tempfile::tempdir().unwrap();
    let id;
    let digest;
    {
        let svc = EpisodeService::builtin(Some(dir.path().to_path_buf()));
        let info = svc
            .create(CreateEpisode {
                task_id: 2,
                regime: Regime::Ta,
                seed: 7,
                k: None,
                agent: None,
                exchange_cap: None,
            })
            .unwrap();
        id = info.id;
        for _ in 0..5 {
            let req = svc.observation(&id).unwrap();
            svc.submit(&id, Some(req.request_id()), AutobattleAgent.respond(&req))
                .unwrap();
        }
        digest = svc.observation(&id).unwrap();
    }
    let svc = EpisodeService::builtin(Some(dir.path().to_path_buf()));
    assert_eq!(svc.recover().unwrap(), vec![id.clone()]);
    assert_eq!(svc.observation(&id).unwrap(), digest);
    assert_eq!(svc.info(&id).unwrap().seq, 6);
    let fresh = svc
        .create(CreateEpisode {
            task_id: 1,
            regime: Regime::Dc,
            seed: 0,
            k: None,
            agent: None,
            exchange_cap: None,
        })
        .unwrap();
    assert_ne!(fresh.id, id);
    assert!(svc.frame_png(&fresh.id).unwrap().starts_with(b"\x89PNG"));
}

#[test]
fn subprocess_echo_is_malformed() {
    let mut agent = SubprocessAgent::spawn("cat", Some(Duration::from_secs(10))).unwrap();
    let mut ep = episode(1, Regime::Ta, 0);
    let req = ep.request().unwrap();
    let out = agent.respond(&req);
    let AgentOutput::Raw { text } = &out else {
        panic!("expected a reply, got {out:?}")
    };
    assert_eq!(reply_request_id(text), Some(1));
    let rec = ep.submit(out).unwrap();
    assert!(matches!(
        rec.resolution,
        Resolution::Illegal {
            reason: IllegalReason::Malformed,
            ..
        }
    ));
}

#[test]
fn subprocess_silence_times_out_and_exit_is_transport() {
    let mut slow = SubprocessAgent::spawn("sleep 5", Some(Duration::from_millis(100))).unwrap();
    let mut ep = episode(1, Regime::Ta, 0);
    let req = ep.request().unwrap();
    assert_eq!(slow.respond(&req), AgentOutput::Timeout);
    let mut gone = SubprocessAgent::spawn("exit 0", Some(Duration::from_secs(5))).unwrap();
    assert!(matches!(gone.respond(&req), AgentOutput::Transport { .. }));
    assert!(matches!(gone.respond(&req), AgentOutput::Transport { .. }));
}

#[test]
fn autobattle_prefers_weak_low_hp_targets() {
    let mut ep = episode(3, Regime::Ta, 1);
    let req = ep.request().unwrap();
    let obs = req.structured().unwrap();
    let mask = req.mask().unwrap();
    let t = autobattle_policy(obs, mask).unwrap();
    assert!(mask.contains(&t));
    if (t.m == 0 || t.m == 1) && (4..=8).contains(&t.t) {
        let actor = &obs.allies[obs.decision.unwrap().actor_slot as usize];
        let chosen = obs
            .enemies
            .iter()
            .find(|e| i64::from(e.index) == t.t)
            .unwrap();
        let weak: Vec<_> = obs
            .enemies
            .iter()
            .filter(|e| e.weaknesses.as_ref().unwrap().contains(&actor.element))
            .collect();
        let pool = if weak.is_empty() {
            obs.enemies.iter().collect()
        } else {
            weak
        };
        let min = pool
            .iter()
            .map(|e| e.hp_pct.unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(chosen.hp_pct.unwrap(), min);
    }
}
