use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{header, Method, Request as HttpRequest, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use turnbench::engine::builtin_task;
use turnbench::harness::{
    Agent, AgentOutput, AutobattleAgent, Episode, EpisodeConfig, EpisodeService, Regime, Request,
    Response,
};
use turnbench::interface::{canonical_dc, execute_ta, legal_mask, DcPrimitive};
use turnbench_cli::server::router;

fn app() -> Router {
    router(Arc::new(EpisodeService::builtin(None)))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Bytes) {
    let mut req = HttpRequest::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

async fn call_json(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

async fn create(app: &Router, task_id: u8, regime: &str, seed: u64) -> String {
    let body = json!({"task_id": task_id, "regime": regime, "seed": seed, "agent": "scripted"});
    let (status, info) = call_json(app, Method::POST, "/v1/episodes", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{info}");
    info["id"].as_str().unwrap().to_string()
}

fn dc_response(p: &DcPrimitive) -> Response {
    match p {
        DcPrimitive::Click { x, y } => Response::Click { x: *x, y: *y },
        DcPrimitive::Key { key } => Response::Key { key: key.clone() },
        DcPrimitive::Empty => Response::Empty,
    }
}

/// Plays a local episode with the first legal action each decision and
/// returns the raw outputs sent together with the resulting log.
fn scripted_local(task_id: u8, regime: Regime, seed: u64) -> (Vec<String>, String) {
    let spec = Arc::new(builtin_task(task_id).unwrap());
    let mut ep = Episode::new(
        spec,
        EpisodeConfig::new(regime, seed).with_agent("scripted"),
    )
    .unwrap();
    let mut outputs = Vec::new();
    while !ep.is_finished() {
        let triple = legal_mask(ep.battle())[0];
        let responses = if regime == Regime::Dc {
            let action = execute_ta(ep.battle(), triple).unwrap();
            canonical_dc(&ep.frame(), &action)
                .unwrap()
                .iter()
                .map(dc_response)
                .collect()
        } else {
            vec![Response::triple(triple)]
        };
        for r in responses {
            let AgentOutput::Raw { text } = AgentOutput::response(&r) else {
                unreachable!()
            };
            ep.submit(AgentOutput::Raw { text: text.clone() }).unwrap();
            outputs.push(text);
        }
    }
    (outputs, ep.log_jsonl())
}

#[tokio::test]
async fn lists_the_shipped_tasks() {
    let (status, tasks) = call_json(&app(), Method::GET, "/v1/tasks", None).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<u64> = tasks
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["task_id"].as_u64().unwrap())
        .collect();
    assert_eq!(ids, (1..=8).collect::<Vec<_>>());
}

#[tokio::test]
async fn service_logs_match_local_play_in_both_regimes() {
    for regime in [Regime::Dc, Regime::Ta] {
        let (outputs, local_log) = scripted_local(1, regime, 11);
        let app = app();
        let id = create(&app, 1, regime.as_str(), 11).await;
        for (i, raw) in outputs.iter().enumerate() {
            let body = json!({"seq": i + 1, "raw": raw});
            let (status, receipt) = call_json(
                &app,
                Method::POST,
                &format!("/v1/episodes/{id}/action"),
                Some(body),
            )
            .await;
            assert_eq!(status, StatusCode::OK, "{receipt}");
        }
        let (status, log) = call(&app, Method::GET, &format!("/v1/episodes/{id}/log"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(std::str::from_utf8(&log).unwrap(), local_log, "{regime}");
        let (status, result) = call_json(
            &app,
            Method::GET,
            &format!("/v1/episodes/{id}/result"),
            None,
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        assert!(result["outcome"]["kind"].is_string());
    }
}

#[tokio::test]
async fn observe_act_loop_completes_a_battle() {
    let app = app();
    let id = create(&app, 2, "TA", 3).await;
    let mut agent = AutobattleAgent;
    loop {
        let (status, obs) = call_json(
            &app,
            Method::GET,
            &format!("/v1/episodes/{id}/observation"),
            None,
        )
        .await;
        if status == StatusCode::GONE {
            break;
        }
        assert_eq!(status, StatusCode::OK);
        let request: Request = serde_json::from_value(obs).unwrap();
        let AgentOutput::Raw { text } = agent.respond(&request) else {
            panic!("autobattle answers in text")
        };
        let response: Value = serde_json::from_str(&text).unwrap();
        let body = json!({"seq": request.request_id(), "response": response});
        let (status, _) = call(
            &app,
            Method::POST,
            &format!("/v1/episodes/{id}/action"),
            Some(body),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, info) = call_json(&app, Method::GET, &format!("/v1/episodes/{id}"), None).await;
    assert_eq!(info["phase"], "finished");
    assert_eq!(info["outcome"]["kind"], "victory");
}

#[tokio::test]
async fn error_statuses() {
    let app = app();
    let (status, body) = call_json(&app, Method::GET, "/v1/episodes/ep-999999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "not_found");
    let (status, _) = call(
        &app,
        Method::POST,
        "/v1/episodes",
        Some(json!({"task_id": 42, "regime": "TA"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let id = create(&app, 1, "TA", 0).await;
    let action = format!("/v1/episodes/{id}/action");
    let (status, _) = call(
        &app,
        Method::GET,
        &format!("/v1/episodes/{id}/result"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, body) = call_json(
        &app,
        Method::POST,
        &action,
        Some(json!({"seq": 7, "raw": "{}"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "conflict");
    let (status, _) = call(
        &app,
        Method::POST,
        &action,
        Some(json!({"raw": "{}", "response": {"type": "act"}})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &app,
        Method::GET,
        &format!("/v1/episodes/{id}/frame.png"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    for seq in 1..=10 {
        let (status, _) = call(
            &app,
            Method::POST,
            &action,
            Some(json!({"seq": seq, "raw": "nonsense"})),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, result) = call_json(
        &app,
        Method::GET,
        &format!("/v1/episodes/{id}/result"),
        None,
    )
    .await;
    assert_eq!(result["outcome"]["reason"], "invalid_action");
    let (status, body) = call_json(&app, Method::POST, &action, Some(json!({"raw": "{}"}))).await;
    assert_eq!(status, StatusCode::GONE);
    assert_eq!(body["error"], "terminal");
    let (status, _) = call(
        &app,
        Method::GET,
        &format!("/v1/episodes/{id}/observation"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::GONE);
}

#[tokio::test]
async fn frames_are_png_for_direct_control() {
    let app = app();
    let id = create(&app, 1, "DC", 0).await;
    let resp = app
        .clone()
        .oneshot(
            HttpRequest::get(format!("/v1/episodes/{id}/frame.png"))
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()[header::CONTENT_TYPE], "image/png");
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
}

#[tokio::test]
async fn ask_endpoint_is_one_shot() {
    let app = app();
    let id = create(&app, 3, "TA-Ask", 0).await;
    let ask = format!("/v1/episodes/{id}/ask");
    let (status, receipt) = call_json(
        &app,
        Method::POST,
        &ask,
        Some(json!({"seq": 1, "question": "what is the boss weak to?"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{receipt}");
    assert_eq!(receipt["record"]["resolution"]["choice"], "ask");
    let (status, _) = call(
        &app,
        Method::POST,
        &ask,
        Some(json!({"question": "again?"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, obs) = call_json(
        &app,
        Method::GET,
        &format!("/v1/episodes/{id}/observation"),
        None,
    )
    .await;
    assert!(obs["observation"]["hint"].is_string(), "{obs}");

    let ta = create(&app, 3, "TA", 0).await;
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/v1/episodes/{ta}/ask"),
        Some(json!({})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn racing_controllers_get_one_acceptance() {
    let app = app();
    for round in 0..20u64 {
        let id = create(&app, 1, "TA", round).await;
        let (_, obs) = call_json(
            &app,
            Method::GET,
            &format!("/v1/episodes/{id}/observation"),
            None,
        )
        .await;
        let mask = obs["mask"].as_array().unwrap().clone();
        let posts: Vec<_> = (0..2)
            .map(|i| {
                let app = app.clone();
                let uri = format!("/v1/episodes/{id}/action");
                let mut triple = mask[i % mask.len()].clone();
                triple["type"] = "triple".into();
                tokio::spawn(async move {
                    call(
                        &app,
                        Method::POST,
                        &uri,
                        Some(json!({"seq": 1, "response": triple})),
                    )
                    .await
                    .0
                })
            })
            .collect();
        let mut statuses = Vec::new();
        for p in posts {
            statuses.push(p.await.unwrap());
        }
        statuses.sort();
        assert_eq!(
            statuses,
            vec![StatusCode::OK, StatusCode::CONFLICT],
            "round {round}"
        );
        let (_, info) = call_json(&app, Method::GET, &format!("/v1/episodes/{id}"), None).await;
        assert_eq!(info["seq"], 2);
    }
}
