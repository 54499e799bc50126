mod common;

use std::time::Duration;

use chess_modulo::model::{GenerationParams, HttpEndpoint, HttpModel, ModelError, TextModel};
use common::{Reply, StubServer};

fn endpoint(server: &StubServer) -> HttpEndpoint {
    HttpEndpoint {
        backoff_ms: 10,
        timeout_secs: 2.0,
        ..HttpEndpoint::new(server.url.clone(), "stub-model")
    }
}

#[test]
fn echoes_body_and_sends_schema() {
    let server = StubServer::start(vec![Reply::ok(" d8d1")]);
    let mut m = HttpModel::new(endpoint(&server)).unwrap();
    let params = GenerationParams::with_temperature(0.7);
    let r = m.complete("FEN: x\n\nBest move:", &params).unwrap();
    assert_eq!(r.text, " d8d1");
    assert_eq!(r.token_usage, Some(2));
    assert_eq!(r.retries, 0);
    assert!(r.latency.is_some());

    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].path, "/v1/completions");
    let body = &reqs[0].body;
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["prompt"], "FEN: x\n\nBest move:");
    assert_eq!(body["temperature"], 0.7);
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["stop"], serde_json::json!(["\n"]));
}

#[test]
fn custom_paths_and_fields() {
    let server = StubServer::start(vec![Reply {
        status: 200,
        body: r#"{"output":{"generated":"e2e4"}}"#.into(),
        delay: Duration::ZERO,
    }]);
    let cfg = HttpEndpoint {
        path: "generate".into(),
        text_field: "output.generated".into(),
        usage_field: None,
        prompt_prefix: "<s>".into(),
        ..endpoint(&server)
    };
    let mut m = HttpModel::new(cfg).unwrap();
    let r = m.complete("p", &GenerationParams::default()).unwrap();
    assert_eq!(r.text, "e2e4");
    assert_eq!(r.token_usage, None);
    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs[0].path, "/generate");
    assert_eq!(reqs[0].body["prompt"], "<s>p");
}

#[test]
fn transient_failures_are_retried() {
    let server = StubServer::start(vec![Reply::status(503), Reply::status(429), Reply::ok("d8d1")]);
    let mut m = HttpModel::new(endpoint(&server)).unwrap();
    let r = m.complete("p", &GenerationParams::default()).unwrap();
    assert_eq!(r.text, "d8d1");
    assert_eq!(r.retries, 2);
    assert_eq!(server.request_count(), 3);
}

#[test]
fn retry_budget_is_bounded() {
    let server = StubServer::start(vec![Reply::status(500)]);
    let cfg = HttpEndpoint {
        max_retries: 2,
        ..endpoint(&server)
    };
    let mut m = HttpModel::new(cfg).unwrap();
    let err = m.complete("p", &GenerationParams::default()).unwrap_err();
    assert!(matches!(err, ModelError::Transport { attempts: 3, .. }), "{err}");
    assert_eq!(server.request_count(), 3);
}

#[test]
fn slow_endpoint_times_out() {
    let server = StubServer::start(vec![Reply::ok("late").delayed(Duration::from_millis(1500))]);
    let cfg = HttpEndpoint {
        timeout_secs: 0.3,
        max_retries: 1,
        ..endpoint(&server)
    };
    let mut m = HttpModel::new(cfg).unwrap();
    let err = m.complete("p", &GenerationParams::default()).unwrap_err();
    assert!(matches!(err, ModelError::Transport { attempts: 2, .. }), "{err}");
}

#[test]
fn auth_and_client_errors_are_not_retried() {
    let server = StubServer::start(vec![Reply::status(401)]);
    let mut m = HttpModel::new(endpoint(&server)).unwrap();
    assert!(matches!(m.complete("p", &GenerationParams::default()), Err(ModelError::Auth(401))));
    assert_eq!(server.request_count(), 1);

    let server = StubServer::start(vec![Reply::status(400)]);
    let mut m = HttpModel::new(endpoint(&server)).unwrap();
    assert!(matches!(
        m.complete("p", &GenerationParams::default()),
        Err(ModelError::Status { status: 400, .. })
    ));
    assert_eq!(server.request_count(), 1);

    let server = StubServer::start(vec![Reply {
        status: 200,
        body: r#"{"choices":[]}"#.into(),
        delay: Duration::ZERO,
    }]);
    let mut m = HttpModel::new(endpoint(&server)).unwrap();
    assert!(matches!(m.complete("p", &GenerationParams::default()), Err(ModelError::Schema(_))));
    assert_eq!(server.request_count(), 1);
}

#[test]
fn bearer_token_comes_from_environment() {
    let var = "CHESS_MODULO_TEST_TOKEN_7F3A";
    std::env::set_var(var, "sekrit");
    let server = StubServer::start(vec![Reply::ok("e2e4")]);
    let cfg = HttpEndpoint {
        auth_env: Some(var.into()),
        ..endpoint(&server)
    };
    let mut m = HttpModel::new(cfg.clone()).unwrap();
    m.complete("p", &GenerationParams::default()).unwrap();
    let reqs = server.requests.lock().unwrap();
    let auth = reqs[0].headers.iter().find(|(k, _)| k == "authorization").map(|(_, v)| v.as_str());
    assert_eq!(auth, Some("Bearer sekrit"));
    // The serialized endpoint names the variable, never the token.
    let manifest = serde_json::to_string(&cfg).unwrap();
    assert!(!manifest.contains("sekrit"));
}

#[test]
fn concurrency_limit_is_respected() {
    let server = StubServer::start(vec![Reply::ok("e2e4").delayed(Duration::from_millis(150))]);
    let cfg = HttpEndpoint {
        max_concurrency: 2,
        ..endpoint(&server)
    };
    let model = HttpModel::new(cfg).unwrap();
    let handles: Vec<_> = (0..6)
        .map(|_| {
            let mut m = model.clone();
            std::thread::spawn(move || m.complete("p", &GenerationParams::default()).unwrap())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap().text, "e2e4");
    }
    assert_eq!(server.request_count(), 6);
    assert!(server.max_in_flight.load(std::sync::atomic::Ordering::SeqCst) <= 2);
}
