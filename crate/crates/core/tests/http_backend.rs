use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use prp::backend::{Backend, HttpBackend, HttpBackendConfig, RetryPolicy};
use prp::comparator::{ComparatorConfig, PairwiseComparator};
use prp::model::{Passage, Query};
use prp::prompt::{render_pairwise, TARGET_PASSAGE_A, TARGET_PASSAGE_B};
use prp::{BackendError, Mode, Preference};

/// What the mock does with one connection.
enum Reply {
    Json(u16, String),
    /// Close the socket without answering.
    Hangup,
}

struct Mock {
    endpoint: String,
    connections: Arc<AtomicUsize>,
    peak: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<(String, serde_json::Value)>>>,
}

fn read_request(stream: &TcpStream) -> (String, serde_json::Value) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut length = 0;
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h).unwrap() == 0 || h == "\r\n" {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    (path, serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null))
}

/// Starts a server whose `n`-th connection (0-based) gets `script(n, path, body)`.
fn mock<F>(delay: Duration, script: F) -> Mock
where
    F: Fn(usize, &str, &serde_json::Value) -> Reply + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let connections = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let script = Arc::new(script);
    let (c, p, b) = (connections.clone(), peak.clone(), bodies.clone());
    let active = Arc::new(AtomicUsize::new(0));
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let n = c.fetch_add(1, Ordering::SeqCst);
            let (script, bodies, peak, active) = (script.clone(), b.clone(), p.clone(), active.clone());
            std::thread::spawn(move || {
                let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                let (path, body) = read_request(&stream);
                std::thread::sleep(delay);
                let reply = script(n, &path, &body);
                bodies.lock().unwrap().push((path, body));
                active.fetch_sub(1, Ordering::SeqCst);
                match reply {
                    Reply::Hangup => drop(stream),
                    Reply::Json(status, text) => {
                        let _ = write!(
                            stream,
                            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                            text.len()
                        );
                    }
                }
            });
        }
    });
    Mock {
        endpoint,
        connections,
        peak,
        bodies,
    }
}

fn backend(endpoint: &str, attempts: u32, inflight: usize) -> HttpBackend {
    let mut config = HttpBackendConfig::new(endpoint);
    config.retry = RetryPolicy {
        max_attempts: attempts,
        base_delay_ms: 5,
        max_delay_ms: 20,
    };
    config.max_inflight = inflight;
    config.timeout_ms = 5_000;
    HttpBackend::new(config)
}

fn prompt() -> prp::prompt::PromptText {
    let q = Query::new("q", "query text").unwrap();
    let a = Passage::new("a", "alpha").unwrap();
    let b = Passage::new("b", "beta").unwrap();
    render_pairwise(&q, &a, &b, 100).unwrap()
}

#[test]
fn score_request_and_response() {
    let m = mock(Duration::ZERO, |_, _, _| Reply::Json(200, r#"{"scores": [-0.25, -3.5]}"#.into()));
    let b = backend(&m.endpoint, 1, 4);
    let p = prompt();
    let scored = b.score_targets(&p, &[TARGET_PASSAGE_A, TARGET_PASSAGE_B]).unwrap();
    assert_eq!(scored.get(TARGET_PASSAGE_A), Some(-0.25));
    assert_eq!(scored.get(TARGET_PASSAGE_B), Some(-3.5));
    let bodies = m.bodies.lock().unwrap();
    assert_eq!(bodies[0].0, "/score");
    assert_eq!(bodies[0].1["prompt"], p.text.as_str());
    assert_eq!(bodies[0].1["targets"], serde_json::json!(["Passage A", "Passage B"]));
}

#[test]
fn generate_request_and_response() {
    let m = mock(Duration::ZERO, |_, _, _| Reply::Json(200, r#"{"text": "Passage B"}"#.into()));
    let b = backend(&m.endpoint, 1, 4);
    assert_eq!(b.generate(&prompt(), 8).unwrap(), "Passage B");
    let bodies = m.bodies.lock().unwrap();
    assert_eq!(bodies[0].0, "/generate");
    assert_eq!(bodies[0].1["max_new_tokens"], 8);
}

#[test]
fn transport_errors_are_retried() {
    let m = mock(Duration::ZERO, |n, _, _| {
        if n < 2 {
            Reply::Hangup
        } else {
            Reply::Json(200, r#"{"text": "Passage A"}"#.into())
        }
    });
    let b = backend(&m.endpoint, 4, 4);
    assert_eq!(b.generate(&prompt(), 8).unwrap(), "Passage A");
    assert_eq!(m.connections.load(Ordering::SeqCst), 3);
}

#[test]
fn retries_are_bounded() {
    let m = mock(Duration::ZERO, |_, _, _| Reply::Hangup);
    let b = backend(&m.endpoint, 3, 4);
    match b.generate(&prompt(), 8) {
        Err(BackendError::Transport { attempts: 3, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert_eq!(m.connections.load(Ordering::SeqCst), 3);
}

#[test]
fn refusals_are_not_retried() {
    let m = mock(Duration::ZERO, |_, _, _| Reply::Json(503, r#"{"error": "overloaded"}"#.into()));
    let b = backend(&m.endpoint, 4, 4);
    match b.score_targets(&prompt(), &["Passage A", "Passage B"]) {
        Err(BackendError::Refused { status: 503, message }) => assert!(message.contains("overloaded")),
        other => panic!("{other:?}"),
    }
    assert_eq!(m.connections.load(Ordering::SeqCst), 1);
}

#[test]
fn malformed_responses_are_protocol_errors() {
    let m = mock(Duration::ZERO, |_, _, _| Reply::Json(200, r#"{"scores": [-1.0]}"#.into()));
    let b = backend(&m.endpoint, 1, 4);
    assert!(matches!(
        b.score_targets(&prompt(), &["Passage A", "Passage B"]),
        Err(BackendError::Protocol(_))
    ));
    let m = mock(Duration::ZERO, |_, _, _| Reply::Json(200, "not json".into()));
    let b = backend(&m.endpoint, 1, 4);
    assert!(matches!(b.generate(&prompt(), 8), Err(BackendError::Protocol(_))));
}

#[test]
fn inflight_requests_are_bounded() {
    let m = mock(Duration::from_millis(30), |_, _, _| Reply::Json(200, r#"{"text": "Passage A"}"#.into()));
    let b = backend(&m.endpoint, 1, 2);
    std::thread::scope(|s| {
        for _ in 0..8 {
            s.spawn(|| b.generate(&prompt(), 8).unwrap());
        }
    });
    assert_eq!(m.connections.load(Ordering::SeqCst), 8);
    assert!(m.peak.load(Ordering::SeqCst) <= 2, "peak {}", m.peak.load(Ordering::SeqCst));
}

#[test]
fn comparator_over_http_uses_both_orders() {
    // the server always prefers the passage whose text is "alpha"
    let m = mock(Duration::ZERO, |_, _, body| {
        let prompt = body["prompt"].as_str().unwrap();
        let a_is_alpha = prompt.contains("Passage A: alpha");
        let scores = if a_is_alpha { "[-0.1, -2.0]" } else { "[-2.0, -0.1]" };
        Reply::Json(200, format!(r#"{{"scores": {scores}}}"#))
    });
    let judge = PairwiseComparator::new(backend(&m.endpoint, 1, 4), ComparatorConfig::default()).unwrap();
    let q = Query::new("q", "query text").unwrap();
    let alpha = Passage::new("a", "alpha").unwrap();
    let beta = Passage::new("b", "beta").unwrap();
    let j = judge.compare_pair(&q, &beta, &alpha).unwrap();
    assert_eq!(j.preference, Preference::SecondWins);
    assert_eq!(j.unit_calls, 2);
    assert_eq!(m.connections.load(Ordering::SeqCst), 2);
}

#[test]
fn capability_is_enforced_before_any_request() {
    let m = mock(Duration::ZERO, |_, _, _| Reply::Json(200, "{}".into()));
    let mut config = HttpBackendConfig::new(&m.endpoint);
    config.capability.supports_generation = false;
    let b = HttpBackend::new(config);
    assert!(matches!(b.generate(&prompt(), 8), Err(BackendError::CapabilityMissing { .. })));
    let cmp = ComparatorConfig {
        mode: Mode::Generation,
        ..ComparatorConfig::default()
    };
    assert!(PairwiseComparator::new(b, cmp).is_err());
    assert_eq!(m.connections.load(Ordering::SeqCst), 0);
}
