use fairrec::dataset::Gender;
use fairrec::gateway::{
    FakeClock, Gateway, GatewayError, LiveClient, ModelParams, ResponseCache, ResponseSource, API_KEY_ENV,
};
use fairrec::profiler::Strategy;
use fairrec::prompts::{Condition, PromptInstruction};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

const OK_BODY: &str = r#"{"choices":[{"message":{"role":"assistant","content":"Heat (1995)\nFargo (1996)"}}]}"#;

/// Serves one scripted `(status, body)` per connection, then stops.
/// Returns the endpoint URL and the captured request bodies.
fn serve(script: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in script {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut req = vec![0; len];
            reader.read_exact(&mut req).unwrap();
            log.lock().unwrap().push(String::from_utf8(req).unwrap());
            let mut stream = stream;
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    (url, seen)
}

fn params(url: &str) -> ModelParams {
    ModelParams { endpoint_url: url.to_string(), ..Default::default() }
}

fn instruction(text: &str) -> PromptInstruction {
    PromptInstruction {
        user_id: 7,
        condition: Condition::Gender(Gender::Female),
        strategy: Strategy::Recent,
        n_profile: 10,
        k: 10,
        text: text.to_string(),
        fingerprint: String::new(),
    }
}

fn client(clock: &Arc<FakeClock>) -> LiveClient {
    LiveClient::with_api_key("test-key").with_clock(clock.clone(), 600)
}

#[test]
fn retries_rate_limits_then_succeeds() {
    let (url, seen) = serve(vec![(429, "{}"), (429, "{}"), (200, OK_BODY)]);
    let clock = Arc::new(FakeClock::new());
    let c = client(&clock);
    let r = c.complete("fp", "recommend", &params(&url)).unwrap();
    assert_eq!(r.text, "Heat (1995)\nFargo (1996)");
    assert_eq!(r.source, ResponseSource::Live);
    assert_eq!(c.request_count(), 3);
    assert_eq!(clock.sleeps(), [Duration::from_secs(1), Duration::from_secs(2)]);
    let body: serde_json::Value = serde_json::from_str(&seen.lock().unwrap()[0]).unwrap();
    assert_eq!(body["model"], "gpt-3.5-turbo");
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "recommend");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 512);
}

#[test]
fn gives_up_after_max_attempts() {
    let (url, _) = serve(vec![(500, "{}"); 5]);
    let clock = Arc::new(FakeClock::new());
    let c = client(&clock);
    match c.complete("fp", "x", &params(&url)) {
        Err(GatewayError::Transport { attempts, .. }) => assert_eq!(attempts, 5),
        other => panic!("{other:?}"),
    }
    let secs: Vec<u64> = clock.sleeps().iter().map(|d| d.as_secs()).collect();
    assert_eq!(secs, [1, 2, 4, 8]);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, _) = serve(vec![(400, r#"{"error":"bad"}"#)]);
    let clock = Arc::new(FakeClock::new());
    let c = client(&clock);
    match c.complete("fp", "x", &params(&url)) {
        Err(GatewayError::Request { status, body }) => {
            assert_eq!(status, 400);
            assert!(body.contains("bad"));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(c.request_count(), 1);
    assert!(clock.sleeps().is_empty());
}

#[test]
fn malformed_body_is_a_decode_error() {
    let (url, _) = serve(vec![(200, r#"{"choices":[]}"#)]);
    let c = client(&Arc::new(FakeClock::new()));
    assert!(matches!(c.complete("fp", "x", &params(&url)), Err(GatewayError::Decode(_))));
}

#[test]
fn cache_hit_makes_no_request() {
    let (url, _) = serve(vec![(200, OK_BODY)]);
    let dir = tempfile::tempdir().unwrap();
    let g = Gateway::live(client(&Arc::new(FakeClock::new())), params(&url), Some(ResponseCache::new(dir.path()))).unwrap();
    let first = g.complete(&instruction("same prompt")).unwrap();
    assert_eq!(first.source, ResponseSource::Live);
    let second = g.complete(&instruction("same prompt")).unwrap();
    assert_eq!(second.source, ResponseSource::Cache);
    assert_eq!(second.text, first.text);
    let fairrec::gateway::Backend::Live(c) = g.backend() else { unreachable!() };
    assert_eq!(c.request_count(), 1);
}

#[test]
fn rate_limit_waits_out_the_window() {
    let (url, _) = serve(vec![(200, OK_BODY); 3]);
    let clock = Arc::new(FakeClock::new());
    let c = LiveClient::with_api_key("k").with_clock(clock.clone(), 2);
    for _ in 0..3 {
        c.complete("fp", "x", &params(&url)).unwrap();
    }
    assert_eq!(clock.sleeps(), [Duration::from_secs(60)]);
}

#[test]
fn missing_credentials_is_a_config_error() {
    std::env::remove_var(API_KEY_ENV);
    assert!(matches!(LiveClient::from_env(), Err(GatewayError::Config(_))));
}
