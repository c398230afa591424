use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use iotlog_forge::abstraction::{ChatClient, Completer, CompletionError, LlmParams, RetryPolicy};

struct Seen {
    path: String,
    auth: Option<String>,
    body: String,
}

/// Serves one canned response per connection, in order, then stops.
fn serve(responses: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<Seen>>>, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = std::thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut length = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => auth = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                path: request_line.split_whitespace().nth(1).unwrap_or_default().to_string(),
                auth,
                body: String::from_utf8(buf).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            stream.flush().unwrap();
        }
    });
    (addr, seen, handle)
}

fn fast_retry(max_retries: u32) -> RetryPolicy {
    RetryPolicy {
        max_retries,
        initial_backoff_ms: 1,
        max_backoff_ms: 5,
        multiplier: 2.0,
    }
}

const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"LABEL: cooking_start"}}]}"#;

#[test]
fn retries_rate_limits_and_server_errors_then_succeeds() {
    let (url, seen, handle) = serve(vec![(429, "{}"), (503, "busy"), (200, OK)]);
    let client = ChatClient::new(&url, "secret", LlmParams::default(), fast_retry(3)).unwrap();
    assert_eq!(client.complete("classify this").unwrap(), "LABEL: cooking_start");
    handle.join().unwrap();
    assert_eq!(client.calls(), 3);
    assert_eq!(client.retries(), 2);

    let seen = seen.lock().unwrap();
    assert!(seen.iter().all(|s| s.path == "/v1/chat/completions"));
    assert!(seen.iter().all(|s| s.auth.as_deref() == Some("Bearer secret")));
    let body: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(body["model"], "gpt-4-0613");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "classify this");
}

#[test]
fn authentication_failure_is_not_retried() {
    let (url, _, handle) = serve(vec![(401, r#"{"error":"bad key"}"#)]);
    let client = ChatClient::new(&url, "wrong", LlmParams::default(), fast_retry(3)).unwrap();
    let err = client.complete("x").unwrap_err();
    handle.join().unwrap();
    assert!(
        matches!(err, CompletionError::Authentication { status: 401, .. }),
        "{err:?}"
    );
    assert_eq!(client.calls(), 1);
}

#[test]
fn gives_up_after_max_retries() {
    let (url, _, handle) = serve(vec![(429, "{}"), (429, "{}"), (429, "{}")]);
    let client = ChatClient::new(&url, "k", LlmParams::default(), fast_retry(2)).unwrap();
    let err = client.complete("x").unwrap_err();
    handle.join().unwrap();
    assert_eq!(err, CompletionError::RateLimited { attempts: 3 });
}

#[test]
fn client_errors_and_bad_envelopes_fail_fast() {
    let (url, _, handle) = serve(vec![(400, "bad request"), (200, r#"{"choices":[]}"#)]);
    let client = ChatClient::new(&url, "k", LlmParams::default(), fast_retry(3)).unwrap();
    assert!(matches!(
        client.complete("x"),
        Err(CompletionError::Rejected { status: 400, .. })
    ));
    assert!(matches!(
        client.complete("x"),
        Err(CompletionError::MalformedResponse(_))
    ));
    handle.join().unwrap();
    assert_eq!(client.calls(), 2);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let client = ChatClient::new(
        &format!("http://127.0.0.1:{port}"),
        "k",
        LlmParams::default(),
        fast_retry(1),
    )
    .unwrap();
    assert!(matches!(
        client.complete("x"),
        Err(CompletionError::Transport { attempts: 2, .. })
    ));
}
