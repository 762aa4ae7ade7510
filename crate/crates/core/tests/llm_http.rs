//! The HTTP client against a throwaway local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use prefixforge_core::proposer::{HttpTransport, LlmClient, LlmEndpointConfig, LlmError};

/// Serves one canned `(status, body)` per connection, in order, and returns
/// the request bodies it saw.
fn serve(replies: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut len = 0;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = line.trim().to_string();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            seen.push(format!("{auth}\n{}", String::from_utf8(buf).unwrap()));
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        seen
    });
    (url, handle)
}

fn client(url: String, retries: u32) -> LlmClient {
    let cfg = LlmEndpointConfig {
        base_url: url,
        model: "test-model".into(),
        max_retries: retries,
        backoff_ms: 1,
        timeout_secs: 10.0,
        ..Default::default()
    };
    LlmClient::new(cfg, "sk-test", Arc::new(HttpTransport::new().unwrap())).unwrap()
}

const OK_BODY: &str = r#"{"choices":[{"index":0,"message":{"role":"assistant","content":"4: connectedNodes=(0,1)"}}]}"#;

#[test]
fn retries_then_succeeds() {
    let (url, server) = serve(vec![(500, "{}".into()), (429, "{}".into()), (200, OK_BODY.into())]);
    let reply = client(url, 3).complete("hello").unwrap();
    assert_eq!(reply, "4: connectedNodes=(0,1)");
    let seen = server.join().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen[2].starts_with("authorization: Bearer sk-test") || seen[2].starts_with("Authorization: Bearer sk-test"));
    assert!(seen[2].contains("\"model\":\"test-model\""));
    assert!(seen[2].contains("hello"));
}

#[test]
fn persistent_server_errors_exhaust_retries() {
    let (url, server) = serve(vec![(500, "{}".into()); 3]);
    let err = client(url, 2).complete("hello").unwrap_err();
    assert!(matches!(err, LlmError::TimeoutAfterRetries { attempts: 3, .. }), "{err:?}");
    server.join().unwrap();
}

#[test]
fn auth_failure_is_not_retried() {
    let (url, server) = serve(vec![(401, r#"{"error":"bad key"}"#.into())]);
    let err = client(url, 3).complete("hello").unwrap_err();
    assert!(matches!(err, LlmError::Auth(401)), "{err:?}");
    assert_eq!(server.join().unwrap().len(), 1);
}

#[test]
fn malformed_reply_is_reported() {
    let (url, server) = serve(vec![(200, "not json".into())]);
    let err = client(url, 0).complete("hello").unwrap_err();
    assert!(matches!(err, LlmError::MalformedReply(_)), "{err:?}");
    server.join().unwrap();
}

#[test]
fn unreachable_endpoint_times_out_after_retries() {
    // bind then drop so the port is (almost certainly) closed
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = client(format!("http://127.0.0.1:{port}/v1"), 1).complete("hello").unwrap_err();
    assert!(matches!(err, LlmError::TimeoutAfterRetries { attempts: 2, .. }), "{err:?}");
}
