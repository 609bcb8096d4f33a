//! Live-backend integration against a local stub completion endpoint.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::thread;

use audit_core::backend::{
    Backend, BackendError, LiveBackend, LiveBackendConfig, PromptSection, ReasoningRequest,
};
use audit_core::model::Phase;

/// Serve `responses.len()` HTTP requests, replying with the canned bodies in
/// order, then stop. Returns the bound endpoint URL.
fn stub_server(responses: Vec<String>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for body in responses {
            let Ok((mut stream, _)) = listener.accept() else {
                return;
            };
            let mut buf = vec![0u8; 65536];
            let mut total = 0usize;
            // Read until the full request (headers + declared body) arrived.
            loop {
                let n = stream.read(&mut buf[total..]).unwrap_or(0);
                if n == 0 {
                    break;
                }
                total += n;
                let text = String::from_utf8_lossy(&buf[..total]);
                if let Some(header_end) = text.find("\r\n\r\n") {
                    let content_length = text
                        .lines()
                        .find_map(|l| l.to_lowercase().strip_prefix("content-length:").map(str::trim).map(String::from))
                        .and_then(|v| v.parse::<usize>().ok())
                        .unwrap_or(0);
                    if total >= header_end + 4 + content_length {
                        break;
                    }
                }
            }
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                body.len(),
                body
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    format!("http://{addr}/v1/messages")
}

fn severity_request() -> ReasoningRequest {
    ReasoningRequest {
        phase: Phase::P3,
        role: "severity-assessor".into(),
        prompt_sections: vec![
            PromptSection::new("task", "Assign a severity."),
            PromptSection::new("property", "{}"),
        ],
        response_schema_id: "severity_assignment".into(),
        budget_tokens: 500,
    }
}

fn backend_for(endpoint: String) -> LiveBackend {
    std::env::set_var("AUDIT_TEST_API_KEY", "test-key");
    let mut budgets = BTreeMap::new();
    budgets.insert(Phase::P3, 10_000u64);
    LiveBackend::new(
        LiveBackendConfig {
            endpoint,
            model: "test-model".into(),
            api_key_env: "AUDIT_TEST_API_KEY".into(),
        },
        budgets,
    )
    .unwrap()
}

#[test]
fn live_backend_returns_schema_valid_payload_and_records_tokens() {
    let body = serde_json::json!({
        "content": [{"text": "{\"severity\": \"High\", \"rationale\": \"break\"}"}],
        "usage": {"input_tokens": 100, "output_tokens": 50}
    });
    let endpoint = stub_server(vec![body.to_string()]);
    let backend = backend_for(endpoint);
    let response = backend.complete(&severity_request()).unwrap();
    assert_eq!(response.backend_id, "live");
    assert_eq!(response.tokens_consumed, 150);
    assert_eq!(response.payload["severity"], "High");
    assert_eq!(backend.tokens_remaining(Phase::P3), 9_850);
}

#[test]
fn live_backend_rejects_schema_invalid_payload() {
    let body = serde_json::json!({
        "content": [{"text": "{\"wrong\": true}"}],
        "usage": {"input_tokens": 10, "output_tokens": 5}
    });
    let endpoint = stub_server(vec![body.to_string()]);
    let backend = backend_for(endpoint);
    let err = backend.complete(&severity_request()).unwrap_err();
    assert!(matches!(err, BackendError::MalformedResponse { .. }));
    // Rejected responses do not consume budget.
    assert_eq!(backend.tokens_remaining(Phase::P3), 10_000);
}

#[test]
fn live_backend_rejects_non_json_text() {
    let body = serde_json::json!({
        "content": [{"text": "sorry, cannot comply"}],
        "usage": {"input_tokens": 10, "output_tokens": 5}
    });
    let endpoint = stub_server(vec![body.to_string()]);
    let backend = backend_for(endpoint);
    let err = backend.complete(&severity_request()).unwrap_err();
    assert!(matches!(err, BackendError::MalformedResponse { .. }));
}

#[test]
fn live_backend_requires_api_key_env() {
    std::env::remove_var("AUDIT_NO_SUCH_KEY");
    let err = LiveBackend::new(
        LiveBackendConfig {
            endpoint: "http://127.0.0.1:1/v1/messages".into(),
            model: "m".into(),
            api_key_env: "AUDIT_NO_SUCH_KEY".into(),
        },
        BTreeMap::new(),
    )
    .err()
    .unwrap();
    assert!(matches!(err, BackendError::NotConfigured(_)));
}
