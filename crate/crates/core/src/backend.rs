//! Model backend abstraction: every reasoning step is a structured
//! request/response exchange.
//!
//! Two implementations ship: [`LiveBackend`] talks to an HTTP completion
//! endpoint; [`ScriptedBackend`] replays canned responses keyed by request
//! fingerprint, which makes whole pipeline runs deterministic and
//! byte-reproducible offline. Both enforce per-phase token budgets through a
//! shared [`BudgetLedger`].

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::Phase;
use crate::schema::validate_artifact;

/// Retries allowed for a schema-invalid payload before the worker fails.
pub const MALFORMED_RETRY_LIMIT: u32 = 2;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("phase {phase} budget exhausted: requested {requested}, remaining {remaining}")]
    BudgetExhausted {
        phase: Phase,
        requested: u64,
        remaining: u64,
    },
    #[error("malformed response for schema {schema_id}: {detail}")]
    MalformedResponse { schema_id: String, detail: String },
    #[error("unscripted request: no fixture entry for fingerprint {fingerprint}")]
    Unscripted { fingerprint: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend not configured: {0}")]
    NotConfigured(String),
}

impl BackendError {
    /// Malformed responses are retried a bounded number of times; everything
    /// else fails the worker immediately.
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::MalformedResponse { .. })
    }
}

/// One named section of a prompt, assembled in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSection {
    pub name: String,
    pub text: String,
}

impl PromptSection {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        PromptSection {
            name: name.into(),
            text: text.into(),
        }
    }
}

/// A structured reasoning request addressed to the backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningRequest {
    pub phase: Phase,
    /// Worker kind, e.g. "subgraph-extractor" or "prover".
    pub role: String,
    pub prompt_sections: Vec<PromptSection>,
    pub response_schema_id: String,
    pub budget_tokens: u64,
}

impl ReasoningRequest {
    /// Fingerprint identifying this request for fixture lookup: phase, role,
    /// and a digest of the prompt sections. Digesting the prompt text makes
    /// fixtures robust to reordering of unrelated requests but sensitive to
    /// prompt edits, so golden tests fail loudly when prompts change.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for section in &self.prompt_sections {
            hasher.update(section.name.as_bytes());
            hasher.update([0u8]);
            hasher.update(section.text.as_bytes());
            hasher.update([1u8]);
        }
        format!(
            "{}/{}/{}",
            self.phase.as_str(),
            self.role,
            hex::encode(hasher.finalize())
        )
    }

    /// Prompt text as sent to a live endpoint.
    pub fn prompt_text(&self) -> String {
        let mut out = String::new();
        for section in &self.prompt_sections {
            out.push_str("## ");
            out.push_str(&section.name);
            out.push('\n');
            out.push_str(&section.text);
            out.push_str("\n\n");
        }
        out
    }
}

/// A structured, schema-validated response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningResponse {
    pub payload: Value,
    pub tokens_consumed: u64,
    pub backend_id: String,
}

/// Per-phase token budget accounting, shared by all workers of a run.
///
/// `tokens_remaining` reports settled consumption only, so callers observe a
/// monotonically non-increasing value; admission control additionally counts
/// in-flight reservations so concurrent workers can never jointly exceed the
/// configured budget.
#[derive(Debug)]
pub struct BudgetLedger {
    inner: Mutex<LedgerState>,
}

#[derive(Debug)]
struct LedgerState {
    budgets: BTreeMap<Phase, u64>,
    consumed: BTreeMap<Phase, u64>,
    reserved: BTreeMap<Phase, u64>,
    overruns: u64,
}

impl BudgetLedger {
    pub fn new(budgets: BTreeMap<Phase, u64>) -> Self {
        BudgetLedger {
            inner: Mutex::new(LedgerState {
                budgets,
                consumed: BTreeMap::new(),
                reserved: BTreeMap::new(),
                overruns: 0,
            }),
        }
    }

    /// Restore prior consumption, e.g. when resuming from a checkpoint.
    pub fn restore_consumed(&self, consumed: &BTreeMap<Phase, u64>) {
        let mut state = self.inner.lock().unwrap();
        state.consumed = consumed.clone();
    }

    pub fn budget(&self, phase: Phase) -> u64 {
        let state = self.inner.lock().unwrap();
        state.budgets.get(&phase).copied().unwrap_or(0)
    }

    /// Tokens left in the phase budget, net of settled consumption.
    pub fn tokens_remaining(&self, phase: Phase) -> u64 {
        let state = self.inner.lock().unwrap();
        let budget = state.budgets.get(&phase).copied().unwrap_or(0);
        budget.saturating_sub(state.consumed.get(&phase).copied().unwrap_or(0))
    }

    pub fn consumed(&self, phase: Phase) -> u64 {
        let state = self.inner.lock().unwrap();
        state.consumed.get(&phase).copied().unwrap_or(0)
    }

    pub fn consumed_all(&self) -> BTreeMap<Phase, u64> {
        let state = self.inner.lock().unwrap();
        state.consumed.clone()
    }

    /// Count of settle events that had to clamp consumption at the budget.
    pub fn overruns(&self) -> u64 {
        self.inner.lock().unwrap().overruns
    }

    /// Admit a request by reserving its declared budget, or fail with
    /// `BudgetExhausted` when settled + in-flight tokens leave too little.
    pub fn reserve(&self, phase: Phase, amount: u64) -> Result<(), BackendError> {
        let mut state = self.inner.lock().unwrap();
        let budget = state.budgets.get(&phase).copied().unwrap_or(0);
        let used = state.consumed.get(&phase).copied().unwrap_or(0)
            + state.reserved.get(&phase).copied().unwrap_or(0);
        let available = budget.saturating_sub(used);
        if amount > available {
            return Err(BackendError::BudgetExhausted {
                phase,
                requested: amount,
                remaining: available,
            });
        }
        *state.reserved.entry(phase).or_insert(0) += amount;
        Ok(())
    }

    /// Settle a reservation to the actually consumed token count. Consumption
    /// beyond the phase budget is clamped and recorded as an overrun so the
    /// per-phase ceiling holds as an invariant.
    pub fn settle(&self, phase: Phase, reserved: u64, consumed: u64) {
        let mut state = self.inner.lock().unwrap();
        let r = state.reserved.entry(phase).or_insert(0);
        *r = r.saturating_sub(reserved);
        let budget = state.budgets.get(&phase).copied().unwrap_or(0);
        let entry = state.consumed.entry(phase).or_insert(0);
        let new_total = entry.saturating_add(consumed);
        if new_total > budget {
            *entry = budget;
            state.overruns += 1;
        } else {
            *entry = new_total;
        }
    }

    /// Release a reservation without consuming anything (request failed).
    pub fn release(&self, phase: Phase, reserved: u64) {
        let mut state = self.inner.lock().unwrap();
        let r = state.reserved.entry(phase).or_insert(0);
        *r = r.saturating_sub(reserved);
    }
}

/// A reasoning backend shared by parallel workers. `complete` is safe for
/// concurrent invocation; budget accounting is linearizable.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &ReasoningRequest) -> Result<ReasoningResponse, BackendError>;
    fn tokens_remaining(&self, phase: Phase) -> u64;
    fn backend_id(&self) -> &str;
}

/// Run `complete`, retrying malformed responses up to the configured limit,
/// then surface the error as a worker failure.
pub fn complete_with_retry(
    backend: &dyn Backend,
    request: &ReasoningRequest,
) -> Result<ReasoningResponse, BackendError> {
    let mut last = None;
    for _ in 0..=MALFORMED_RETRY_LIMIT {
        match backend.complete(request) {
            Ok(resp) => return Ok(resp),
            Err(e) if e.is_retryable() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// One canned fixture entry: a request fingerprint and its response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub fingerprint: String,
    pub phase: Phase,
    pub role: String,
    pub payload: Value,
    pub tokens_consumed: u64,
}

/// Ordered map from request fingerprint to canned response. Replay of the
/// same request sequence yields byte-identical responses.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptFixture {
    pub entries: Vec<FixtureEntry>,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("duplicate fixture fingerprint: {0}")]
    DuplicateFingerprint(String),
    #[error("fixture io: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture parse: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ScriptFixture {
    pub fn insert(&mut self, request: &ReasoningRequest, payload: Value, tokens_consumed: u64) {
        self.entries.push(FixtureEntry {
            fingerprint: request.fingerprint(),
            phase: request.phase,
            role: request.role.clone(),
            payload,
            tokens_consumed,
        });
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(&e.fingerprint) {
                return Err(FixtureError::DuplicateFingerprint(e.fingerprint.clone()));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let text = fs::read_to_string(path)?;
        let fixture: ScriptFixture = serde_json::from_str(&text)?;
        fixture.validate()?;
        Ok(fixture)
    }

    pub fn save(&self, path: &Path) -> Result<(), FixtureError> {
        self.validate()?;
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Deterministic replay backend over a closed-world fixture.
pub struct ScriptedBackend {
    entries: BTreeMap<String, FixtureEntry>,
    ledger: BudgetLedger,
    request_log: Mutex<Vec<ReasoningRequest>>,
}

impl ScriptedBackend {
    pub fn new(fixture: ScriptFixture, budgets: BTreeMap<Phase, u64>) -> Result<Self, FixtureError> {
        fixture.validate()?;
        let entries = fixture
            .entries
            .into_iter()
            .map(|e| (e.fingerprint.clone(), e))
            .collect();
        Ok(ScriptedBackend {
            entries,
            ledger: BudgetLedger::new(budgets),
            request_log: Mutex::new(Vec::new()),
        })
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    /// All requests this backend has served or rejected, in arrival order.
    pub fn request_log(&self) -> Vec<ReasoningRequest> {
        self.request_log.lock().unwrap().clone()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &ReasoningRequest) -> Result<ReasoningResponse, BackendError> {
        self.request_log.lock().unwrap().push(request.clone());
        self.ledger.reserve(request.phase, request.budget_tokens)?;
        let fingerprint = request.fingerprint();
        let entry = match self.entries.get(&fingerprint) {
            Some(e) => e,
            None => {
                self.ledger.release(request.phase, request.budget_tokens);
                return Err(BackendError::Unscripted { fingerprint });
            }
        };
        let validation = validate_artifact(&entry.payload, &request.response_schema_id)
            .map_err(|e| {
                self.ledger.release(request.phase, request.budget_tokens);
                BackendError::NotConfigured(e.to_string())
            })?;
        if !validation.is_pass() {
            self.ledger.release(request.phase, request.budget_tokens);
            return Err(BackendError::MalformedResponse {
                schema_id: request.response_schema_id.clone(),
                detail: format!("{:?}", validation.violations),
            });
        }
        self.ledger
            .settle(request.phase, request.budget_tokens, entry.tokens_consumed);
        Ok(ReasoningResponse {
            payload: entry.payload.clone(),
            tokens_consumed: entry.tokens_consumed,
            backend_id: self.backend_id().to_string(),
        })
    }

    fn tokens_remaining(&self, phase: Phase) -> u64 {
        self.ledger.tokens_remaining(phase)
    }

    fn backend_id(&self) -> &str {
        "scripted"
    }
}

/// Configuration for the live HTTP backend. The API key is read from the
/// named environment variable, never from the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiveBackendConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
}

/// HTTP completion backend. Sends the assembled prompt and expects the
/// response body to carry a JSON payload in `content[0].text` plus token
/// usage counts.
pub struct LiveBackend {
    config: LiveBackendConfig,
    api_key: String,
    client: reqwest::blocking::Client,
    ledger: BudgetLedger,
}

#[derive(Serialize)]
struct LiveRequestBody<'a> {
    model: &'a str,
    max_tokens: u64,
    messages: Vec<LiveMessage<'a>>,
}

#[derive(Serialize)]
struct LiveMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct LiveResponseBody {
    content: Vec<LiveContent>,
    #[serde(default)]
    usage: LiveUsage,
}

#[derive(Deserialize)]
struct LiveContent {
    text: String,
}

#[derive(Deserialize, Default)]
struct LiveUsage {
    #[serde(default)]
    input_tokens: u64,
    #[serde(default)]
    output_tokens: u64,
}

impl LiveBackend {
    pub fn new(
        config: LiveBackendConfig,
        budgets: BTreeMap<Phase, u64>,
    ) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            BackendError::NotConfigured(format!(
                "environment variable {} not set",
                config.api_key_env
            ))
        })?;
        Ok(LiveBackend {
            config,
            api_key,
            client: reqwest::blocking::Client::new(),
            ledger: BudgetLedger::new(budgets),
        })
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }
}

impl Backend for LiveBackend {
    fn complete(&self, request: &ReasoningRequest) -> Result<ReasoningResponse, BackendError> {
        self.ledger.reserve(request.phase, request.budget_tokens)?;
        let prompt = request.prompt_text();
        let body = LiveRequestBody {
            model: &self.config.model,
            max_tokens: request.budget_tokens,
            messages: vec![LiveMessage {
                role: "user",
                content: &prompt,
            }],
        };
        let result = self
            .client
            .post(&self.config.endpoint)
            .header("x-api-key", &self.api_key)
            .header("content-type", "application/json")
            .json(&body)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json::<LiveResponseBody>());
        let parsed = match result {
            Ok(p) => p,
            Err(e) => {
                self.ledger.release(request.phase, request.budget_tokens);
                return Err(BackendError::Transport(e.to_string()));
            }
        };
        let text = parsed
            .content
            .first()
            .map(|c| c.text.as_str())
            .unwrap_or("");
        let payload: Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => {
                self.ledger.release(request.phase, request.budget_tokens);
                return Err(BackendError::MalformedResponse {
                    schema_id: request.response_schema_id.clone(),
                    detail: format!("payload is not JSON: {e}"),
                });
            }
        };
        let validation = validate_artifact(&payload, &request.response_schema_id)
            .map_err(|e| BackendError::NotConfigured(e.to_string()))?;
        if !validation.is_pass() {
            self.ledger.release(request.phase, request.budget_tokens);
            return Err(BackendError::MalformedResponse {
                schema_id: request.response_schema_id.clone(),
                detail: format!("{:?}", validation.violations),
            });
        }
        let tokens = parsed.usage.input_tokens + parsed.usage.output_tokens;
        self.ledger.settle(request.phase, request.budget_tokens, tokens);
        Ok(ReasoningResponse {
            payload,
            tokens_consumed: tokens,
            backend_id: self.backend_id().to_string(),
        })
    }

    fn tokens_remaining(&self, phase: Phase) -> u64 {
        self.ledger.tokens_remaining(phase)
    }

    fn backend_id(&self) -> &str {
        "live"
    }
}

/// Uniform budget map helper for tests and simple configs.
pub fn uniform_budgets(amount: u64) -> BTreeMap<Phase, u64> {
    Phase::ALL.iter().map(|p| (*p, amount)).collect()
}
