//! Phase 5: the per-property proof-attempt audit.
//!
//! Each property is processed in three sub-phases: decompose the assertion
//! into verifiable sub-claims and map them to code, attempt to prove each
//! sub-claim against the full enforcement bodies plus neighborhood, and
//! stress-test the conclusion. The first failing sub-claim triggers the
//! stress-test; a plausible attack path classifies the finding as a
//! vulnerability, an implausible one downgrades it to
//! potential-vulnerability, and if every sub-claim holds the audit re-examines
//! its assumptions and passes. Every backend request presents a claim to
//! prove, never an open-ended bug hunt.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{complete_with_retry, Backend, BackendError, PromptSection, ReasoningRequest};
use crate::model::{
    AttackPath, Classification, CodeLocation, CodeScope, FailurePoint, Finding, Phase,
    ProofDimension, ProofResult, ProofStatus, ProofStep, Property, ReexaminationRecord,
    ResolutionStatus, ScopeDocument,
};
use crate::resolve::{location_text, SymbolIndex};

pub const CLAIM_DECOMPOSER_ROLE: &str = "claim-decomposer";
pub const PROVER_ROLE: &str = "prover";
pub const STRESS_TESTER_ROLE: &str = "stress-tester";
pub const ASSUMPTION_REEXAMINER_ROLE: &str = "assumption-reexaminer";

/// The closed set of audit worker roles. Requests outside this set would
/// break the claim-framed audit discipline.
pub const AUDIT_ROLES: &[&str] = &[
    CLAIM_DECOMPOSER_ROLE,
    PROVER_ROLE,
    STRESS_TESTER_ROLE,
    ASSUMPTION_REEXAMINER_ROLE,
];

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("audit worker failed: {source}")]
    Worker {
        source: BackendError,
        /// Proof steps completed before the failure, persisted for resume.
        partial_trace: Vec<ProofStep>,
    },
    #[error("audit output invalid: {0}")]
    Malformed(String),
    #[error("assertion empty: decomposition requires a non-empty assertion")]
    EmptyAssertion,
}

/// One verifiable sub-claim mapped to the code responsible for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubClaim {
    pub id: String,
    pub text: String,
    pub mapped_code: Vec<CodeLocation>,
}

/// Sub-claim as drafted by the decomposition worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftClaim {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub mapped_symbols: Vec<String>,
}

/// Response payload of the claim-decomposer worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubClaimDecomposition {
    pub sub_claims: Vec<DraftClaim>,
}

/// Response payload of the prover worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofResponse {
    pub status: ProofStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_symbol: Option<String>,
    #[serde(default)]
    pub checked_dimensions: Vec<ProofDimension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preexisting_issue_ref: Option<String>,
}

/// Stress-test verdict: whether a concrete attack path exists for the gap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackAssessment {
    pub plausible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<AttackPath>,
    pub rationale: String,
}

/// Pass record: every sub-claim held and assumptions were re-examined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassRecord {
    pub property_id: String,
    pub repo_id: String,
    pub proof_trace: Vec<ProofStep>,
    pub reexamination: ReexaminationRecord,
}

/// Outcome of one property audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum AuditOutcome {
    Finding(Finding),
    Pass(PassRecord),
}

impl AuditOutcome {
    pub fn property_id(&self) -> &str {
        match self {
            AuditOutcome::Finding(f) => &f.property_id,
            AuditOutcome::Pass(p) => &p.property_id,
        }
    }

    /// Represent the outcome as a finding row for the pre-review artifact;
    /// passes become `not_a_vulnerability` records with their full trace.
    pub fn to_finding(&self, severity: crate::model::Severity) -> Finding {
        match self {
            AuditOutcome::Finding(f) => f.clone(),
            AuditOutcome::Pass(p) => Finding {
                property_id: p.property_id.clone(),
                repo_id: p.repo_id.clone(),
                classification: Classification::NotAVulnerability,
                severity,
                gap_description: "no gap: all sub-claims hold".into(),
                attack_path: None,
                proof_trace: p.proof_trace.clone(),
                category: None,
                preexisting_issue_ref: None,
                assumption_reexamination: Some(p.reexamination.clone()),
                label: None,
            },
        }
    }
}

/// Code text for one sub-claim: full bodies of its mapped locations plus the
/// bodies of their callers and callees.
fn claim_code_text(
    claim: &SubClaim,
    index: &SymbolIndex,
    repo_root: &Path,
) -> String {
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut out = String::new();
    let mut emit = |loc: &CodeLocation, out: &mut String| {
        if seen.insert((loc.file.clone(), loc.symbol.clone())) {
            out.push_str(&format!(
                "// {} ({}:{}-{})\n",
                loc.symbol, loc.file, loc.line_start, loc.line_end
            ));
            out.push_str(&location_text(repo_root, loc));
            out.push_str("\n\n");
        }
    };
    for loc in &claim.mapped_code {
        emit(loc, &mut out);
        let mut neighbors = index.callers_of(&loc.symbol);
        neighbors.extend(index.callees_of(&loc.symbol));
        for symbol in neighbors {
            if let Some(entries) = index.symbols.get(&symbol) {
                for e in entries {
                    emit(
                        &CodeLocation {
                            file: e.file.clone(),
                            symbol: symbol.clone(),
                            line_start: e.line_start,
                            line_end: e.line_end,
                        },
                        &mut out,
                    );
                }
            }
        }
    }
    out
}

/// Build the decomposition request for one assertion.
pub fn decomposition_request(
    assertion: &str,
    scope: &CodeScope,
    budget_tokens: u64,
) -> ReasoningRequest {
    let inventory: String = scope
        .enforcement_locations
        .iter()
        .map(|l| {
            format!(
                "{} ({}:{}-{}) callers=[{}] callees=[{}]\n",
                l.location.symbol,
                l.location.file,
                l.location.line_start,
                l.location.line_end,
                l.callers.join(","),
                l.callees.join(","),
            )
        })
        .collect();
    ReasoningRequest {
        phase: Phase::P5,
        role: CLAIM_DECOMPOSER_ROLE.into(),
        prompt_sections: vec![
            PromptSection::new(
                "task",
                "Decompose the claim into independently verifiable sub-claims \
                 whose union covers it, and map each sub-claim to the symbols \
                 responsible for satisfying it.",
            ),
            PromptSection::new("claim", assertion),
            PromptSection::new("code-scope", inventory),
        ],
        response_schema_id: "sub_claim_decomposition".into(),
        budget_tokens,
    }
}

/// Decompose an assertion into sub-claims mapped to scope locations.
pub fn decompose(
    assertion: &str,
    scope: &CodeScope,
    backend: &dyn Backend,
    budget_tokens: u64,
) -> Result<Vec<SubClaim>, AuditError> {
    if assertion.trim().is_empty() {
        return Err(AuditError::EmptyAssertion);
    }
    let request = decomposition_request(assertion, scope, budget_tokens);
    let response = complete_with_retry(backend, &request).map_err(|source| AuditError::Worker {
        source,
        partial_trace: vec![],
    })?;
    let decomposition: SubClaimDecomposition = serde_json::from_value(response.payload)
        .map_err(|e| AuditError::Malformed(e.to_string()))?;
    Ok(decomposition
        .sub_claims
        .into_iter()
        .map(|draft| {
            let mapped_code = scope
                .enforcement_locations
                .iter()
                .filter(|l| draft.mapped_symbols.contains(&l.location.symbol))
                .map(|l| l.location.clone())
                .collect();
            SubClaim {
                id: draft.id,
                text: draft.text,
                mapped_code,
            }
        })
        .collect())
}

/// Build the prove request for one sub-claim.
pub fn prove_request(claim: &SubClaim, code_text: &str, budget_tokens: u64) -> ReasoningRequest {
    ReasoningRequest {
        phase: Phase::P5,
        role: PROVER_ROLE.into(),
        prompt_sections: vec![
            PromptSection::new(
                "task",
                "Attempt to prove that the claim holds in the code below. Check \
                 input coverage, path coverage, concurrency safety, temporal \
                 validity, and implementation-pattern obligations such as cache \
                 keys and deduplication keys computed from complete inputs. \
                 Report a failure only with the precise point in the code where \
                 the proof breaks.",
            ),
            PromptSection::new("claim", &claim.text),
            PromptSection::new("code", code_text),
        ],
        response_schema_id: "proof_result".into(),
        budget_tokens,
    }
}

/// Attempt to prove one sub-claim against its mapped code. A sub-claim with
/// no mapped code fails vacuously with reason "no enforcement code", without
/// a backend call.
pub fn prove(
    claim: &SubClaim,
    index: &SymbolIndex,
    repo_root: &Path,
    backend: &dyn Backend,
    budget_tokens: u64,
) -> Result<(ProofResult, Option<ProofResponse>), AuditError> {
    if claim.mapped_code.is_empty() {
        return Ok((
            ProofResult {
                sub_claim_id: claim.id.clone(),
                status: ProofStatus::Fails,
                failure_point: Some(FailurePoint {
                    location: None,
                    reason: "no enforcement code".into(),
                }),
                checked_dimensions: vec![],
            },
            None,
        ));
    }
    let code_text = claim_code_text(claim, index, repo_root);
    let request = prove_request(claim, &code_text, budget_tokens);
    let response = complete_with_retry(backend, &request).map_err(|source| AuditError::Worker {
        source,
        partial_trace: vec![],
    })?;
    let proof: ProofResponse = serde_json::from_value(response.payload)
        .map_err(|e| AuditError::Malformed(e.to_string()))?;
    let failure_point = match proof.status {
        ProofStatus::Holds => None,
        ProofStatus::Fails => {
            let location = proof.failure_symbol.as_ref().and_then(|symbol| {
                claim
                    .mapped_code
                    .iter()
                    .find(|l| &l.symbol == symbol)
                    .cloned()
                    .or_else(|| {
                        index.symbols.get(symbol).and_then(|entries| {
                            entries.first().map(|e| CodeLocation {
                                file: e.file.clone(),
                                symbol: symbol.clone(),
                                line_start: e.line_start,
                                line_end: e.line_end,
                            })
                        })
                    })
            });
            Some(FailurePoint {
                location,
                reason: proof
                    .failure_reason
                    .clone()
                    .unwrap_or_else(|| "unspecified".into()),
            })
        }
    };
    Ok((
        ProofResult {
            sub_claim_id: claim.id.clone(),
            status: proof.status,
            failure_point,
            checked_dimensions: proof.checked_dimensions.clone(),
        },
        Some(proof),
    ))
}

/// Build the stress-test request for a proof gap.
pub fn stress_request(
    claim: &SubClaim,
    gap: &FailurePoint,
    code_text: &str,
    scope_doc: &ScopeDocument,
    budget_tokens: u64,
) -> ReasoningRequest {
    let boundaries: String = scope_doc
        .trust_model
        .boundaries
        .iter()
        .map(|b| format!("{} = {:?}\n", b.name, b.level))
        .collect();
    let gap_text = match &gap.location {
        Some(l) => format!("{} at {}:{}: {}", l.symbol, l.file, l.line_start, gap.reason),
        None => gap.reason.clone(),
    };
    ReasoningRequest {
        phase: Phase::P5,
        role: STRESS_TESTER_ROLE.into(),
        prompt_sections: vec![
            PromptSection::new(
                "task",
                "Challenge the failed proof of this claim by attempting to \
                 construct a concrete attack path from a named trust boundary \
                 through the gap to an impact. If no plausible path exists, say \
                 so and why.",
            ),
            PromptSection::new("claim", &claim.text),
            PromptSection::new("gap", gap_text),
            PromptSection::new("code", code_text),
            PromptSection::new("trust-boundaries", boundaries),
        ],
        response_schema_id: "attack_assessment".into(),
        budget_tokens,
    }
}

/// Stress-test a proof gap: plausible assessments carry an attack path with a
/// named source boundary.
pub fn stress_test(
    claim: &SubClaim,
    gap: &FailurePoint,
    index: &SymbolIndex,
    repo_root: &Path,
    scope_doc: &ScopeDocument,
    backend: &dyn Backend,
    budget_tokens: u64,
) -> Result<AttackAssessment, AuditError> {
    let code_text = claim_code_text(claim, index, repo_root);
    let request = stress_request(claim, gap, &code_text, scope_doc, budget_tokens);
    let response = complete_with_retry(backend, &request).map_err(|source| AuditError::Worker {
        source,
        partial_trace: vec![],
    })?;
    serde_json::from_value(response.payload).map_err(|e| AuditError::Malformed(e.to_string()))
}

/// Build the assumption re-examination request issued when all claims hold.
pub fn reexamination_request(
    claims: &[SubClaim],
    code_text: &str,
    budget_tokens: u64,
) -> ReasoningRequest {
    let claims_text: String = claims
        .iter()
        .map(|c| format!("{}: {}\n", c.id, c.text))
        .collect();
    ReasoningRequest {
        phase: Phase::P5,
        role: ASSUMPTION_REEXAMINER_ROLE.into(),
        prompt_sections: vec![
            PromptSection::new(
                "task",
                "Every sub-claim was proved to hold. Challenge that conclusion \
                 by re-examining every assumption the proofs relied on; confirm \
                 or flag each.",
            ),
            PromptSection::new("claims", claims_text),
            PromptSection::new("code", code_text),
        ],
        response_schema_id: "assumption_reexamination".into(),
        budget_tokens,
    }
}

/// Per-request token budgets for the audit sub-phases.
#[derive(Debug, Clone, Copy)]
pub struct AuditBudgets {
    pub decompose: u64,
    pub prove: u64,
    pub stress: u64,
    pub reexamine: u64,
}

impl Default for AuditBudgets {
    fn default() -> Self {
        AuditBudgets {
            decompose: 2048,
            prove: 4096,
            stress: 2048,
            reexamine: 1024,
        }
    }
}

/// Run the full per-property audit.
///
/// An unresolved scope short-circuits to an `out_of_scope` finding. Otherwise
/// sub-claim proofs execute sequentially in decomposition order with early
/// exit at the first failure, which is stress-tested to decide between
/// `vulnerability` (plausible attack) and `potential_vulnerability`
/// (implausible). If every sub-claim holds the audit re-examines assumptions
/// and returns a pass. A worker failure mid-audit carries the partial proof
/// trace so the orchestrator can persist it.
pub fn audit(
    property: &Property,
    scope: &CodeScope,
    index: &SymbolIndex,
    repo_root: &Path,
    scope_doc: &ScopeDocument,
    backend: &dyn Backend,
    budgets: &AuditBudgets,
) -> Result<AuditOutcome, AuditError> {
    if scope.resolution_status == ResolutionStatus::Unresolved {
        return Ok(AuditOutcome::Finding(Finding {
            property_id: property.id.clone(),
            repo_id: index.repo_id.clone(),
            classification: Classification::OutOfScope,
            severity: property.severity,
            gap_description: format!(
                "unresolved: {}",
                scope.note.as_deref().unwrap_or("no enforcement location")
            ),
            attack_path: None,
            proof_trace: vec![],
            category: None,
            preexisting_issue_ref: None,
            assumption_reexamination: None,
            label: None,
        }));
    }
    let claims = decompose(&property.assertion, scope, backend, budgets.decompose)?;
    let mut trace: Vec<ProofStep> = Vec::new();
    let attach_trace = |source: AuditError, trace: &[ProofStep]| match source {
        AuditError::Worker { source, .. } => AuditError::Worker {
            source,
            partial_trace: trace.to_vec(),
        },
        other => other,
    };
    for claim in &claims {
        let (result, proof_response) =
            prove(claim, index, repo_root, backend, budgets.prove)
                .map_err(|e| attach_trace(e, &trace))?;
        trace.push(ProofStep {
            sub_claim_id: claim.id.clone(),
            claim: claim.text.clone(),
            result: result.clone(),
        });
        if result.status == ProofStatus::Fails {
            let gap = result.failure_point.as_ref().expect("fails carries failure point");
            let assessment = stress_test(
                claim,
                gap,
                index,
                repo_root,
                scope_doc,
                backend,
                budgets.stress,
            )
            .map_err(|e| attach_trace(e, &trace))?;
            let (category, preexisting) = proof_response
                .map(|p| (p.category, p.preexisting_issue_ref))
                .unwrap_or((None, None));
            let finding = if assessment.plausible {
                Finding {
                    property_id: property.id.clone(),
                    repo_id: index.repo_id.clone(),
                    classification: Classification::Vulnerability,
                    severity: property.severity,
                    gap_description: gap.reason.clone(),
                    attack_path: assessment.path,
                    proof_trace: trace,
                    category,
                    preexisting_issue_ref: preexisting,
                    assumption_reexamination: None,
                    label: None,
                }
            } else {
                Finding {
                    property_id: property.id.clone(),
                    repo_id: index.repo_id.clone(),
                    classification: Classification::PotentialVulnerability,
                    severity: property.severity,
                    gap_description: format!(
                        "{}; stress-test: {}",
                        gap.reason, assessment.rationale
                    ),
                    attack_path: None,
                    proof_trace: trace,
                    category,
                    preexisting_issue_ref: preexisting,
                    assumption_reexamination: None,
                    label: None,
                }
            };
            return Ok(AuditOutcome::Finding(finding));
        }
    }
    // Every sub-claim held: challenge the conclusion by re-examining
    // assumptions, then pass.
    let all_code: String = claims
        .iter()
        .map(|c| claim_code_text(c, index, repo_root))
        .collect();
    let request = reexamination_request(&claims, &all_code, budgets.reexamine);
    let response = complete_with_retry(backend, &request)
        .map_err(|source| AuditError::Worker {
            source,
            partial_trace: trace.clone(),
        })?;
    let reexamination: ReexaminationRecord = serde_json::from_value(response.payload)
        .map_err(|e| AuditError::Malformed(e.to_string()))?;
    Ok(AuditOutcome::Pass(PassRecord {
        property_id: property.id.clone(),
        repo_id: index.repo_id.clone(),
        proof_trace: trace,
        reexamination,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{uniform_budgets, ScriptFixture, ScriptedBackend};
    use crate::model::{
        PropertyKind, PropertyOrigin, PropertySource, Provenance, ScopedLocation, Severity,
        TrustBoundary, TrustLevel, TrustModel,
    };
    use crate::resolve::{build_symbol_index, LanguageProfile, LexicalProfile};
    use serde_json::json;
    use std::collections::BTreeMap;
    use std::path::PathBuf;

    fn scope_doc() -> ScopeDocument {
        ScopeDocument {
            included_components: vec!["src/*".into()],
            excluded_categories: vec![],
            preexisting_issue_ids: vec![],
            severity_thresholds: [
                (Severity::High, "consensus break".to_string()),
                (Severity::Medium, "node crash".to_string()),
                (Severity::Low, "degraded".to_string()),
                (Severity::Informational, "none".to_string()),
            ]
            .into_iter()
            .collect(),
            trust_model: TrustModel {
                boundaries: vec![
                    TrustBoundary {
                        name: "rpc".into(),
                        level: TrustLevel::Untrusted,
                        rationale: "user-facing".into(),
                    },
                    TrustBoundary {
                        name: "cl-el-engine-api".into(),
                        level: TrustLevel::SemiTrusted,
                        rationale: "authenticated channel".into(),
                    },
                ],
            },
        }
    }

    fn property(assertion: &str) -> Property {
        let hash = crate::model::property_hash("SG-001", assertion);
        Property {
            id: crate::model::property_id(&hash, PropertyKind::Invariant, 1),
            kind: PropertyKind::Invariant,
            assertion: assertion.into(),
            severity: Severity::High,
            severity_rationale: None,
            sources: vec![PropertySource::OptimizationCorrectness],
            provenance: Provenance {
                subgraph: "SG-001".into(),
                spec_section: "KZG".into(),
                inv_label: None,
            },
            origin: PropertyOrigin::Auto,
        }
    }

    /// Fixture: a C slice with the batch-challenge function receiving the
    /// original commitment array instead of the deduplicated one.
    fn kzg_fixture() -> (tempfile::TempDir, SymbolIndex, CodeScope) {
        let dir = tempfile::tempdir().unwrap();
        let src = "\
static int compute_challenge(const uint8_t *commitments_bytes, size_t n) {\n\
    return hash_all(commitments_bytes, n);\n\
}\n\
\n\
int hash_all(const uint8_t *data, size_t n) {\n\
    return (int)n;\n\
}\n\
\n\
int verify_batch(const uint8_t *commitments_bytes, const uint8_t *unique_commitments, size_t n) {\n\
    return compute_challenge(commitments_bytes, n);\n\
}\n";
        std::fs::create_dir_all(dir.path().join("src")).unwrap();
        std::fs::write(dir.path().join("src/kzg.c"), src).unwrap();
        let profiles: Vec<Box<dyn LanguageProfile>> = vec![Box::new(LexicalProfile::c())];
        let patterns: Vec<String> = crate::resolve::DEFAULT_TEST_PATTERNS
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (index, _) = build_symbol_index(dir.path(), "ckzg", &profiles, &patterns).unwrap();
        let entry = &index.symbols["compute_challenge"][0];
        let scope = CodeScope {
            property_id: String::new(),
            enforcement_locations: vec![ScopedLocation {
                location: CodeLocation {
                    file: entry.file.clone(),
                    symbol: "compute_challenge".into(),
                    line_start: entry.line_start,
                    line_end: entry.line_end,
                },
                callers: index.callers_of("compute_challenge"),
                callees: index.callees_of("compute_challenge"),
            }],
            resolution_status: ResolutionStatus::Resolved,
            note: None,
        };
        (dir, index, scope)
    }

    struct AuditFixtureBuilder {
        fixture: ScriptFixture,
    }

    impl AuditFixtureBuilder {
        fn new() -> Self {
            AuditFixtureBuilder {
                fixture: ScriptFixture::default(),
            }
        }

        fn script(mut self, req: &ReasoningRequest, payload: serde_json::Value) -> Self {
            self.fixture.insert(req, payload, 150);
            self
        }

        fn backend(self) -> ScriptedBackend {
            ScriptedBackend::new(self.fixture, uniform_budgets(100_000)).unwrap()
        }
    }

    fn dedup_claims(scope: &CodeScope) -> (SubClaim, SubClaim) {
        let mapped: Vec<CodeLocation> = scope
            .enforcement_locations
            .iter()
            .map(|l| l.location.clone())
            .collect();
        (
            SubClaim {
                id: "SC-1".into(),
                text: "Deduplication occurs before the challenge is computed.".into(),
                mapped_code: mapped.clone(),
            },
            SubClaim {
                id: "SC-2".into(),
                text: "The challenge input is the deduplicated array.".into(),
                mapped_code: mapped,
            },
        )
    }

    #[test]
    fn worked_example_dedup_gap_is_high_vulnerability() {
        let (dir, index, mut scope) = kzg_fixture();
        let p = property(
            "The KZG batch verification challenge is computed from the deduplicated commitment array.",
        );
        scope.property_id = p.id.clone();
        let budgets = AuditBudgets::default();
        let (c1, c2) = dedup_claims(&scope);
        let decomp_req = decomposition_request(&p.assertion, &scope, budgets.decompose);
        let code1 = claim_code_text(&c1, &index, dir.path());
        let prove1 = prove_request(&c1, &code1, budgets.prove);
        let gap = FailurePoint {
            location: Some(c1.mapped_code[0].clone()),
            reason: "compute_challenge receives commitments_bytes (the original array with duplicates) rather than unique_commitments".into(),
        };
        let stress1 = stress_request(&c1, &gap, &code1, &scope_doc(), budgets.stress);
        let backend = AuditFixtureBuilder::new()
            .script(
                &decomp_req,
                json!({"sub_claims": [
                    {"id": "SC-1", "text": c1.text, "mapped_symbols": ["compute_challenge"]},
                    {"id": "SC-2", "text": c2.text, "mapped_symbols": ["compute_challenge"]}
                ]}),
            )
            .script(
                &prove1,
                json!({
                    "status": "fails",
                    "failure_reason": "compute_challenge receives commitments_bytes (the original array with duplicates) rather than unique_commitments",
                    "failure_symbol": "compute_challenge",
                    "checked_dimensions": ["input_coverage", "implementation_pattern"]
                }),
            )
            .script(
                &stress1,
                json!({
                    "plausible": true,
                    "path": {
                        "source_boundary": "rpc",
                        "steps": ["submit crafted duplicate commitments", "challenge hash differs from the expected one"],
                        "sink": "verification accepts an invalid proof"
                    },
                    "rationale": "crafted duplicate commitments change the challenge hash"
                }),
            )
            .backend();
        let outcome = audit(&p, &scope, &index, dir.path(), &scope_doc(), &backend, &budgets).unwrap();
        let AuditOutcome::Finding(finding) = outcome else {
            panic!("expected finding");
        };
        assert_eq!(finding.classification, Classification::Vulnerability);
        assert_eq!(finding.severity, Severity::High);
        assert!(finding.gap_description.contains("commitments_bytes"));
        assert!(finding.gap_description.contains("unique_commitments"));
        assert_eq!(finding.attack_path.as_ref().unwrap().source_boundary, "rpc");
        // Early exit: only the first (failing) sub-claim appears in the trace.
        assert_eq!(finding.proof_trace.len(), 1);
        let check = crate::schema::validate_value(&finding, "finding").unwrap();
        assert!(check.is_pass(), "{:?}", check.violations);
    }

    #[test]
    fn trivially_holding_claim_passes_with_reexamination() {
        let (dir, index, mut scope) = kzg_fixture();
        let p = property("The challenge function hashes its input.");
        scope.property_id = p.id.clone();
        let budgets = AuditBudgets::default();
        let claim = SubClaim {
            id: "SC-1".into(),
            text: "The challenge function hashes its input.".into(),
            mapped_code: vec![scope.enforcement_locations[0].location.clone()],
        };
        let decomp_req = decomposition_request(&p.assertion, &scope, budgets.decompose);
        let code = claim_code_text(&claim, &index, dir.path());
        let prove_req = prove_request(&claim, &code, budgets.prove);
        let reexam_req = reexamination_request(&[claim.clone()], &code, budgets.reexamine);
        let backend = AuditFixtureBuilder::new()
            .script(
                &decomp_req,
                json!({"sub_claims": [
                    {"id": "SC-1", "text": claim.text, "mapped_symbols": ["compute_challenge"]}
                ]}),
            )
            .script(
                &prove_req,
                json!({"status": "holds", "checked_dimensions": ["input_coverage", "path_coverage"]}),
            )
            .script(
                &reexam_req,
                json!({"assumptions_reconfirmed": true, "notes": "hash_all covers the full input buffer"}),
            )
            .backend();
        let outcome = audit(&p, &scope, &index, dir.path(), &scope_doc(), &backend, &budgets).unwrap();
        let AuditOutcome::Pass(pass) = outcome else {
            panic!("expected pass");
        };
        assert_eq!(pass.proof_trace.len(), 1);
        assert!(pass.reexamination.assumptions_reconfirmed);
    }

    #[test]
    fn implausible_attack_downgrades_to_potential() {
        let (dir, index, mut scope) = kzg_fixture();
        let p = property("Challenge inputs are length-validated.");
        scope.property_id = p.id.clone();
        let budgets = AuditBudgets::default();
        let claim = SubClaim {
            id: "SC-1".into(),
            text: "Input length is validated before hashing.".into(),
            mapped_code: vec![scope.enforcement_locations[0].location.clone()],
        };
        let decomp_req = decomposition_request(&p.assertion, &scope, budgets.decompose);
        let code = claim_code_text(&claim, &index, dir.path());
        let prove_req = prove_request(&claim, &code, budgets.prove);
        let gap = FailurePoint {
            location: Some(claim.mapped_code[0].clone()),
            reason: "length validation is skipped".into(),
        };
        let stress_req = stress_request(&claim, &gap, &code, &scope_doc(), budgets.stress);
        let backend = AuditFixtureBuilder::new()
            .script(
                &decomp_req,
                json!({"sub_claims": [
                    {"id": "SC-1", "text": claim.text, "mapped_symbols": ["compute_challenge"]}
                ]}),
            )
            .script(
                &prove_req,
                json!({
                    "status": "fails",
                    "failure_reason": "length validation is skipped",
                    "failure_symbol": "compute_challenge",
                    "checked_dimensions": ["input_coverage"]
                }),
            )
            .script(
                &stress_req,
                json!({
                    "plausible": false,
                    "rationale": "the code path is reachable only from constant inputs"
                }),
            )
            .backend();
        let outcome = audit(&p, &scope, &index, dir.path(), &scope_doc(), &backend, &budgets).unwrap();
        let AuditOutcome::Finding(finding) = outcome else {
            panic!("expected finding");
        };
        assert_eq!(finding.classification, Classification::PotentialVulnerability);
        assert!(finding.attack_path.is_none());
        let check = crate::schema::validate_value(&finding, "finding").unwrap();
        assert!(check.is_pass());
    }

    #[test]
    fn unresolved_scope_short_circuits_out_of_scope() {
        let (dir, index, _) = kzg_fixture();
        let p = property("Handshake ordering is enforced.");
        let scope = CodeScope {
            property_id: p.id.clone(),
            enforcement_locations: vec![],
            resolution_status: ResolutionStatus::Unresolved,
            note: Some("no enforcement symbols identified".into()),
        };
        let backend =
            ScriptedBackend::new(ScriptFixture::default(), uniform_budgets(1_000)).unwrap();
        let outcome = audit(
            &p,
            &scope,
            &index,
            dir.path(),
            &scope_doc(),
            &backend,
            &AuditBudgets::default(),
        )
        .unwrap();
        let AuditOutcome::Finding(f) = outcome else {
            panic!("expected finding");
        };
        assert_eq!(f.classification, Classification::OutOfScope);
        assert!(f.gap_description.starts_with("unresolved:"));
        assert!(backend.request_log().is_empty(), "no backend calls for unresolved scope");
    }

    #[test]
    fn empty_assertion_is_precondition_violation() {
        let (_, _, scope) = kzg_fixture();
        let backend =
            ScriptedBackend::new(ScriptFixture::default(), uniform_budgets(1_000)).unwrap();
        let err = decompose("   ", &scope, &backend, 100).unwrap_err();
        assert!(matches!(err, AuditError::EmptyAssertion));
    }

    #[test]
    fn zero_sub_claims_is_malformed_response() {
        let (_, _, scope) = kzg_fixture();
        let req = decomposition_request("Some claim.", &scope, 2048);
        let mut fixture = ScriptFixture::default();
        fixture.insert(&req, json!({"sub_claims": []}), 20);
        let backend = ScriptedBackend::new(fixture, uniform_budgets(100_000)).unwrap();
        let err = decompose("Some claim.", &scope, &backend, 2048).unwrap_err();
        let AuditError::Worker { source, .. } = err else {
            panic!("expected worker failure");
        };
        assert!(matches!(source, BackendError::MalformedResponse { .. }));
    }

    #[test]
    fn single_condition_assertion_yields_one_sub_claim() {
        let (_, _, mut scope) = kzg_fixture();
        scope.property_id = "PROP-00000000-inv-001".into();
        let req = decomposition_request("Exactly one condition.", &scope, 2048);
        let mut fixture = ScriptFixture::default();
        fixture.insert(
            &req,
            json!({"sub_claims": [{"id": "SC-1", "text": "Exactly one condition.", "mapped_symbols": ["compute_challenge"]}]}),
            30,
        );
        let backend = ScriptedBackend::new(fixture, uniform_budgets(100_000)).unwrap();
        let claims = decompose("Exactly one condition.", &scope, &backend, 2048).unwrap();
        assert_eq!(claims.len(), 1);
        assert_eq!(claims[0].mapped_code.len(), 1);
    }

    #[test]
    fn empty_mapped_code_fails_vacuously_without_backend_call() {
        let (dir, index, _) = kzg_fixture();
        let claim = SubClaim {
            id: "SC-9".into(),
            text: "Unmappable claim.".into(),
            mapped_code: vec![],
        };
        let backend =
            ScriptedBackend::new(ScriptFixture::default(), uniform_budgets(1_000)).unwrap();
        let (result, _) = prove(&claim, &index, dir.path(), &backend, 100).unwrap();
        assert_eq!(result.status, ProofStatus::Fails);
        assert_eq!(
            result.failure_point.unwrap().reason,
            "no enforcement code"
        );
        assert!(backend.request_log().is_empty());
    }

    #[test]
    fn stress_test_rpc_reachable_is_plausible_with_source() {
        let (dir, index, scope) = kzg_fixture();
        let claim = SubClaim {
            id: "SC-1".into(),
            text: "Array index is bounds-checked.".into(),
            mapped_code: vec![scope.enforcement_locations[0].location.clone()],
        };
        let gap = FailurePoint {
            location: Some(claim.mapped_code[0].clone()),
            reason: "unchecked array access".into(),
        };
        let code = claim_code_text(&claim, &index, dir.path());
        let req = stress_request(&claim, &gap, &code, &scope_doc(), 2048);
        let mut fixture = ScriptFixture::default();
        fixture.insert(
            &req,
            json!({
                "plausible": true,
                "path": {
                    "source_boundary": "rpc",
                    "steps": ["send oversized index via RPC"],
                    "sink": "out-of-bounds read",
                    "alternative_sources": ["cl-el-engine-api"]
                },
                "rationale": "reachable from RPC and Engine API"
            }),
            80,
        );
        let backend = ScriptedBackend::new(fixture, uniform_budgets(100_000)).unwrap();
        let assessment =
            stress_test(&claim, &gap, &index, dir.path(), &scope_doc(), &backend, 2048).unwrap();
        assert!(assessment.plausible);
        assert_eq!(assessment.path.unwrap().source_boundary, "rpc");
    }

    #[test]
    fn plausible_without_path_is_malformed() {
        let (dir, index, scope) = kzg_fixture();
        let claim = SubClaim {
            id: "SC-1".into(),
            text: "c".into(),
            mapped_code: vec![scope.enforcement_locations[0].location.clone()],
        };
        let gap = FailurePoint {
            location: None,
            reason: "gap".into(),
        };
        let code = claim_code_text(&claim, &index, dir.path());
        let req = stress_request(&claim, &gap, &code, &scope_doc(), 2048);
        let mut fixture = ScriptFixture::default();
        fixture.insert(&req, json!({"plausible": true, "rationale": "r"}), 10);
        let backend = ScriptedBackend::new(fixture, uniform_budgets(100_000)).unwrap();
        let err = stress_test(&claim, &gap, &index, dir.path(), &scope_doc(), &backend, 2048)
            .unwrap_err();
        assert!(matches!(err, AuditError::Worker { .. }));
    }

    #[test]
    fn worker_failure_mid_audit_carries_partial_trace() {
        let (dir, index, mut scope) = kzg_fixture();
        let p = property("Two-claim property with missing second proof.");
        scope.property_id = p.id.clone();
        let budgets = AuditBudgets::default();
        let c1 = SubClaim {
            id: "SC-1".into(),
            text: "first claim".into(),
            mapped_code: vec![scope.enforcement_locations[0].location.clone()],
        };
        let decomp_req = decomposition_request(&p.assertion, &scope, budgets.decompose);
        let code = claim_code_text(&c1, &index, dir.path());
        let prove1 = prove_request(&c1, &code, budgets.prove);
        // Second prove request is left unscripted, simulating a backend
        // failure after the first claim succeeds.
        let backend = AuditFixtureBuilder::new()
            .script(
                &decomp_req,
                json!({"sub_claims": [
                    {"id": "SC-1", "text": "first claim", "mapped_symbols": ["compute_challenge"]},
                    {"id": "SC-2", "text": "second claim", "mapped_symbols": ["compute_challenge"]}
                ]}),
            )
            .script(&prove1, json!({"status": "holds", "checked_dimensions": []}))
            .backend();
        let err = audit(&p, &scope, &index, dir.path(), &scope_doc(), &backend, &budgets)
            .unwrap_err();
        let AuditError::Worker { partial_trace, .. } = err else {
            panic!("expected worker failure");
        };
        assert_eq!(partial_trace.len(), 1);
        assert_eq!(partial_trace[0].sub_claim_id, "SC-1");
    }

    #[test]
    fn audit_requests_are_claim_framed() {
        let (dir, index, mut scope) = kzg_fixture();
        let p = property("The challenge function hashes its input.");
        scope.property_id = p.id.clone();
        let budgets = AuditBudgets::default();
        let claim = SubClaim {
            id: "SC-1".into(),
            text: "The challenge function hashes its input.".into(),
            mapped_code: vec![scope.enforcement_locations[0].location.clone()],
        };
        let decomp_req = decomposition_request(&p.assertion, &scope, budgets.decompose);
        let code = claim_code_text(&claim, &index, dir.path());
        let prove_req = prove_request(&claim, &code, budgets.prove);
        let reexam_req = reexamination_request(&[claim.clone()], &code, budgets.reexamine);
        let backend = AuditFixtureBuilder::new()
            .script(
                &decomp_req,
                json!({"sub_claims": [{"id": "SC-1", "text": claim.text, "mapped_symbols": ["compute_challenge"]}]}),
            )
            .script(&prove_req, json!({"status": "holds", "checked_dimensions": []}))
            .script(
                &reexam_req,
                json!({"assumptions_reconfirmed": true, "notes": "ok"}),
            )
            .backend();
        audit(&p, &scope, &index, dir.path(), &scope_doc(), &backend, &budgets).unwrap();
        for req in backend.request_log() {
            assert_eq!(req.phase, Phase::P5);
            assert!(AUDIT_ROLES.contains(&req.role.as_str()), "role {}", req.role);
            assert!(
                req.prompt_sections
                    .iter()
                    .any(|s| s.name == "claim" || s.name == "claims"),
                "request without a claim section: {}",
                req.role
            );
            let text = req.prompt_text().to_lowercase();
            assert!(!text.contains("find bugs"));
            assert!(!text.contains("find vulnerabilities"));
        }
    }

    #[test]
    fn pass_record_converts_to_not_a_vulnerability_row() {
        let pass = PassRecord {
            property_id: "PROP-00000000-inv-001".into(),
            repo_id: "client-go".into(),
            proof_trace: vec![],
            reexamination: ReexaminationRecord {
                assumptions_reconfirmed: true,
                notes: "ok".into(),
            },
        };
        let finding = AuditOutcome::Pass(pass).to_finding(Severity::Medium);
        assert_eq!(finding.classification, Classification::NotAVulnerability);
        assert!(finding.assumption_reexamination.is_some());
    }

    #[test]
    fn failure_location_falls_back_to_index_lookup() {
        let (dir, index, scope) = kzg_fixture();
        let claim = SubClaim {
            id: "SC-1".into(),
            text: "claim".into(),
            mapped_code: vec![scope.enforcement_locations[0].location.clone()],
        };
        let code = claim_code_text(&claim, &index, dir.path());
        let req = prove_request(&claim, &code, 4096);
        let mut fixture = ScriptFixture::default();
        // Failure symbol is a neighborhood function, not the mapped one.
        fixture.insert(
            &req,
            json!({
                "status": "fails",
                "failure_reason": "caller skips validation",
                "failure_symbol": "verify_batch",
                "checked_dimensions": ["path_coverage"]
            }),
            70,
        );
        let backend = ScriptedBackend::new(fixture, uniform_budgets(100_000)).unwrap();
        let (result, _) = prove(&claim, &index, dir.path(), &backend, 4096).unwrap();
        let fp = result.failure_point.unwrap();
        assert_eq!(fp.location.unwrap().symbol, "verify_batch");
    }

    #[test]
    fn audit_outcome_finding_paths_validate_against_schema() {
        // Classification soundness is checkable on finding fields alone:
        // vulnerability carries a path, potential does not.
        let f = Finding {
            property_id: "PROP-00000000-inv-001".into(),
            repo_id: "r".into(),
            classification: Classification::PotentialVulnerability,
            severity: Severity::Low,
            gap_description: "gap".into(),
            attack_path: Some(AttackPath {
                source_boundary: "rpc".into(),
                steps: vec![],
                sink: "s".into(),
                alternative_sources: vec![],
            }),
            proof_trace: vec![],
            category: None,
            preexisting_issue_ref: None,
            assumption_reexamination: None,
            label: None,
        };
        let res = crate::schema::validate_value(&f, "finding").unwrap();
        assert!(!res.is_pass());
    }

    #[test]
    fn audit_budgets_default_nonzero() {
        let b = AuditBudgets::default();
        assert!(b.decompose > 0 && b.prove > 0 && b.stress > 0 && b.reexamine > 0);
        let _ = PathBuf::new();
        let _: BTreeMap<Phase, u64> = uniform_budgets(1);
    }
}
