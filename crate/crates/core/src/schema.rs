//! Versioned JSON schema validation for every inter-phase artifact kind.
//!
//! Each artifact kind registers a validator that first checks the structural
//! shape (via typed deserialization) and then the semantic invariants that
//! cannot be expressed by shape alone. Violations name the field path and the
//! invariant that was broken, so a failed boundary check is actionable.

use std::collections::BTreeSet;

use regex::Regex;
use serde::de::DeserializeOwned;
use serde_json::Value;
use thiserror::Error;

use crate::model::{
    parse_property_id, AttackPath, Classification, CodeScope, Finding, GateKind,
    InvariantAnnotation, ProofStatus, Property, PropertyOrigin, ReviewVerdict, ReviewedFinding,
    ScopeDocument, Severity, SpecIndex, Subgraph, TrustLevel, TrustModel,
};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("unknown schema id: {0}")]
    UnknownSchema(String),
}

/// One violated invariant, with the JSON path it was found at.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Violation {
    pub path: String,
    pub invariant: String,
}

/// Result of validating one artifact against one registered schema.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ValidationResult {
    pub schema_id: String,
    pub schema_version: u32,
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Registered phase-boundary schema ids. Response payload schemas used by the
/// model backend are registered alongside artifact schemas so that every
/// structured exchange is validated through the same path.
pub const SCHEMA_IDS: &[&str] = &[
    "spec_index",
    "spec_document",
    "subgraph",
    "subgraph_list",
    "invariant_annotation",
    "property",
    "property_list",
    "trust_model",
    "scope_document",
    "trust_model_analysis",
    "code_scope",
    "code_scope_list",
    "subgraph_index",
    "finding",
    "finding_list",
    "reviewed_finding",
    "reviewed_finding_list",
    "subgraph_extraction",
    "property_synthesis",
    "severity_assignment",
    "code_resolution",
    "sub_claim_decomposition",
    "proof_result",
    "attack_assessment",
    "assumption_reexamination",
    "severity_calibration",
    "match_proposal",
];

pub const SCHEMA_VERSION: u32 = 1;

/// Validate one inter-phase artifact against a registered schema.
///
/// Returns a pass (empty violation list) or the list of violations; an
/// unknown schema id is a configuration error.
pub fn validate_artifact(artifact: &Value, schema_id: &str) -> Result<ValidationResult, SchemaError> {
    let violations = match schema_id {
        "spec_index" => check_typed::<SpecIndex>(artifact, check_spec_index),
        "spec_document" => check_typed::<crate::model::SpecDocument>(artifact, check_spec_document),
        "subgraph" => check_typed::<Subgraph>(artifact, check_subgraph),
        "subgraph_list" => check_typed_list::<Subgraph>(artifact, check_subgraph),
        "invariant_annotation" => check_typed::<InvariantAnnotation>(artifact, check_annotation),
        "property" => check_typed::<Property>(artifact, check_property),
        "property_list" => check_typed_list::<Property>(artifact, check_property),
        "trust_model" => check_typed::<TrustModel>(artifact, check_trust_model),
        "scope_document" => check_typed::<ScopeDocument>(artifact, check_scope_document),
        "trust_model_analysis" => {
            check_typed::<crate::propgen::TrustModelAnalysis>(artifact, check_trust_analysis)
        }
        "code_scope" => check_typed::<CodeScope>(artifact, check_code_scope),
        "code_scope_list" => check_typed_list::<CodeScope>(artifact, check_code_scope),
        "subgraph_index" => {
            check_typed::<crate::resolve::SubgraphIndexArtifact>(artifact, |_, _| {})
        }
        "finding" => check_typed::<Finding>(artifact, check_finding),
        "finding_list" => check_typed_list::<Finding>(artifact, check_finding),
        "reviewed_finding" => check_typed::<ReviewedFinding>(artifact, check_reviewed),
        "reviewed_finding_list" => check_typed_list::<ReviewedFinding>(artifact, check_reviewed),
        "subgraph_extraction" => {
            check_typed::<crate::ingest::SubgraphExtraction>(artifact, check_extraction)
        }
        "property_synthesis" => {
            check_typed::<crate::propgen::PropertySynthesis>(artifact, check_synthesis)
        }
        "severity_assignment" => {
            check_typed::<crate::propgen::SeverityAssignment>(artifact, |_, _| {})
        }
        "code_resolution" => check_typed::<crate::resolve::CodeResolution>(artifact, |_, _| {}),
        "sub_claim_decomposition" => {
            check_typed::<crate::engine::SubClaimDecomposition>(artifact, check_decomposition)
        }
        "proof_result" => {
            check_typed::<crate::engine::ProofResponse>(artifact, check_proof_response)
        }
        "attack_assessment" => {
            check_typed::<crate::engine::AttackAssessment>(artifact, check_attack_assessment)
        }
        "assumption_reexamination" => {
            check_typed::<crate::model::ReexaminationRecord>(artifact, |_, _| {})
        }
        "severity_calibration" => {
            check_typed::<crate::review::SeverityCalibration>(artifact, |_, _| {})
        }
        "match_proposal" => check_typed::<crate::model::MatchProposal>(artifact, |_, _| {}),
        other => return Err(SchemaError::UnknownSchema(other.to_string())),
    };
    Ok(ValidationResult {
        schema_id: schema_id.to_string(),
        schema_version: SCHEMA_VERSION,
        violations,
    })
}

/// Shorthand: validate a serializable value against a schema.
pub fn validate_value<T: serde::Serialize>(
    value: &T,
    schema_id: &str,
) -> Result<ValidationResult, SchemaError> {
    let json = serde_json::to_value(value).expect("serializable artifact");
    validate_artifact(&json, schema_id)
}

fn check_typed<T: DeserializeOwned>(
    value: &Value,
    semantic: impl Fn(&T, &mut Vec<Violation>),
) -> Vec<Violation> {
    match serde_json::from_value::<T>(value.clone()) {
        Ok(typed) => {
            let mut v = Vec::new();
            semantic(&typed, &mut v);
            v
        }
        Err(e) => vec![Violation {
            path: "$".into(),
            invariant: format!("structural: {e}"),
        }],
    }
}

fn check_typed_list<T: DeserializeOwned>(
    value: &Value,
    semantic: impl Fn(&T, &mut Vec<Violation>) + Copy,
) -> Vec<Violation> {
    let Some(items) = value.as_array() else {
        return vec![Violation {
            path: "$".into(),
            invariant: "structural: expected a JSON array".into(),
        }];
    };
    let mut all = Vec::new();
    for (i, item) in items.iter().enumerate() {
        for mut v in check_typed(item, semantic) {
            v.path = format!("$[{i}]{}", v.path.trim_start_matches('$'));
            all.push(v);
        }
    }
    all
}

fn violation(out: &mut Vec<Violation>, path: &str, invariant: impl Into<String>) {
    out.push(Violation {
        path: path.to_string(),
        invariant: invariant.into(),
    });
}

fn check_spec_document(doc: &crate::model::SpecDocument, out: &mut Vec<Violation>) {
    if doc.content.is_empty() {
        violation(out, "$.content", "content non-empty");
    }
    if doc.id.is_empty() {
        violation(out, "$.id", "id non-empty");
    }
}

fn check_spec_index(index: &SpecIndex, out: &mut Vec<Violation>) {
    let mut ids = BTreeSet::new();
    let mut urls = BTreeSet::new();
    for (i, doc) in index.documents.iter().enumerate() {
        if !ids.insert(&doc.id) {
            violation(out, &format!("$.documents[{i}].id"), "id unique within index");
        }
        if !urls.insert(&doc.url) {
            violation(out, &format!("$.documents[{i}].url"), "no duplicate URLs");
        }
        if doc.content.is_empty() {
            violation(out, &format!("$.documents[{i}].content"), "content non-empty");
        }
    }
}

fn subgraph_id_re() -> Regex {
    Regex::new(r"^SG-[0-9]{3}$").unwrap()
}

fn inv_label_re() -> Regex {
    Regex::new(r"INV-[0-9]{3}").unwrap()
}

fn check_subgraph(sg: &Subgraph, out: &mut Vec<Violation>) {
    if !subgraph_id_re().is_match(&sg.id) {
        violation(out, "$.id", "id matches SG-[0-9]{3}");
    }
    let labels: BTreeSet<&str> = sg
        .invariant_annotations
        .iter()
        .map(|a| a.label.as_str())
        .collect();
    let re = inv_label_re();
    for (i, t) in sg.transitions.iter().enumerate() {
        for m in re.find_iter(&t.trigger) {
            if !labels.contains(m.as_str()) {
                violation(
                    out,
                    &format!("$.transitions[{i}].trigger"),
                    format!(
                        "INV label referenced by transition exists in invariant_annotations ({})",
                        m.as_str()
                    ),
                );
            }
        }
    }
    for (i, a) in sg.invariant_annotations.iter().enumerate() {
        let mut sub = Vec::new();
        check_annotation(a, &mut sub);
        for mut v in sub {
            v.path = format!("$.invariant_annotations[{i}]{}", v.path.trim_start_matches('$'));
            out.push(v);
        }
    }
}

fn check_annotation(a: &InvariantAnnotation, out: &mut Vec<Violation>) {
    if !Regex::new(r"^INV-[0-9]{3}$").unwrap().is_match(&a.label) {
        violation(out, "$.label", "label matches INV-NNN");
    }
    let phrase = a.modal_strength.phrase().to_lowercase();
    if !a.source_sentence.to_lowercase().contains(&phrase) {
        violation(
            out,
            "$.source_sentence",
            "source_sentence contains the modal verb that produced modal_strength",
        );
    }
}

fn check_property(p: &Property, out: &mut Vec<Violation>) {
    match parse_property_id(&p.id) {
        Some((_, kind, _)) => {
            if kind != p.kind {
                violation(out, "$.id", "kind/id mismatch");
            }
        }
        None => violation(out, "$.id", "id matches PROP-<8 hex>-<infix>-NNN"),
    }
    if p.sources.is_empty() {
        violation(out, "$.sources", "sources non-empty");
    }
    let mut seen = BTreeSet::new();
    for (i, s) in p.sources.iter().enumerate() {
        if !seen.insert(format!("{s:?}")) {
            violation(out, &format!("$.sources[{i}]"), "sources are a set (no duplicates)");
        }
    }
    if p.assertion.trim().is_empty() {
        violation(out, "$.assertion", "assertion non-empty");
    }
    if p.origin == PropertyOrigin::Auto && p.provenance.subgraph.is_empty() {
        violation(
            out,
            "$.provenance.subgraph",
            "provenance.subgraph must exist when origin = auto",
        );
    }
}

fn check_trust_model(tm: &TrustModel, out: &mut Vec<Violation>) {
    let mut names = BTreeSet::new();
    for (i, b) in tm.boundaries.iter().enumerate() {
        if !names.insert(&b.name) {
            violation(out, &format!("$.boundaries[{i}].name"), "boundary names unique");
        }
    }
}

fn check_scope_document(scope: &ScopeDocument, out: &mut Vec<Violation>) {
    let mut sub = Vec::new();
    check_trust_model(&scope.trust_model, &mut sub);
    for mut v in sub {
        v.path = format!("$.trust_model{}", v.path.trim_start_matches('$'));
        out.push(v);
    }
    let included: BTreeSet<&str> = scope.included_components.iter().map(|s| s.as_str()).collect();
    for (i, e) in scope.excluded_categories.iter().enumerate() {
        if included.contains(e.as_str()) {
            violation(
                out,
                &format!("$.excluded_categories[{i}]"),
                "included and excluded patterns disjoint",
            );
        }
    }
    // A scope with included components is non-trivial and needs an untrusted
    // boundary for attack paths to be assessable.
    if !scope.included_components.is_empty()
        && !scope
            .trust_model
            .boundaries
            .iter()
            .any(|b| b.level == TrustLevel::Untrusted)
    {
        violation(
            out,
            "$.trust_model.boundaries",
            "at least one UNTRUSTED boundary exists in any non-trivial scope",
        );
    }
    for sev in [
        Severity::High,
        Severity::Medium,
        Severity::Low,
        Severity::Informational,
    ] {
        if !scope.severity_thresholds.contains_key(&sev) {
            violation(
                out,
                "$.severity_thresholds",
                format!("threshold defined for severity {sev}"),
            );
        }
    }
}

fn check_trust_analysis(a: &crate::propgen::TrustModelAnalysis, out: &mut Vec<Violation>) {
    let mut seen = BTreeSet::new();
    for (i, b) in a.boundary_assignments.iter().enumerate() {
        if !seen.insert(&b.dataflow) {
            violation(
                out,
                &format!("$.boundary_assignments[{i}].dataflow"),
                "each dataflow assigned exactly once",
            );
        }
    }
}

fn check_code_scope(cs: &CodeScope, out: &mut Vec<Violation>) {
    if cs.resolution_status == crate::model::ResolutionStatus::Resolved
        && cs.enforcement_locations.is_empty()
    {
        violation(
            out,
            "$.enforcement_locations",
            "resolved implies enforcement_locations non-empty",
        );
    }
}

fn check_attack_path(path: &AttackPath, at: &str, out: &mut Vec<Violation>) {
    if path.source_boundary.trim().is_empty() {
        violation(
            out,
            &format!("{at}.source_boundary"),
            "attack path names its source boundary",
        );
    }
}

fn check_finding(f: &Finding, out: &mut Vec<Violation>) {
    match f.classification {
        Classification::Vulnerability => match &f.attack_path {
            Some(p) => check_attack_path(p, "$.attack_path", out),
            None => violation(
                out,
                "$.attack_path",
                "classification = vulnerability requires attack_path",
            ),
        },
        Classification::PotentialVulnerability => {
            if f.attack_path.is_some() {
                violation(
                    out,
                    "$.attack_path",
                    "classification = potential_vulnerability implies attack_path absent",
                );
            }
        }
        _ => {}
    }
    for (i, step) in f.proof_trace.iter().enumerate() {
        if step.result.status == ProofStatus::Fails && step.result.failure_point.is_none() {
            violation(
                out,
                &format!("$.proof_trace[{i}].result.failure_point"),
                "fails implies failure_point present",
            );
        }
        if step.sub_claim_id != step.result.sub_claim_id {
            violation(
                out,
                &format!("$.proof_trace[{i}].result.sub_claim_id"),
                "proof result belongs to its step's sub-claim",
            );
        }
    }
    // Proof traces stop at the first failure: no step may follow a failed one.
    if let Some(first_fail) = f
        .proof_trace
        .iter()
        .position(|s| s.result.status == ProofStatus::Fails)
    {
        if first_fail + 1 != f.proof_trace.len() {
            violation(
                out,
                &format!("$.proof_trace[{}]", first_fail + 1),
                "proof trace ends at the first failing sub-claim",
            );
        }
    }
}

fn check_reviewed(r: &ReviewedFinding, out: &mut Vec<Violation>) {
    let mut sub = Vec::new();
    check_finding(&r.finding, &mut sub);
    for mut v in sub {
        v.path = format!("$.finding{}", v.path.trim_start_matches('$'));
        out.push(v);
    }
    match (r.verdict, r.disputing_gate) {
        (ReviewVerdict::DisputedFp, None) => violation(
            out,
            "$.disputing_gate",
            "verdict DISPUTED_FP iff disputing_gate present",
        ),
        (v, Some(_)) if v != ReviewVerdict::DisputedFp => violation(
            out,
            "$.disputing_gate",
            "verdict DISPUTED_FP iff disputing_gate present",
        ),
        _ => {}
    }
    if r.verdict == ReviewVerdict::Downgraded
        && !r.calibrated_severity.is_below(r.finding.severity)
    {
        violation(
            out,
            "$.calibrated_severity",
            "DOWNGRADED implies calibrated_severity strictly below finding severity",
        );
    }
    if r.verdict == ReviewVerdict::DisputedFp {
        let fired: Vec<GateKind> = r
            .gate_verdicts
            .iter()
            .filter(|g| g.fired)
            .map(|g| g.gate)
            .collect();
        if fired.is_empty() {
            violation(
                out,
                "$.gate_verdicts",
                "no finding is DISPUTED_FP without a fired gate",
            );
        }
    }
}

fn check_extraction(e: &crate::ingest::SubgraphExtraction, out: &mut Vec<Violation>) {
    let mut ids = BTreeSet::new();
    for (i, sg) in e.subgraphs.iter().enumerate() {
        if !subgraph_id_re().is_match(&sg.id) {
            violation(out, &format!("$.subgraphs[{i}].id"), "id matches SG-[0-9]{3}");
        }
        if !ids.insert(&sg.id) {
            violation(out, &format!("$.subgraphs[{i}].id"), "subgraph ids unique");
        }
    }
}

fn check_synthesis(s: &crate::propgen::PropertySynthesis, out: &mut Vec<Violation>) {
    for (i, d) in s.properties.iter().enumerate() {
        if d.sources.is_empty() {
            violation(out, &format!("$.properties[{i}].sources"), "sources non-empty");
        }
        if d.assertion.trim().is_empty() {
            violation(out, &format!("$.properties[{i}].assertion"), "assertion non-empty");
        }
    }
}

fn check_decomposition(d: &crate::engine::SubClaimDecomposition, out: &mut Vec<Violation>) {
    if d.sub_claims.is_empty() {
        violation(out, "$.sub_claims", "decomposition yields at least one sub-claim");
    }
}

fn check_proof_response(p: &crate::engine::ProofResponse, out: &mut Vec<Violation>) {
    if p.status == ProofStatus::Fails && p.failure_reason.is_none() {
        violation(out, "$.failure_reason", "fails implies failure reason present");
    }
}

fn check_attack_assessment(a: &crate::engine::AttackAssessment, out: &mut Vec<Violation>) {
    if a.plausible {
        match &a.path {
            Some(p) => check_attack_path(p, "$.path", out),
            None => violation(out, "$.path", "plausible implies path present"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use serde_json::json;

    fn sample_property() -> Property {
        Property {
            id: "PROP-6a4369e9-inv-014".into(),
            kind: PropertyKind::Invariant,
            assertion: "Blob parameters at fork boundaries are computed from the canonical schedule."
                .into(),
            severity: Severity::High,
            severity_rationale: Some("consensus divergence at fork epochs".into()),
            sources: vec![PropertySource::InvDerived],
            provenance: Provenance {
                subgraph: "SG-001".into(),
                spec_section: "Blob schedule".into(),
                inv_label: Some("INV-004".into()),
            },
            origin: PropertyOrigin::Auto,
        }
    }

    #[test]
    fn well_formed_property_passes() {
        let res = validate_value(&sample_property(), "property").unwrap();
        assert!(res.is_pass(), "{:?}", res.violations);
    }

    #[test]
    fn kind_id_mismatch_is_violation() {
        let mut p = sample_property();
        p.id = "PROP-6a4369e9-asm-014".into();
        let res = validate_value(&p, "property").unwrap();
        assert!(res
            .violations
            .iter()
            .any(|v| v.invariant == "kind/id mismatch"));
    }

    #[test]
    fn vulnerability_without_attack_path_is_violation() {
        let f = Finding {
            property_id: "PROP-6a4369e9-inv-014".into(),
            repo_id: "client-go".into(),
            classification: Classification::Vulnerability,
            severity: Severity::High,
            gap_description: "gap".into(),
            attack_path: None,
            proof_trace: vec![],
            category: None,
            preexisting_issue_ref: None,
            assumption_reexamination: None,
            label: None,
        };
        let res = validate_value(&f, "finding").unwrap();
        assert!(!res.is_pass());
        assert!(res.violations.iter().any(|v| v.path == "$.attack_path"));
    }

    #[test]
    fn unknown_schema_is_configuration_error() {
        let err = validate_artifact(&json!({}), "nope").unwrap_err();
        assert!(matches!(err, SchemaError::UnknownSchema(_)));
    }

    #[test]
    fn manual_property_without_subgraph_is_allowed() {
        let mut p = sample_property();
        p.origin = PropertyOrigin::Manual;
        p.provenance.subgraph = String::new();
        let res = validate_value(&p, "property").unwrap();
        assert!(res.is_pass());
        p.origin = PropertyOrigin::Auto;
        let res = validate_value(&p, "property").unwrap();
        assert!(!res.is_pass());
    }

    #[test]
    fn subgraph_transition_referencing_missing_inv_is_violation() {
        let sg = Subgraph {
            id: "SG-001".into(),
            source_doc: "doc-0001".into(),
            states: vec!["idle".into(), "active".into()],
            transitions: vec![Transition {
                from: "idle".into(),
                to: "active".into(),
                trigger: "activate [INV-007]".into(),
            }],
            invariant_annotations: vec![],
            dataflow_constraints: vec![],
        };
        let res = validate_value(&sg, "subgraph").unwrap();
        assert!(res.violations.iter().any(|v| v.invariant.contains("INV-007")));
    }

    #[test]
    fn annotation_modal_must_appear_in_sentence() {
        let a = InvariantAnnotation {
            label: "INV-001".into(),
            modal_strength: ModalStrength::MustNot,
            source_sentence: "Nodes may drop columns.".into(),
            spec_section: "Custody".into(),
        };
        let res = validate_value(&a, "invariant_annotation").unwrap();
        assert!(!res.is_pass());
    }

    #[test]
    fn reviewed_finding_gate_consistency() {
        let f = Finding {
            property_id: "PROP-6a4369e9-inv-014".into(),
            repo_id: "client-go".into(),
            classification: Classification::PotentialVulnerability,
            severity: Severity::Low,
            gap_description: "gap".into(),
            attack_path: None,
            proof_trace: vec![],
            category: None,
            preexisting_issue_ref: None,
            assumption_reexamination: None,
            label: None,
        };
        let r = ReviewedFinding {
            finding: f,
            verdict: ReviewVerdict::DisputedFp,
            disputing_gate: None,
            calibrated_severity: Severity::Low,
            gate_verdicts: vec![],
            calibration_rationale: None,
        };
        let res = validate_value(&r, "reviewed_finding").unwrap();
        assert!(res
            .violations
            .iter()
            .any(|v| v.invariant.contains("DISPUTED_FP iff disputing_gate")));
    }

    #[test]
    fn structural_error_reported_with_message() {
        let res = validate_artifact(&json!({"kind": "invariant"}), "property").unwrap();
        assert_eq!(res.violations.len(), 1);
        assert!(res.violations[0].invariant.starts_with("structural:"));
    }
}
