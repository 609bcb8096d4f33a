//! Finding-to-issue matching.
//!
//! Two modes: a fully manual match file, or backend-assisted proposals that
//! require a human confirmation file before they count. Matching is
//! many-to-one: an issue is recovered if at least one finding fully matches
//! it, while each finding is counted independently for precision. Partial
//! matches (same code location, different security impact) are recorded and
//! excluded from recall.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use audit_core::backend::{complete_with_retry, Backend, PromptSection, ReasoningRequest};
use audit_core::model::{MatchKind, MatchProposal, MatchRecord, Phase};

use crate::labels::GroundTruthIssue;
use crate::EvalError;

pub const MATCH_PROPOSER_ROLE: &str = "match-proposer";

/// Minimal finding view used for matching prompts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FindingSummary {
    pub finding_id: String,
    pub repo: String,
    pub description: String,
}

/// Load a fully manual match file (JSON list of match records).
pub fn load_match_file(path: &Path) -> Result<Vec<MatchRecord>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| EvalError::Parse(e.to_string()))
}

/// Build the proposal request presented to the backend.
pub fn proposal_request(
    findings: &[FindingSummary],
    issues: &[GroundTruthIssue],
    budget_tokens: u64,
) -> ReasoningRequest {
    ReasoningRequest {
        phase: Phase::P6,
        role: MATCH_PROPOSER_ROLE.into(),
        prompt_sections: vec![
            PromptSection::new(
                "task",
                "Propose finding-to-issue matches. A full match requires both \
                 the root cause and the security impact to align; a finding \
                 that identifies the same code location with a different \
                 impact is a partial match. Every proposal requires human \
                 confirmation before it counts.",
            ),
            PromptSection::new(
                "findings",
                serde_json::to_string_pretty(findings).unwrap(),
            ),
            PromptSection::new("issues", serde_json::to_string_pretty(issues).unwrap()),
        ],
        response_schema_id: "match_proposal".into(),
        budget_tokens,
    }
}

/// Backend-assisted mode: propose matches, then require a confirmation entry
/// for every proposed finding. Confirmations override proposals; a proposal
/// without a confirmation is an error, keeping human verification mandatory.
pub fn match_findings_assisted(
    findings: &[FindingSummary],
    issues: &[GroundTruthIssue],
    backend: &dyn Backend,
    confirmations: &[MatchRecord],
    budget_tokens: u64,
) -> Result<Vec<MatchRecord>, EvalError> {
    let request = proposal_request(findings, issues, budget_tokens);
    let response = complete_with_retry(backend, &request)
        .map_err(|e| EvalError::Parse(format!("proposal failed: {e}")))?;
    let proposal: MatchProposal = serde_json::from_value(response.payload)
        .map_err(|e| EvalError::Parse(e.to_string()))?;
    let confirmed: BTreeMap<&str, &MatchRecord> = confirmations
        .iter()
        .map(|m| (m.finding_id.as_str(), m))
        .collect();
    let mut out = Vec::new();
    for proposed in proposal.matches {
        match confirmed.get(proposed.finding_id.as_str()) {
            Some(confirmation) => out.push((*confirmation).clone()),
            None => return Err(EvalError::UnconfirmedMatch(proposed.finding_id)),
        }
    }
    Ok(out)
}

/// Issues recovered under the many-to-one rule: at least one full match.
pub fn recovered_issues<'a>(records: &'a [MatchRecord]) -> BTreeSet<&'a str> {
    records
        .iter()
        .filter(|r| r.match_kind == MatchKind::Full)
        .filter_map(|r| r.issue_id.as_deref())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use audit_core::backend::{uniform_budgets, ScriptFixture, ScriptedBackend};
    use crate::labels::IssueSeverity;
    use serde_json::json;

    fn issue(id: &str) -> GroundTruthIssue {
        GroundTruthIssue {
            issue_id: id.into(),
            severity: IssueSeverity::High,
            root_cause: "missing column index validation".into(),
            impact: "out-of-bounds access on gossip input".into(),
            repos_affected: vec!["lighthouse".into()],
        }
    }

    fn summaries() -> Vec<FindingSummary> {
        vec![
            FindingSummary {
                finding_id: "PROP-6a4369e9-inv-009".into(),
                repo: "lighthouse".into(),
                description: "Column index must be validated against NUMBER_OF_COLUMNS".into(),
            },
            FindingSummary {
                finding_id: "PROP-6a4369e9-inv-010".into(),
                repo: "lighthouse".into(),
                description: "EL-sourced custody columns skip KZG verification".into(),
            },
            FindingSummary {
                finding_id: "PROP-6a4369e9-inv-008".into(),
                repo: "nimbus".into(),
                description: "Unreachable code path in data column sidecar construction".into(),
            },
        ]
    }

    fn records() -> Vec<MatchRecord> {
        vec![
            MatchRecord {
                finding_id: "PROP-6a4369e9-inv-009".into(),
                issue_id: Some("308".into()),
                match_kind: MatchKind::Full,
                rationale: "same root cause and same impact".into(),
            },
            MatchRecord {
                finding_id: "PROP-6a4369e9-inv-010".into(),
                issue_id: Some("308".into()),
                match_kind: MatchKind::Partial,
                rationale: "same location, different root cause".into(),
            },
            MatchRecord {
                finding_id: "PROP-6a4369e9-inv-008".into(),
                issue_id: None,
                match_kind: MatchKind::None,
                rationale: "no related issue".into(),
            },
        ]
    }

    #[test]
    fn many_to_one_counts_issue_once_and_excludes_partials() {
        let records = records();
        let recovered = recovered_issues(&records);
        assert_eq!(recovered.len(), 1);
        assert!(recovered.contains("308"));
    }

    #[test]
    fn manual_match_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("matches.json");
        std::fs::write(&path, serde_json::to_string_pretty(&records()).unwrap()).unwrap();
        let loaded = load_match_file(&path).unwrap();
        assert_eq!(loaded.len(), 3);
        assert_eq!(loaded[0].match_kind, MatchKind::Full);
    }

    #[test]
    fn assisted_mode_requires_confirmation_for_every_proposal() {
        let findings = summaries();
        let issues = vec![issue("308")];
        let request = proposal_request(&findings, &issues, 1000);
        let mut fixture = ScriptFixture::default();
        fixture.insert(
            &request,
            json!({"matches": [
                {"finding_id": "PROP-6a4369e9-inv-009", "issue_id": "308", "match_kind": "full", "rationale": "same root cause"},
                {"finding_id": "PROP-6a4369e9-inv-010", "issue_id": "308", "match_kind": "partial", "rationale": "different impact"}
            ]}),
            90,
        );
        let backend = ScriptedBackend::new(fixture, uniform_budgets(10_000)).unwrap();
        // Confirming only one of the two proposals is an error.
        let partial_confirmation = vec![records()[0].clone()];
        let err = match_findings_assisted(&findings, &issues, &backend, &partial_confirmation, 1000)
            .unwrap_err();
        assert!(matches!(err, EvalError::UnconfirmedMatch(_)));
    }

    #[test]
    fn assisted_mode_confirmations_override_proposals() {
        let findings = summaries();
        let issues = vec![issue("308")];
        let request = proposal_request(&findings, &issues, 1000);
        let mut fixture = ScriptFixture::default();
        fixture.insert(
            &request,
            json!({"matches": [
                {"finding_id": "PROP-6a4369e9-inv-009", "issue_id": "308", "match_kind": "full", "rationale": "proposed"}
            ]}),
            90,
        );
        let backend = ScriptedBackend::new(fixture, uniform_budgets(10_000)).unwrap();
        let confirmation = vec![MatchRecord {
            finding_id: "PROP-6a4369e9-inv-009".into(),
            issue_id: Some("308".into()),
            match_kind: MatchKind::Full,
            rationale: "match accepted after two-author review".into(),
        }];
        let confirmed =
            match_findings_assisted(&findings, &issues, &backend, &confirmation, 1000).unwrap();
        assert_eq!(confirmed.len(), 1);
        assert_eq!(confirmed[0].rationale, "match accepted after two-author review");
    }
}
