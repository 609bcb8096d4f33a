//! Label-file and ground-truth input schemas.
//!
//! `findings_labels.csv` columns: finding_id, repo, property_kind, verdict,
//! label, matched_issue, subset, fp_root_cause, fp_origin_phase. The main
//! evaluation rows carry `subset = main`; the property-type ablation rows are
//! synthetic and marked `ablation_*`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use audit_core::model::{FindingLabel, Phase, PropertyKind, ReviewVerdict};

use crate::EvalError;

/// Which computation a label row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    /// The real labeled findings the headline metrics are computed over.
    Main,
    /// Ablation subset: H/M/L-adjudicated rows counted for per-type TP/FP.
    AblationHml,
    /// Ablation subset: supplementary FPs for cross-type analysis (counted in
    /// N only).
    AblationSuppFp,
    /// Ablation subset: non-H/M/L rows for coverage (counted in N only).
    AblationNonHml,
}

impl Subset {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "main" => Some(Subset::Main),
            "ablation_hml" => Some(Subset::AblationHml),
            "ablation_supp_fp" => Some(Subset::AblationSuppFp),
            "ablation_non_hml" => Some(Subset::AblationNonHml),
            _ => None,
        }
    }

    pub fn is_ablation(self) -> bool {
        !matches!(self, Subset::Main)
    }
}

/// Root causes a false positive may be annotated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpRootCause {
    TrustBoundaryMisunderstanding,
    CodeReadingError,
    SpecMisinterpretation,
}

impl FpRootCause {
    pub const ALL: [FpRootCause; 3] = [
        FpRootCause::TrustBoundaryMisunderstanding,
        FpRootCause::CodeReadingError,
        FpRootCause::SpecMisinterpretation,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "trust_boundary_misunderstanding" => Some(FpRootCause::TrustBoundaryMisunderstanding),
            "code_reading_error" => Some(FpRootCause::CodeReadingError),
            "spec_misinterpretation" => Some(FpRootCause::SpecMisinterpretation),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FpRootCause::TrustBoundaryMisunderstanding => "trust_boundary_misunderstanding",
            FpRootCause::CodeReadingError => "code_reading_error",
            FpRootCause::SpecMisinterpretation => "spec_misinterpretation",
        }
    }
}

/// One labeled finding row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub finding_id: String,
    pub repo: String,
    pub property_kind: PropertyKind,
    /// Review verdict; absent on synthetic ablation rows.
    pub verdict: Option<ReviewVerdict>,
    pub label: FindingLabel,
    pub matched_issue: Option<String>,
    pub subset: Subset,
    pub fp_root_cause: Option<FpRootCause>,
    pub fp_origin_phase: Option<Phase>,
}

impl LabelRow {
    pub fn is_fp(&self) -> bool {
        !audit_core::model::is_true_positive(self.label)
    }

    pub fn survived_review(&self) -> bool {
        self.verdict != Some(ReviewVerdict::DisputedFp)
    }
}

const HEADER: [&str; 9] = [
    "finding_id",
    "repo",
    "property_kind",
    "verdict",
    "label",
    "matched_issue",
    "subset",
    "fp_root_cause",
    "fp_origin_phase",
];

fn parse_kind(s: &str) -> Option<PropertyKind> {
    match s {
        "invariant" => Some(PropertyKind::Invariant),
        "precondition" => Some(PropertyKind::Precondition),
        "postcondition" => Some(PropertyKind::Postcondition),
        "assumption" => Some(PropertyKind::Assumption),
        _ => None,
    }
}

fn parse_phase(s: &str) -> Option<Phase> {
    Phase::ALL.into_iter().find(|p| p.as_str() == s)
}

/// Load and validate a labels CSV.
pub fn load_labels(path: &Path) -> Result<Vec<LabelRow>, EvalError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| EvalError::Parse(e.to_string()))?;
    {
        let headers = reader.headers().map_err(|e| EvalError::Parse(e.to_string()))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != HEADER {
            return Err(EvalError::Parse(format!(
                "unexpected header: {got:?}, expected {HEADER:?}"
            )));
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 2;
        let record = record.map_err(|e| EvalError::BadLabelRow {
            row: row_no,
            detail: e.to_string(),
        })?;
        let field = |idx: usize| record.get(idx).unwrap_or("").trim().to_string();
        let bad = |detail: String| EvalError::BadLabelRow {
            row: row_no,
            detail,
        };
        let verdict_raw = field(3);
        let verdict = if verdict_raw.is_empty() {
            None
        } else {
            Some(
                ReviewVerdict::parse(&verdict_raw)
                    .ok_or_else(|| bad(format!("unknown verdict {verdict_raw}")))?,
            )
        };
        let label_raw = field(4);
        let label = FindingLabel::parse(&label_raw)
            .ok_or_else(|| bad(format!("unknown label {label_raw}")))?;
        let kind_raw = field(2);
        let property_kind =
            parse_kind(&kind_raw).ok_or_else(|| bad(format!("unknown kind {kind_raw}")))?;
        let subset_raw = field(6);
        let subset = Subset::parse(&subset_raw)
            .ok_or_else(|| bad(format!("unknown subset {subset_raw}")))?;
        let matched = field(5);
        let cause_raw = field(7);
        let fp_root_cause = if cause_raw.is_empty() {
            None
        } else {
            Some(
                FpRootCause::parse(&cause_raw)
                    .ok_or_else(|| bad(format!("unknown fp root cause {cause_raw}")))?,
            )
        };
        let phase_raw = field(8);
        let fp_origin_phase = if phase_raw.is_empty() {
            None
        } else {
            Some(parse_phase(&phase_raw).ok_or_else(|| bad(format!("unknown phase {phase_raw}")))?)
        };
        let row = LabelRow {
            finding_id: field(0),
            repo: field(1),
            property_kind,
            verdict,
            label,
            matched_issue: (!matched.is_empty()).then_some(matched),
            subset,
            fp_root_cause,
            fp_origin_phase,
        };
        if row.subset == Subset::Main && row.verdict.is_none() {
            return Err(bad("main rows require a verdict".into()));
        }
        if row.fp_root_cause.is_some() && !row.is_fp() {
            return Err(bad("fp_root_cause on a non-FP row".into()));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Write rows back out in the canonical column order.
pub fn save_labels(path: &Path, rows: &[LabelRow]) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| EvalError::Parse(e.to_string()))?;
    writer
        .write_record(HEADER)
        .map_err(|e| EvalError::Parse(e.to_string()))?;
    for row in rows {
        let kind = match row.property_kind {
            PropertyKind::Invariant => "invariant",
            PropertyKind::Precondition => "precondition",
            PropertyKind::Postcondition => "postcondition",
            PropertyKind::Assumption => "assumption",
        };
        let label = serde_json::to_value(row.label).unwrap();
        let subset = serde_json::to_value(row.subset).unwrap();
        writer
            .write_record([
                row.finding_id.as_str(),
                row.repo.as_str(),
                kind,
                row.verdict.map(|v| v.as_str()).unwrap_or(""),
                label.as_str().unwrap(),
                row.matched_issue.as_deref().unwrap_or(""),
                subset.as_str().unwrap(),
                row.fp_root_cause.map(|c| c.as_str()).unwrap_or(""),
                row.fp_origin_phase.map(|p| p.as_str()).unwrap_or(""),
            ])
            .map_err(|e| EvalError::Parse(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Severity of a ground-truth issue (H/M/L only; informational issues are not
/// part of the adjudicated set).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IssueSeverity {
    High,
    Medium,
    Low,
}

/// One adjudicated ground-truth issue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthIssue {
    pub issue_id: String,
    pub severity: IssueSeverity,
    pub root_cause: String,
    pub impact: String,
    pub repos_affected: Vec<String>,
}

/// Load ground truth, enforcing unique issue ids.
pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthIssue>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    let issues: Vec<GroundTruthIssue> =
        serde_json::from_str(&text).map_err(|e| EvalError::BadGroundTruth(e.to_string()))?;
    let mut seen = std::collections::BTreeSet::new();
    for issue in &issues {
        if !seen.insert(&issue.issue_id) {
            return Err(EvalError::BadGroundTruth(format!(
                "duplicate issue id {}",
                issue.issue_id
            )));
        }
    }
    Ok(issues)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_parse_round_trip() {
        for s in ["main", "ablation_hml", "ablation_supp_fp", "ablation_non_hml"] {
            let subset = Subset::parse(s).unwrap();
            assert_eq!(serde_json::to_value(subset).unwrap().as_str().unwrap(), s);
        }
        assert!(Subset::parse("bogus").is_none());
    }

    #[test]
    fn labels_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        let rows = vec![
            LabelRow {
                finding_id: "PROP-6a4369e9-inv-009".into(),
                repo: "lighthouse".into(),
                property_kind: PropertyKind::Invariant,
                verdict: Some(ReviewVerdict::ConfirmedVulnerability),
                label: FindingLabel::Tp,
                matched_issue: Some("308".into()),
                subset: Subset::Main,
                fp_root_cause: None,
                fp_origin_phase: None,
            },
            LabelRow {
                finding_id: "SYN-ABL-001".into(),
                repo: "synthetic".into(),
                property_kind: PropertyKind::Assumption,
                verdict: None,
                label: FindingLabel::FpInvalid,
                matched_issue: None,
                subset: Subset::AblationHml,
                fp_root_cause: None,
                fp_origin_phase: None,
            },
        ];
        save_labels(&path, &rows).unwrap();
        let loaded = load_labels(&path).unwrap();
        assert_eq!(loaded, rows);
    }

    #[test]
    fn fp_annotation_on_non_fp_row_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        std::fs::write(
            &path,
            "finding_id,repo,property_kind,verdict,label,matched_issue,subset,fp_root_cause,fp_origin_phase\n\
             F-1,repo,invariant,CONFIRMED_VULNERABILITY,tp,,main,code_reading_error,p5\n",
        )
        .unwrap();
        let err = load_labels(&path).unwrap_err();
        assert!(matches!(err, EvalError::BadLabelRow { .. }));
    }

    #[test]
    fn ground_truth_rejects_duplicate_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.json");
        std::fs::write(
            &path,
            r#"[{"issue_id": "308", "severity": "High", "root_cause": "a", "impact": "b", "repos_affected": []},
                {"issue_id": "308", "severity": "Low", "root_cause": "c", "impact": "d", "repos_affected": []}]"#,
        )
        .unwrap();
        assert!(matches!(
            load_ground_truth(&path),
            Err(EvalError::BadGroundTruth(_))
        ));
    }
}
