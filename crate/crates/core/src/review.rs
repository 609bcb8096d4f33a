//! Phase 6: severity-preserving review.
//!
//! A finding may be disputed only through three narrow, mechanical gates
//! (dead code, trust boundary, scope); no other reasoning may produce a
//! DISPUTED_FP verdict. Gates are evaluated in a fixed order with first-fire
//! attribution. Survivors receive severity calibration against the scope
//! document's thresholds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{complete_with_retry, Backend, BackendError, PromptSection, ReasoningRequest};
use crate::model::{
    Classification, Finding, GateKind, GateVerdict, Phase, ReviewVerdict, ReviewedFinding,
    ScopeDocument, Severity, TrustLevel, TrustModel,
};
use crate::resolve::{path_matches, SymbolIndex};

pub const SEVERITY_CALIBRATOR_ROLE: &str = "severity-calibrator";

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("calibration output invalid: {0}")]
    Malformed(String),
}

/// Gate 1: a flagged function with zero non-test callers that is not part of
/// a public API is dead code. A symbol that cannot be resolved in the index
/// does not fire the gate; the evidence notes why.
pub fn gate_dead_code(
    finding: &Finding,
    index: &SymbolIndex,
    scope: &ScopeDocument,
) -> GateVerdict {
    let Some(location) = finding.flagged_location() else {
        return GateVerdict {
            gate: GateKind::DeadCode,
            fired: false,
            evidence: "no flagged symbol in proof trace".into(),
        };
    };
    let symbol = &location.symbol;
    if !index.symbols.contains_key(symbol) {
        return GateVerdict {
            gate: GateKind::DeadCode,
            fired: false,
            evidence: format!("symbol {symbol} unresolvable in index; not disputing"),
        };
    }
    let callers = index.non_test_callers(symbol);
    if !callers.is_empty() {
        return GateVerdict {
            gate: GateKind::DeadCode,
            fired: false,
            evidence: format!(
                "{symbol} has {} non-test caller(s): {}",
                callers.len(),
                callers.join(", ")
            ),
        };
    }
    if index.is_public_api(symbol, scope) {
        return GateVerdict {
            gate: GateKind::DeadCode,
            fired: false,
            evidence: format!("{symbol} has zero non-test callers but is part of a public API"),
        };
    }
    GateVerdict {
        gate: GateKind::DeadCode,
        fired: true,
        evidence: format!("{symbol} has zero non-test callers and is not part of a public API"),
    }
}

/// Gate 2: an attack sourced from a TRUSTED or SEMI_TRUSTED boundary with no
/// alternative untrusted input path is not attacker-reachable. Findings
/// without an attack path, or whose source boundary is absent from the trust
/// model, do not fire the gate.
pub fn gate_trust_boundary(finding: &Finding, trust_model: &TrustModel) -> GateVerdict {
    let Some(path) = &finding.attack_path else {
        return GateVerdict {
            gate: GateKind::TrustBoundary,
            fired: false,
            evidence: "no attack path with a source boundary".into(),
        };
    };
    let Some(level) = trust_model.level_of(&path.source_boundary) else {
        return GateVerdict {
            gate: GateKind::TrustBoundary,
            fired: false,
            evidence: format!(
                "source boundary {} absent from trust model; not disputing",
                path.source_boundary
            ),
        };
    };
    if level == TrustLevel::Untrusted {
        return GateVerdict {
            gate: GateKind::TrustBoundary,
            fired: false,
            evidence: format!("source {} is UNTRUSTED", path.source_boundary),
        };
    }
    // The source is TRUSTED or SEMI_TRUSTED; the gate still must not fire if
    // an alternative untrusted path is recorded. An alternative boundary
    // unknown to the trust model is treated as possibly untrusted.
    for alt in &path.alternative_sources {
        match trust_model.level_of(alt) {
            Some(TrustLevel::Untrusted) | None => {
                return GateVerdict {
                    gate: GateKind::TrustBoundary,
                    fired: false,
                    evidence: format!(
                        "source {} is {:?} but alternative untrusted path {alt} exists",
                        path.source_boundary, level
                    ),
                };
            }
            _ => {}
        }
    }
    GateVerdict {
        gate: GateKind::TrustBoundary,
        fired: true,
        evidence: format!(
            "source {} is {:?} and no alternative untrusted input path exists",
            path.source_boundary, level
        ),
    }
}

/// Gate 3: findings in out-of-scope components, scope-excluded categories, or
/// matching pre-existing issue ids are outside the audit perimeter.
pub fn gate_scope(finding: &Finding, scope: &ScopeDocument) -> GateVerdict {
    if let Some(location) = finding.flagged_location() {
        let in_scope = scope
            .included_components
            .iter()
            .any(|p| path_matches(p, &location.file));
        if !in_scope {
            return GateVerdict {
                gate: GateKind::Scope,
                fired: true,
                evidence: format!(
                    "{} is outside the included components",
                    location.file
                ),
            };
        }
    }
    if let Some(category) = &finding.category {
        if scope.excluded_categories.iter().any(|c| c == category) {
            return GateVerdict {
                gate: GateKind::Scope,
                fired: true,
                evidence: format!("category {category} is scope-excluded"),
            };
        }
    }
    if let Some(issue) = &finding.preexisting_issue_ref {
        if scope.preexisting_issue_ids.iter().any(|i| i == issue) {
            return GateVerdict {
                gate: GateKind::Scope,
                fired: true,
                evidence: format!("matches pre-existing issue {issue}"),
            };
        }
    }
    GateVerdict {
        gate: GateKind::Scope,
        fired: false,
        evidence: "component, category, and issue references are in scope".into(),
    }
}

/// Response payload of the severity-calibrator worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityCalibration {
    pub decision: CalibrationDecision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrated_severity: Option<Severity>,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationDecision {
    Confirm,
    Downgrade,
    CannotDecide,
}

/// Build the severity-calibration request for a surviving finding.
pub fn calibration_request(finding: &Finding, scope: &ScopeDocument, budget_tokens: u64) -> ReasoningRequest {
    let thresholds: String = scope
        .severity_thresholds
        .iter()
        .map(|(sev, desc)| format!("{sev}: {desc}\n"))
        .collect();
    ReasoningRequest {
        phase: Phase::P6,
        role: SEVERITY_CALIBRATOR_ROLE.into(),
        prompt_sections: vec![
            PromptSection::new(
                "task",
                "Calibrate this finding's severity against the scope document's \
                 impact-based classification thresholds: confirm it, downgrade \
                 it to a strictly lower severity, or report that the thresholds \
                 cannot decide.",
            ),
            PromptSection::new(
                "finding",
                serde_json::to_string_pretty(finding).unwrap(),
            ),
            PromptSection::new("severity-thresholds", thresholds),
        ],
        response_schema_id: "severity_calibration".into(),
        budget_tokens,
    }
}

/// Review one finding: run the gates in fixed order (dead code, trust
/// boundary, scope) with first-fire attribution; survivors receive severity
/// calibration. Apart from the calibration backend call, this is a pure
/// function of (finding, index, scope).
pub fn review(
    finding: &Finding,
    index: &SymbolIndex,
    scope: &ScopeDocument,
    backend: &dyn Backend,
    budget_tokens: u64,
) -> Result<ReviewedFinding, ReviewError> {
    let gate_verdicts = vec![
        gate_dead_code(finding, index, scope),
        gate_trust_boundary(finding, &scope.trust_model),
        gate_scope(finding, scope),
    ];
    if let Some(first_fired) = gate_verdicts.iter().find(|g| g.fired) {
        return Ok(ReviewedFinding {
            finding: finding.clone(),
            verdict: ReviewVerdict::DisputedFp,
            disputing_gate: Some(first_fired.gate),
            calibrated_severity: finding.severity,
            gate_verdicts,
            calibration_rationale: None,
        });
    }
    let request = calibration_request(finding, scope, budget_tokens);
    let response = complete_with_retry(backend, &request)?;
    let calibration: SeverityCalibration = serde_json::from_value(response.payload)
        .map_err(|e| ReviewError::Malformed(e.to_string()))?;
    let (verdict, calibrated_severity) = match calibration.decision {
        CalibrationDecision::Confirm => {
            let verdict = match finding.classification {
                Classification::Vulnerability => ReviewVerdict::ConfirmedVulnerability,
                _ => ReviewVerdict::ConfirmedPotential,
            };
            (verdict, finding.severity)
        }
        CalibrationDecision::Downgrade => {
            let severity = calibration.calibrated_severity.ok_or_else(|| {
                ReviewError::Malformed("downgrade without calibrated_severity".into())
            })?;
            if !severity.is_below(finding.severity) {
                return Err(ReviewError::Malformed(format!(
                    "downgrade must be strictly below {}, got {severity}",
                    finding.severity
                )));
            }
            (ReviewVerdict::Downgraded, severity)
        }
        CalibrationDecision::CannotDecide => {
            (ReviewVerdict::NeedsManualReview, finding.severity)
        }
    };
    Ok(ReviewedFinding {
        finding: finding.clone(),
        verdict,
        disputing_gate: None,
        calibrated_severity,
        gate_verdicts,
        calibration_rationale: Some(calibration.rationale),
    })
}

/// The two gates removed from the five-gate prototype, kept behind a
/// disabled-by-default flag purely so the ablation can demonstrate why they
/// were removed. Even when enabled they are advisory: they never produce a
/// DISPUTED_FP verdict, they only record what they would have disputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrototypeGate {
    SpecCrossReference,
    Exploitability,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrototypeGateVerdict {
    pub gate: PrototypeGate,
    pub fired: bool,
    pub evidence: String,
}

/// Review options; the prototype gates default to off.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ReviewOptions {
    #[serde(default)]
    pub enable_prototype_gates: bool,
}

/// Prototype gate A: disputes findings whose property provenance cannot be
/// cross-referenced to a specific tagged specification sentence.
pub fn prototype_gate_spec_cross_reference(
    finding: &Finding,
    inv_label: Option<&str>,
) -> PrototypeGateVerdict {
    match inv_label {
        Some(label) => PrototypeGateVerdict {
            gate: PrototypeGate::SpecCrossReference,
            fired: false,
            evidence: format!("provenance cites {label}"),
        },
        None => PrototypeGateVerdict {
            gate: PrototypeGate::SpecCrossReference,
            fired: true,
            evidence: format!(
                "finding for {} has no INV label to cross-reference",
                finding.property_id
            ),
        },
    }
}

/// Prototype gate B: disputes findings without a demonstrated attack path.
pub fn prototype_gate_exploitability(finding: &Finding) -> PrototypeGateVerdict {
    if finding.classification == Classification::PotentialVulnerability {
        PrototypeGateVerdict {
            gate: PrototypeGate::Exploitability,
            fired: true,
            evidence: "no concrete attack path demonstrated".into(),
        }
    } else {
        PrototypeGateVerdict {
            gate: PrototypeGate::Exploitability,
            fired: false,
            evidence: "attack path demonstrated or finding not positive".into(),
        }
    }
}

/// Evaluate the prototype gates for ablation. Returns advisory verdicts; the
/// caller joins them with labels to measure each gate's precision as a
/// false-positive detector.
pub fn evaluate_prototype_gates(
    finding: &Finding,
    inv_label: Option<&str>,
    options: &ReviewOptions,
) -> Vec<PrototypeGateVerdict> {
    if !options.enable_prototype_gates {
        return Vec::new();
    }
    vec![
        prototype_gate_spec_cross_reference(finding, inv_label),
        prototype_gate_exploitability(finding),
    ]
}
