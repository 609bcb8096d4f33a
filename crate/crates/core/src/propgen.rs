//! Phase 3: trust-model analysis (stage A) and property synthesis from six
//! sources (stage B), plus severity assignment and manual property injection.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{complete_with_retry, Backend, BackendError, PromptSection, ReasoningRequest};
use crate::model::{
    property_hash, property_id, Phase, Property, PropertyKind, PropertyOrigin, PropertySource,
    Provenance, ScopeDocument, Severity, Subgraph, TrustLevel,
};
use crate::schema::validate_value;

/// Default bound on how many properties one subgraph may yield.
pub const DEFAULT_SUBGRAPH_PROPERTY_CAP: usize = 32;

#[derive(Debug, Error)]
pub enum PropGenError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("stage output invalid: {0}")]
    Malformed(String),
    #[error("manual property injection conflict: {0}")]
    InjectionConflict(String),
    #[error("manual property file {file} failed validation: {detail}")]
    InjectionValidation { file: String, detail: String },
    #[error("manual property io: {0}")]
    Io(#[from] std::io::Error),
}

/// STRIDE categories, used as prompt guidance (a thinking framework, not a
/// checklist: categories with no relevant threat are skipped).
pub const STRIDE_CATEGORIES: &[&str] = &[
    "Spoofing",
    "Tampering",
    "Repudiation",
    "Information Disclosure",
    "Denial of Service",
    "Elevation of Privilege",
];

/// CWE Top 25 identifiers embedded as a static prompt-side checklist.
pub const CWE_TOP_25: &[&str] = &[
    "CWE-79 Cross-site Scripting",
    "CWE-787 Out-of-bounds Write",
    "CWE-89 SQL Injection",
    "CWE-352 Cross-Site Request Forgery",
    "CWE-22 Path Traversal",
    "CWE-125 Out-of-bounds Read",
    "CWE-78 OS Command Injection",
    "CWE-416 Use After Free",
    "CWE-862 Missing Authorization",
    "CWE-434 Unrestricted Upload of File with Dangerous Type",
    "CWE-94 Code Injection",
    "CWE-20 Improper Input Validation",
    "CWE-77 Command Injection",
    "CWE-287 Improper Authentication",
    "CWE-269 Improper Privilege Management",
    "CWE-502 Deserialization of Untrusted Data",
    "CWE-200 Exposure of Sensitive Information",
    "CWE-863 Incorrect Authorization",
    "CWE-918 Server-Side Request Forgery",
    "CWE-119 Improper Restriction of Operations within Memory Buffer",
    "CWE-476 NULL Pointer Dereference",
    "CWE-798 Use of Hard-coded Credentials",
    "CWE-190 Integer Overflow or Wraparound",
    "CWE-400 Uncontrolled Resource Consumption",
    "CWE-306 Missing Authentication for Critical Function",
];

/// One dataflow-to-trust-level assignment from stage A.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryAssignment {
    pub dataflow: String,
    pub trust_level: TrustLevel,
}

/// Stage A output for one subgraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustModelAnalysis {
    pub subgraph_id: String,
    pub actors: Vec<String>,
    pub boundary_assignments: Vec<BoundaryAssignment>,
    pub documented_assumptions: Vec<String>,
}

pub const TRUST_ANALYST_ROLE: &str = "trust-analyst";
pub const PROPERTY_SYNTHESIZER_ROLE: &str = "property-synthesizer";
pub const SEVERITY_ASSESSOR_ROLE: &str = "severity-assessor";

fn render_trust_model(scope: &ScopeDocument) -> String {
    scope
        .trust_model
        .boundaries
        .iter()
        .map(|b| format!("{} = {:?}: {}\n", b.name, b.level, b.rationale))
        .collect()
}

/// Build the stage A request for one subgraph.
pub fn trust_analysis_request(
    subgraph: &Subgraph,
    scope: &ScopeDocument,
    budget_tokens: u64,
) -> ReasoningRequest {
    ReasoningRequest {
        phase: Phase::P3,
        role: TRUST_ANALYST_ROLE.into(),
        prompt_sections: vec![
            PromptSection::new(
                "task",
                "Identify actors, map each dataflow to a trust boundary level \
                 from the scope document, and document assumptions.",
            ),
            PromptSection::new(
                "subgraph",
                serde_json::to_string_pretty(subgraph).unwrap(),
            ),
            PromptSection::new("scope-trust-model", render_trust_model(scope)),
        ],
        response_schema_id: "trust_model_analysis".into(),
        budget_tokens,
    }
}

/// Stage A: assign exactly one trust level to every dataflow in the subgraph.
pub fn analyze_trust(
    subgraph: &Subgraph,
    scope: &ScopeDocument,
    backend: &dyn Backend,
    budget_tokens: u64,
) -> Result<TrustModelAnalysis, PropGenError> {
    let request = trust_analysis_request(subgraph, scope, budget_tokens);
    let response = complete_with_retry(backend, &request)?;
    let analysis: TrustModelAnalysis = serde_json::from_value(response.payload)
        .map_err(|e| PropGenError::Malformed(e.to_string()))?;
    let assigned: BTreeSet<&str> = analysis
        .boundary_assignments
        .iter()
        .map(|b| b.dataflow.as_str())
        .collect();
    let expected: BTreeSet<&str> = subgraph
        .dataflow_constraints
        .iter()
        .map(|s| s.as_str())
        .collect();
    if assigned != expected || analysis.boundary_assignments.len() != expected.len() {
        return Err(PropGenError::Malformed(format!(
            "dataflows must each receive exactly one trust level: expected {expected:?}, got {assigned:?}"
        )));
    }
    let known_levels: BTreeSet<TrustLevel> = scope
        .trust_model
        .boundaries
        .iter()
        .map(|b| b.level)
        .collect();
    for b in &analysis.boundary_assignments {
        if !known_levels.contains(&b.trust_level) {
            return Err(PropGenError::Malformed(format!(
                "trust level {:?} for dataflow {} does not exist in the scope trust model",
                b.trust_level, b.dataflow
            )));
        }
    }
    Ok(analysis)
}

/// One property as drafted by the synthesis worker, before ids and severity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftProperty {
    pub kind: PropertyKind,
    pub assertion: String,
    pub sources: Vec<PropertySource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inv_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_section: Option<String>,
}

/// Response payload of the property-synthesis worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertySynthesis {
    pub properties: Vec<DraftProperty>,
}

/// A property with identity and provenance but no severity yet: the type
/// encodes that severity assignment is a separate step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnscoredProperty {
    pub id: String,
    pub kind: PropertyKind,
    pub assertion: String,
    pub sources: Vec<PropertySource>,
    pub provenance: Provenance,
    pub origin: PropertyOrigin,
}

/// Build the stage B request for one subgraph.
pub fn synthesis_request(
    subgraph: &Subgraph,
    analysis: &TrustModelAnalysis,
    scope: &ScopeDocument,
    budget_tokens: u64,
) -> ReasoningRequest {
    ReasoningRequest {
        phase: Phase::P3,
        role: PROPERTY_SYNTHESIZER_ROLE.into(),
        prompt_sections: vec![
            PromptSection::new(
                "task",
                "Synthesize typed security properties (invariant, precondition, \
                 postcondition, assumption) for this subgraph. Draw each property \
                 from at least one of the six sources: stride_threat, \
                 trust_boundary_obligation, spec_assumption, inv_derived, \
                 state_transition, optimization_correctness. Every INV annotation \
                 must yield at least one inv_derived property. Treat STRIDE as a \
                 thinking framework, not a checklist: skip categories with no \
                 relevant threat.",
            ),
            PromptSection::new(
                "subgraph",
                serde_json::to_string_pretty(subgraph).unwrap(),
            ),
            PromptSection::new(
                "trust-analysis",
                serde_json::to_string_pretty(analysis).unwrap(),
            ),
            PromptSection::new("stride-categories", STRIDE_CATEGORIES.join("\n")),
            PromptSection::new("cwe-top-25", CWE_TOP_25.join("\n")),
            PromptSection::new("scope-trust-model", render_trust_model(scope)),
        ],
        response_schema_id: "property_synthesis".into(),
        budget_tokens,
    }
}

/// Stage B: synthesize properties for one subgraph. Ids are assigned here:
/// the hash component digests (subgraph id, assertion text) and the sequence
/// number counts per kind within the subgraph, in response order, so the
/// operation is deterministic and self-contained per subgraph.
pub fn synthesize_properties(
    subgraph: &Subgraph,
    analysis: &TrustModelAnalysis,
    scope: &ScopeDocument,
    backend: &dyn Backend,
    budget_tokens: u64,
    cap: usize,
) -> Result<Vec<UnscoredProperty>, PropGenError> {
    let request = synthesis_request(subgraph, analysis, scope, budget_tokens);
    let response = complete_with_retry(backend, &request)?;
    let synthesis: PropertySynthesis = serde_json::from_value(response.payload)
        .map_err(|e| PropGenError::Malformed(e.to_string()))?;
    let mut counters: BTreeMap<PropertyKind, u32> = BTreeMap::new();
    let mut out = Vec::new();
    for draft in synthesis.properties.into_iter().take(cap) {
        let seq = counters.entry(draft.kind).or_insert(0);
        *seq += 1;
        let hash = property_hash(&subgraph.id, &draft.assertion);
        let spec_section = draft.spec_section.clone().unwrap_or_else(|| {
            draft
                .inv_label
                .as_ref()
                .and_then(|l| {
                    subgraph
                        .invariant_annotations
                        .iter()
                        .find(|a| &a.label == l)
                        .map(|a| a.spec_section.clone())
                })
                .unwrap_or_default()
        });
        out.push(UnscoredProperty {
            id: property_id(&hash, draft.kind, *seq),
            kind: draft.kind,
            assertion: draft.assertion,
            sources: draft.sources,
            provenance: Provenance {
                subgraph: subgraph.id.clone(),
                spec_section,
                inv_label: draft.inv_label,
            },
            origin: PropertyOrigin::Auto,
        });
    }
    // Source-coverage postcondition: every INV annotation yields at least one
    // inv_derived property citing its label.
    for ann in &subgraph.invariant_annotations {
        let covered = out.iter().any(|p| {
            p.sources.contains(&PropertySource::InvDerived)
                && p.provenance.inv_label.as_deref() == Some(ann.label.as_str())
        });
        if !covered {
            return Err(PropGenError::Malformed(format!(
                "no inv_derived property covers {} in {}",
                ann.label, subgraph.id
            )));
        }
    }
    Ok(out)
}

/// Response payload of the severity-assessor worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityAssignment {
    pub severity: Severity,
    pub rationale: String,
}

/// Build the severity-assignment request for one property.
pub fn severity_request(
    property: &UnscoredProperty,
    scope: &ScopeDocument,
    budget_tokens: u64,
) -> ReasoningRequest {
    let thresholds: String = scope
        .severity_thresholds
        .iter()
        .map(|(sev, desc)| format!("{sev}: {desc}\n"))
        .collect();
    ReasoningRequest {
        phase: Phase::P3,
        role: SEVERITY_ASSESSOR_ROLE.into(),
        prompt_sections: vec![
            PromptSection::new(
                "task",
                "Assign a severity to this property using the scope document's \
                 impact-based classification thresholds, and state the rationale.",
            ),
            PromptSection::new(
                "property",
                serde_json::to_string_pretty(property).unwrap(),
            ),
            PromptSection::new("severity-thresholds", thresholds),
        ],
        response_schema_id: "severity_assignment".into(),
        budget_tokens,
    }
}

/// Assign severity from the scope document's thresholds, recording rationale.
pub fn assign_severity(
    property: &UnscoredProperty,
    scope: &ScopeDocument,
    backend: &dyn Backend,
    budget_tokens: u64,
) -> Result<Property, PropGenError> {
    let request = severity_request(property, scope, budget_tokens);
    let response = complete_with_retry(backend, &request)?;
    let assignment: SeverityAssignment = serde_json::from_value(response.payload)
        .map_err(|e| PropGenError::Malformed(e.to_string()))?;
    Ok(Property {
        id: property.id.clone(),
        kind: property.kind,
        assertion: property.assertion.clone(),
        severity: assignment.severity,
        severity_rationale: Some(assignment.rationale),
        sources: property.sources.clone(),
        provenance: property.provenance.clone(),
        origin: property.origin,
    })
}

/// Load manual property files and merge them with the pipeline-generated set.
///
/// Manual properties are validated by exactly the same schema as auto
/// properties. Merging deduplicates by id; a byte-identical duplicate is
/// idempotent, while an id collision with differing content is a conflict.
pub fn inject_manual_properties(
    files: &[std::path::PathBuf],
    existing: &[Property],
) -> Result<Vec<Property>, PropGenError> {
    let mut merged: Vec<Property> = existing.to_vec();
    let mut by_id: BTreeMap<String, usize> = merged
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.clone(), i))
        .collect();
    for file in files {
        let text = std::fs::read_to_string(file)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| PropGenError::InjectionValidation {
                file: file.display().to_string(),
                detail: format!("not JSON: {e}"),
            })?;
        let validation = crate::schema::validate_artifact(&value, "property")
            .expect("property schema registered");
        if !validation.is_pass() {
            return Err(PropGenError::InjectionValidation {
                file: file.display().to_string(),
                detail: format!("{:?}", validation.violations),
            });
        }
        let property: Property = serde_json::from_value(value).expect("validated shape");
        if property.origin != PropertyOrigin::Manual {
            return Err(PropGenError::InjectionValidation {
                file: file.display().to_string(),
                detail: "manual property files must declare origin = manual".into(),
            });
        }
        match by_id.get(&property.id) {
            Some(&idx) => {
                if merged[idx] != property {
                    return Err(PropGenError::InjectionConflict(format!(
                        "id {} already exists with differing content",
                        property.id
                    )));
                }
            }
            None => {
                by_id.insert(property.id.clone(), merged.len());
                merged.push(property);
            }
        }
    }
    Ok(merged)
}

/// List the manual property files (`*.json`) of a directory in name order.
pub fn manual_property_files(dir: &Path) -> Result<Vec<std::path::PathBuf>, PropGenError> {
    let mut files: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Validate a final property set against the property schema; used at the
/// phase boundary before the set is persisted.
pub fn validate_properties(properties: &[Property]) -> Result<(), PropGenError> {
    let validation =
        validate_value(&properties, "property_list").expect("property_list schema registered");
    if !validation.is_pass() {
        return Err(PropGenError::Malformed(format!(
            "{:?}",
            validation.violations
        )));
    }
    Ok(())
}
