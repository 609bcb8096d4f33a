//! Shared domain types exchanged between pipeline phases.
//!
//! All values here are immutable after construction and safe to share across
//! parallel workers. Inter-phase artifacts are UTF-8 JSON serializations of
//! these types; the validation rules live in [`crate::schema`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Kind of a discovered specification document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocType {
    Spec,
    Eip,
    Scope,
    Other,
}

/// One specification document discovered during Phase 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecDocument {
    pub id: String,
    pub url: String,
    pub title: String,
    pub doc_type: DocType,
    pub content: String,
}

/// Disposition of one URI seen by the crawler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontierStatus {
    Indexed,
    Filtered,
    Duplicate,
    Failed,
}

/// Crawl-frontier log entry: every URI the crawler considered, with outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierEntry {
    pub url: String,
    pub status: FrontierStatus,
    pub depth: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Phase 1 output: the structured index of discovered documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecIndex {
    pub documents: Vec<SpecDocument>,
    pub crawl_frontier_log: Vec<FrontierEntry>,
}

/// RFC 2119 modal strength of a normative sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModalStrength {
    Must,
    MustNot,
    Shall,
    Should,
    ShouldNot,
    May,
}

impl ModalStrength {
    /// The surface phrase that produces this strength, e.g. `MUST NOT`.
    pub fn phrase(self) -> &'static str {
        match self {
            ModalStrength::Must => "MUST",
            ModalStrength::MustNot => "MUST NOT",
            ModalStrength::Shall => "SHALL",
            ModalStrength::Should => "SHOULD",
            ModalStrength::ShouldNot => "SHOULD NOT",
            ModalStrength::May => "MAY",
        }
    }
}

/// An invariant tagged from an RFC 2119 modal verb in specification text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantAnnotation {
    /// Label of the form `INV-NNN`, assigned in document order.
    pub label: String,
    pub modal_strength: ModalStrength,
    /// Verbatim sentence the annotation was tagged from.
    pub source_sentence: String,
    pub spec_section: String,
}

/// A named state transition inside a subgraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub trigger: String,
}

/// Program-graph decomposition of one specification document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraph {
    /// Identifier of the form `SG-NNN`.
    pub id: String,
    /// Id of the [`SpecDocument`] this subgraph was extracted from.
    pub source_doc: String,
    pub states: Vec<String>,
    pub transitions: Vec<Transition>,
    pub invariant_annotations: Vec<InvariantAnnotation>,
    pub dataflow_constraints: Vec<String>,
}

/// The four property types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyKind {
    Invariant,
    Precondition,
    Postcondition,
    Assumption,
}

impl PropertyKind {
    /// Id infix used in property identifiers (`inv`/`pre`/`post`/`asm`).
    pub fn id_infix(self) -> &'static str {
        match self {
            PropertyKind::Invariant => "inv",
            PropertyKind::Precondition => "pre",
            PropertyKind::Postcondition => "post",
            PropertyKind::Assumption => "asm",
        }
    }

    pub fn from_infix(infix: &str) -> Option<Self> {
        match infix {
            "inv" => Some(PropertyKind::Invariant),
            "pre" => Some(PropertyKind::Precondition),
            "post" => Some(PropertyKind::Postcondition),
            "asm" => Some(PropertyKind::Assumption),
            _ => None,
        }
    }
}

/// Finding/property severity. Declaration order is most-severe-first so the
/// derived `Ord` ranks `High < Medium < Low < Informational`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum Severity {
    High,
    Medium,
    Low,
    Informational,
}

impl Severity {
    /// Numeric rank; lower is more severe.
    pub fn rank(self) -> u8 {
        match self {
            Severity::High => 0,
            Severity::Medium => 1,
            Severity::Low => 2,
            Severity::Informational => 3,
        }
    }

    /// True when `self` is strictly less severe than `other`.
    pub fn is_below(self, other: Severity) -> bool {
        self.rank() > other.rank()
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Severity::High => "High",
            Severity::Medium => "Medium",
            Severity::Low => "Low",
            Severity::Informational => "Informational",
        };
        f.write_str(s)
    }
}

/// The six sources a property may be synthesized from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertySource {
    StrideThreat,
    TrustBoundaryObligation,
    SpecAssumption,
    InvDerived,
    StateTransition,
    OptimizationCorrectness,
}

/// Whether a property was produced by the pipeline or injected by a person.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyOrigin {
    Auto,
    Manual,
}

/// Provenance chain from a property back to its specification source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub subgraph: String,
    pub spec_section: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inv_label: Option<String>,
}

/// A typed, severity-tagged security expectation; the unit of audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Property {
    /// Identifier of the form `PROP-<8 hex>-<kind infix>-NNN`.
    pub id: String,
    pub kind: PropertyKind,
    pub assertion: String,
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity_rationale: Option<String>,
    pub sources: Vec<PropertySource>,
    pub provenance: Provenance,
    pub origin: PropertyOrigin,
}

/// Stable 8-hex-character digest used as the hash component of property ids,
/// derived from the subgraph id and the assertion text.
pub fn property_hash(subgraph_id: &str, assertion: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(subgraph_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(assertion.as_bytes());
    hex::encode(&hasher.finalize()[..4])
}

/// Compose a property id from its parts.
pub fn property_id(hash: &str, kind: PropertyKind, seq: u32) -> String {
    format!("PROP-{hash}-{}-{:03}", kind.id_infix(), seq)
}

/// Parse a property id into (hash, kind, sequence number).
pub fn parse_property_id(id: &str) -> Option<(String, PropertyKind, u32)> {
    let rest = id.strip_prefix("PROP-")?;
    let mut parts = rest.split('-');
    let hash = parts.next()?;
    let kind = PropertyKind::from_infix(parts.next()?)?;
    let seq: u32 = parts.next()?.parse().ok()?;
    if parts.next().is_some() || hash.len() != 8 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    Some((hash.to_string(), kind, seq))
}

/// Trust level of a data-entry boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrustLevel {
    Trusted,
    SemiTrusted,
    Untrusted,
}

/// One labeled boundary in the scope document's trust model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustBoundary {
    pub name: String,
    pub level: TrustLevel,
    pub rationale: String,
}

/// The trust-boundary model the review gates check attack paths against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustModel {
    pub boundaries: Vec<TrustBoundary>,
}

impl TrustModel {
    /// Look up the trust level of a boundary by name.
    pub fn level_of(&self, name: &str) -> Option<TrustLevel> {
        self.boundaries
            .iter()
            .find(|b| b.name == name)
            .map(|b| b.level)
    }
}

/// The audit perimeter: what is in scope, what is excluded, and how severity
/// thresholds are described.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeDocument {
    pub included_components: Vec<String>,
    pub excluded_categories: Vec<String>,
    pub preexisting_issue_ids: Vec<String>,
    /// Impact description per severity, consulted by reasoning steps as free
    /// text rather than machine-checked rules.
    pub severity_thresholds: BTreeMap<Severity, String>,
    pub trust_model: TrustModel,
}

/// A source location: file, symbol, and line span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeLocation {
    pub file: String,
    pub symbol: String,
    pub line_start: u32,
    pub line_end: u32,
}

/// One enforcement location with its caller/callee neighborhood.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopedLocation {
    pub location: CodeLocation,
    pub callers: Vec<String>,
    pub callees: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolutionStatus {
    Resolved,
    Unresolved,
}

/// Phase 4 output linking one property to concrete source locations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeScope {
    pub property_id: String,
    pub enforcement_locations: Vec<ScopedLocation>,
    pub resolution_status: ResolutionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Audit outcome classification per property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Vulnerability,
    PotentialVulnerability,
    NotAVulnerability,
    OutOfScope,
}

/// Structured attack path produced by the stress-test sub-phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackPath {
    /// Name of the trust boundary the attack enters through.
    pub source_boundary: String,
    pub steps: Vec<String>,
    pub sink: String,
    /// Other entry boundaries the same gap is reachable from, if any.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternative_sources: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProofStatus {
    Holds,
    Fails,
}

/// Verification dimensions checked during the prove sub-phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProofDimension {
    InputCoverage,
    PathCoverage,
    ConcurrencySafety,
    TemporalValidity,
    ImplementationPattern,
}

/// Where and why a proof attempt failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailurePoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<CodeLocation>,
    pub reason: String,
}

/// Result of proving one sub-claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofResult {
    pub sub_claim_id: String,
    pub status: ProofStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_point: Option<FailurePoint>,
    pub checked_dimensions: Vec<ProofDimension>,
}

/// One step of a finding's proof trace: the sub-claim and its proof result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStep {
    pub sub_claim_id: String,
    pub claim: String,
    pub result: ProofResult,
}

/// Record of the assumption re-examination performed when every sub-claim
/// holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReexaminationRecord {
    pub assumptions_reconfirmed: bool,
    pub notes: String,
}

/// Evaluation label assigned to a finding by the harness, never by the
/// pipeline itself. Everything except `fp_invalid` and `fp_review` counts as
/// a true positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingLabel {
    Tp,
    TpInfo,
    Fixed,
    PartiallyFixed,
    PotentialInfo,
    FpInvalid,
    FpReview,
}

impl FindingLabel {
    pub const ALL: [FindingLabel; 7] = [
        FindingLabel::Tp,
        FindingLabel::TpInfo,
        FindingLabel::Fixed,
        FindingLabel::PartiallyFixed,
        FindingLabel::PotentialInfo,
        FindingLabel::FpInvalid,
        FindingLabel::FpReview,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tp" => Some(FindingLabel::Tp),
            "tp_info" => Some(FindingLabel::TpInfo),
            "fixed" => Some(FindingLabel::Fixed),
            "partially_fixed" => Some(FindingLabel::PartiallyFixed),
            "potential_info" => Some(FindingLabel::PotentialInfo),
            "fp_invalid" => Some(FindingLabel::FpInvalid),
            "fp_review" => Some(FindingLabel::FpReview),
            _ => None,
        }
    }
}

/// Precision is the non-FP rate: false exactly for the two FP labels.
pub fn is_true_positive(label: FindingLabel) -> bool {
    !matches!(label, FindingLabel::FpInvalid | FindingLabel::FpReview)
}

/// One audit outcome for one property in one implementation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub property_id: String,
    pub repo_id: String,
    pub classification: Classification,
    pub severity: Severity,
    pub gap_description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_path: Option<AttackPath>,
    pub proof_trace: Vec<ProofStep>,
    /// Finding category as reported by the audit worker (used by the scope
    /// gate's excluded-category check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    /// Set when the audit worker recognizes the gap as an already-tracked
    /// issue; matched against the scope document's pre-existing ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preexisting_issue_ref: Option<String>,
    /// Present on pass records (all sub-claims held and assumptions were
    /// re-examined).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumption_reexamination: Option<ReexaminationRecord>,
    /// Assigned only by the evaluation harness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<FindingLabel>,
}

impl Finding {
    /// The source location this finding points at, if any: the first failing
    /// proof step's failure point.
    pub fn flagged_location(&self) -> Option<&CodeLocation> {
        self.proof_trace
            .iter()
            .filter(|s| s.result.status == ProofStatus::Fails)
            .find_map(|s| {
                s.result
                    .failure_point
                    .as_ref()
                    .and_then(|fp| fp.location.as_ref())
            })
    }
}

/// Phase 6 verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReviewVerdict {
    ConfirmedVulnerability,
    ConfirmedPotential,
    Downgraded,
    DisputedFp,
    NeedsManualReview,
}

impl ReviewVerdict {
    pub const ALL: [ReviewVerdict; 5] = [
        ReviewVerdict::ConfirmedVulnerability,
        ReviewVerdict::ConfirmedPotential,
        ReviewVerdict::Downgraded,
        ReviewVerdict::DisputedFp,
        ReviewVerdict::NeedsManualReview,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "CONFIRMED_VULNERABILITY" => Some(ReviewVerdict::ConfirmedVulnerability),
            "CONFIRMED_POTENTIAL" => Some(ReviewVerdict::ConfirmedPotential),
            "DOWNGRADED" => Some(ReviewVerdict::Downgraded),
            "DISPUTED_FP" => Some(ReviewVerdict::DisputedFp),
            "NEEDS_MANUAL_REVIEW" => Some(ReviewVerdict::NeedsManualReview),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReviewVerdict::ConfirmedVulnerability => "CONFIRMED_VULNERABILITY",
            ReviewVerdict::ConfirmedPotential => "CONFIRMED_POTENTIAL",
            ReviewVerdict::Downgraded => "DOWNGRADED",
            ReviewVerdict::DisputedFp => "DISPUTED_FP",
            ReviewVerdict::NeedsManualReview => "NEEDS_MANUAL_REVIEW",
        }
    }
}

/// The three gates that may dispute a finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    DeadCode,
    TrustBoundary,
    Scope,
}

/// Outcome of evaluating one gate against one finding. The evidence must cite
/// index or scope data, not judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateVerdict {
    pub gate: GateKind,
    pub fired: bool,
    pub evidence: String,
}

/// Phase 6 output: the finding plus its verdict, gate evidence, and
/// calibrated severity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewedFinding {
    pub finding: Finding,
    pub verdict: ReviewVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disputing_gate: Option<GateKind>,
    pub calibrated_severity: Severity,
    pub gate_verdicts: Vec<GateVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_rationale: Option<String>,
}

/// How a finding relates to a ground-truth issue. A full match requires both
/// root cause and security impact to align; a partial match identifies the
/// same code location but attributes a different impact and is excluded from
/// recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Full,
    Partial,
    None,
}

/// One finding-to-issue match decision with its rationale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub finding_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issue_id: Option<String>,
    pub match_kind: MatchKind,
    pub rationale: String,
}

/// Backend payload for proposed matches, pending human confirmation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchProposal {
    pub matches: Vec<MatchRecord>,
}

/// Pipeline phases, used for budget accounting and request routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::P1,
        Phase::P2,
        Phase::P3,
        Phase::P4,
        Phase::P5,
        Phase::P6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::P1 => "p1",
            Phase::P2 => "p2",
            Phase::P3 => "p3",
            Phase::P4 => "p4",
            Phase::P5 => "p5",
            Phase::P6 => "p6",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
