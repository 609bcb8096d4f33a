//! Evaluation report structures and rendering.

use serde::{Deserialize, Serialize};

use audit_core::model::{PropertyKind, ReviewVerdict};

use crate::labels::FpRootCause;
use crate::rational::Ratio;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallStat {
    pub recovered: u64,
    pub issues: u64,
    pub ratio: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub n: u64,
    pub strict_precision: Ratio,
    pub confirmed_useful_precision: Ratio,
    pub broad_precision: Ratio,
    pub recall: RecallStat,
    pub f1: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterMetrics {
    pub total_clusters: u64,
    pub hml_matching_clusters: u64,
    pub strict_cluster_precision: Ratio,
    pub largest_cluster_size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub verdict: ReviewVerdict,
    pub count: u64,
    pub tp: u64,
    pub tp_rate: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FpTaxonomyRow {
    pub root_cause: FpRootCause,
    pub phase_origin: String,
    pub count: u64,
    pub share: Ratio,
    /// How many of these FPs the review phase filtered as DISPUTED_FP.
    pub filtered_by_review: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FpTaxonomy {
    pub total_fps: u64,
    pub annotated: u64,
    pub unclassified: u64,
    pub rows: Vec<FpTaxonomyRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationRow {
    pub kind: PropertyKind,
    pub n: u64,
    pub tp: u64,
    pub fp: u64,
    /// TP/(TP+FP) over the adjudicated rows; absent when none are labeled.
    pub precision: Option<Ratio>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionExclusion {
    pub n: u64,
    pub broad_precision: Ratio,
    pub strict_precision: Ratio,
}

/// The accounting ledger: every count reported elsewhere traces to one
/// partition here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reconciliation {
    pub pre_review_total: u64,
    pub survived: u64,
    pub disputed: u64,
    pub pre_review_non_fp: u64,
    pub pre_review_fp: u64,
    pub post_review_non_fp: u64,
    pub post_review_fp: u64,
    pub confirmed_useful: u64,
}

impl Reconciliation {
    /// The ledger identities as one executable check.
    pub fn balanced(&self) -> bool {
        self.survived + self.disputed == self.pre_review_total
            && self.pre_review_non_fp + self.pre_review_fp == self.pre_review_total
            && self.post_review_non_fp + self.post_review_fp == self.survived
            && self.confirmed_useful <= self.post_review_non_fp
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pre_review: StageMetrics,
    pub post_review: StageMetrics,
    pub clusters: ClusterMetrics,
    pub verdict_table: Vec<VerdictRow>,
    pub fp_taxonomy: FpTaxonomy,
    pub assumption_exclusion: AssumptionExclusion,
    pub reconciliation: Reconciliation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<Vec<AblationRow>>,
}

impl MetricsReport {
    /// Plain-text rendering of the full report.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let line = |out: &mut String, s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(&mut out, "== Evaluation summary ==".into());
        line(
            &mut out,
            format!(
                "Pre-review  (N={}): broad {}, recall {}/{} ({}%), F1 {}%",
                self.pre_review.n,
                self.pre_review.broad_precision,
                self.pre_review.recall.recovered,
                self.pre_review.recall.issues,
                self.pre_review.recall.ratio.percent,
                self.pre_review.f1.percent
            ),
        );
        line(
            &mut out,
            format!(
                "Post-review (N={}): strict {}, confirmed-useful {}, broad {}, recall {}/{} ({}%), F1 {}%",
                self.post_review.n,
                self.post_review.strict_precision,
                self.post_review.confirmed_useful_precision,
                self.post_review.broad_precision,
                self.post_review.recall.recovered,
                self.post_review.recall.issues,
                self.post_review.recall.ratio.percent,
                self.post_review.f1.percent
            ),
        );
        line(
            &mut out,
            format!(
                "Clusters: N={}, H/M/L-matching {}, strict cluster precision {}%",
                self.clusters.total_clusters,
                self.clusters.hml_matching_clusters,
                self.clusters.strict_cluster_precision.percent
            ),
        );
        line(&mut out, "Verdicts (count / TP / TP rate):".into());
        for row in &self.verdict_table {
            line(
                &mut out,
                format!(
                    "  {:<24} {:>4} {:>4} {:>6}%",
                    row.verdict.as_str(),
                    row.count,
                    row.tp,
                    row.tp_rate.percent
                ),
            );
        }
        line(
            &mut out,
            format!(
                "FP taxonomy: {} total, {} annotated, {} unclassified",
                self.fp_taxonomy.total_fps, self.fp_taxonomy.annotated, self.fp_taxonomy.unclassified
            ),
        );
        for row in &self.fp_taxonomy.rows {
            line(
                &mut out,
                format!(
                    "  {:<32} ({}) {:>3} = {:>5}%  review filtered {}/{}",
                    row.root_cause.as_str(),
                    row.phase_origin,
                    row.count,
                    row.share.percent,
                    row.filtered_by_review,
                    row.count
                ),
            );
        }
        line(
            &mut out,
            format!(
                "Excluding assumptions (N={}): broad {}%, strict {}%",
                self.assumption_exclusion.n,
                self.assumption_exclusion.broad_precision.percent,
                self.assumption_exclusion.strict_precision.percent
            ),
        );
        let r = &self.reconciliation;
        line(
            &mut out,
            format!(
                "Ledger: {} = {} survived + {} disputed; pre {}/{} non-FP/FP; post {}/{}; confirmed-useful {}; balanced={}",
                r.pre_review_total,
                r.survived,
                r.disputed,
                r.pre_review_non_fp,
                r.pre_review_fp,
                r.post_review_non_fp,
                r.post_review_fp,
                r.confirmed_useful,
                r.balanced()
            ),
        );
        if let Some(ablation) = &self.ablation {
            line(&mut out, "Property-type ablation (N / TP / FP / precision):".into());
            for row in ablation {
                line(
                    &mut out,
                    format!(
                        "  {:<14} {:>3} {:>3} {:>3} {:>6}",
                        format!("{:?}", row.kind).to_lowercase(),
                        row.n,
                        row.tp,
                        row.fp,
                        row.precision
                            .as_ref()
                            .map(|p| format!("{}%", p.percent))
                            .unwrap_or_else(|| "-".into())
                    ),
                );
            }
        }
        out
    }
}
