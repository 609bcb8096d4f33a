//! Metric computations over labeled findings.

use std::collections::{BTreeMap, BTreeSet};

use audit_core::model::{is_true_positive, FindingLabel, PropertyKind, ReviewVerdict};

use crate::labels::{FpRootCause, GroundTruthIssue, LabelRow, Subset};
use crate::rational::{f1_ratio, Ratio};
use crate::report::{
    AblationRow, AssumptionExclusion, ClusterMetrics, FpTaxonomy, FpTaxonomyRow, MetricsReport,
    Reconciliation, RecallStat, StageMetrics, VerdictRow,
};
use crate::EvalError;

/// Precision granularities over a labeled finding set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    /// Findings matching adjudicated H/M/L issues.
    Strict,
    /// Strict plus informational, fixed, and partially fixed findings.
    ConfirmedUseful,
    /// All non-false-positives.
    Broad,
}

fn counts_for(rows: &[&LabelRow]) -> BTreeMap<FindingLabel, u64> {
    let mut counts = BTreeMap::new();
    for label in FindingLabel::ALL {
        counts.insert(label, 0u64);
    }
    for row in rows {
        *counts.get_mut(&row.label).unwrap() += 1;
    }
    counts
}

fn numerator(rows: &[&LabelRow], granularity: Granularity) -> u64 {
    rows.iter()
        .filter(|r| match granularity {
            Granularity::Strict => r.label == FindingLabel::Tp,
            Granularity::ConfirmedUseful => matches!(
                r.label,
                FindingLabel::Tp
                    | FindingLabel::TpInfo
                    | FindingLabel::Fixed
                    | FindingLabel::PartiallyFixed
            ),
            Granularity::Broad => is_true_positive(r.label),
        })
        .count() as u64
}

/// Precision at one granularity over a labeled set; an empty set is an
/// undefined metric.
pub fn compute_precision(rows: &[&LabelRow], granularity: Granularity) -> Result<Ratio, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::UndefinedMetric(
            "precision over an empty finding set".into(),
        ));
    }
    Ratio::new(numerator(rows, granularity), rows.len() as u64)
}

/// H/M/L recall: an issue counts as recovered if at least one finding in the
/// set is a full match (label `tp` with that issue id). The denominator is
/// the ground-truth issue count restricted to in-scope repos (issues
/// affecting at least one repo that appears in the labels).
pub fn compute_recall(
    rows: &[&LabelRow],
    issues: &[GroundTruthIssue],
) -> Result<RecallStat, EvalError> {
    let repos: BTreeSet<&str> = rows.iter().map(|r| r.repo.as_str()).collect();
    let in_scope: Vec<&GroundTruthIssue> = issues
        .iter()
        .filter(|i| {
            i.repos_affected.is_empty() || i.repos_affected.iter().any(|r| repos.contains(r.as_str()))
        })
        .collect();
    if in_scope.is_empty() {
        return Err(EvalError::UndefinedMetric("no in-scope issues".into()));
    }
    let recovered: BTreeSet<&str> = rows
        .iter()
        .filter(|r| r.label == FindingLabel::Tp)
        .filter_map(|r| r.matched_issue.as_deref())
        .collect();
    let hit = in_scope
        .iter()
        .filter(|i| recovered.contains(i.issue_id.as_str()))
        .count() as u64;
    Ok(RecallStat {
        recovered: hit,
        issues: in_scope.len() as u64,
        ratio: Ratio::new(hit, in_scope.len() as u64)?,
    })
}

/// Cluster findings: rows matched to the same issue within the same repo form
/// one cluster; unmatched rows are singletons. A cluster is H/M/L-matching
/// when it contains at least one full match (`tp`).
pub fn cluster_findings(rows: &[&LabelRow]) -> Result<ClusterMetrics, EvalError> {
    let mut matched: BTreeMap<(String, String), Vec<&LabelRow>> = BTreeMap::new();
    let mut singletons = 0u64;
    let mut hml_clusters = 0u64;
    let mut largest: u64 = 0;
    for row in rows {
        match &row.matched_issue {
            Some(issue) => matched
                .entry((issue.clone(), row.repo.clone()))
                .or_default()
                .push(row),
            None => singletons += 1,
        }
    }
    for members in matched.values() {
        largest = largest.max(members.len() as u64);
        if members.iter().any(|r| r.label == FindingLabel::Tp) {
            hml_clusters += 1;
        }
    }
    let total = matched.len() as u64 + singletons;
    if total == 0 {
        return Err(EvalError::UndefinedMetric("no findings to cluster".into()));
    }
    Ok(ClusterMetrics {
        total_clusters: total,
        hml_matching_clusters: hml_clusters,
        strict_cluster_precision: Ratio::new(hml_clusters, total)?,
        largest_cluster_size: largest,
    })
}

/// Verdict distribution with retrospective TP rates; verdicts with zero
/// findings are omitted.
pub fn verdict_table(rows: &[&LabelRow]) -> Result<Vec<VerdictRow>, EvalError> {
    let mut out = Vec::new();
    for verdict in ReviewVerdict::ALL {
        let members: Vec<&&LabelRow> = rows
            .iter()
            .filter(|r| r.verdict == Some(verdict))
            .collect();
        if members.is_empty() {
            continue;
        }
        let count = members.len() as u64;
        let tp = members.iter().filter(|r| is_true_positive(r.label)).count() as u64;
        out.push(VerdictRow {
            verdict,
            count,
            tp,
            tp_rate: Ratio::new(tp, count)?,
        });
    }
    Ok(out)
}

/// False-positive root-cause taxonomy over the annotated FPs, with phase
/// origin and the review cross-tab; unannotated FPs are listed as
/// unclassified, never guessed.
pub fn fp_taxonomy(rows: &[&LabelRow]) -> Result<FpTaxonomy, EvalError> {
    let fps: Vec<&&LabelRow> = rows.iter().filter(|r| r.is_fp()).collect();
    let annotated: Vec<&&&LabelRow> = fps.iter().filter(|r| r.fp_root_cause.is_some()).collect();
    let total_annotated = annotated.len() as u64;
    let mut taxonomy_rows = Vec::new();
    for cause in FpRootCause::ALL {
        let members: Vec<_> = annotated
            .iter()
            .filter(|r| r.fp_root_cause == Some(cause))
            .collect();
        if members.is_empty() {
            continue;
        }
        let n = members.len() as u64;
        let phases: BTreeSet<String> = members
            .iter()
            .filter_map(|r| r.fp_origin_phase.map(|p| p.as_str().to_string()))
            .collect();
        let filtered = members
            .iter()
            .filter(|r| r.verdict == Some(ReviewVerdict::DisputedFp))
            .count() as u64;
        taxonomy_rows.push(FpTaxonomyRow {
            root_cause: cause,
            phase_origin: phases.into_iter().collect::<Vec<_>>().join(","),
            count: n,
            share: Ratio::new(n, total_annotated.max(1))?,
            filtered_by_review: filtered,
        });
    }
    Ok(FpTaxonomy {
        total_fps: fps.len() as u64,
        annotated: total_annotated,
        unclassified: fps.len() as u64 - total_annotated,
        rows: taxonomy_rows,
    })
}

/// Property-type ablation over the synthetic ablation rows: N counts every
/// ablation row of the kind; TP and FP count only the H/M/L-adjudicated
/// subset, and precision is TP/(TP+FP) over those labeled rows.
pub fn property_type_ablation(rows: &[&LabelRow]) -> Result<Vec<AblationRow>, EvalError> {
    let kinds = [
        PropertyKind::Invariant,
        PropertyKind::Precondition,
        PropertyKind::Postcondition,
        PropertyKind::Assumption,
    ];
    let mut out = Vec::new();
    for kind in kinds {
        let of_kind: Vec<&&LabelRow> = rows.iter().filter(|r| r.property_kind == kind).collect();
        if of_kind.is_empty() {
            continue;
        }
        let hml: Vec<_> = of_kind
            .iter()
            .filter(|r| r.subset == Subset::AblationHml)
            .collect();
        let tp = hml.iter().filter(|r| r.label == FindingLabel::Tp).count() as u64;
        let fp = hml.iter().filter(|r| r.is_fp()).count() as u64;
        let precision = if tp + fp > 0 {
            Some(Ratio::new(tp, tp + fp)?)
        } else {
            None
        };
        out.push(AblationRow {
            kind,
            n: of_kind.len() as u64,
            tp,
            fp,
            precision,
        });
    }
    Ok(out)
}

/// The accounting reconciliation ledger as an executable check.
pub fn reconcile(main_rows: &[&LabelRow]) -> Result<Reconciliation, EvalError> {
    let total = main_rows.len() as u64;
    let survivors: Vec<&LabelRow> = main_rows
        .iter()
        .filter(|r| r.survived_review())
        .copied()
        .collect();
    let survivor_refs: Vec<&LabelRow> = survivors.to_vec();
    let disputed = total - survivors.len() as u64;
    let pre_non_fp = main_rows.iter().filter(|r| !r.is_fp()).count() as u64;
    let post_non_fp = survivor_refs.iter().filter(|r| !r.is_fp()).count() as u64;
    let confirmed_useful = numerator(&survivor_refs, Granularity::ConfirmedUseful);
    let ledger = Reconciliation {
        pre_review_total: total,
        survived: survivors.len() as u64,
        disputed,
        pre_review_non_fp: pre_non_fp,
        pre_review_fp: total - pre_non_fp,
        post_review_non_fp: post_non_fp,
        post_review_fp: survivors.len() as u64 - post_non_fp,
        confirmed_useful,
    };
    // The ledger identities hold by construction; assert them anyway so a
    // future refactor cannot silently break the accounting.
    debug_assert_eq!(ledger.survived + ledger.disputed, ledger.pre_review_total);
    debug_assert_eq!(
        ledger.pre_review_non_fp + ledger.pre_review_fp,
        ledger.pre_review_total
    );
    debug_assert_eq!(
        ledger.post_review_non_fp + ledger.post_review_fp,
        ledger.survived
    );
    Ok(ledger)
}

/// Post-review metrics with assumption-kind rows excluded.
pub fn assumption_exclusion(post_rows: &[&LabelRow]) -> Result<AssumptionExclusion, EvalError> {
    let kept: Vec<&LabelRow> = post_rows
        .iter()
        .filter(|r| r.property_kind != PropertyKind::Assumption)
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(EvalError::UndefinedMetric(
            "assumption exclusion over empty set".into(),
        ));
    }
    Ok(AssumptionExclusion {
        n: kept.len() as u64,
        broad_precision: compute_precision(&kept, Granularity::Broad)?,
        strict_precision: compute_precision(&kept, Granularity::Strict)?,
    })
}

/// Run the full evaluation over a labels file plus ground truth.
pub fn evaluate(
    rows: &[LabelRow],
    issues: &[GroundTruthIssue],
    include_ablation: bool,
) -> Result<MetricsReport, EvalError> {
    let main: Vec<&LabelRow> = rows.iter().filter(|r| r.subset == Subset::Main).collect();
    if main.is_empty() {
        return Err(EvalError::UndefinedMetric("no main label rows".into()));
    }
    let post: Vec<&LabelRow> = main
        .iter()
        .filter(|r| r.survived_review())
        .copied()
        .collect();

    let pre_broad = compute_precision(&main, Granularity::Broad)?;
    let pre_recall = compute_recall(&main, issues)?;
    let pre = StageMetrics {
        n: main.len() as u64,
        strict_precision: compute_precision(&main, Granularity::Strict)?,
        confirmed_useful_precision: compute_precision(&main, Granularity::ConfirmedUseful)?,
        broad_precision: pre_broad.clone(),
        recall: pre_recall.clone(),
        f1: f1_ratio(&pre_broad, &pre_recall.ratio)?,
    };

    let post_broad = compute_precision(&post, Granularity::Broad)?;
    let post_recall = compute_recall(&post, issues)?;
    let post_stage = StageMetrics {
        n: post.len() as u64,
        strict_precision: compute_precision(&post, Granularity::Strict)?,
        confirmed_useful_precision: compute_precision(&post, Granularity::ConfirmedUseful)?,
        broad_precision: post_broad.clone(),
        recall: post_recall.clone(),
        f1: f1_ratio(&post_broad, &post_recall.ratio)?,
    };

    let ablation_rows: Vec<&LabelRow> = rows
        .iter()
        .filter(|r| r.subset.is_ablation())
        .collect();
    let ablation = if include_ablation && !ablation_rows.is_empty() {
        Some(property_type_ablation(&ablation_rows)?)
    } else {
        None
    };

    Ok(MetricsReport {
        pre_review: pre,
        post_review: post_stage,
        clusters: cluster_findings(&post)?,
        verdict_table: verdict_table(&main)?,
        fp_taxonomy: fp_taxonomy(&main)?,
        assumption_exclusion: assumption_exclusion(&post)?,
        reconciliation: reconcile(&main)?,
        ablation,
    })
}
