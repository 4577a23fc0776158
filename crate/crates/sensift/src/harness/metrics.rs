//! Precision/recall scoring and threshold sweeps.
//!
//! A predicted window counts as a true positive when its verdict matches
//! the target label and its slot range overlaps a ground-truth segment of
//! that label on the same node and property. Unmatched predictions are
//! false positives; unmatched truth segments are false negatives. The unit
//! of prediction is the window (what the detector emits); truth segments
//! are slot ranges, so matching is overlap-based.

use super::{GroundTruth, HarnessError, TruthLabel};
use crate::ingest::{PropertyKind, Tables, TimeRange};
use crate::pipeline::{prepare, DetectionConfig, DetectionOutcome, PreparedDetection};
use crate::rules::RuleSet;
use crate::screening::SuspicionFlag;

/// One predicted anomalous window, reduced to what matching needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionWindow {
    pub property: PropertyKind,
    pub node_id: String,
    /// Inclusive slot bounds on the dataset grid.
    pub slot_start: usize,
    pub slot_end: usize,
}

/// One row of a precision/recall table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub beta: f64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    /// `tp / (tp + fp)`; undefined (None) when nothing was predicted.
    pub precision: Option<f64>,
    /// `tp / (tp + fn)`; undefined (None) when the truth is empty.
    pub recall: Option<f64>,
}

impl MetricsRow {
    pub fn csv_header() -> &'static str {
        "beta,tp,fp,fn,precision,recall"
    }

    /// Flat CSV row; undefined ratios render as empty fields.
    pub fn csv_row(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{:.2},{},{},{},{},{}",
            self.beta,
            self.true_positives,
            self.false_positives,
            self.false_negatives,
            fmt(self.precision),
            fmt(self.recall)
        )
    }

    fn from_counts(beta: f64, tp: u64, fp: u64, fn_count: u64) -> Self {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        MetricsRow {
            beta,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_count,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_count),
        }
    }
}

/// Scores explicit prediction windows against ground truth for one label.
///
/// Predictions and truth must share a grid origin, which holds whenever
/// detection ran over the generated dataset's full range.
pub fn score_windows(
    beta: f64,
    predictions: &[PredictionWindow],
    truth: &GroundTruth,
    target: TruthLabel,
) -> MetricsRow {
    let targets: Vec<_> = truth
        .entries
        .iter()
        .filter(|e| e.label == target)
        .collect();

    let mut matched_truth = vec![false; targets.len()];
    let mut tp = 0u64;
    let mut fp = 0u64;
    for prediction in predictions {
        let mut hit = false;
        for (t, entry) in targets.iter().enumerate() {
            if entry.property == prediction.property
                && entry.node_id == prediction.node_id
                && entry.overlaps_slots(prediction.slot_start, prediction.slot_end)
            {
                hit = true;
                matched_truth[t] = true;
            }
        }
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    let fn_count = matched_truth.iter().filter(|&&m| !m).count() as u64;
    MetricsRow::from_counts(beta, tp, fp, fn_count)
}

/// Scores a detection outcome against ground truth for one target label.
pub fn score(outcome: &DetectionOutcome, truth: &GroundTruth, target: TruthLabel) -> MetricsRow {
    let predictions: Vec<PredictionWindow> = outcome
        .records
        .iter()
        .filter(|r| target.matches(r.verdict))
        .map(|r| PredictionWindow {
            property: r.property.clone(),
            node_id: r.node_id.clone(),
            slot_start: r.slot_start,
            slot_end: r.slot_end,
        })
        .collect();
    score_windows(outcome.beta, &predictions, truth, target)
}

/// Label-agnostic metrics for the screening stage: how well raw suspicion
/// flags cover the injected segments, before classification.
pub fn flag_metrics(
    prepared: &PreparedDetection,
    outcome: &DetectionOutcome,
    truth: &GroundTruth,
) -> (Option<f64>, Option<f64>) {
    let mut matched_truth = vec![false; truth.entries.len()];
    let mut flagged = 0u64;
    let mut flagged_matched = 0u64;

    for (version, outcome_version) in prepared.versions.iter().zip(&outcome.versions) {
        let offset = ((version.range.start.0 - outcome.range.start.0) / outcome.grid_step) as usize;
        for table in &outcome_version.suspicion {
            for (j, node_id) in table.node_order.iter().enumerate() {
                for l in 0..table.window_count {
                    if table.flag(j, l) != SuspicionFlag::Suspicious {
                        continue;
                    }
                    flagged += 1;
                    let slots = version.plan.window_range(l);
                    let (start, end) = (offset + slots.start, offset + slots.end - 1);
                    let mut hit = false;
                    for (t, entry) in truth.entries.iter().enumerate() {
                        if entry.property == table.property
                            && entry.node_id == *node_id
                            && entry.overlaps_slots(start, end)
                        {
                            hit = true;
                            matched_truth[t] = true;
                        }
                    }
                    if hit {
                        flagged_matched += 1;
                    }
                }
            }
        }
    }

    let covered = matched_truth.iter().filter(|&&m| m).count();
    let recall = (!truth.entries.is_empty()).then(|| covered as f64 / truth.entries.len() as f64);
    let precision = (flagged > 0).then(|| flagged_matched as f64 / flagged as f64);
    (recall, precision)
}

/// One sweep step: verdict-level metrics plus screening-stage context.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub metrics: MetricsRow,
    /// Suspicious flags across all cells at this threshold.
    pub suspicious_flags: usize,
    pub flag_recall: Option<f64>,
    pub flag_precision: Option<f64>,
}

/// Re-runs the vote/classify stages across a threshold range. The
/// similarity tensors are computed once; only thresholding repeats.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    tables: &Tables,
    rules: &RuleSet,
    truth: &GroundTruth,
    target: TruthLabel,
    config: &DetectionConfig,
    range: TimeRange,
    beta_from: f64,
    beta_to: f64,
    beta_step: f64,
) -> Result<Vec<SweepPoint>, HarnessError> {
    if !(beta_from > 0.0 && beta_from <= beta_to && beta_to <= 1.0) {
        return Err(HarnessError::InvalidSpec(format!(
            "threshold range must satisfy 0 < from <= to <= 1, got {beta_from}..{beta_to}"
        )));
    }
    if beta_step <= 0.0 {
        return Err(HarnessError::InvalidSpec(format!(
            "threshold step must be positive, got {beta_step}"
        )));
    }

    let prepared = prepare(tables, rules, config, range)?;
    let steps = ((beta_to - beta_from) / beta_step + 1e-9).floor() as usize;
    let mut points = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let beta = beta_from + k as f64 * beta_step;
        let outcome = prepared.detect(beta)?;
        let metrics = score(&outcome, truth, target);
        let (flag_recall, flag_precision) = flag_metrics(&prepared, &outcome, truth);
        points.push(SweepPoint {
            metrics,
            suspicious_flags: outcome.summary.suspicious,
            flag_recall,
            flag_precision,
        });
    }
    Ok(points)
}
