//! JSON detection report: the machine-readable record of one detection run.
//!
//! The report carries the effective configuration, per-verdict summary
//! counts, and one record per anomalous window with its audit trail
//! (corroboration counts, neighbor similarity spread). The `score` command
//! parses the same structure back, so reports round-trip.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use sensift::classify::Verdict;
use sensift::harness::PredictionWindow;
use sensift::ingest::{PropertyKind, TimeRange};
use sensift::pipeline::{DetectionConfig, DetectionOutcome};

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportDoc {
    pub config: ReportConfig,
    pub summary: ReportSummary,
    pub records: Vec<ReportRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportConfig {
    pub from: String,
    pub to: String,
    pub beta: f64,
    pub delta_m: f64,
    pub eta: usize,
    pub grid_step_secs: i64,
    pub predicates: Vec<String>,
    pub value_scales: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportSummary {
    pub normal: usize,
    pub erroneous_outliers: usize,
    pub unusual_events: usize,
    pub unevaluated: usize,
    pub suspicious_flags: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportRecord {
    pub property: String,
    pub node_id: String,
    pub version: usize,
    pub window: usize,
    pub slot_start: usize,
    pub slot_end: usize,
    pub start: String,
    pub end: String,
    pub verdict: String,
    pub c1: u32,
    pub c2: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_similarity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_similarity: Option<f64>,
}

pub fn verdict_token(verdict: Verdict) -> &'static str {
    match verdict {
        Verdict::Normal => "normal",
        Verdict::ErroneousOutlier => "erroneous_outlier",
        Verdict::UnusualEvent => "unusual_event",
        Verdict::Unevaluated => "unevaluated",
    }
}

impl ReportDoc {
    pub fn from_outcome(
        outcome: &DetectionOutcome,
        config: &DetectionConfig,
        range: TimeRange,
    ) -> Self {
        ReportDoc {
            config: ReportConfig {
                from: range.start.to_iso(),
                to: range.end.to_iso(),
                beta: outcome.beta,
                delta_m: config.delta_m,
                eta: config.eta,
                grid_step_secs: config.grid_step,
                predicates: config
                    .active_predicates
                    .iter()
                    .map(|p| p.short_name().to_string())
                    .collect(),
                value_scales: config
                    .value_scales
                    .iter()
                    .map(|(k, v)| (k.as_str().to_string(), *v))
                    .collect(),
            },
            summary: ReportSummary {
                normal: outcome.summary.normal,
                erroneous_outliers: outcome.summary.erroneous_outliers,
                unusual_events: outcome.summary.unusual_events,
                unevaluated: outcome.summary.unevaluated,
                suspicious_flags: outcome.summary.suspicious,
            },
            records: outcome
                .records
                .iter()
                .map(|r| ReportRecord {
                    property: r.property.as_str().to_string(),
                    node_id: r.node_id.clone(),
                    version: r.version,
                    window: r.window,
                    slot_start: r.slot_start,
                    slot_end: r.slot_end,
                    start: r.start.to_iso(),
                    end: r.end.to_iso(),
                    verdict: verdict_token(r.verdict).to_string(),
                    c1: r.c1,
                    c2: r.c2,
                    min_similarity: r.min_similarity,
                    median_similarity: r.median_similarity,
                })
                .collect(),
            warnings: outcome.warnings.clone(),
        }
    }

    /// Records with the given verdict token as scoreable prediction windows.
    pub fn predictions(&self, verdict: &str) -> anyhow::Result<Vec<PredictionWindow>> {
        self.records
            .iter()
            .filter(|r| r.verdict == verdict)
            .map(|r| {
                Ok(PredictionWindow {
                    property: PropertyKind::new(&r.property)
                        .map_err(|e| anyhow::anyhow!("bad property in report: {e}"))?,
                    node_id: r.node_id.clone(),
                    slot_start: r.slot_start,
                    slot_end: r.slot_end,
                })
            })
            .collect()
    }
}
