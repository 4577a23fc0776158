//! End-to-end detection over a queried time range.
//!
//! The chain per topology version: align observations to the grid, build
//! the per-property similarity tensors over neighbor pairs, vote each
//! (sensor, window) cell, then classify suspicious cells against the
//! relationship matrix. Versions partition the queried range, so a network
//! reconfiguration mid-range never mixes data across incompatible
//! topologies. Tensors are independent of the similarity threshold, which
//! makes re-thresholding (threshold sweeps) cheap.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::classify::{classify_all, ClassifyError, DecisionTable, Verdict};
use crate::ingest::{
    IngestError, ObservationSeries, PropertyKind, SensorRecord, Tables, TimeRange, Timestamp,
};
use crate::rules::{
    build_relationship_matrix, default_active_predicates, CorrelationPredicate,
    RelationshipMatrix, RuleError, RuleSet,
};
use crate::screening::{
    build_similarity_tensor, plan_windows, vote_suspicious, ScreeningError, SimilarityTensor,
    SuspicionFlag, SuspicionTable, WindowPlan,
};
use crate::topology::{version_matrices, TopologyError, TopologyVersion};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Screening(#[from] ScreeningError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

/// Tunable knobs of the detection chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionConfig {
    /// Neighborhood threshold in meters.
    pub delta_m: f64,
    /// Sliding window length in slots; even, at least 2.
    pub eta: usize,
    /// Similarity threshold in (0, 1].
    pub beta: f64,
    /// Sampling grid step in seconds.
    pub grid_step: i64,
    /// Per-property divisor applied to value deltas; absent means 1.0.
    pub value_scales: BTreeMap<PropertyKind, f64>,
    /// Predicates that count as "correlated" for the relationship matrix.
    pub active_predicates: BTreeSet<CorrelationPredicate>,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            delta_m: 300.0,
            eta: 12,
            beta: 0.90,
            grid_step: 600,
            value_scales: BTreeMap::new(),
            active_predicates: default_active_predicates(),
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.delta_m > 0.0 && self.delta_m.is_finite()) {
            return Err(PipelineError::Config(format!(
                "neighborhood threshold must be positive, got {}",
                self.delta_m
            )));
        }
        if self.eta < 2 || !self.eta.is_multiple_of(2) {
            return Err(PipelineError::Config(format!(
                "window length must be an even integer >= 2, got {}",
                self.eta
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(PipelineError::Config(format!(
                "similarity threshold must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if self.grid_step <= 0 {
            return Err(PipelineError::Config(format!(
                "grid step must be positive, got {} s",
                self.grid_step
            )));
        }
        for (p, s) in &self.value_scales {
            if !(*s > 0.0 && s.is_finite()) {
                return Err(PipelineError::Config(format!(
                    "value scale for `{p}` must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn scale_for(&self, property: &PropertyKind) -> f64 {
        self.value_scales.get(property).copied().unwrap_or(1.0)
    }
}

/// Everything the threshold-dependent stage needs, computed once.
#[derive(Debug, Clone)]
pub struct PreparedVersion {
    pub range: TimeRange,
    pub topology: TopologyVersion,
    pub plan: WindowPlan,
    /// One tensor per property, aligned with the run's property order.
    pub tensors: Vec<SimilarityTensor>,
    pub discarded_observations: usize,
    pub filled_slots: usize,
}

/// Threshold-independent preparation of a detection run.
#[derive(Debug, Clone)]
pub struct PreparedDetection {
    pub range: TimeRange,
    pub grid_step: i64,
    pub property_order: Vec<PropertyKind>,
    pub relationship: RelationshipMatrix,
    pub versions: Vec<PreparedVersion>,
    pub warnings: Vec<String>,
}

/// Suspicion and decision tables for one topology version.
#[derive(Debug, Clone)]
pub struct VersionOutcome {
    pub range: TimeRange,
    pub suspicion: Vec<SuspicionTable>,
    pub decisions: Vec<DecisionTable>,
}

/// One anomalous (property, node, window) cell, ready for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub property: PropertyKind,
    pub node_id: String,
    pub version: usize,
    pub window: usize,
    /// Slot indices relative to the run's grid origin, inclusive bounds.
    pub slot_start: usize,
    pub slot_end: usize,
    pub start: Timestamp,
    pub end: Timestamp,
    pub verdict: Verdict,
    pub c1: u32,
    pub c2: u32,
    pub min_similarity: Option<f64>,
    pub median_similarity: Option<f64>,
}

/// Counts over every (property, node, window) cell of the run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerdictSummary {
    pub normal: usize,
    pub erroneous_outliers: usize,
    pub unusual_events: usize,
    pub unevaluated: usize,
    /// Suspicious flags before classification.
    pub suspicious: usize,
}

/// Full result of a detection run at one threshold.
#[derive(Debug, Clone)]
pub struct DetectionOutcome {
    pub beta: f64,
    pub range: TimeRange,
    pub grid_step: i64,
    pub property_order: Vec<PropertyKind>,
    pub versions: Vec<VersionOutcome>,
    /// Anomaly records only, sorted by (node, property, version, window).
    pub records: Vec<WindowRecord>,
    pub summary: VerdictSummary,
    pub warnings: Vec<String>,
}

/// Runs the threshold-independent part of the chain: topology versions,
/// grid alignment, window planning, and similarity tensors.
pub fn prepare(
    tables: &Tables,
    rules: &RuleSet,
    config: &DetectionConfig,
    range: TimeRange,
) -> Result<PreparedDetection, PipelineError> {
    config.validate()?;
    if range.is_empty() {
        return Err(PipelineError::Config(format!(
            "query range {range} is empty"
        )));
    }

    let property_order: Vec<PropertyKind> = tables
        .sensors
        .iter()
        .map(|s| s.property.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let relationship =
        build_relationship_matrix(rules, &property_order, &config.active_predicates)?;

    let versions = version_matrices(
        &tables.nodes,
        &tables.sensors,
        &property_order,
        range,
        config.delta_m,
    )?;

    // Group observations per sensor once; grid alignment then only sees its
    // own rows.
    let mut grouped: HashMap<&str, Vec<crate::ingest::Observation>> = HashMap::new();
    for obs in &tables.observations {
        grouped
            .entry(obs.sensor_id.as_str())
            .or_default()
            .push(obs.clone());
    }
    let empty: Vec<crate::ingest::Observation> = Vec::new();

    let mut warnings = Vec::new();
    let mut prepared_versions = Vec::with_capacity(versions.len());
    let mut total_filled = 0usize;

    for topology in versions {
        let slice = topology.range;
        let slot_count = ((slice.end.0 - slice.start.0) / config.grid_step) as usize;
        let plan = plan_windows(slot_count, config.eta)?;
        if plan.window_count == 0 {
            warnings.push(format!(
                "version {slice}: {slot_count} slots cannot fill a {}-slot window; cells unevaluated",
                config.eta
            ));
        }

        // Sensor lookup per (node, property) for this slice.
        let mut sensor_at: HashMap<(&str, &PropertyKind), &SensorRecord> = HashMap::new();
        for sensor in &tables.sensors {
            if sensor.active_during(&slice) {
                sensor_at.insert((sensor.node_id.as_str(), &sensor.property), sensor);
            }
        }

        let mut tensors = Vec::with_capacity(property_order.len());
        let mut discarded = 0usize;
        let mut filled = 0usize;
        for property in &property_order {
            let matrix = &topology.sensor_matrices[property];
            let mut series_by_node: Vec<Option<ObservationSeries>> =
                Vec::with_capacity(matrix.node_order.len());
            for node_id in &matrix.node_order {
                match sensor_at.get(&(node_id.as_str(), property)) {
                    Some(sensor) => {
                        let rows = grouped.get(sensor.sensor_id.as_str()).unwrap_or(&empty);
                        let out =
                            crate::ingest::to_grid(rows, sensor, config.grid_step, slice)?;
                        discarded += out.discarded;
                        filled += out.series.filled();
                        series_by_node.push(Some(out.series));
                    }
                    None => series_by_node.push(None),
                }
            }
            tensors.push(build_similarity_tensor(
                &series_by_node,
                matrix,
                &plan,
                config.scale_for(property),
            )?);
        }
        if discarded > 0 {
            warnings.push(format!(
                "version {slice}: {discarded} observations discarded (farther than half a grid step from every slot)"
            ));
        }
        total_filled += filled;
        prepared_versions.push(PreparedVersion {
            range: slice,
            topology,
            plan,
            tensors,
            discarded_observations: discarded,
            filled_slots: filled,
        });
    }

    if total_filled == 0 {
        warnings.push(format!("no observations within {range}"));
    }

    Ok(PreparedDetection {
        range,
        grid_step: config.grid_step,
        property_order,
        relationship,
        versions: prepared_versions,
        warnings,
    })
}

impl PreparedDetection {
    /// Votes and classifies every cell at similarity threshold `beta`.
    pub fn detect(&self, beta: f64) -> Result<DetectionOutcome, PipelineError> {
        let mut version_outcomes = Vec::with_capacity(self.versions.len());
        let mut records = Vec::new();
        let mut summary = VerdictSummary::default();

        for (v, prepared) in self.versions.iter().enumerate() {
            let suspicion: Vec<SuspicionTable> = prepared
                .tensors
                .iter()
                .map(|tensor| vote_suspicious(tensor, beta))
                .collect::<Result<_, _>>()?;
            let decisions = classify_all(&suspicion, &self.relationship)?;

            for table in &suspicion {
                summary.suspicious += table.count(SuspicionFlag::Suspicious);
            }

            for (i, decision) in decisions.iter().enumerate() {
                let tensor = &prepared.tensors[i];
                for (j, node_id) in decision.node_order.iter().enumerate() {
                    for l in 0..decision.window_count {
                        match decision.verdict(j, l) {
                            Verdict::Normal => summary.normal += 1,
                            Verdict::Unevaluated => summary.unevaluated += 1,
                            verdict => {
                                match verdict {
                                    Verdict::ErroneousOutlier => summary.erroneous_outliers += 1,
                                    Verdict::UnusualEvent => summary.unusual_events += 1,
                                    _ => unreachable!(),
                                }
                                let (c1, c2) = decision.corroboration(j, l).unwrap_or((0, 0));
                                records.push(self.record(
                                    prepared, v, i, j, l, node_id, verdict, c1, c2, tensor,
                                ));
                            }
                        }
                    }
                }
            }
            version_outcomes.push(VersionOutcome {
                range: prepared.range,
                suspicion,
                decisions,
            });
        }

        records.sort_by(|a, b| {
            (&a.node_id, &a.property, a.version, a.window).cmp(&(
                &b.node_id,
                &b.property,
                b.version,
                b.window,
            ))
        });

        Ok(DetectionOutcome {
            beta,
            range: self.range,
            grid_step: self.grid_step,
            property_order: self.property_order.clone(),
            versions: version_outcomes,
            records,
            summary,
            warnings: self.warnings.clone(),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        prepared: &PreparedVersion,
        version: usize,
        property_index: usize,
        j: usize,
        l: usize,
        node_id: &str,
        verdict: Verdict,
        c1: u32,
        c2: u32,
        tensor: &SimilarityTensor,
    ) -> WindowRecord {
        let window_slots = prepared.plan.window_range(l);
        let start = Timestamp(prepared.range.start.0 + window_slots.start as i64 * self.grid_step);
        let end = Timestamp(prepared.range.start.0 + window_slots.end as i64 * self.grid_step);
        let slot_start = ((start.0 - self.range.start.0) / self.grid_step) as usize;
        let slot_end = slot_start + prepared.plan.eta - 1;

        let mut sims = tensor.neighbor_similarities(j, l);
        sims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let min_similarity = sims.first().copied();
        let median_similarity = if sims.is_empty() {
            None
        } else {
            let mid = sims.len() / 2;
            Some(if sims.len() % 2 == 1 {
                sims[mid]
            } else {
                (sims[mid - 1] + sims[mid]) / 2.0
            })
        };

        WindowRecord {
            property: self.property_order[property_index].clone(),
            node_id: node_id.to_string(),
            version,
            window: l,
            slot_start,
            slot_end,
            start,
            end,
            verdict,
            c1,
            c2,
            min_similarity,
            median_similarity,
        }
    }
}

/// Prepares and runs the full chain at the configured threshold.
pub fn run_detection(
    tables: &Tables,
    rules: &RuleSet,
    config: &DetectionConfig,
    range: TimeRange,
) -> Result<DetectionOutcome, PipelineError> {
    prepare(tables, rules, config, range)?.detect(config.beta)
}
