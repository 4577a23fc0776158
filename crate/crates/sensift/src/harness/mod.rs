//! Synthetic evaluation harness: clean dataset generation, fault injection
//! with ground truth, precision/recall scoring, and threshold sweeps.
//!
//! Real deployments rarely come with labeled anomalies, so the harness
//! builds a calibrated clean dataset, then plants segment outliers (per
//! property) or coherent two-property events (per node) at known positions.
//! Detection output is scored against that ground truth, and a sweep re-runs
//! the vote/classify stages across a threshold range while reusing the
//! similarity tensors, which do not depend on the threshold.

mod fixtures;
mod generate;
mod inject;
mod metrics;

pub use fixtures::{demo_error_scenario, demo_event_scenario, ScenarioFixture};
pub use generate::{generate_clean, grid_layout, GenerateSpec};
pub use inject::{inject_events, inject_outliers, InjectionMode, InjectionSpec};
pub use metrics::{
    flag_metrics, score, score_windows, sweep, MetricsRow, PredictionWindow, SweepPoint,
};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::ingest::{
    NodeRecord, Observation, PropertyKind, SensorRecord, Tables, TimeRange, Timestamp,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(
        "cannot place {wanted} non-overlapping segments of {segment_len} slots for `{property}` (round {round})"
    )]
    CannotPlaceSegments {
        property: String,
        round: usize,
        wanted: usize,
        segment_len: usize,
    },
    #[error("dataset has no stream for node `{node_id}` property `{property}`")]
    MissingStream { node_id: String, property: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    MalformedTruth {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Pipeline(#[from] crate::pipeline::PipelineError),
}

/// Ground-truth label for an injected segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthLabel {
    ErroneousOutlier,
    UnusualEvent,
}

impl TruthLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TruthLabel::ErroneousOutlier => "erroneous_outlier",
            TruthLabel::UnusualEvent => "unusual_event",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "erroneous_outlier" => Some(TruthLabel::ErroneousOutlier),
            "unusual_event" => Some(TruthLabel::UnusualEvent),
            _ => None,
        }
    }

    pub fn matches(self, verdict: crate::classify::Verdict) -> bool {
        matches!(
            (self, verdict),
            (
                TruthLabel::ErroneousOutlier,
                crate::classify::Verdict::ErroneousOutlier
            ) | (TruthLabel::UnusualEvent, crate::classify::Verdict::UnusualEvent)
        )
    }
}

/// One injected segment: inclusive slot bounds on the dataset grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthEntry {
    pub property: PropertyKind,
    pub node_id: String,
    pub slot_start: usize,
    pub slot_end: usize,
    pub label: TruthLabel,
}

impl TruthEntry {
    pub fn overlaps_slots(&self, start: usize, end: usize) -> bool {
        self.slot_start <= end && start <= self.slot_end
    }
}

/// Every injected segment of one test dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub entries: Vec<TruthEntry>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Injected observation count across all segments.
    pub fn replaced_observations(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.slot_end - e.slot_start + 1)
            .sum()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let io_err = |source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        (|| {
            writeln!(out, "property,node_id,slot_start,slot_end,label")?;
            for e in &self.entries {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    e.property,
                    e.node_id,
                    e.slot_start,
                    e.slot_end,
                    e.label.as_str()
                )?;
            }
            out.flush()
        })()
        .map_err(io_err)
    }

    pub fn read_csv(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: &str| HarnessError::MalformedTruth {
                path: path.display().to_string(),
                line: idx + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            entries.push(TruthEntry {
                property: PropertyKind::new(fields[0]).map_err(|e| bad(&e.to_string()))?,
                node_id: fields[1].to_string(),
                slot_start: fields[2].parse().map_err(|_| bad("bad slot_start"))?,
                slot_end: fields[3].parse().map_err(|_| bad("bad slot_end"))?,
                label: TruthLabel::parse(fields[4]).ok_or_else(|| bad("unknown label"))?,
            });
        }
        Ok(GroundTruth { entries })
    }
}

/// A fully in-memory dataset on a regular grid, mutable for injection,
/// convertible to the three CSV tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub nodes: Vec<NodeRecord>,
    pub sensors: Vec<SensorRecord>,
    pub grid_start: Timestamp,
    pub grid_step: i64,
    pub slot_count: usize,
    /// Values per (node_id, property), one per slot.
    values: BTreeMap<(String, PropertyKind), Vec<f64>>,
}

impl SyntheticDataset {
    pub(crate) fn new(
        nodes: Vec<NodeRecord>,
        sensors: Vec<SensorRecord>,
        grid_start: Timestamp,
        grid_step: i64,
        slot_count: usize,
        values: BTreeMap<(String, PropertyKind), Vec<f64>>,
    ) -> Self {
        SyntheticDataset {
            nodes,
            sensors,
            grid_start,
            grid_step,
            slot_count,
            values,
        }
    }

    pub fn range(&self) -> TimeRange {
        TimeRange::new(
            self.grid_start,
            Timestamp(self.grid_start.0 + self.slot_count as i64 * self.grid_step),
        )
    }

    pub fn properties(&self) -> Vec<PropertyKind> {
        let set: std::collections::BTreeSet<PropertyKind> =
            self.sensors.iter().map(|s| s.property.clone()).collect();
        set.into_iter().collect()
    }

    pub fn values(&self, node_id: &str, property: &PropertyKind) -> Option<&[f64]> {
        self.values
            .get(&(node_id.to_string(), property.clone()))
            .map(|v| v.as_slice())
    }

    pub(crate) fn values_mut(
        &mut self,
        node_id: &str,
        property: &PropertyKind,
    ) -> Result<&mut Vec<f64>, HarnessError> {
        self.values
            .get_mut(&(node_id.to_string(), property.clone()))
            .ok_or_else(|| HarnessError::MissingStream {
                node_id: node_id.to_string(),
                property: property.as_str().to_string(),
            })
    }

    pub fn observation_count(&self) -> usize {
        self.values.values().map(Vec::len).sum()
    }

    pub fn observation_count_for(&self, property: &PropertyKind) -> usize {
        self.values
            .iter()
            .filter(|((_, p), _)| p == property)
            .map(|(_, v)| v.len())
            .sum()
    }

    /// Conventional unit token per property; informational only.
    pub fn unit_for(property: &PropertyKind) -> &'static str {
        match property.as_str() {
            "air_temperature" => "C",
            "relative_humidity" => "%",
            "air_pressure" => "hPa",
            _ => "unit",
        }
    }

    /// Materializes the dataset as the three in-memory tables, observations
    /// ordered by (sensor, slot).
    pub fn to_tables(&self) -> Tables {
        let mut observations = Vec::with_capacity(self.observation_count());
        for ((node_id, property), values) in &self.values {
            let sensor_id = self
                .sensors
                .iter()
                .find(|s| s.node_id == *node_id && s.property == *property)
                .map(|s| s.sensor_id.clone())
                .unwrap_or_else(|| format!("{node_id}_{property}"));
            let unit = Self::unit_for(property);
            for (k, &value) in values.iter().enumerate() {
                observations.push(Observation {
                    sensor_id: sensor_id.clone(),
                    timestamp: Timestamp(self.grid_start.0 + k as i64 * self.grid_step),
                    property: property.clone(),
                    value,
                    unit: unit.to_string(),
                });
            }
        }
        Tables {
            nodes: self.nodes.clone(),
            sensors: self.sensors.clone(),
            observations,
        }
    }

    /// Writes `nodes.csv`, `sensors.csv`, and `observations.csv` into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<(), HarnessError> {
        let write = |name: &str, body: String| -> Result<(), HarnessError> {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| HarnessError::Io {
                path: path.display().to_string(),
                source,
            })
        };

        let mut nodes = String::from("node_id,latitude,longitude,installed_at,removed_at\n");
        for n in &self.nodes {
            let removed = n.removed_at.map(|t| t.to_iso()).unwrap_or_default();
            nodes.push_str(&format!(
                "{},{},{},{},{}\n",
                n.node_id,
                n.latitude,
                n.longitude,
                n.installed_at.to_iso(),
                removed
            ));
        }
        write("nodes.csv", nodes)?;

        let mut sensors = String::from("sensor_id,node_id,property,installed_at,removed_at\n");
        for s in &self.sensors {
            let removed = s.removed_at.map(|t| t.to_iso()).unwrap_or_default();
            sensors.push_str(&format!(
                "{},{},{},{},{}\n",
                s.sensor_id,
                s.node_id,
                s.property,
                s.installed_at.to_iso(),
                removed
            ));
        }
        write("sensors.csv", sensors)?;

        let tables = self.to_tables();
        let mut obs = String::with_capacity(tables.observations.len() * 64);
        obs.push_str("sensor_id,timestamp,property,value,unit\n");
        for o in &tables.observations {
            obs.push_str(&format!(
                "{},{},{},{},{}\n",
                o.sensor_id,
                o.timestamp.to_iso(),
                o.property,
                o.value,
                o.unit
            ));
        }
        write("observations.csv", obs)
    }
}
