//! Canonical data model and CSV ingestion.
//!
//! Three tables describe a deployment: sensor nodes (with coordinates and
//! install/remove times), sensors (one per observed property per node), and
//! raw observations. Observations are aligned onto a regular sampling grid
//! before any similarity computation; missing slots stay explicit so that
//! downstream windows can refuse to compare incomplete data instead of
//! manufacturing trends.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use thiserror::Error;

/// Errors raised while loading or grid-aligning observation data.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    MalformedRow {
        path: String,
        line: u64,
        message: String,
    },
    #[error("observation references unknown sensor_id `{sensor_id}`")]
    DanglingSensor { sensor_id: String },
    #[error("sensor `{sensor_id}` references unknown node_id `{node_id}`")]
    DanglingNode { sensor_id: String, node_id: String },
    #[error("node `{node_id}` has overlapping configuration records")]
    OverlappingNode { node_id: String },
    #[error("node `{node_id}` hosts overlapping `{property}` sensors (`{first}`, `{second}`)")]
    DuplicateSensor {
        node_id: String,
        property: PropertyKind,
        first: String,
        second: String,
    },
    #[error(
        "observation for `{sensor_id}` at {timestamp} lies outside the sensor's active interval"
    )]
    ObservationOutsideSensorLife {
        sensor_id: String,
        timestamp: Timestamp,
    },
    #[error("observation for `{sensor_id}` at {timestamp} carries property `{got}`, sensor observes `{expected}`")]
    PropertyMismatch {
        sensor_id: String,
        timestamp: Timestamp,
        got: String,
        expected: PropertyKind,
    },
    #[error("invalid property name `{0}`: must match [a-z][a-z0-9_]*")]
    InvalidProperty(String),
    #[error("invalid timestamp `{0}`: expected ISO-8601 with timezone")]
    InvalidTimestamp(String),
    #[error("latitude {0} out of range [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} out of range [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("removal time {removed} not after installation time {installed}")]
    RemovalBeforeInstall {
        installed: Timestamp,
        removed: Timestamp,
    },
    #[error("grid step must be positive, got {0} s")]
    InvalidGridStep(i64),
    #[error("window of interest is empty ({start} .. {end})")]
    EmptyWindow { start: Timestamp, end: Timestamp },
    #[error(
        "observations at {first} and {second} for `{sensor_id}` both snap to grid slot {slot}"
    )]
    AmbiguousSlot {
        sensor_id: String,
        slot: usize,
        first: Timestamp,
        second: Timestamp,
    },
    #[error("value {value} for `{sensor_id}` at {timestamp} is not finite")]
    NonFiniteValue {
        sensor_id: String,
        timestamp: Timestamp,
        value: f64,
    },
}

/// Seconds since the Unix epoch, UTC. CSV input and output use ISO-8601.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        DateTime::parse_from_rfc3339(text.trim())
            .map(|dt| Timestamp(dt.timestamp()))
            .map_err(|_| IngestError::InvalidTimestamp(text.to_string()))
    }

    pub fn to_iso(self) -> String {
        Utc.timestamp_opt(self.0, 0)
            .single()
            .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Secs, true))
            .unwrap_or_else(|| format!("@{}", self.0))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

/// Half-open interval `[start, end)` on the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeRange {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeRange {
    pub fn new(start: Timestamp, end: Timestamp) -> Self {
        TimeRange { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.end.0 <= self.start.0
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start.0 <= t.0 && t.0 < self.end.0
    }

    pub fn intersect(&self, other: &TimeRange) -> Option<TimeRange> {
        let start = self.start.0.max(other.start.0);
        let end = self.end.0.min(other.end.0);
        (start < end).then(|| TimeRange::new(Timestamp(start), Timestamp(end)))
    }
}

impl fmt::Display for TimeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} .. {})", self.start, self.end)
    }
}

/// Controlled token naming an observed property (`air_temperature`, ...).
///
/// The set of distinct property kinds in one run is the property index set of
/// the detection pipeline.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PropertyKind(String);

impl PropertyKind {
    pub fn new(name: &str) -> Result<Self, IngestError> {
        let mut chars = name.chars();
        let valid = matches!(chars.next(), Some('a'..='z'))
            && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'));
        if valid {
            Ok(PropertyKind(name.to_string()))
        } else {
            Err(IngestError::InvalidProperty(name.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One sensor node: a platform at a fixed location hosting sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub node_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub installed_at: Timestamp,
    pub removed_at: Option<Timestamp>,
}

impl NodeRecord {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(IngestError::LatitudeOutOfRange(self.latitude));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(IngestError::LongitudeOutOfRange(self.longitude));
        }
        if let Some(removed) = self.removed_at {
            if removed.0 <= self.installed_at.0 {
                return Err(IngestError::RemovalBeforeInstall {
                    installed: self.installed_at,
                    removed,
                });
            }
        }
        Ok(())
    }

    /// True when the node is deployed for the whole of `range`.
    pub fn active_during(&self, range: &TimeRange) -> bool {
        self.installed_at.0 <= range.start.0
            && self.removed_at.is_none_or(|r| r.0 >= range.end.0)
    }
}

/// One sensor device: observes a single property on a single node.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecord {
    pub sensor_id: String,
    pub node_id: String,
    pub property: PropertyKind,
    pub installed_at: Timestamp,
    pub removed_at: Option<Timestamp>,
}

impl SensorRecord {
    pub fn active_during(&self, range: &TimeRange) -> bool {
        self.installed_at.0 <= range.start.0
            && self.removed_at.is_none_or(|r| r.0 >= range.end.0)
    }

    pub fn active_at(&self, t: Timestamp) -> bool {
        self.installed_at.0 <= t.0 && self.removed_at.is_none_or(|r| t.0 < r.0)
    }
}

/// A single raw measurement as it appears in the observations table.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub sensor_id: String,
    pub timestamp: Timestamp,
    pub property: PropertyKind,
    pub value: f64,
    pub unit: String,
}

/// The three loaded tables, rows in file order.
#[derive(Debug, Clone, Default)]
pub struct Tables {
    pub nodes: Vec<NodeRecord>,
    pub sensors: Vec<SensorRecord>,
    pub observations: Vec<Observation>,
}

/// A value stream aligned to a regular grid. `slots[k]` holds the value at
/// `grid_start + k * grid_step`; a `None` slot is missing data.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    pub sensor_id: String,
    pub property: PropertyKind,
    pub grid_start: Timestamp,
    pub grid_step: i64,
    pub slots: Vec<Option<f64>>,
}

impl ObservationSeries {
    pub fn slot_time(&self, slot: usize) -> Timestamp {
        Timestamp(self.grid_start.0 + slot as i64 * self.grid_step)
    }

    pub fn filled(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// Materializes the filled slots back into observation rows.
    pub fn to_observations(&self, unit: &str) -> Vec<Observation> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(k, v)| {
                v.map(|value| Observation {
                    sensor_id: self.sensor_id.clone(),
                    timestamp: self.slot_time(k),
                    property: self.property.clone(),
                    value,
                    unit: unit.to_string(),
                })
            })
            .collect()
    }
}

/// Result of grid alignment: the series plus bookkeeping on dropped rows.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub series: ObservationSeries,
    /// Observations farther than half a grid step from every slot.
    pub discarded: usize,
}

fn read_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => IngestError::Io {
                path: path.display().to_string(),
                source,
            },
            other => IngestError::MalformedRow {
                path: path.display().to_string(),
                line: 0,
                message: format!("{other:?}"),
            },
        })
}

fn malformed(path: &Path, line: u64, message: impl Into<String>) -> IngestError {
    IngestError::MalformedRow {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn parse_optional_timestamp(
    field: &str,
    path: &Path,
    line: u64,
) -> Result<Option<Timestamp>, IngestError> {
    if field.is_empty() {
        Ok(None)
    } else {
        Timestamp::parse(field)
            .map(Some)
            .map_err(|e| malformed(path, line, e.to_string()))
    }
}

/// Loads and cross-validates the three deployment tables.
///
/// Referential integrity is enforced: every sensor must name a known node,
/// every observation a known sensor, and a node may not host two sensors of
/// the same property over overlapping intervals. Rows come back in file
/// order.
pub fn load_tables(
    nodes_path: &Path,
    sensors_path: &Path,
    observations_path: &Path,
) -> Result<Tables, IngestError> {
    let nodes = load_nodes(nodes_path)?;
    let sensors = load_sensors(sensors_path, &nodes)?;
    let observations = load_observations(observations_path, &sensors)?;
    Ok(Tables {
        nodes,
        sensors,
        observations,
    })
}

fn load_nodes(path: &Path) -> Result<Vec<NodeRecord>, IngestError> {
    let mut reader = read_csv(path)?;
    let mut nodes = Vec::new();
    for record in reader.records() {
        let record = record
            .map_err(|e| malformed(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<&str, IngestError> {
            record
                .get(i)
                .ok_or_else(|| malformed(path, line, format!("missing column `{name}`")))
        };
        let node = NodeRecord {
            node_id: field(0, "node_id")?.to_string(),
            latitude: field(1, "latitude")?
                .parse()
                .map_err(|e| malformed(path, line, format!("latitude: {e}")))?,
            longitude: field(2, "longitude")?
                .parse()
                .map_err(|e| malformed(path, line, format!("longitude: {e}")))?,
            installed_at: Timestamp::parse(field(3, "installed_at")?)
                .map_err(|e| malformed(path, line, e.to_string()))?,
            removed_at: parse_optional_timestamp(field(4, "removed_at")?, path, line)?,
        };
        if node.node_id.is_empty() {
            return Err(malformed(path, line, "empty node_id"));
        }
        node.validate()?;
        nodes.push(node);
    }
    // Re-installations of the same node id are allowed, but their active
    // intervals must not overlap.
    let mut by_id: HashMap<&str, Vec<&NodeRecord>> = HashMap::new();
    for node in &nodes {
        by_id.entry(&node.node_id).or_default().push(node);
    }
    for (node_id, records) in by_id {
        if intervals_overlap(records.iter().map(|n| (n.installed_at, n.removed_at))) {
            return Err(IngestError::OverlappingNode {
                node_id: node_id.to_string(),
            });
        }
    }
    Ok(nodes)
}

fn load_sensors(path: &Path, nodes: &[NodeRecord]) -> Result<Vec<SensorRecord>, IngestError> {
    let node_ids: std::collections::HashSet<&str> =
        nodes.iter().map(|n| n.node_id.as_str()).collect();
    let mut reader = read_csv(path)?;
    let mut sensors = Vec::new();
    for record in reader.records() {
        let record = record
            .map_err(|e| malformed(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<&str, IngestError> {
            record
                .get(i)
                .ok_or_else(|| malformed(path, line, format!("missing column `{name}`")))
        };
        let sensor = SensorRecord {
            sensor_id: field(0, "sensor_id")?.to_string(),
            node_id: field(1, "node_id")?.to_string(),
            property: PropertyKind::new(field(2, "property")?)
                .map_err(|e| malformed(path, line, e.to_string()))?,
            installed_at: Timestamp::parse(field(3, "installed_at")?)
                .map_err(|e| malformed(path, line, e.to_string()))?,
            removed_at: parse_optional_timestamp(field(4, "removed_at")?, path, line)?,
        };
        if sensor.sensor_id.is_empty() {
            return Err(malformed(path, line, "empty sensor_id"));
        }
        if let Some(removed) = sensor.removed_at {
            if removed.0 <= sensor.installed_at.0 {
                return Err(IngestError::RemovalBeforeInstall {
                    installed: sensor.installed_at,
                    removed,
                });
            }
        }
        if !node_ids.contains(sensor.node_id.as_str()) {
            return Err(IngestError::DanglingNode {
                sensor_id: sensor.sensor_id,
                node_id: sensor.node_id,
            });
        }
        sensors.push(sensor);
    }
    // At any instant a node hosts at most one sensor per property.
    let mut by_slot: HashMap<(&str, &PropertyKind), Vec<&SensorRecord>> = HashMap::new();
    for sensor in &sensors {
        by_slot
            .entry((sensor.node_id.as_str(), &sensor.property))
            .or_default()
            .push(sensor);
    }
    for ((node_id, property), group) in by_slot {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                if pair_overlaps(
                    (a.installed_at, a.removed_at),
                    (b.installed_at, b.removed_at),
                ) {
                    return Err(IngestError::DuplicateSensor {
                        node_id: node_id.to_string(),
                        property: property.clone(),
                        first: a.sensor_id.clone(),
                        second: b.sensor_id.clone(),
                    });
                }
            }
        }
    }
    Ok(sensors)
}

fn load_observations(
    path: &Path,
    sensors: &[SensorRecord],
) -> Result<Vec<Observation>, IngestError> {
    let by_id: HashMap<&str, &SensorRecord> =
        sensors.iter().map(|s| (s.sensor_id.as_str(), s)).collect();
    let mut reader = read_csv(path)?;
    let mut observations = Vec::new();
    for record in reader.records() {
        let record = record
            .map_err(|e| malformed(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<&str, IngestError> {
            record
                .get(i)
                .ok_or_else(|| malformed(path, line, format!("missing column `{name}`")))
        };
        let obs = Observation {
            sensor_id: field(0, "sensor_id")?.to_string(),
            timestamp: Timestamp::parse(field(1, "timestamp")?)
                .map_err(|e| malformed(path, line, e.to_string()))?,
            property: PropertyKind::new(field(2, "property")?)
                .map_err(|e| malformed(path, line, e.to_string()))?,
            value: field(3, "value")?
                .parse()
                .map_err(|e| malformed(path, line, format!("value: {e}")))?,
            unit: field(4, "unit")?.to_string(),
        };
        let sensor =
            by_id
                .get(obs.sensor_id.as_str())
                .ok_or_else(|| IngestError::DanglingSensor {
                    sensor_id: obs.sensor_id.clone(),
                })?;
        if obs.property != sensor.property {
            return Err(IngestError::PropertyMismatch {
                sensor_id: obs.sensor_id.clone(),
                timestamp: obs.timestamp,
                got: obs.property.as_str().to_string(),
                expected: sensor.property.clone(),
            });
        }
        if !sensor.active_at(obs.timestamp) {
            return Err(IngestError::ObservationOutsideSensorLife {
                sensor_id: obs.sensor_id.clone(),
                timestamp: obs.timestamp,
            });
        }
        if !obs.value.is_finite() {
            return Err(IngestError::NonFiniteValue {
                sensor_id: obs.sensor_id.clone(),
                timestamp: obs.timestamp,
                value: obs.value,
            });
        }
        observations.push(obs);
    }
    Ok(observations)
}

fn pair_overlaps(a: (Timestamp, Option<Timestamp>), b: (Timestamp, Option<Timestamp>)) -> bool {
    let a_end = a.1.map_or(i64::MAX, |t| t.0);
    let b_end = b.1.map_or(i64::MAX, |t| t.0);
    a.0 .0 < b_end && b.0 .0 < a_end
}

fn intervals_overlap(intervals: impl Iterator<Item = (Timestamp, Option<Timestamp>)>) -> bool {
    let list: Vec<_> = intervals.collect();
    for (i, a) in list.iter().enumerate() {
        for b in &list[i + 1..] {
            if pair_overlaps(*a, *b) {
                return true;
            }
        }
    }
    false
}

/// Snaps one sensor's observations onto the regular grid spanning
/// `window_of_interest` with spacing `grid_step` seconds.
///
/// Each observation goes to its nearest slot when within half a grid step
/// (ties resolve to the later slot); anything farther from every slot is
/// discarded and counted. Two observations claiming the same slot is an
/// error. Slots nothing snapped to stay missing.
pub fn to_grid(
    observations: &[Observation],
    sensor: &SensorRecord,
    grid_step: i64,
    window_of_interest: TimeRange,
) -> Result<GridOutcome, IngestError> {
    if grid_step <= 0 {
        return Err(IngestError::InvalidGridStep(grid_step));
    }
    if window_of_interest.is_empty() {
        return Err(IngestError::EmptyWindow {
            start: window_of_interest.start,
            end: window_of_interest.end,
        });
    }
    let span = window_of_interest.end.0 - window_of_interest.start.0;
    let slot_count = (span / grid_step) as usize;
    if slot_count == 0 {
        return Err(IngestError::EmptyWindow {
            start: window_of_interest.start,
            end: window_of_interest.end,
        });
    }

    let mut slots: Vec<Option<f64>> = vec![None; slot_count];
    let mut claimed: Vec<Option<Timestamp>> = vec![None; slot_count];
    let mut discarded = 0usize;
    let half = grid_step / 2;

    for obs in observations
        .iter()
        .filter(|o| o.sensor_id == sensor.sensor_id)
    {
        let offset = obs.timestamp.0 - window_of_interest.start.0;
        // Nearest slot, an exact half step rounding toward the later slot.
        let idx = (offset + half).div_euclid(grid_step);
        if idx < 0 || idx as usize >= slot_count {
            discarded += 1;
            continue;
        }
        let idx = idx as usize;
        let distance = (offset - idx as i64 * grid_step).abs();
        if 2 * distance > grid_step {
            discarded += 1;
            continue;
        }
        if let Some(first) = claimed[idx] {
            return Err(IngestError::AmbiguousSlot {
                sensor_id: sensor.sensor_id.clone(),
                slot: idx,
                first,
                second: obs.timestamp,
            });
        }
        claimed[idx] = Some(obs.timestamp);
        slots[idx] = Some(obs.value);
    }

    Ok(GridOutcome {
        series: ObservationSeries {
            sensor_id: sensor.sensor_id.clone(),
            property: sensor.property.clone(),
            grid_start: window_of_interest.start,
            grid_step,
            slots,
        },
        discarded,
    })
}
