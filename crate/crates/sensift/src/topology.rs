//! Spatial neighborhood matrices over sensor nodes, versioned in time.
//!
//! Two nodes are neighbors when their great-circle distance is at most a
//! configured threshold. The node-level matrix is combined with per-property
//! deployment vectors to get one sensor-level neighborhood matrix per
//! property. Whenever the network configuration changes (a node or sensor
//! installed or removed), the previous matrices are closed off and fresh
//! ones computed, so historical data can always be screened against the
//! topology that was live at the time.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ingest::{NodeRecord, PropertyKind, SensorRecord, TimeRange, Timestamp};

/// Equatorial radius used by the great-circle distance, in meters.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("duplicate node `{0}` in matrix input")]
    DuplicateNode(String),
    #[error("node order mismatch between deployment vector and node matrix")]
    NodeOrderMismatch,
    #[error("deployment property `{deployment}` does not belong to node order of `{other}`")]
    PropertyMismatch { deployment: String, other: String },
    #[error("neighborhood threshold must be a finite non-negative number, got {0}")]
    InvalidThreshold(f64),
    #[error("empty node list")]
    NoNodes,
    #[error("configured range {0} is empty")]
    EmptyRange(TimeRange),
    #[error("node `{0}` has overlapping configuration records")]
    ContradictoryNode(String),
    #[error("node `{node_id}` hosts overlapping `{property}` sensors")]
    ContradictorySensor { node_id: String, property: String },
}

/// Great-circle distance between two coordinates, in meters.
///
/// Haversine on a sphere of radius [`EARTH_RADIUS_M`], evaluated through
/// `atan2`. Total on valid coordinate ranges, symmetric, zero for identical
/// points.
pub fn geo_distance(lat_a: f64, lon_a: f64, lat_b: f64, lon_b: f64) -> f64 {
    let deg = std::f64::consts::PI / 180.0;
    let sin_half_dlat = ((lat_a - lat_b) * deg / 2.0).sin();
    let sin_half_dlon = ((lon_a - lon_b) * deg / 2.0).sin();
    let d = sin_half_dlat * sin_half_dlat
        + (lat_a * deg).cos() * (lat_b * deg).cos() * sin_half_dlon * sin_half_dlon;
    let d = d.clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_M * d.sqrt().atan2((1.0 - d).sqrt())
}

/// Symmetric binary neighbor matrix over nodes, zero diagonal.
///
/// A node is never its own neighbor: counting it would let a sensor vote for
/// its own normality downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodMatrix {
    pub valid_from: Timestamp,
    pub valid_to: Option<Timestamp>,
    pub node_order: Vec<String>,
    cells: Vec<u8>,
}

impl NeighborhoodMatrix {
    pub fn n(&self) -> usize {
        self.node_order.len()
    }

    pub fn is_neighbor(&self, j: usize, k: usize) -> bool {
        self.cells[j * self.n() + k] == 1
    }

    pub fn cell(&self, j: usize, k: usize) -> u8 {
        self.cells[j * self.n() + k]
    }

    pub fn neighbor_count(&self, j: usize) -> usize {
        let n = self.n();
        self.cells[j * n..(j + 1) * n]
            .iter()
            .filter(|&&c| c == 1)
            .count()
    }

    pub fn node_index(&self, node_id: &str) -> Option<usize> {
        self.node_order.iter().position(|id| id == node_id)
    }
}

/// Which nodes host a sensor of one property throughout an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentVector {
    pub property: PropertyKind,
    pub node_order: Vec<String>,
    pub entries: Vec<bool>,
}

/// Sensor-level neighborhood matrix for one property: the node matrix masked
/// by the property's deployment on both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorNeighborhoodMatrix {
    pub property: PropertyKind,
    pub valid_from: Timestamp,
    pub valid_to: Option<Timestamp>,
    pub node_order: Vec<String>,
    cells: Vec<u8>,
}

impl SensorNeighborhoodMatrix {
    pub fn n(&self) -> usize {
        self.node_order.len()
    }

    pub fn is_neighbor(&self, j: usize, k: usize) -> bool {
        self.cells[j * self.n() + k] == 1
    }

    pub fn cell(&self, j: usize, k: usize) -> u8 {
        self.cells[j * self.n() + k]
    }
}

/// Builds the node neighborhood matrix for nodes active over a common
/// interval, with neighbor threshold `delta_m` in meters.
///
/// Node order is canonicalized by sorting on node id, so the result does not
/// depend on input order. The validity interval is the intersection of the
/// nodes' own active intervals.
pub fn build_node_matrix(
    nodes: &[NodeRecord],
    delta_m: f64,
) -> Result<NeighborhoodMatrix, TopologyError> {
    if !(delta_m >= 0.0 && delta_m.is_finite()) {
        return Err(TopologyError::InvalidThreshold(delta_m));
    }
    if nodes.is_empty() {
        return Err(TopologyError::NoNodes);
    }
    let mut sorted: Vec<&NodeRecord> = nodes.iter().collect();
    sorted.sort_by(|a, b| a.node_id.cmp(&b.node_id));
    for pair in sorted.windows(2) {
        if pair[0].node_id == pair[1].node_id {
            return Err(TopologyError::DuplicateNode(pair[0].node_id.clone()));
        }
    }

    let n = sorted.len();
    let mut cells = vec![0u8; n * n];
    for j in 0..n {
        for k in (j + 1)..n {
            let d = geo_distance(
                sorted[j].latitude,
                sorted[j].longitude,
                sorted[k].latitude,
                sorted[k].longitude,
            );
            if d <= delta_m {
                cells[j * n + k] = 1;
                cells[k * n + j] = 1;
            }
        }
    }

    let valid_from = Timestamp(sorted.iter().map(|r| r.installed_at.0).max().unwrap());
    let valid_to = sorted
        .iter()
        .filter_map(|r| r.removed_at)
        .min_by_key(|t| t.0);

    Ok(NeighborhoodMatrix {
        valid_from,
        valid_to,
        node_order: sorted.iter().map(|r| r.node_id.clone()).collect(),
        cells,
    })
}

/// Marks which of `node_order`'s nodes host a sensor of `property` for the
/// whole of `interval`. Partial presence counts as absent; configuration
/// versioning splits intervals instead.
pub fn build_deployment_vector(
    sensors: &[SensorRecord],
    node_order: &[String],
    property: &PropertyKind,
    interval: TimeRange,
) -> Result<DeploymentVector, TopologyError> {
    if interval.is_empty() {
        return Err(TopologyError::EmptyRange(interval));
    }
    let entries = node_order
        .iter()
        .map(|node_id| {
            sensors.iter().any(|s| {
                s.node_id == *node_id && s.property == *property && s.active_during(&interval)
            })
        })
        .collect();
    Ok(DeploymentVector {
        property: property.clone(),
        node_order: node_order.to_vec(),
        entries,
    })
}

/// Masks the node matrix with a deployment vector: two sensors are neighbors
/// exactly when both exist and their nodes are neighbors.
pub fn build_sensor_matrix(
    deployment: &DeploymentVector,
    node_matrix: &NeighborhoodMatrix,
) -> Result<SensorNeighborhoodMatrix, TopologyError> {
    if deployment.node_order != node_matrix.node_order {
        return Err(TopologyError::NodeOrderMismatch);
    }
    let n = node_matrix.n();
    let mut cells = vec![0u8; n * n];
    for j in 0..n {
        for k in 0..n {
            let exists = deployment.entries[j] && deployment.entries[k];
            cells[j * n + k] = if exists { node_matrix.cell(j, k) } else { 0 };
        }
    }
    Ok(SensorNeighborhoodMatrix {
        property: deployment.property.clone(),
        valid_from: node_matrix.valid_from,
        valid_to: node_matrix.valid_to,
        node_order: node_matrix.node_order.clone(),
        cells,
    })
}

/// One constant-configuration slice of the network's history.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyVersion {
    pub range: TimeRange,
    pub node_matrix: NeighborhoodMatrix,
    pub sensor_matrices: BTreeMap<PropertyKind, SensorNeighborhoodMatrix>,
}

/// Splits `range` at every node or sensor install/removal and builds the
/// matrices valid on each slice. Consecutive slices partition `range`; past
/// versions are retained in order.
///
/// Slices where no node is active yield a version with an empty node order.
pub fn version_matrices(
    nodes: &[NodeRecord],
    sensors: &[SensorRecord],
    properties: &[PropertyKind],
    range: TimeRange,
    delta_m: f64,
) -> Result<Vec<TopologyVersion>, TopologyError> {
    if range.is_empty() {
        return Err(TopologyError::EmptyRange(range));
    }
    check_contradictions(nodes, sensors)?;

    let mut boundaries: BTreeSet<i64> = BTreeSet::new();
    boundaries.insert(range.start.0);
    boundaries.insert(range.end.0);
    let mut note = |t: Timestamp| {
        if range.start.0 < t.0 && t.0 < range.end.0 {
            boundaries.insert(t.0);
        }
    };
    for node in nodes {
        note(node.installed_at);
        if let Some(r) = node.removed_at {
            note(r);
        }
    }
    for sensor in sensors {
        note(sensor.installed_at);
        if let Some(r) = sensor.removed_at {
            note(r);
        }
    }

    let cuts: Vec<i64> = boundaries.into_iter().collect();
    let mut versions = Vec::with_capacity(cuts.len() - 1);
    for pair in cuts.windows(2) {
        let slice = TimeRange::new(Timestamp(pair[0]), Timestamp(pair[1]));
        let active: Vec<NodeRecord> = nodes
            .iter()
            .filter(|n| n.active_during(&slice))
            .cloned()
            .collect();
        let node_matrix = if active.is_empty() {
            NeighborhoodMatrix {
                valid_from: slice.start,
                valid_to: Some(slice.end),
                node_order: Vec::new(),
                cells: Vec::new(),
            }
        } else {
            let mut m = build_node_matrix(&active, delta_m)?;
            m.valid_from = slice.start;
            m.valid_to = Some(slice.end);
            m
        };
        let mut sensor_matrices = BTreeMap::new();
        for property in properties {
            let deployment =
                build_deployment_vector(sensors, &node_matrix.node_order, property, slice)?;
            sensor_matrices.insert(
                property.clone(),
                build_sensor_matrix(&deployment, &node_matrix)?,
            );
        }
        versions.push(TopologyVersion {
            range: slice,
            node_matrix,
            sensor_matrices,
        });
    }
    Ok(versions)
}

type ActiveIntervals = Vec<(Timestamp, Option<Timestamp>)>;

fn check_contradictions(
    nodes: &[NodeRecord],
    sensors: &[SensorRecord],
) -> Result<(), TopologyError> {
    let mut node_groups: BTreeMap<&str, ActiveIntervals> = BTreeMap::new();
    for node in nodes {
        node_groups
            .entry(&node.node_id)
            .or_default()
            .push((node.installed_at, node.removed_at));
    }
    for (node_id, group) in node_groups {
        if any_overlap(&group) {
            return Err(TopologyError::ContradictoryNode(node_id.to_string()));
        }
    }
    let mut sensor_groups: BTreeMap<(&str, &PropertyKind), ActiveIntervals> = BTreeMap::new();
    for sensor in sensors {
        sensor_groups
            .entry((&sensor.node_id, &sensor.property))
            .or_default()
            .push((sensor.installed_at, sensor.removed_at));
    }
    for ((node_id, property), group) in sensor_groups {
        if any_overlap(&group) {
            return Err(TopologyError::ContradictorySensor {
                node_id: node_id.to_string(),
                property: property.as_str().to_string(),
            });
        }
    }
    Ok(())
}

fn any_overlap(intervals: &[(Timestamp, Option<Timestamp>)]) -> bool {
    for (i, a) in intervals.iter().enumerate() {
        for b in &intervals[i + 1..] {
            let a_end = a.1.map_or(i64::MAX, |t| t.0);
            let b_end = b.1.map_or(i64::MAX, |t| t.0);
            if a.0 .0 < b_end && b.0 .0 < a_end {
                return true;
            }
        }
    }
    false
}
