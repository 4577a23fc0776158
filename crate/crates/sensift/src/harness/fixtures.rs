//! Deterministic demonstration scenarios.
//!
//! Two hand-built four-node datasets exercise the canonical outcomes end to
//! end: a single corrupted humidity stream that must come out as an
//! erroneous outlier because its temperature stays in line, and a node
//! whose temperature and humidity swing away together, which must come out
//! as an unusual event on both properties. The affected slot range is
//! window-aligned so the expected set of anomalous windows is exact.

use std::f64::consts::TAU;

use super::SyntheticDataset;
use crate::ingest::{NodeRecord, PropertyKind, SensorRecord, Timestamp, TimeRange};
use crate::pipeline::DetectionConfig;
use crate::rules::{parse_rules, RuleSet};

/// A self-contained scenario with its expected detection outcome.
#[derive(Debug, Clone)]
pub struct ScenarioFixture {
    pub dataset: SyntheticDataset,
    pub rules: RuleSet,
    pub config: DetectionConfig,
    pub range: TimeRange,
    /// Node whose streams were tampered with.
    pub target_node: String,
    /// Properties expected to carry the anomalous verdicts.
    pub affected_properties: Vec<PropertyKind>,
    /// Exact window indices expected anomalous per affected property.
    pub expected_windows: Vec<usize>,
    pub expected_verdict: crate::classify::Verdict,
}

const SLOTS: usize = 48;
const STEP: i64 = 600;
/// Tampered slot range, aligned to whole windows: slots 24..=35.
const TAMPER_START: usize = 24;
const TAMPER_LEN: usize = 12;

fn prop(name: &str) -> PropertyKind {
    PropertyKind::new(name).unwrap()
}

/// Four nodes 80 m apart in a row: every pair within 240 m, all neighbors
/// at the default 300 m threshold.
fn demo_nodes() -> Vec<NodeRecord> {
    const M_PER_DEG: f64 = std::f64::consts::PI * crate::topology::EARTH_RADIUS_M / 180.0;
    (0..4)
        .map(|i| NodeRecord {
            node_id: format!("n{:02}", i + 1),
            latitude: -28.2300 - i as f64 * 80.0 / M_PER_DEG,
            longitude: 153.2700,
            installed_at: Timestamp(0),
            removed_at: None,
        })
        .collect()
}

fn base_value(property: &str, node: usize, slot: usize) -> f64 {
    let phase = TAU * slot as f64 / 24.0;
    match property {
        "air_temperature" => 15.0 + 3.0 * phase.sin() + 0.4 * node as f64,
        "relative_humidity" => 70.0 - 8.0 * phase.sin() - 1.1 * node as f64,
        "air_pressure" => 1013.0 + 1.2 * (TAU * slot as f64 / 48.0).sin() + 0.2 * node as f64,
        _ => unreachable!(),
    }
}

fn demo_dataset(tamper: impl Fn(&str, usize, usize, f64) -> f64) -> SyntheticDataset {
    let nodes = demo_nodes();
    let properties = ["air_temperature", "relative_humidity", "air_pressure"];
    let mut sensors = Vec::new();
    let mut values = std::collections::BTreeMap::new();
    for (i, node) in nodes.iter().enumerate() {
        for name in properties {
            sensors.push(SensorRecord {
                sensor_id: format!("{}_{}", node.node_id, name),
                node_id: node.node_id.clone(),
                property: prop(name),
                installed_at: Timestamp(0),
                removed_at: None,
            });
            let stream: Vec<f64> = (0..SLOTS)
                .map(|k| tamper(name, i, k, base_value(name, i, k)))
                .collect();
            values.insert((node.node_id.clone(), prop(name)), stream);
        }
    }
    SyntheticDataset::new(nodes, sensors, Timestamp(0), STEP, SLOTS, values)
}

fn demo_rules() -> RuleSet {
    parse_rules(
        "air_temperature hasStrongCorrelation relative_humidity\n\
         air_temperature hasNegativeCorrelation relative_humidity\n",
    )
    .expect("static rules")
}

/// Windows overlapping the tampered slots under the default plan: with
/// 12-slot windows at stride 6 over 48 slots, slots 24..=35 touch windows
/// 3, 4, and 5.
fn expected_windows() -> Vec<usize> {
    let eta = 12usize;
    let stride = eta / 2;
    let window_count = (SLOTS - eta) / stride + 1;
    (0..window_count)
        .filter(|l| {
            let start = l * stride;
            start < TAMPER_START + TAMPER_LEN && TAMPER_START < start + eta
        })
        .collect()
}

/// One humidity stream zigzags violently for two hours while the same
/// node's temperature stays in line with its neighbors: a sensor fault.
pub fn demo_error_scenario() -> ScenarioFixture {
    let dataset = demo_dataset(|property, node, slot, value| {
        if property == "relative_humidity"
            && node == 0
            && (TAMPER_START..TAMPER_START + TAMPER_LEN).contains(&slot)
        {
            if slot % 2 == 0 {
                95.0
            } else {
                40.0
            }
        } else {
            value
        }
    });
    let range = dataset.range();
    ScenarioFixture {
        dataset,
        rules: demo_rules(),
        config: DetectionConfig::default(),
        range,
        target_node: "n01".to_string(),
        affected_properties: vec![prop("relative_humidity")],
        expected_windows: expected_windows(),
        expected_verdict: crate::classify::Verdict::ErroneousOutlier,
    }
}

/// One node's temperature and humidity swing away together for two hours:
/// a genuine local phenomenon corroborated across properties.
pub fn demo_event_scenario() -> ScenarioFixture {
    let dataset = demo_dataset(|property, node, slot, value| {
        if node != 1 || !(TAMPER_START..TAMPER_START + TAMPER_LEN).contains(&slot) {
            return value;
        }
        // Two full cycles across the segment keep the per-step excursion
        // large in every overlapping window, so both edge windows flag on
        // both properties.
        let bump = (2.0 * TAU * (slot - TAMPER_START + 1) as f64 / (TAMPER_LEN + 1) as f64).sin();
        match property {
            "air_temperature" => value + 8.0 * bump,
            "relative_humidity" => value - 22.0 * bump,
            _ => value,
        }
    });
    let range = dataset.range();
    ScenarioFixture {
        dataset,
        rules: demo_rules(),
        config: DetectionConfig::default(),
        range,
        target_node: "n02".to_string(),
        affected_properties: vec![prop("air_temperature"), prop("relative_humidity")],
        expected_windows: expected_windows(),
        expected_verdict: crate::classify::Verdict::UnusualEvent,
    }
}
