//! Clean synthetic dataset generation.
//!
//! Every node's streams follow a shared smooth base signal per property
//! (diurnal sinusoid plus a slow drift across the span), individualized by a
//! constant per-node offset, two low-frequency wobbles, and a little
//! uniform noise. The wobbles model microclimate: one is private to each
//! sensor, one is shared by all properties of a node. Both have hard slope
//! caps, chosen so that the worst-case trend divergence between two clean
//! neighbors stays small: with a per-step slope deviation of at most `W`
//! per sensor, the mean warping angle between two clean windows never
//! exceeds `2 * atan(W)`, so clean neighbor similarity never drops below
//! `cos(2 * atan(W))`. The caps below pin that floor at 0.9075: similarity
//! thresholds up to 0.90 stay entirely quiet on clean data, while a sensor
//! whose wobbles align at their peaks (`atan(0.22) > arccos(0.98)`) can
//! drift past the 0.98 line against enough of its neighbors to produce a
//! realistic trickle of false suspicions at very high thresholds.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{HarnessError, SyntheticDataset};
use crate::ingest::{NodeRecord, PropertyKind, SensorRecord, Timestamp};

/// Meter-per-degree on the sphere used by the neighbor distance.
const M_PER_DEG: f64 = std::f64::consts::PI * crate::topology::EARTH_RADIUS_M / 180.0;

/// Per-sensor wobble slope cap, value units per slot.
const SENSOR_WOBBLE_SLOPE: (f64, f64) = (0.05, 0.08);
/// Per-node shared wobble slope cap, value units per slot.
const NODE_WOBBLE_SLOPE: (f64, f64) = (0.07, 0.12);
/// Uniform value noise half-width.
const NOISE_HALF_WIDTH: f64 = 0.01;

/// Shape of one dataset to generate.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSpec {
    pub nodes: usize,
    pub days: u32,
    /// Grid step in seconds.
    pub grid_step: i64,
    pub start: Timestamp,
}

impl Default for GenerateSpec {
    fn default() -> Self {
        GenerateSpec {
            nodes: 36,
            days: 30,
            grid_step: 600,
            // 2011-08-18T00:00:00Z
            start: Timestamp(1_313_625_600),
        }
    }
}

struct PropertySignal {
    name: &'static str,
    mean: f64,
    diurnal_amp: f64,
    diurnal_period_s: f64,
    diurnal_phase_s: f64,
    drift_amp: f64,
    offset_half_width: f64,
    /// Sign of the node-shared wobble in this property.
    node_wobble_sign: f64,
}

const SIGNALS: [PropertySignal; 3] = [
    PropertySignal {
        name: "air_temperature",
        mean: 15.0,
        diurnal_amp: 8.0,
        diurnal_period_s: 86_400.0,
        diurnal_phase_s: 32_400.0,
        drift_amp: 1.5,
        offset_half_width: 1.5,
        node_wobble_sign: 1.0,
    },
    PropertySignal {
        name: "relative_humidity",
        mean: 74.0,
        diurnal_amp: -12.0,
        diurnal_period_s: 86_400.0,
        diurnal_phase_s: 32_400.0,
        drift_amp: -2.0,
        offset_half_width: 4.0,
        node_wobble_sign: -1.0,
    },
    PropertySignal {
        name: "air_pressure",
        mean: 1013.0,
        diurnal_amp: 1.1,
        diurnal_period_s: 43_200.0,
        diurnal_phase_s: 14_400.0,
        drift_amp: 0.8,
        offset_half_width: 2.0,
        // Pressure keeps only its private wobble: it has no correlated
        // partner in the default rule sets.
        node_wobble_sign: 0.0,
    },
];

/// A sinusoid parametrized by its slope amplitude (value units per slot).
#[derive(Debug, Clone, Copy)]
struct Wobble {
    value_amp: f64,
    period_slots: f64,
    phase: f64,
}

impl Wobble {
    fn draw(rng: &mut ChaCha8Rng, slope_range: (f64, f64), period_range: (f64, f64)) -> Self {
        let slope_amp = rng.random_range(slope_range.0..slope_range.1);
        let period_slots = rng.random_range(period_range.0..period_range.1);
        Wobble {
            value_amp: slope_amp * period_slots / TAU,
            period_slots,
            phase: rng.random_range(0.0..TAU),
        }
    }

    fn at(&self, slot: usize) -> f64 {
        self.value_amp * (TAU * slot as f64 / self.period_slots + self.phase).sin()
    }
}

/// Lays out `n` nodes on a 6-column grid with 140 m spacing, anchored in
/// subtropical coordinates. With a 300 m neighbor threshold every node of a
/// grid with at least three rows and columns has at least 3 neighbors
/// (corners reach two orthogonal, one diagonal, and two two-step nodes).
pub fn grid_layout(n: usize, start: Timestamp) -> Vec<NodeRecord> {
    const COLS: usize = 6;
    const SPACING_M: f64 = 140.0;
    let lat0 = -28.2300;
    let lon0 = 153.2700;
    (0..n)
        .map(|i| {
            let row = i / COLS;
            let col = i % COLS;
            NodeRecord {
                node_id: format!("n{:03}", i + 1),
                latitude: lat0 - row as f64 * SPACING_M / M_PER_DEG,
                longitude: lon0
                    + col as f64 * SPACING_M / (M_PER_DEG * lat0.to_radians().cos()),
                installed_at: start,
                removed_at: None,
            }
        })
        .collect()
}

/// Generates the clean dataset: three properties on every node, every slot
/// filled. Equal seeds give identical datasets.
pub fn generate_clean(seed: u64, spec: &GenerateSpec) -> Result<SyntheticDataset, HarnessError> {
    if spec.nodes < 9 {
        return Err(HarnessError::InvalidSpec(format!(
            "need at least 9 nodes for a meaningful neighborhood, got {}",
            spec.nodes
        )));
    }
    if spec.days == 0 {
        return Err(HarnessError::InvalidSpec("days must be positive".into()));
    }
    if spec.grid_step <= 0 {
        return Err(HarnessError::InvalidSpec(format!(
            "grid step must be positive, got {}",
            spec.grid_step
        )));
    }

    let slot_count = (spec.days as i64 * 86_400 / spec.grid_step) as usize;
    let span_s = (slot_count as i64 * spec.grid_step) as f64;
    let nodes = grid_layout(spec.nodes, spec.start);

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut sensors = Vec::with_capacity(nodes.len() * SIGNALS.len());
    let mut values: BTreeMap<(String, PropertyKind), Vec<f64>> = BTreeMap::new();

    for node in &nodes {
        let offsets: Vec<f64> = SIGNALS
            .iter()
            .map(|s| master.random_range(-s.offset_half_width..s.offset_half_width))
            .collect();
        let node_wobble = Wobble::draw(&mut master, NODE_WOBBLE_SLOPE, (36.0, 96.0));

        for (signal, offset) in SIGNALS.iter().zip(&offsets) {
            let property = PropertyKind::new(signal.name).expect("static property names");
            sensors.push(SensorRecord {
                sensor_id: format!("{}_{}", node.node_id, signal.name),
                node_id: node.node_id.clone(),
                property: property.clone(),
                installed_at: spec.start,
                removed_at: None,
            });

            let sensor_wobble = Wobble::draw(&mut master, SENSOR_WOBBLE_SLOPE, (24.0, 72.0));
            let mut noise = ChaCha8Rng::seed_from_u64(master.random());

            let stream: Vec<f64> = (0..slot_count)
                .map(|k| {
                    let t = (k as i64 * spec.grid_step) as f64;
                    let diurnal = signal.diurnal_amp
                        * (TAU * (t - signal.diurnal_phase_s) / signal.diurnal_period_s).sin();
                    let drift = signal.drift_amp * (TAU * t / span_s).sin();
                    signal.mean
                        + diurnal
                        + drift
                        + offset
                        + sensor_wobble.at(k)
                        + signal.node_wobble_sign * node_wobble.at(k)
                        + noise.random_range(-NOISE_HALF_WIDTH..NOISE_HALF_WIDTH)
                })
                .collect();
            values.insert((node.node_id.clone(), property), stream);
        }
    }

    Ok(SyntheticDataset::new(
        nodes,
        sensors,
        spec.start,
        spec.grid_step,
        slot_count,
        values,
    ))
}
