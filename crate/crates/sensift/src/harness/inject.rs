//! Fault and event injection with ground truth.
//!
//! Outlier mode replaces segments of single streams with uniform random
//! values inside the property's plausible range, per property and round.
//! Event mode picks nodes and overwrites the same two-hour window of both
//! temperature and humidity with a coherent excursion away from the base
//! signal; the two injected trends co-move for the positive flavor and
//! oppose for the strong flavor. Segments chosen within one round never
//! overlap in time, and nothing is ever injected twice into the same slots
//! of one node. Equal seeds reproduce identical injections.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use std::collections::HashMap;
use std::f64::consts::TAU;

use super::{GroundTruth, HarnessError, SyntheticDataset, TruthEntry, TruthLabel};
use crate::ingest::PropertyKind;

/// Which kind of anomaly to plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectionMode {
    Outliers,
    EventsStrong,
    EventsPositive,
}

/// Injection plan parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSpec {
    pub mode: InjectionMode,
    /// Streams (outliers) or nodes (events) hit per round.
    pub streams_per_round: usize,
    /// Segment length in slots; keep equal to the detection window length.
    pub segment_len: usize,
    pub rounds: usize,
    /// Replacement value range for temperature outliers.
    pub temperature_range: (f64, f64),
    /// Replacement value range for humidity outliers.
    pub humidity_range: (f64, f64),
}

impl InjectionSpec {
    pub fn outliers() -> Self {
        InjectionSpec {
            mode: InjectionMode::Outliers,
            streams_per_round: 8,
            segment_len: 12,
            rounds: 15,
            temperature_range: (0.0, 25.0),
            humidity_range: (40.0, 100.0),
        }
    }

    pub fn events(mode: InjectionMode) -> Self {
        assert!(matches!(
            mode,
            InjectionMode::EventsStrong | InjectionMode::EventsPositive
        ));
        InjectionSpec {
            mode,
            streams_per_round: 8,
            segment_len: 12,
            rounds: 30,
            temperature_range: (0.0, 25.0),
            humidity_range: (40.0, 100.0),
        }
    }

    fn validate(&self, dataset: &SyntheticDataset) -> Result<(), HarnessError> {
        if self.segment_len < 2 {
            return Err(HarnessError::InvalidSpec(format!(
                "segment length must be at least 2 slots, got {}",
                self.segment_len
            )));
        }
        if self.streams_per_round == 0 {
            return Err(HarnessError::InvalidSpec(
                "streams_per_round must be positive".into(),
            ));
        }
        if self.streams_per_round > dataset.nodes.len() {
            return Err(HarnessError::InvalidSpec(format!(
                "{} streams per round exceed the {} available nodes",
                self.streams_per_round,
                dataset.nodes.len()
            )));
        }
        if dataset.slot_count < self.segment_len {
            return Err(HarnessError::InvalidSpec(format!(
                "dataset has {} slots, segments need {}",
                dataset.slot_count, self.segment_len
            )));
        }
        Ok(())
    }
}

/// Tracks claimed slot ranges per node so injections never overlap on one
/// node, regardless of property.
struct Placer {
    occupied: HashMap<String, Vec<(usize, usize)>>,
    stride: usize,
    start_positions: usize,
    segment_len: usize,
}

impl Placer {
    fn new(dataset: &SyntheticDataset, segment_len: usize) -> Self {
        // Segment starts align to half a detection window so each segment
        // coincides with exactly one full window.
        let stride = (segment_len / 2).max(1);
        Placer {
            occupied: HashMap::new(),
            stride,
            start_positions: (dataset.slot_count - segment_len) / stride + 1,
            segment_len,
        }
    }

    /// Picks `count` segments on distinct nodes, mutually disjoint in time
    /// within this round and not overlapping anything already claimed on the
    /// same node.
    fn place_round(
        &mut self,
        rng: &mut ChaCha8Rng,
        node_ids: &[String],
        count: usize,
        property: &str,
        round: usize,
    ) -> Result<Vec<(String, usize)>, HarnessError> {
        let mut picks: Vec<(String, usize)> = Vec::with_capacity(count);
        let mut attempts = 0usize;
        let budget = 10_000 + 100 * count * self.start_positions.max(1);
        while picks.len() < count {
            attempts += 1;
            if attempts > budget {
                return Err(HarnessError::CannotPlaceSegments {
                    property: property.to_string(),
                    round,
                    wanted: count,
                    segment_len: self.segment_len,
                });
            }
            let node = &node_ids[rng.random_range(0..node_ids.len())];
            let start = self.stride * rng.random_range(0..self.start_positions);
            let end = start + self.segment_len - 1;
            if picks.iter().any(|(n, _)| n == node) {
                continue; // one segment per stream per round
            }
            // Within-round segments must not overlap in time at all.
            if picks
                .iter()
                .any(|&(_, s)| s <= end && start < s + self.segment_len)
            {
                continue;
            }
            let claimed = self.occupied.get(node).is_some_and(|ranges| {
                ranges.iter().any(|&(s, e)| s <= end && start <= e)
            });
            if claimed {
                continue;
            }
            self.occupied
                .entry(node.clone())
                .or_default()
                .push((start, end));
            picks.push((node.clone(), start));
        }
        // Stable order inside the round keeps downstream iteration
        // deterministic and readable.
        picks.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
        Ok(picks)
    }
}

/// Replaces random segments of temperature and humidity streams with
/// uniform random values, recording every replaced segment in the returned
/// ground truth.
pub fn inject_outliers(
    dataset: &mut SyntheticDataset,
    spec: &InjectionSpec,
    seed: u64,
) -> Result<GroundTruth, HarnessError> {
    if spec.mode != InjectionMode::Outliers {
        return Err(HarnessError::InvalidSpec(format!(
            "inject_outliers needs Outliers mode, got {:?}",
            spec.mode
        )));
    }
    spec.validate(dataset)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node_ids: Vec<String> = dataset.nodes.iter().map(|n| n.node_id.clone()).collect();
    let mut placer = Placer::new(dataset, spec.segment_len);
    let mut truth = GroundTruth::default();

    let targets = [
        ("air_temperature", spec.temperature_range),
        ("relative_humidity", spec.humidity_range),
    ];
    for (name, (lo, hi)) in targets {
        let property = PropertyKind::new(name).expect("static property names");
        for round in 0..spec.rounds {
            let picks = placer.place_round(
                &mut rng,
                &node_ids,
                spec.streams_per_round,
                name,
                round,
            )?;
            for (node_id, start) in picks {
                let stream = dataset.values_mut(&node_id, &property)?;
                for value in &mut stream[start..start + spec.segment_len] {
                    *value = rng.random_range(lo..hi);
                }
                truth.entries.push(TruthEntry {
                    property: property.clone(),
                    node_id,
                    slot_start: start,
                    slot_end: start + spec.segment_len - 1,
                    label: TruthLabel::ErroneousOutlier,
                });
            }
        }
    }
    Ok(truth)
}

/// Overwrites the same window of temperature and humidity at chosen nodes
/// with a coherent excursion; both streams move together (positive flavor)
/// or in opposition (strong flavor). Air pressure is untouched.
pub fn inject_events(
    dataset: &mut SyntheticDataset,
    spec: &InjectionSpec,
    seed: u64,
) -> Result<GroundTruth, HarnessError> {
    let humidity_sign = match spec.mode {
        InjectionMode::EventsStrong => -1.0,
        InjectionMode::EventsPositive => 1.0,
        InjectionMode::Outliers => {
            return Err(HarnessError::InvalidSpec(
                "inject_events needs an events mode".into(),
            ))
        }
    };
    spec.validate(dataset)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node_ids: Vec<String> = dataset.nodes.iter().map(|n| n.node_id.clone()).collect();
    let temperature = PropertyKind::new("air_temperature").expect("static property names");
    let humidity = PropertyKind::new("relative_humidity").expect("static property names");
    let mut placer = Placer::new(dataset, spec.segment_len);
    let mut truth = GroundTruth::default();

    for round in 0..spec.rounds {
        let picks = placer.place_round(
            &mut rng,
            &node_ids,
            spec.streams_per_round,
            "air_temperature+relative_humidity",
            round,
        )?;
        for (node_id, start) in picks {
            // Two excursion cycles across the segment: the per-step change
            // stays large in every window overlapping the segment, so the
            // event is visible even through the half-overlapping windows.
            let temp_amp: f64 = rng.random_range(6.0..10.0);
            let coupling: f64 = rng.random_range(1.8..2.6);
            let hum_amp = humidity_sign * coupling * temp_amp;
            let len = spec.segment_len as f64;

            let shape =
                |i: usize| (2.0 * TAU * (i as f64 + 1.0) / (len + 1.0)).sin();
            let temp_stream = dataset.values_mut(&node_id, &temperature)?;
            for (i, value) in temp_stream[start..start + spec.segment_len]
                .iter_mut()
                .enumerate()
            {
                *value += temp_amp * shape(i);
            }
            let hum_stream = dataset.values_mut(&node_id, &humidity)?;
            for (i, value) in hum_stream[start..start + spec.segment_len]
                .iter_mut()
                .enumerate()
            {
                *value += hum_amp * shape(i);
            }

            for property in [&temperature, &humidity] {
                truth.entries.push(TruthEntry {
                    property: property.clone(),
                    node_id: node_id.clone(),
                    slot_start: start,
                    slot_end: start + spec.segment_len - 1,
                    label: TruthLabel::UnusualEvent,
                });
            }
        }
    }
    Ok(truth)
}
