//! Sliding-window screening of each property's streams against their
//! spatial neighbors.
//!
//! Streams are cut into half-overlapping windows. For every neighboring
//! sensor pair with complete data in a window, the trend similarity goes
//! into a per-property tensor indexed by (node, node, window). A sensor's
//! window is then voted suspicious when fewer than half of its present
//! neighbor similarities reach the threshold. Windows with no usable
//! neighbor data are explicitly unevaluated, never silently normal.

use std::collections::HashMap;
use std::ops::Range;

use thiserror::Error;

use crate::dtw::{self, DtwError};
use crate::ingest::{ObservationSeries, PropertyKind};
use crate::topology::SensorNeighborhoodMatrix;

#[derive(Debug, Error)]
pub enum ScreeningError {
    #[error("window length must be an even integer >= 2, got {0}")]
    InvalidWindowLength(usize),
    #[error("similarity threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("series list has {got} entries, node order has {want}")]
    SeriesCountMismatch { got: usize, want: usize },
    #[error("series for node index {node} has {got} slots, plan expects {want}")]
    SlotCountMismatch {
        node: usize,
        got: usize,
        want: usize,
    },
    #[error(transparent)]
    Dtw(#[from] DtwError),
}

/// Layout of half-overlapping windows over a slot range.
///
/// Window `l` (0-based) covers `eta` slots starting at `l * eta / 2`.
/// Trailing slots that cannot fill a final window are left out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPlan {
    pub eta: usize,
    pub slot_count: usize,
    pub window_count: usize,
}

impl WindowPlan {
    pub fn window_range(&self, l: usize) -> Range<usize> {
        let start = l * self.eta / 2;
        start..start + self.eta
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Range<usize>)> + '_ {
        (0..self.window_count).map(|l| (l, self.window_range(l)))
    }

    /// Slots past the last full window.
    pub fn trailing_slots(&self) -> usize {
        if self.window_count == 0 {
            self.slot_count
        } else {
            self.slot_count - self.window_range(self.window_count - 1).end
        }
    }
}

/// Plans windows of even length `eta` with `eta / 2` overlap over
/// `slot_count` slots. Fewer slots than one window yields an empty plan.
pub fn plan_windows(slot_count: usize, eta: usize) -> Result<WindowPlan, ScreeningError> {
    if eta < 2 || !eta.is_multiple_of(2) {
        return Err(ScreeningError::InvalidWindowLength(eta));
    }
    let window_count = if slot_count < eta {
        0
    } else {
        (slot_count - eta) / (eta / 2) + 1
    };
    Ok(WindowPlan {
        eta,
        slot_count,
        window_count,
    })
}

/// Per-property trend similarities for every neighboring sensor pair and
/// window. An entry is present only when the pair are neighbors and both
/// windows are complete; everything else reads as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTensor {
    pub property: PropertyKind,
    pub node_order: Vec<String>,
    pub plan: WindowPlan,
    /// Neighbor pairs as (j, k) with j < k, ascending.
    pairs: Vec<(usize, usize)>,
    pair_index: HashMap<(usize, usize), usize>,
    /// Pair-major values: `values[p][l]`.
    values: Vec<Vec<Option<f64>>>,
    /// Pair indices touching each node.
    node_pairs: Vec<Vec<usize>>,
}

impl SimilarityTensor {
    pub fn get(&self, j: usize, k: usize, l: usize) -> Option<f64> {
        let key = (j.min(k), j.max(k));
        self.pair_index
            .get(&key)
            .and_then(|&p| self.values[p][l])
    }

    /// Present similarities between node `j` and its neighbors in window `l`.
    pub fn neighbor_similarities(&self, j: usize, l: usize) -> Vec<f64> {
        self.node_pairs[j]
            .iter()
            .filter_map(|&p| self.values[p][l])
            .collect()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// All present entries in deterministic (pair, window) order.
    pub fn iter_present(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.pairs.iter().enumerate().flat_map(move |(p, &(j, k))| {
            self.values[p]
                .iter()
                .enumerate()
                .filter_map(move |(l, v)| v.map(|sim| (j, k, l, sim)))
        })
    }

    pub fn present_count(&self) -> usize {
        self.values
            .iter()
            .map(|row| row.iter().filter(|v| v.is_some()).count())
            .sum()
    }
}

/// Tri-state screening flag for one (sensor, window) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuspicionFlag {
    Normal,
    Suspicious,
    /// No sensor, incomplete window, or no neighbor data to compare with.
    Unevaluated,
}

/// Per-property flags for every (node, window) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SuspicionTable {
    pub property: PropertyKind,
    pub node_order: Vec<String>,
    pub window_count: usize,
    flags: Vec<SuspicionFlag>,
}

impl SuspicionTable {
    /// Assembles a table from row-major (node, window) flags.
    pub fn from_parts(
        property: PropertyKind,
        node_order: Vec<String>,
        window_count: usize,
        flags: Vec<SuspicionFlag>,
    ) -> Self {
        assert_eq!(flags.len(), node_order.len() * window_count);
        SuspicionTable {
            property,
            node_order,
            window_count,
            flags,
        }
    }

    pub fn flag(&self, j: usize, l: usize) -> SuspicionFlag {
        self.flags[j * self.window_count + l]
    }

    pub fn count(&self, flag: SuspicionFlag) -> usize {
        self.flags.iter().filter(|&&f| f == flag).count()
    }
}

/// Fills the similarity tensor for one property.
///
/// `series_by_node` aligns with the matrix's node order; `None` means the
/// node hosts no sensor of this property. Pairs are computed once per
/// unordered neighbor pair; the tensor answers both orders.
pub fn build_similarity_tensor(
    series_by_node: &[Option<ObservationSeries>],
    matrix: &SensorNeighborhoodMatrix,
    plan: &WindowPlan,
    value_scale: f64,
) -> Result<SimilarityTensor, ScreeningError> {
    let n = matrix.n();
    if series_by_node.len() != n {
        return Err(ScreeningError::SeriesCountMismatch {
            got: series_by_node.len(),
            want: n,
        });
    }
    for (node, series) in series_by_node.iter().enumerate() {
        if let Some(s) = series {
            if s.slots.len() != plan.slot_count {
                return Err(ScreeningError::SlotCountMismatch {
                    node,
                    got: s.slots.len(),
                    want: plan.slot_count,
                });
            }
        }
    }

    let mut pairs = Vec::new();
    for j in 0..n {
        for k in (j + 1)..n {
            if matrix.is_neighbor(j, k) {
                pairs.push((j, k));
            }
        }
    }

    let mut values = Vec::with_capacity(pairs.len());
    for &(j, k) in &pairs {
        let mut row = vec![None; plan.window_count];
        if let (Some(sa), Some(sb)) = (&series_by_node[j], &series_by_node[k]) {
            for (l, range) in plan.iter() {
                let wa = &sa.slots[range.clone()];
                let wb = &sb.slots[range];
                if wa.iter().all(Option::is_some) && wb.iter().all(Option::is_some) {
                    row[l] = Some(dtw::trend_similarity(wa, wb, value_scale)?);
                }
            }
        }
        values.push(row);
    }

    let pair_index: HashMap<(usize, usize), usize> =
        pairs.iter().enumerate().map(|(p, &jk)| (jk, p)).collect();
    let mut node_pairs = vec![Vec::new(); n];
    for (p, &(j, k)) in pairs.iter().enumerate() {
        node_pairs[j].push(p);
        node_pairs[k].push(p);
    }

    Ok(SimilarityTensor {
        property: matrix.property.clone(),
        node_order: matrix.node_order.clone(),
        plan: *plan,
        pairs,
        pair_index,
        values,
        node_pairs,
    })
}

/// Votes each (node, window) cell normal or suspicious against threshold
/// `beta`.
///
/// A cell is normal when at least half of its present neighbor similarities
/// reach `beta`, suspicious otherwise, and unevaluated when nothing is
/// present to compare with. A present similarity of zero still counts in the
/// denominator: a dissimilar neighbor is evidence, not missing data.
pub fn vote_suspicious(
    tensor: &SimilarityTensor,
    beta: f64,
) -> Result<SuspicionTable, ScreeningError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(ScreeningError::InvalidThreshold(beta));
    }
    let n = tensor.node_order.len();
    let windows = tensor.plan.window_count;
    let mut flags = Vec::with_capacity(n * windows);
    for j in 0..n {
        for l in 0..windows {
            let mut present = 0usize;
            let mut similar = 0usize;
            for &p in &tensor.node_pairs[j] {
                if let Some(sim) = tensor.values[p][l] {
                    present += 1;
                    if sim >= beta {
                        similar += 1;
                    }
                }
            }
            let flag = if present == 0 {
                SuspicionFlag::Unevaluated
            } else if 2 * similar >= present {
                SuspicionFlag::Normal
            } else {
                SuspicionFlag::Suspicious
            };
            flags.push(flag);
        }
    }
    Ok(SuspicionTable {
        property: tensor.property.clone(),
        node_order: tensor.node_order.clone(),
        window_count: windows,
        flags,
    })
}
