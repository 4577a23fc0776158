//! Turning suspicion flags into verdicts.
//!
//! A suspicious window is an unusual event when enough of the correlated
//! sibling properties at the same node and window are suspicious too; with
//! no such corroboration it is an erroneous outlier. Two counts drive the
//! decision and are kept for audit: `c1`, the correlated properties that are
//! also suspicious, and `c2`, the correlated properties that could be
//! evaluated at all. The verdict is an unusual event when `c1 >= c2 / 2`
//! and at least one correlated property was evaluable; with `c2 = 0` an
//! event claim would rest on zero evidence, so the verdict falls back to
//! erroneous outlier.

use thiserror::Error;

use crate::ingest::PropertyKind;
use crate::rules::RelationshipMatrix;
use crate::screening::{SuspicionFlag, SuspicionTable};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("flag at (property {property}, node {node}, window {window}) is {flag:?}, not Suspicious")]
    NotSuspicious {
        property: usize,
        node: usize,
        window: usize,
        flag: SuspicionFlag,
    },
    #[error("suspicion tables disagree on node order or window count")]
    TableMismatch,
    #[error("table {index} carries property `{got}`, relationship matrix expects `{want}`")]
    PropertyOrderMismatch {
        index: usize,
        got: String,
        want: String,
    },
    #[error("property index {0} out of range")]
    PropertyOutOfRange(usize),
}

/// Final label for one (property, node, window) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Normal,
    ErroneousOutlier,
    UnusualEvent,
    Unevaluated,
}

/// Verdicts for one property over every (node, window) cell, with the
/// corroboration counts recorded wherever a suspicious cell was classified.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTable {
    pub property: PropertyKind,
    pub node_order: Vec<String>,
    pub window_count: usize,
    verdicts: Vec<Verdict>,
    corroboration: Vec<Option<(u32, u32)>>,
}

impl DecisionTable {
    pub fn verdict(&self, j: usize, l: usize) -> Verdict {
        self.verdicts[j * self.window_count + l]
    }

    /// `(c1, c2)` for cells that went through classification.
    pub fn corroboration(&self, j: usize, l: usize) -> Option<(u32, u32)> {
        self.corroboration[j * self.window_count + l]
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.verdicts.iter().filter(|&&v| v == verdict).count()
    }
}

fn check_alignment(
    tables: &[SuspicionTable],
    relationship: &RelationshipMatrix,
) -> Result<(), ClassifyError> {
    if tables.len() != relationship.m() {
        return Err(ClassifyError::TableMismatch);
    }
    for (index, table) in tables.iter().enumerate() {
        if table.property != relationship.property_order[index] {
            return Err(ClassifyError::PropertyOrderMismatch {
                index,
                got: table.property.as_str().to_string(),
                want: relationship.property_order[index].as_str().to_string(),
            });
        }
    }
    if let Some(first) = tables.first() {
        for table in tables {
            if table.node_order != first.node_order || table.window_count != first.window_count {
                return Err(ClassifyError::TableMismatch);
            }
        }
    }
    Ok(())
}

/// Classifies one suspicious cell. The cell at (property `i`, node `j`,
/// window `l`) must be flagged suspicious.
///
/// Returns the verdict together with the corroboration counts `(c1, c2)`.
pub fn classify_window(
    tables: &[SuspicionTable],
    relationship: &RelationshipMatrix,
    i: usize,
    j: usize,
    l: usize,
) -> Result<(Verdict, u32, u32), ClassifyError> {
    check_alignment(tables, relationship)?;
    if i >= tables.len() {
        return Err(ClassifyError::PropertyOutOfRange(i));
    }
    if tables[i].flag(j, l) != SuspicionFlag::Suspicious {
        return Err(ClassifyError::NotSuspicious {
            property: i,
            node: j,
            window: l,
            flag: tables[i].flag(j, l),
        });
    }
    Ok(classify_cell(tables, relationship, i, j, l))
}

fn classify_cell(
    tables: &[SuspicionTable],
    relationship: &RelationshipMatrix,
    i: usize,
    j: usize,
    l: usize,
) -> (Verdict, u32, u32) {
    let mut c1 = 0u32;
    let mut c2 = 0u32;
    for (i2, table) in tables.iter().enumerate() {
        if !relationship.linked(i, i2) {
            continue; // the diagonal is zero, so i2 == i never counts
        }
        match table.flag(j, l) {
            SuspicionFlag::Suspicious => {
                c1 += 1;
                c2 += 1;
            }
            SuspicionFlag::Normal => c2 += 1,
            SuspicionFlag::Unevaluated => {}
        }
    }
    let verdict = if c2 > 0 && 2 * c1 >= c2 {
        Verdict::UnusualEvent
    } else {
        Verdict::ErroneousOutlier
    };
    (verdict, c1, c2)
}

/// Classifies every cell of every property: normal and unevaluated flags
/// copy through, suspicious cells get a verdict and audit counts.
pub fn classify_all(
    tables: &[SuspicionTable],
    relationship: &RelationshipMatrix,
) -> Result<Vec<DecisionTable>, ClassifyError> {
    check_alignment(tables, relationship)?;
    let mut decisions = Vec::with_capacity(tables.len());
    for (i, table) in tables.iter().enumerate() {
        let n = table.node_order.len();
        let windows = table.window_count;
        let mut verdicts = Vec::with_capacity(n * windows);
        let mut corroboration = vec![None; n * windows];
        for j in 0..n {
            for l in 0..windows {
                let verdict = match table.flag(j, l) {
                    SuspicionFlag::Normal => Verdict::Normal,
                    SuspicionFlag::Unevaluated => Verdict::Unevaluated,
                    SuspicionFlag::Suspicious => {
                        let (verdict, c1, c2) = classify_cell(tables, relationship, i, j, l);
                        corroboration[j * windows + l] = Some((c1, c2));
                        verdict
                    }
                };
                verdicts.push(verdict);
            }
        }
        decisions.push(DecisionTable {
            property: table.property.clone(),
            node_order: table.node_order.clone(),
            window_count: windows,
            verdicts,
            corroboration,
        });
    }
    Ok(decisions)
}
