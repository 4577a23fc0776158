//! Cross-property correlation rules.
//!
//! Domain knowledge like "air temperature correlates strongly with relative
//! humidity" is stored as plain-text triples, one per line:
//!
//! ```text
//! # strength
//! air_temperature hasStrongCorrelation relative_humidity
//! air_temperature hasNegativeCorrelation relative_humidity
//! ```
//!
//! The predicate vocabulary is fixed (sixteen predicates in five
//! categories); queries ask whether two properties are linked by any rule
//! whose predicate belongs to an active subset. The m x m relationship
//! matrix materializes those answers for the classifier. Relationships are
//! treated as mutual: a rule stored in one direction answers queries in
//! both, since physical correlation between two quantities is symmetric.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::ingest::PropertyKind;

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: unknown predicate token `{token}`")]
    UnknownPredicate { line: usize, token: String },
    #[error("line {line}: rule relates `{property}` to itself")]
    SelfCorrelation { line: usize, property: String },
    #[error("line {line}: unknown property name `{name}`")]
    UnknownProperty { line: usize, name: String },
    #[error("line {line}: expected `subject predicate object`, got {got} fields")]
    WrongFieldCount { line: usize, got: usize },
    #[error("duplicate property `{0}` in property order")]
    DuplicatePropertyOrder(String),
    #[error("unknown predicate short name `{0}`")]
    UnknownShortName(String),
}

/// The five correlation facets the vocabulary covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PredicateCategory {
    Strength,
    Direction,
    Shape,
    SpaceTime,
    Composition,
}

/// The sixteen-predicate correlation vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CorrelationPredicate {
    VeryStrong,
    Strong,
    Medium,
    Weak,
    VeryWeak,
    Positive,
    Negative,
    Linear,
    Curvilinear,
    Scattered,
    Spatial,
    Temporal,
    SpatioTemporal,
    Partial,
    Simple,
    Multiple,
}

impl CorrelationPredicate {
    pub const ALL: [CorrelationPredicate; 16] = [
        CorrelationPredicate::VeryStrong,
        CorrelationPredicate::Strong,
        CorrelationPredicate::Medium,
        CorrelationPredicate::Weak,
        CorrelationPredicate::VeryWeak,
        CorrelationPredicate::Positive,
        CorrelationPredicate::Negative,
        CorrelationPredicate::Linear,
        CorrelationPredicate::Curvilinear,
        CorrelationPredicate::Scattered,
        CorrelationPredicate::Spatial,
        CorrelationPredicate::Temporal,
        CorrelationPredicate::SpatioTemporal,
        CorrelationPredicate::Partial,
        CorrelationPredicate::Simple,
        CorrelationPredicate::Multiple,
    ];

    /// The rule-file token, e.g. `hasStrongCorrelation`.
    pub fn token(self) -> &'static str {
        match self {
            CorrelationPredicate::VeryStrong => "hasVeryStrongCorrelation",
            CorrelationPredicate::Strong => "hasStrongCorrelation",
            CorrelationPredicate::Medium => "hasMediumCorrelation",
            CorrelationPredicate::Weak => "hasWeakCorrelation",
            CorrelationPredicate::VeryWeak => "hasVeryWeakCorrelation",
            CorrelationPredicate::Positive => "hasPositiveCorrelation",
            CorrelationPredicate::Negative => "hasNegativeCorrelation",
            CorrelationPredicate::Linear => "hasLinearCorrelation",
            CorrelationPredicate::Curvilinear => "hasCurvilinearCorrelation",
            CorrelationPredicate::Scattered => "hasScatteredCorrelation",
            CorrelationPredicate::Spatial => "hasSpatialCorrelation",
            CorrelationPredicate::Temporal => "hasTemporalCorrelation",
            CorrelationPredicate::SpatioTemporal => "hasSpatioTemporalCorrelation",
            CorrelationPredicate::Partial => "hasPartialCorrelation",
            CorrelationPredicate::Simple => "hasSimpleCorrelation",
            CorrelationPredicate::Multiple => "hasMultipleCorrelation",
        }
    }

    /// Short flag-friendly name, e.g. `strong`.
    pub fn short_name(self) -> &'static str {
        match self {
            CorrelationPredicate::VeryStrong => "very-strong",
            CorrelationPredicate::Strong => "strong",
            CorrelationPredicate::Medium => "medium",
            CorrelationPredicate::Weak => "weak",
            CorrelationPredicate::VeryWeak => "very-weak",
            CorrelationPredicate::Positive => "positive",
            CorrelationPredicate::Negative => "negative",
            CorrelationPredicate::Linear => "linear",
            CorrelationPredicate::Curvilinear => "curvilinear",
            CorrelationPredicate::Scattered => "scattered",
            CorrelationPredicate::Spatial => "spatial",
            CorrelationPredicate::Temporal => "temporal",
            CorrelationPredicate::SpatioTemporal => "spatio-temporal",
            CorrelationPredicate::Partial => "partial",
            CorrelationPredicate::Simple => "simple",
            CorrelationPredicate::Multiple => "multiple",
        }
    }

    pub fn category(self) -> PredicateCategory {
        match self {
            CorrelationPredicate::VeryStrong
            | CorrelationPredicate::Strong
            | CorrelationPredicate::Medium
            | CorrelationPredicate::Weak
            | CorrelationPredicate::VeryWeak => PredicateCategory::Strength,
            CorrelationPredicate::Positive | CorrelationPredicate::Negative => {
                PredicateCategory::Direction
            }
            CorrelationPredicate::Linear
            | CorrelationPredicate::Curvilinear
            | CorrelationPredicate::Scattered => PredicateCategory::Shape,
            CorrelationPredicate::Spatial
            | CorrelationPredicate::Temporal
            | CorrelationPredicate::SpatioTemporal => PredicateCategory::SpaceTime,
            CorrelationPredicate::Partial
            | CorrelationPredicate::Simple
            | CorrelationPredicate::Multiple => PredicateCategory::Composition,
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|p| p.token() == token)
    }

    pub fn from_short_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|p| p.short_name() == name)
    }
}

impl fmt::Display for CorrelationPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// The default active predicate subset: strength rules of at least medium
/// grade.
pub fn default_active_predicates() -> BTreeSet<CorrelationPredicate> {
    [CorrelationPredicate::Strong, CorrelationPredicate::Medium]
        .into_iter()
        .collect()
}

/// Parses a comma-separated list of short predicate names.
pub fn parse_predicate_list(text: &str) -> Result<BTreeSet<CorrelationPredicate>, RuleError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| {
            CorrelationPredicate::from_short_name(name)
                .ok_or_else(|| RuleError::UnknownShortName(name.to_string()))
        })
        .collect()
}

/// One stored correlation triple. Subject and object always differ.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CorrelationRule {
    pub subject: PropertyKind,
    pub predicate: CorrelationPredicate,
    pub object: PropertyKind,
}

/// The loaded knowledge base: deduplicated rules in a stable order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleSet {
    rules: Vec<CorrelationRule>,
}

impl RuleSet {
    pub fn rules(&self) -> &[CorrelationRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn from_rules(rules: impl IntoIterator<Item = CorrelationRule>) -> Self {
        let set: BTreeSet<CorrelationRule> = rules.into_iter().collect();
        RuleSet {
            rules: set.into_iter().collect(),
        }
    }
}

/// Parses rule text: one `subject predicate object` triple per line,
/// whitespace-separated, `#` starts a comment, blank lines ignored.
/// Duplicate triples collapse.
pub fn parse_rules(text: &str) -> Result<RuleSet, RuleError> {
    let mut rules = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(RuleError::WrongFieldCount {
                line,
                got: fields.len(),
            });
        }
        let subject = PropertyKind::new(fields[0]).map_err(|_| RuleError::UnknownProperty {
            line,
            name: fields[0].to_string(),
        })?;
        let predicate =
            CorrelationPredicate::from_token(fields[1]).ok_or_else(|| {
                RuleError::UnknownPredicate {
                    line,
                    token: fields[1].to_string(),
                }
            })?;
        let object = PropertyKind::new(fields[2]).map_err(|_| RuleError::UnknownProperty {
            line,
            name: fields[2].to_string(),
        })?;
        if subject == object {
            return Err(RuleError::SelfCorrelation {
                line,
                property: subject.as_str().to_string(),
            });
        }
        rules.insert(CorrelationRule {
            subject,
            predicate,
            object,
        });
    }
    Ok(RuleSet {
        rules: rules.into_iter().collect(),
    })
}

/// Loads a rule file from disk.
pub fn load_rules(path: &Path) -> Result<RuleSet, RuleError> {
    let text = std::fs::read_to_string(path).map_err(|source| RuleError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_rules(&text)
}

/// True when some rule with an active predicate links the two properties in
/// either direction.
pub fn ask_correlated(
    rules: &RuleSet,
    prop_a: &PropertyKind,
    prop_b: &PropertyKind,
    active: &BTreeSet<CorrelationPredicate>,
) -> bool {
    rules.rules.iter().any(|r| {
        active.contains(&r.predicate)
            && ((r.subject == *prop_a && r.object == *prop_b)
                || (r.subject == *prop_b && r.object == *prop_a))
    })
}

/// Binary m x m matrix marking which property pairs corroborate each other
/// under the active predicates. Symmetric, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationshipMatrix {
    pub property_order: Vec<PropertyKind>,
    pub active_predicates: BTreeSet<CorrelationPredicate>,
    cells: Vec<u8>,
}

impl RelationshipMatrix {
    pub fn m(&self) -> usize {
        self.property_order.len()
    }

    pub fn cell(&self, i: usize, i2: usize) -> u8 {
        self.cells[i * self.m() + i2]
    }

    pub fn linked(&self, i: usize, i2: usize) -> bool {
        self.cell(i, i2) == 1
    }

    pub fn property_index(&self, p: &PropertyKind) -> Option<usize> {
        self.property_order.iter().position(|q| q == p)
    }
}

/// Materializes the relationship matrix over `property_order`.
pub fn build_relationship_matrix(
    rules: &RuleSet,
    property_order: &[PropertyKind],
    active: &BTreeSet<CorrelationPredicate>,
) -> Result<RelationshipMatrix, RuleError> {
    for (i, p) in property_order.iter().enumerate() {
        if property_order[i + 1..].contains(p) {
            return Err(RuleError::DuplicatePropertyOrder(p.as_str().to_string()));
        }
    }
    let m = property_order.len();
    let mut cells = vec![0u8; m * m];
    for i in 0..m {
        for i2 in (i + 1)..m {
            if ask_correlated(rules, &property_order[i], &property_order[i2], active) {
                cells[i * m + i2] = 1;
                cells[i2 * m + i] = 1;
            }
        }
    }
    Ok(RelationshipMatrix {
        property_order: property_order.to_vec(),
        active_predicates: active.clone(),
        cells,
    })
}
