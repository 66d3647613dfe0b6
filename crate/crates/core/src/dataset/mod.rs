//! Queries, documents, engagement records, feature registries and
//! query-grouped ranking datasets.

mod engagement;
mod letor;
mod registry;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use engagement::{read_engagement_log, parse_engagement_csv, write_engagement_log, EngagementLog};
pub use letor::{
    format_letor, parse_letor, parse_letor_line, read_dataset, write_dataset, LetorData,
};
pub use registry::{FeatureEntry, FeatureGroup, FeatureRegistry};

/// Numeric query identifier, as carried by the `qid:` field of LETOR files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryId(pub u64);

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Opaque product identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(pub String);

impl DocId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DocId {
    fn from(s: &str) -> Self {
        DocId(s.to_string())
    }
}

/// The four engagement-derived relevance objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Objective {
    /// Click rate: clicks / impressions.
    Ctr,
    /// Add-to-cart ratio: add-to-carts / clicks.
    Atcr,
    /// Order rate: orders / impressions.
    Or,
    /// Revenue rate: revenue / impressions.
    Revr,
}

impl Objective {
    pub const ALL: [Objective; 4] = [Objective::Ctr, Objective::Atcr, Objective::Or, Objective::Revr];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Ctr => "ctr",
            Objective::Atcr => "atcr",
            Objective::Or => "or",
            Objective::Revr => "revr",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ctr" => Ok(Objective::Ctr),
            "atcr" => Ok(Objective::Atcr),
            "or" => Ok(Objective::Or),
            "revr" => Ok(Objective::Revr),
            other => Err(Error::Config(format!("unknown objective `{other}`"))),
        }
    }
}

/// Per (query, document) engagement counts aggregated from a search log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementRecord {
    pub query_id: QueryId,
    pub doc_id: DocId,
    pub impressions: u64,
    /// Impressions received while shown at rank 1 or 2.
    pub impressions_top2: u64,
    pub clicks: u64,
    pub atc: u64,
    pub orders: u64,
    pub revenue: f64,
}

impl EngagementRecord {
    /// Returns a description of every funnel-consistency violation. An empty
    /// list means the record is consistent.
    pub fn consistency_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        let id = format!("({}, {})", self.query_id, self.doc_id);
        if self.impressions_top2 > self.impressions {
            warnings.push(format!("{id}: impressions_top2 > impressions"));
        }
        if self.clicks > self.impressions {
            warnings.push(format!("{id}: clicks > impressions"));
        }
        if self.atc > self.clicks {
            warnings.push(format!("{id}: atc > clicks"));
        }
        if self.orders > self.atc {
            warnings.push(format!("{id}: orders > atc"));
        }
        if self.revenue > 0.0 && self.orders == 0 {
            warnings.push(format!("{id}: revenue without orders"));
        }
        warnings
    }

    pub fn is_consistent(&self) -> bool {
        self.impressions_top2 <= self.impressions
            && self.clicks <= self.impressions
            && self.atc <= self.clicks
            && self.orders <= self.atc
            && (self.revenue <= 0.0 || self.orders > 0)
    }
}

/// Dense feature values; feature id `i` (1-based) lives at index `i - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        FeatureVector(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Value of the 1-based feature id; ids past the end read as 0.
    pub fn get(&self, id: u32) -> f64 {
        id.checked_sub(1)
            .and_then(|i| self.0.get(i as usize))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Per-objective integer grades in `[0, 4]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Labels([Option<u8>; 4]);

impl Labels {
    pub fn single(objective: Objective, grade: u8) -> Self {
        let mut labels = Labels::default();
        labels.set(objective, grade);
        labels
    }

    pub fn get(&self, objective: Objective) -> Option<u8> {
        self.0[objective.index()]
    }

    pub fn set(&mut self, objective: Objective, grade: u8) {
        self.0[objective.index()] = Some(grade);
    }

    pub fn iter(&self) -> impl Iterator<Item = (Objective, u8)> + '_ {
        Objective::ALL
            .into_iter()
            .filter_map(|o| self.get(o).map(|g| (o, g)))
    }
}

/// One (query, document) training instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingInstance {
    pub query_id: QueryId,
    pub doc_id: DocId,
    pub features: FeatureVector,
    pub labels: Labels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub query_id: QueryId,
    pub instances: Vec<RankingInstance>,
}

impl QueryGroup {
    pub fn grades(&self, objective: Objective) -> Option<Vec<u8>> {
        self.instances
            .iter()
            .map(|inst| inst.labels.get(objective))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Query-grouped feature vectors with per-objective labels. Immutable once
/// constructed; every constructor path validates conformity to the registry.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingDataset {
    registry: FeatureRegistry,
    groups: Vec<QueryGroup>,
}

impl RankingDataset {
    pub fn new(registry: FeatureRegistry, groups: Vec<QueryGroup>) -> Result<Self> {
        let width = registry.len();
        let mut seen_queries = HashSet::with_capacity(groups.len());
        for group in &groups {
            if !seen_queries.insert(group.query_id) {
                return Err(Error::Construction(format!(
                    "query {} appears in more than one group",
                    group.query_id
                )));
            }
            let mut seen_docs = HashSet::with_capacity(group.instances.len());
            for inst in &group.instances {
                if inst.query_id != group.query_id {
                    return Err(Error::Construction(format!(
                        "instance of query {} filed under query {}",
                        inst.query_id, group.query_id
                    )));
                }
                if !seen_docs.insert(&inst.doc_id) {
                    return Err(Error::Construction(format!(
                        "duplicate document {} in query {}",
                        inst.doc_id, group.query_id
                    )));
                }
                if inst.features.len() != width {
                    return Err(Error::RegistryMismatch {
                        expected: width,
                        found: inst.features.len(),
                    });
                }
                if let Some(pos) = inst.features.values().iter().position(|v| !v.is_finite()) {
                    return Err(Error::Construction(format!(
                        "non-finite value for feature {} of ({}, {})",
                        pos + 1,
                        group.query_id,
                        inst.doc_id
                    )));
                }
                if let Some((o, g)) = inst.labels.iter().find(|&(_, g)| g > 4) {
                    return Err(Error::Construction(format!(
                        "{o} grade {g} outside [0, 4] for ({}, {})",
                        group.query_id, inst.doc_id
                    )));
                }
            }
        }
        Ok(RankingDataset { registry, groups })
    }

    pub fn empty(registry: FeatureRegistry) -> Self {
        RankingDataset {
            registry,
            groups: Vec::new(),
        }
    }

    pub fn registry(&self) -> &FeatureRegistry {
        &self.registry
    }

    pub fn groups(&self) -> &[QueryGroup] {
        &self.groups
    }

    pub fn num_features(&self) -> usize {
        self.registry.len()
    }

    pub fn num_queries(&self) -> usize {
        self.groups.len()
    }

    pub fn num_instances(&self) -> usize {
        self.groups.iter().map(|g| g.instances.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn query_ids(&self) -> Vec<QueryId> {
        self.groups.iter().map(|g| g.query_id).collect()
    }

    /// True when every instance carries a label for `objective`.
    pub fn has_objective(&self, objective: Objective) -> bool {
        self.groups
            .iter()
            .flat_map(|g| &g.instances)
            .all(|inst| inst.labels.get(objective).is_some())
    }

    pub fn require_objective(&self, objective: Objective) -> Result<()> {
        if self.has_objective(objective) {
            Ok(())
        } else {
            Err(Error::Training(format!("objective {objective} is not labeled")))
        }
    }

    /// Groups whose query id satisfies `keep`, in original order.
    pub fn filter_queries(&self, mut keep: impl FnMut(QueryId) -> bool) -> RankingDataset {
        RankingDataset {
            registry: self.registry.clone(),
            groups: self
                .groups
                .iter()
                .filter(|g| keep(g.query_id))
                .cloned()
                .collect(),
        }
    }

    /// Restricts every feature vector to `feature_ids` (1-based, any order;
    /// output follows ascending id order) and renumbers the registry.
    pub fn project(&self, feature_ids: &[u32]) -> Result<RankingDataset> {
        let mut ids: Vec<u32> = feature_ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let registry = self.registry.project(&ids)?;
        let groups = self
            .groups
            .iter()
            .map(|g| QueryGroup {
                query_id: g.query_id,
                instances: g
                    .instances
                    .iter()
                    .map(|inst| RankingInstance {
                        query_id: inst.query_id,
                        doc_id: inst.doc_id.clone(),
                        features: FeatureVector::new(
                            ids.iter().map(|&id| inst.features.get(id)).collect(),
                        ),
                        labels: inst.labels,
                    })
                    .collect(),
            })
            .collect();
        Ok(RankingDataset { registry, groups })
    }

    pub fn group_index(&self) -> HashMap<QueryId, usize> {
        self.groups
            .iter()
            .enumerate()
            .map(|(i, g)| (g.query_id, i))
            .collect()
    }
}

/// Formats a value with at most 9 significant digits, using the shortest text
/// that reads back to the rounded value.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    let magnitude = rounded.abs();
    if (1e-5..1e15).contains(&magnitude) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Rounds to the value `format_sig9` would serialize.
pub fn round_sig9(x: f64) -> f64 {
    format_sig9(x).parse().expect("formatted float parses")
}
