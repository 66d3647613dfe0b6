use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureGroup {
    Query,
    Document,
    QueryDocument,
}

impl FeatureGroup {
    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Query => "query",
            FeatureGroup::Document => "document",
            FeatureGroup::QueryDocument => "query-document",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "query" => Ok(FeatureGroup::Query),
            "document" => Ok(FeatureGroup::Document),
            "query-document" => Ok(FeatureGroup::QueryDocument),
            other => Err(Error::Registry(format!("unknown feature group `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureEntry {
    /// 1-based, contiguous.
    pub id: u32,
    pub name: String,
    pub group: FeatureGroup,
    /// Catalog attribute tested by this feature, if any.
    pub attribute_key: Option<String>,
    pub popularity: bool,
}

/// Ordered feature inventory shared by every vector of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureRegistry {
    entries: Vec<FeatureEntry>,
}

impl FeatureRegistry {
    pub fn new(entries: Vec<FeatureEntry>) -> Result<Self> {
        let mut names = HashSet::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.id as usize != i + 1 {
                return Err(Error::Registry(format!(
                    "feature ids must be contiguous from 1; found {} at position {}",
                    e.id,
                    i + 1
                )));
            }
            if e.name.is_empty() || e.name.contains(',') || e.name.contains('\n') {
                return Err(Error::Registry(format!("invalid feature name `{}`", e.name)));
            }
            if !names.insert(e.name.as_str()) {
                return Err(Error::Registry(format!("duplicate feature name `{}`", e.name)));
            }
            if e.popularity && e.group != FeatureGroup::Document {
                return Err(Error::Registry(format!(
                    "popularity feature `{}` must be a document feature",
                    e.name
                )));
            }
            if let Some(key) = &e.attribute_key {
                if key.is_empty() || key.contains(',') {
                    return Err(Error::Registry(format!("invalid attribute key `{key}`")));
                }
            }
        }
        Ok(FeatureRegistry { entries })
    }

    /// Registry of `n` unnamed query-document features `f1..fn`.
    pub fn anonymous(n: usize) -> Self {
        FeatureRegistry {
            entries: (1..=n as u32)
                .map(|id| FeatureEntry {
                    id,
                    name: format!("f{id}"),
                    group: FeatureGroup::QueryDocument,
                    attribute_key: None,
                    popularity: false,
                })
                .collect(),
        }
    }

    /// Appends a feature with the next id.
    pub fn push(
        &mut self,
        name: impl Into<String>,
        group: FeatureGroup,
        attribute_key: Option<String>,
        popularity: bool,
    ) -> Result<u32> {
        let id = self.entries.len() as u32 + 1;
        let mut entries = self.entries.clone();
        entries.push(FeatureEntry {
            id,
            name: name.into(),
            group,
            attribute_key,
            popularity,
        });
        *self = FeatureRegistry::new(entries)?;
        Ok(id)
    }

    pub fn entries(&self) -> &[FeatureEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: u32) -> Option<&FeatureEntry> {
        id.checked_sub(1).and_then(|i| self.entries.get(i as usize))
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.id)
    }

    pub fn popularity_ids(&self) -> Vec<u32> {
        self.entries.iter().filter(|e| e.popularity).map(|e| e.id).collect()
    }

    pub fn attribute_ids(&self) -> Vec<u32> {
        self.entries
            .iter()
            .filter(|e| e.attribute_key.is_some())
            .map(|e| e.id)
            .collect()
    }

    pub fn all_ids(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.id).collect()
    }

    /// Sub-registry of the given ascending ids, renumbered from 1.
    pub fn project(&self, ids: &[u32]) -> Result<FeatureRegistry> {
        let entries = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| {
                self.entry(id)
                    .map(|e| FeatureEntry {
                        id: i as u32 + 1,
                        ..e.clone()
                    })
                    .ok_or_else(|| Error::Registry(format!("unknown feature id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureRegistry::new(entries)
    }

    /// CSV with header `id,name,group,attribute_key,popularity_flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,name,group,attribute_key,popularity_flag\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.id,
                e.name,
                e.group,
                e.attribute_key.as_deref().unwrap_or(""),
                e.popularity
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "id,name,group,attribute_key,popularity_flag" => {}
            _ => return Err(Error::parse(1, "missing registry header")),
        }
        let mut entries = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::parse(line_no, format!("expected 5 columns, found {}", cols.len())));
            }
            let id = cols[0]
                .trim()
                .parse::<u32>()
                .map_err(|e| Error::parse(line_no, format!("bad id: {e}")))?;
            let group = cols[2]
                .trim()
                .parse()
                .map_err(|e: Error| Error::parse(line_no, e.to_string()))?;
            let key = cols[3].trim();
            let popularity = match cols[4].trim() {
                "true" => true,
                "false" => false,
                other => return Err(Error::parse(line_no, format!("bad popularity_flag `{other}`"))),
            };
            entries.push(FeatureEntry {
                id,
                name: cols[1].trim().to_string(),
                group,
                attribute_key: (!key.is_empty()).then(|| key.to_string()),
                popularity,
            });
        }
        FeatureRegistry::new(entries)
    }

    /// Short hex digest identifying the registry layout.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_csv().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut r = FeatureRegistry::default();
        r.push("bm25f", FeatureGroup::QueryDocument, None, false).unwrap();
        r.push("rating", FeatureGroup::Document, None, true).unwrap();
        r.push("avm:d1.color", FeatureGroup::QueryDocument, Some("d1.color".into()), false)
            .unwrap();
        let back = FeatureRegistry::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.fingerprint(), r.fingerprint());
    }

    #[test]
    fn invariants_enforced() {
        let mut r = FeatureRegistry::default();
        r.push("a", FeatureGroup::Query, None, false).unwrap();
        assert!(r.push("a", FeatureGroup::Query, None, false).is_err());
        assert!(r.push("pop", FeatureGroup::QueryDocument, None, true).is_err());
        assert_eq!(r.len(), 1);

        let gap = "id,name,group,attribute_key,popularity_flag\n2,a,query,,false\n";
        assert!(FeatureRegistry::from_csv(gap).is_err());
    }
}
