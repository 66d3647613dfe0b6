use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TextField {
    Title,
    Description,
    Brand,
}

impl TextField {
    pub const ALL: [TextField; 3] = [TextField::Title, TextField::Description, TextField::Brand];

    pub fn name(self) -> &'static str {
        match self {
            TextField::Title => "title",
            TextField::Description => "description",
            TextField::Brand => "brand",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextFields {
    pub title: Vec<String>,
    pub description: Vec<String>,
    pub brand: Vec<String>,
}

impl TextFields {
    pub fn field(&self, f: TextField) -> &[String] {
        match f {
            TextField::Title => &self.title,
            TextField::Description => &self.description,
            TextField::Brand => &self.brand,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bm25fParams {
    pub k1: f64,
    pub b: f64,
    /// Indexed like `TextField::ALL`.
    pub field_weights: [f64; 3],
}

impl Default for Bm25fParams {
    fn default() -> Self {
        Bm25fParams {
            k1: 1.2,
            b: 0.75,
            field_weights: [2.0, 1.0, 1.5],
        }
    }
}

impl Bm25fParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0) || !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("invalid BM25F k1={} b={}", self.k1, self.b)));
        }
        if self.field_weights.iter().any(|w| *w < 0.0 || !w.is_finite())
            || !self.field_weights.iter().any(|w| *w > 0.0)
        {
            return Err(Error::Config("BM25F needs a positive field weight".into()));
        }
        Ok(())
    }

    /// Same parameters with only `field` weighted (at 1).
    pub fn single_field(&self, field: TextField) -> Bm25fParams {
        let mut w = [0.0; 3];
        w[field.index()] = 1.0;
        Bm25fParams {
            field_weights: w,
            ..self.clone()
        }
    }
}

/// Document frequencies and mean field lengths over a document collection.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub num_docs: usize,
    pub doc_freq: HashMap<String, usize>,
    pub avg_field_len: [f64; 3],
}

impl CorpusStats {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a TextFields>) -> Self {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut total = [0usize; 3];
        let mut n = 0;
        for d in docs {
            n += 1;
            let mut seen: Vec<&str> = Vec::new();
            for f in TextField::ALL {
                total[f.index()] += d.field(f).len();
                seen.extend(d.field(f).iter().map(String::as_str));
            }
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *doc_freq.entry(t.to_string()).or_insert(0) += 1;
            }
        }
        let avg = |i: usize| if n > 0 { total[i] as f64 / n as f64 } else { 0.0 };
        CorpusStats {
            num_docs: n,
            doc_freq,
            avg_field_len: [avg(0), avg(1), avg(2)],
        }
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        let n = self.num_docs as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }
}

/// Unique query terms in first-appearance order.
pub fn unique_terms(query: &[String]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::with_capacity(query.len());
    for t in query {
        if !out.contains(&t.as_str()) {
            out.push(t);
        }
    }
    out
}

/// BM25F: field term frequencies are length-normalized per field, weighted and
/// summed into one pseudo-frequency per term, then saturated with `k1`.
pub fn bm25f_score(query: &[String], doc: &TextFields, params: &Bm25fParams, stats: &CorpusStats) -> f64 {
    let mut score = 0.0;
    for term in unique_terms(query) {
        let mut tf = 0.0;
        for f in TextField::ALL {
            let w = params.field_weights[f.index()];
            if w == 0.0 {
                continue;
            }
            let tokens = doc.field(f);
            let count = tokens.iter().filter(|t| t.as_str() == term).count();
            if count == 0 {
                continue;
            }
            let avg = stats.avg_field_len[f.index()];
            let norm = if avg > 0.0 {
                1.0 - params.b + params.b * tokens.len() as f64 / avg
            } else {
                1.0
            };
            tf += w * count as f64 / norm;
        }
        if tf > 0.0 {
            score += stats.idf(term) * tf * (params.k1 + 1.0) / (params.k1 + tf);
        }
    }
    score
}

/// Inverted index for scoring a query against a whole collection at once.
pub struct Bm25fIndex {
    stats: CorpusStats,
    postings: HashMap<String, Vec<(u32, [u16; 3])>>,
    lengths: Vec<[u32; 3]>,
}

impl Bm25fIndex {
    pub fn new<'a>(docs: impl IntoIterator<Item = &'a TextFields> + Clone) -> Self {
        let stats = CorpusStats::from_documents(docs.clone());
        let mut postings: HashMap<String, Vec<(u32, [u16; 3])>> = HashMap::new();
        let mut lengths = Vec::new();
        for (i, d) in docs.into_iter().enumerate() {
            let mut counts: HashMap<&str, [u16; 3]> = HashMap::new();
            for f in TextField::ALL {
                for t in d.field(f) {
                    counts.entry(t).or_default()[f.index()] += 1;
                }
            }
            let mut terms: Vec<_> = counts.into_iter().collect();
            terms.sort_unstable_by(|a, b| a.0.cmp(b.0));
            for (t, c) in terms {
                postings.entry(t.to_string()).or_default().push((i as u32, c));
            }
            lengths.push([d.title.len() as u32, d.description.len() as u32, d.brand.len() as u32]);
        }
        Bm25fIndex {
            stats,
            postings,
            lengths,
        }
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    /// Scores of every document sharing a term with the query, by index.
    pub fn score_all(&self, query: &[String], params: &Bm25fParams) -> Vec<(usize, f64)> {
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in unique_terms(query) {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = self.stats.idf(term);
            for &(doc, counts) in list {
                let mut tf = 0.0;
                for f in TextField::ALL {
                    let (c, w) = (counts[f.index()], params.field_weights[f.index()]);
                    if c == 0 || w == 0.0 {
                        continue;
                    }
                    let avg = self.stats.avg_field_len[f.index()];
                    let len = self.lengths[doc as usize][f.index()] as f64;
                    let norm = if avg > 0.0 { 1.0 - params.b + params.b * len / avg } else { 1.0 };
                    tf += w * c as f64 / norm;
                }
                if tf > 0.0 {
                    *acc.entry(doc).or_insert(0.0) += idf * tf * (params.k1 + 1.0) / (params.k1 + tf);
                }
            }
        }
        let mut out: Vec<(usize, f64)> = acc.into_iter().map(|(d, s)| (d as usize, s)).collect();
        out.sort_unstable_by_key(|(d, _)| *d);
        out
    }
}
