//! LETOR text format.
//!
//! ```text
//! # objective=ctr features=273
//! 2 qid:7 1:0.5 3:1 # docid=p42
//! ```
//!
//! One objective per file; features absent from a line are 0. The header
//! objective may be `none` for unlabeled feature files, in which case every
//! label is written as 0 and ignored on read.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{
    format_sig9, DocId, FeatureRegistry, FeatureVector, Labels, Objective, QueryGroup, QueryId,
    RankingDataset, RankingInstance,
};
use crate::error::{Error, Result};

/// A parsed LETOR file: the objective named in its header and the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LetorData {
    pub objective: Option<Objective>,
    pub dataset: RankingDataset,
}

/// Parses one instance line. `line_no` is used for error reporting only.
pub fn parse_letor_line(
    line: &str,
    line_no: usize,
    objective: Option<Objective>,
    num_features: usize,
) -> Result<RankingInstance> {
    let (body, comment) = match line.find('#') {
        Some(pos) => (&line[..pos], Some(&line[pos + 1..])),
        None => (line, None),
    };
    let mut tokens = body.split_whitespace();

    let label_tok = tokens
        .next()
        .ok_or_else(|| Error::parse(line_no, "empty instance line"))?;
    if label_tok.starts_with("qid:") {
        return Err(Error::parse(line_no, "missing label"));
    }
    let label: i64 = label_tok
        .parse()
        .map_err(|_| Error::parse(line_no, format!("malformed label `{label_tok}`")))?;
    if !(0..=4).contains(&label) {
        return Err(Error::LabelRange {
            line: line_no,
            value: label,
        });
    }

    let qid_tok = tokens
        .next()
        .ok_or_else(|| Error::parse(line_no, "missing qid"))?;
    let query_id = qid_tok
        .strip_prefix("qid:")
        .and_then(|q| q.parse::<u64>().ok())
        .map(QueryId)
        .ok_or_else(|| Error::parse(line_no, format!("malformed qid `{qid_tok}`")))?;

    let mut values = vec![0.0; num_features];
    let mut last_fid = 0u32;
    for tok in tokens {
        let (fid, val) = tok
            .split_once(':')
            .ok_or_else(|| Error::parse(line_no, format!("malformed feature `{tok}`")))?;
        let fid: u32 = fid
            .parse()
            .map_err(|_| Error::parse(line_no, format!("malformed feature id in `{tok}`")))?;
        if fid == 0 {
            return Err(Error::parse(line_no, "feature ids start at 1"));
        }
        if fid <= last_fid {
            return Err(Error::parse(
                line_no,
                format!("feature id {fid} not strictly increasing (after {last_fid})"),
            ));
        }
        if fid as usize > num_features {
            return Err(Error::parse(
                line_no,
                format!("feature id {fid} exceeds feature count {num_features}"),
            ));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| Error::parse(line_no, format!("malformed feature value in `{tok}`")))?;
        if !val.is_finite() {
            return Err(Error::parse(line_no, format!("non-finite feature value in `{tok}`")));
        }
        values[fid as usize - 1] = val;
        last_fid = fid;
    }

    let doc_id = comment
        .map(str::trim)
        .and_then(|c| c.strip_prefix("docid="))
        .map(str::trim)
        .filter(|d| !d.is_empty() && !d.contains(char::is_whitespace))
        .ok_or_else(|| Error::parse(line_no, "missing `# docid=<id>` comment"))?;

    Ok(RankingInstance {
        query_id,
        doc_id: DocId(doc_id.to_string()),
        features: FeatureVector::new(values),
        labels: match objective {
            Some(o) => Labels::single(o, label as u8),
            None => Labels::default(),
        },
    })
}

fn parse_header(line: &str, line_no: usize) -> Result<(Option<Objective>, usize)> {
    let rest = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(line_no, "missing `# objective=<name> features=<n>` header"))?;
    let mut objective = None;
    let mut features = None;
    for kv in rest.split_whitespace() {
        match kv.split_once('=') {
            Some(("objective", "none")) => objective = Some(None),
            Some(("objective", name)) => {
                objective = Some(Some(
                    name.parse()
                        .map_err(|e: Error| Error::parse(line_no, e.to_string()))?,
                ))
            }
            Some(("features", n)) => {
                features = Some(
                    n.parse::<usize>()
                        .map_err(|_| Error::parse(line_no, format!("bad feature count `{n}`")))?,
                )
            }
            _ => {}
        }
    }
    match (objective, features) {
        (Some(o), Some(n)) => Ok((o, n)),
        _ => Err(Error::parse(line_no, "header must carry objective= and features=")),
    }
}

/// Parses a whole LETOR document against `registry`.
pub fn parse_letor(text: &str, registry: &FeatureRegistry) -> Result<LetorData> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (objective, count) = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((n, l)) => break parse_header(l, n)?,
            None => return Err(Error::parse(1, "empty file: missing header")),
        }
    };
    if count != registry.len() {
        return Err(Error::RegistryMismatch {
            expected: registry.len(),
            found: count,
        });
    }

    let mut order: Vec<QueryId> = Vec::new();
    let mut groups: HashMap<QueryId, Vec<RankingInstance>> = HashMap::new();
    for (line_no, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let inst = parse_letor_line(trimmed, line_no, objective, count)?;
        let entry = groups.entry(inst.query_id).or_insert_with(|| {
            order.push(inst.query_id);
            Vec::new()
        });
        entry.push(inst);
    }
    let groups = order
        .into_iter()
        .map(|q| QueryGroup {
            query_id: q,
            instances: groups.remove(&q).unwrap_or_default(),
        })
        .collect();
    Ok(LetorData {
        objective,
        dataset: RankingDataset::new(registry.clone(), groups)?,
    })
}

/// Serializes `dataset` with the labels of `objective` (`None` writes an
/// unlabeled feature file).
pub fn format_letor(dataset: &RankingDataset, objective: Option<Objective>) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# objective={} features={}",
        objective.map_or("none", Objective::name),
        dataset.num_features()
    );
    for group in dataset.groups() {
        for inst in &group.instances {
            let label = match objective {
                Some(o) => inst.labels.get(o).ok_or_else(|| {
                    Error::Construction(format!(
                        "({}, {}) has no {o} label",
                        inst.query_id, inst.doc_id
                    ))
                })?,
                None => 0,
            };
            if inst.doc_id.as_str().is_empty()
                || inst.doc_id.as_str().contains(|c: char| c.is_whitespace() || c == '#')
            {
                return Err(Error::Construction(format!(
                    "doc id `{}` cannot be serialized",
                    inst.doc_id
                )));
            }
            let _ = write!(out, "{label} qid:{}", inst.query_id);
            for (i, &v) in inst.features.values().iter().enumerate() {
                if v != 0.0 {
                    let _ = write!(out, " {}:{}", i + 1, format_sig9(v));
                }
            }
            let _ = writeln!(out, " # docid={}", inst.doc_id);
        }
    }
    Ok(out)
}

pub fn read_dataset(path: impl AsRef<Path>, registry: &FeatureRegistry) -> Result<LetorData> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_letor(&text, registry)
}

pub fn write_dataset(
    dataset: &RankingDataset,
    objective: Option<Objective>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let text = format_letor(dataset, objective)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
