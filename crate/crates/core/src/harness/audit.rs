use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{Cell, Provenance, ReportTable};
use crate::dataset::{DocId, EngagementRecord, Objective, QueryId, RankingDataset};
use crate::error::{Error, Result};
use crate::labels::label_distribution;
use crate::metrics::{entropy, info_gain};
use crate::synth::SyntheticWorld;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrowdJudgment {
    pub query_id: QueryId,
    pub doc_id: DocId,
    pub rating: u8,
}

/// Parses `query_id,doc_id,rating` CSV with a header line.
pub fn parse_judgments(input: impl Read) -> Result<Vec<CrowdJudgment>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(["query_id", "doc_id", "rating"]) {
        return Err(Error::parse(1, "expected header `query_id,doc_id,rating`"));
    }
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<CrowdJudgment>().enumerate() {
        let j = row.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        if j.rating > 4 {
            return Err(Error::LabelRange {
                line: i + 2,
                value: j.rating as i64,
            });
        }
        out.push(j);
    }
    Ok(out)
}

pub fn read_judgments(path: impl AsRef<Path>) -> Result<Vec<CrowdJudgment>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_judgments(std::io::BufReader::new(file))
}

pub fn judgments_csv(judgments: &[CrowdJudgment]) -> String {
    let mut out = String::from("query_id,doc_id,rating\n");
    for j in judgments {
        out.push_str(&format!("{},{},{}\n", j.query_id, j.doc_id, j.rating));
    }
    out
}

/// Judges every logged pair from its true utility: 4 at or above
/// `threshold`, otherwise 0.
pub fn synthetic_judgments(
    world: &SyntheticWorld,
    records: &[EngagementRecord],
    threshold: f64,
) -> Result<Vec<CrowdJudgment>> {
    let utilities = world.utilities(records)?;
    Ok(records
        .iter()
        .zip(utilities)
        .map(|(r, u)| CrowdJudgment {
            query_id: r.query_id,
            doc_id: r.doc_id.clone(),
            rating: if u >= threshold { 4 } else { 0 },
        })
        .collect())
}

pub const CLICK_BINS: [&str; 3] = ["0", "1-4", ">=5"];

pub fn click_bin(clicks: u64) -> usize {
    match clicks {
        0 => 0,
        1..=4 => 1,
        _ => 2,
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Rating-4 items per query and click bin, with the spread of their top-2
/// impressions and click rates. The middle bin is flagged optional.
pub fn run_crowdsourcing_audit(
    judgments: &[CrowdJudgment],
    logs: &[EngagementRecord],
    provenance: Provenance,
) -> Result<ReportTable> {
    let mut table = ReportTable::new(
        "Click data for items rated 4",
        &[
            "query_id",
            "click_bin",
            "optional",
            "items",
            "mean_impressions_top2",
            "median_impressions_top2",
            "max_impressions_top2",
            "mean_ctr",
        ],
        provenance,
    );
    let index: HashMap<(QueryId, &DocId), &EngagementRecord> =
        logs.iter().map(|r| ((r.query_id, &r.doc_id), r)).collect();
    let mut per_query: BTreeMap<QueryId, [Vec<&EngagementRecord>; 3]> = BTreeMap::new();
    let mut uncovered = 0usize;
    let mut rated = 0usize;
    for j in judgments.iter().filter(|j| j.rating == 4) {
        rated += 1;
        match index.get(&(j.query_id, &j.doc_id)) {
            Some(r) => per_query.entry(j.query_id).or_default()[click_bin(r.clicks)].push(r),
            None => uncovered += 1,
        }
    }
    if rated == 0 {
        table.notes.push("no rating-4 judgments".into());
        return Ok(table);
    }
    if uncovered > 0 {
        table.notes.push(format!("{uncovered} rating-4 pairs missing from the log were excluded"));
    }
    for (q, bins) in per_query {
        for (b, records) in bins.iter().enumerate() {
            let mut row = vec![
                Cell::Int(q.0 as i64),
                Cell::text(CLICK_BINS[b]),
                Cell::text(if b == 1 { "yes" } else { "no" }),
                Cell::Int(records.len() as i64),
            ];
            if records.is_empty() {
                row.extend((0..4).map(|_| Cell::text("")));
            } else {
                let mut top2: Vec<f64> = records.iter().map(|r| r.impressions_top2 as f64).collect();
                top2.sort_by(f64::total_cmp);
                let n = top2.len() as f64;
                let ctr = records
                    .iter()
                    .map(|r| if r.impressions == 0 { 0.0 } else { r.clicks as f64 / r.impressions as f64 })
                    .sum::<f64>()
                    / n;
                row.extend([
                    Cell::Real(top2.iter().sum::<f64>() / n),
                    Cell::Real(median(&top2)),
                    Cell::Real(top2[top2.len() - 1]),
                    Cell::Real(ctr),
                ]);
            }
            table.push(row)?;
        }
    }
    Ok(table)
}

/// Information gain of every feature against the grades of `objective`,
/// histogrammed into `buckets` equal-width buckets over `[0, H(grades)]`.
pub fn info_gain_report(
    dataset: &RankingDataset,
    objective: Objective,
    bins: usize,
    buckets: usize,
    provenance: Provenance,
) -> Result<(ReportTable, Vec<(String, f64)>)> {
    dataset.require_objective(objective)?;
    if buckets == 0 {
        return Err(Error::Config("bucket count must be positive".into()));
    }
    let mut grades = Vec::with_capacity(dataset.num_instances());
    let mut columns = vec![Vec::with_capacity(dataset.num_instances()); dataset.num_features()];
    for g in dataset.groups() {
        for inst in &g.instances {
            grades.push(inst.labels.get(objective).unwrap_or(0));
            for (c, v) in columns.iter_mut().zip(inst.features.values()) {
                c.push(*v);
            }
        }
    }
    let gains: Vec<(String, f64)> = if grades.is_empty() {
        dataset.registry().entries().iter().map(|e| (e.name.clone(), 0.0)).collect()
    } else {
        dataset
            .registry()
            .entries()
            .iter()
            .zip(&columns)
            .map(|(e, c)| Ok((e.name.clone(), info_gain(c, &grades, bins)?.max(0.0))))
            .collect::<Result<_>>()?
    };
    let top = if grades.is_empty() { 0.0 } else { entropy(&grades) };
    let mut counts = vec![0usize; buckets];
    for (_, g) in &gains {
        let b = if top > 0.0 {
            ((g / top * buckets as f64) as usize).min(buckets - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    let mut table = ReportTable::new(
        format!("Feature information gain, {objective}"),
        &["bucket", "gain_low", "gain_high", "features"],
        provenance,
    );
    for (b, c) in counts.iter().enumerate() {
        table.push(vec![
            Cell::Int(b as i64),
            Cell::Real(top * b as f64 / buckets as f64),
            Cell::Real(top * (b + 1) as f64 / buckets as f64),
            Cell::Int(*c as i64),
        ])?;
    }
    Ok((table, gains))
}

/// Per-query normalized grade frequencies averaged over queries.
pub fn label_distribution_table(dataset: &RankingDataset, provenance: Provenance) -> Result<ReportTable> {
    let mut table = ReportTable::new(
        "Label distribution",
        &["objective", "grade_0", "grade_1", "grade_2", "grade_3", "grade_4"],
        provenance,
    );
    for o in Objective::ALL {
        if !dataset.has_objective(o) {
            continue;
        }
        let d = label_distribution(dataset, o)?;
        let mut row = vec![Cell::text(o.name())];
        row.extend(d.iter().map(|x| Cell::Real(*x)));
        table.push(row)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureRegistry, FeatureVector, Labels, QueryGroup, RankingInstance};

    fn prov() -> Provenance {
        Provenance {
            experiment: "audit".into(),
            seed: 0,
            config: "x".into(),
        }
    }

    fn record(q: u64, d: &str, impressions: u64, top2: u64, clicks: u64) -> EngagementRecord {
        EngagementRecord {
            query_id: QueryId(q),
            doc_id: DocId::from(d),
            impressions,
            impressions_top2: top2,
            clicks,
            atc: 0,
            orders: 0,
            revenue: 0.0,
        }
    }

    fn judge(q: u64, d: &str, rating: u8) -> CrowdJudgment {
        CrowdJudgment {
            query_id: QueryId(q),
            doc_id: DocId::from(d),
            rating,
        }
    }

    #[test]
    fn zero_click_items_fill_one_bin() {
        let logs = vec![record(1, "a", 100, 10, 0), record(1, "b", 50, 30, 0), record(1, "c", 80, 0, 9)];
        let judgments = vec![judge(1, "a", 4), judge(1, "b", 4), judge(1, "c", 3)];
        let t = run_crowdsourcing_audit(&judgments, &logs, prov()).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.real(&["1", "0"], "items"), Some(2.0));
        assert_eq!(t.real(&["1", "0"], "mean_impressions_top2"), Some(20.0));
        assert_eq!(t.real(&["1", "0"], "median_impressions_top2"), Some(20.0));
        assert_eq!(t.real(&["1", "0"], "max_impressions_top2"), Some(30.0));
        assert_eq!(t.real(&["1", ">=5"], "items"), Some(0.0));
    }

    #[test]
    fn uncovered_and_empty() {
        let logs = vec![record(1, "a", 100, 10, 7)];
        let t = run_crowdsourcing_audit(&[judge(1, "a", 4), judge(2, "z", 4)], &logs, prov()).unwrap();
        assert_eq!(t.real(&["1", ">=5"], "items"), Some(1.0));
        assert_eq!(t.notes.len(), 1);
        let t = run_crowdsourcing_audit(&[judge(1, "a", 2)], &logs, prov()).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.notes, vec!["no rating-4 judgments".to_string()]);
    }

    #[test]
    fn judgments_csv_round_trip() {
        let js = vec![judge(3, "p01", 4), judge(4, "p02", 0)];
        let text = judgments_csv(&js);
        assert_eq!(parse_judgments(text.as_bytes()).unwrap(), js);
        assert!(parse_judgments("query_id,doc_id,rating\n1,a,5\n".as_bytes()).is_err());
        assert!(parse_judgments("q,d,r\n1,a,1\n".as_bytes()).is_err());
        assert!(parse_judgments("query_id,doc_id,rating\n1,a\n".as_bytes()).is_err());
    }

    fn dataset() -> RankingDataset {
        // Feature 1 constant, feature 2 equal to the grade.
        let groups = (1..=20)
            .map(|q| QueryGroup {
                query_id: QueryId(q),
                instances: (0..5u8)
                    .map(|g| RankingInstance {
                        query_id: QueryId(q),
                        doc_id: DocId(format!("d{g}")),
                        features: FeatureVector::new(vec![1.0, g as f64]),
                        labels: Labels::single(Objective::Ctr, g),
                    })
                    .collect(),
            })
            .collect();
        RankingDataset::new(FeatureRegistry::anonymous(2), groups).unwrap()
    }

    #[test]
    fn info_gain_extremes() {
        let (t, gains) = info_gain_report(&dataset(), Objective::Ctr, 10, 20, prov()).unwrap();
        assert_eq!(gains[0].1, 0.0);
        assert!((gains[1].1 - 5f64.log2()).abs() < 1e-12);
        assert_eq!(t.rows.len(), 20);
        assert_eq!(t.rows[0][3], Cell::Int(1));
        assert_eq!(t.rows[19][3], Cell::Int(1));
    }

    #[test]
    fn label_distribution_rows() {
        let t = label_distribution_table(&dataset(), prov()).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!((t.real(&["ctr"], "grade_4").unwrap() - 0.2).abs() < 1e-12);
    }
}
