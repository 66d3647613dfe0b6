//! Engagement log CSV:
//! `query_id,doc_id,impressions,impressions_top2,clicks,atc,orders,revenue`.

use std::io::Read;
use std::path::Path;

use super::EngagementRecord;
use crate::error::{Error, Result};

const HEADER: [&str; 8] = [
    "query_id",
    "doc_id",
    "impressions",
    "impressions_top2",
    "clicks",
    "atc",
    "orders",
    "revenue",
];

/// Parsed log plus funnel-consistency warnings. Inconsistent records are kept.
#[derive(Debug, Clone, Default)]
pub struct EngagementLog {
    pub records: Vec<EngagementRecord>,
    pub warnings: Vec<String>,
}

pub fn parse_engagement_csv(input: impl Read) -> Result<EngagementLog> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::parse(1, format!("expected header `{}`", HEADER.join(","))));
    }
    let mut log = EngagementLog::default();
    for (i, row) in reader.deserialize::<EngagementRecord>().enumerate() {
        let line = i + 2;
        let record = row.map_err(|e| Error::parse(line, e.to_string()))?;
        if !record.revenue.is_finite() || record.revenue < 0.0 {
            return Err(Error::parse(line, format!("invalid revenue {}", record.revenue)));
        }
        log.warnings.extend(
            record
                .consistency_warnings()
                .into_iter()
                .map(|w| format!("line {line}: {w}")),
        );
        log.records.push(record);
    }
    Ok(log)
}

pub fn read_engagement_log(path: impl AsRef<Path>) -> Result<EngagementLog> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_engagement_csv(std::io::BufReader::new(file))
}

pub fn write_engagement_log(records: &[EngagementRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(&HEADER.join(","));
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.query_id, r.doc_id, r.impressions, r.impressions_top2, r.clicks, r.atc, r.orders, r.revenue
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_warns() {
        let csv = "query_id,doc_id,impressions,impressions_top2,clicks,atc,orders,revenue\n\
                   1,p1,200,20,10,2,1,50\n\
                   1,p2,100,0,5,6,0,0\n";
        let log = parse_engagement_csv(csv.as_bytes()).unwrap();
        assert_eq!(log.records.len(), 2);
        assert_eq!(log.records[0].revenue, 50.0);
        assert_eq!(log.warnings.len(), 1);
        assert!(log.warnings[0].contains("atc > clicks"));
    }

    #[test]
    fn rejects_negative_counts() {
        let csv = "query_id,doc_id,impressions,impressions_top2,clicks,atc,orders,revenue\n\
                   1,p1,-5,0,0,0,0,0\n";
        assert!(parse_engagement_csv(csv.as_bytes()).is_err());
        let csv = "query_id,doc_id,impressions,impressions_top2,clicks,atc,orders,revenue\n\
                   1,p1,5,0,0,0,0,-1\n";
        assert!(parse_engagement_csv(csv.as_bytes()).is_err());
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(parse_engagement_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let records = vec![EngagementRecord {
            query_id: crate::dataset::QueryId(4),
            doc_id: "p9".into(),
            impressions: 300,
            impressions_top2: 40,
            clicks: 12,
            atc: 3,
            orders: 2,
            revenue: 39.98,
        }];
        write_engagement_log(&records, &path).unwrap();
        assert_eq!(read_engagement_log(&path).unwrap().records, records);
    }
}
