use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Real(f64),
    Int(i64),
    /// Cell whose computation failed, with the reason.
    Failed(String),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Cell::Real(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Real(x) if x.is_nan() => "nan".into(),
            Cell::Real(x) => format!("{x:.4}"),
            Cell::Int(i) => i.to_string(),
            Cell::Failed(why) => format!("failed: {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub experiment: String,
    pub seed: u64,
    pub config: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub provenance: Provenance,
    pub notes: Vec<String>,
}

impl ReportTable {
    pub fn new(title: impl Into<String>, columns: &[&str], provenance: Provenance) -> Self {
        ReportTable {
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            provenance,
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Dimension {
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// First row whose leading cells render as `keys`.
    pub fn find(&self, keys: &[&str]) -> Option<&[Cell]> {
        self.rows
            .iter()
            .find(|r| keys.iter().zip(r.iter()).all(|(k, c)| c.render() == *k))
            .map(Vec::as_slice)
    }

    pub fn real(&self, keys: &[&str], column: &str) -> Option<f64> {
        self.find(keys)?.get(self.column(column)?)?.as_real()
    }

    pub fn to_csv(&self) -> Result<String> {
        let p = &self.provenance;
        let mut out = format!(
            "# provenance: experiment={} seed={} config={}\n",
            p.experiment, p.seed, p.config
        );
        for note in &self.notes {
            out.push_str(&format!("# note: {note}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let body = w.into_inner().map_err(|e| Error::Experiment(e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| Error::Experiment(e.to_string()))?);
        Ok(out)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("### {}\n\n", self.title);
        out.push_str(&format!("| {} |\n", self.columns.join(" | ")));
        out.push_str(&format!("|{}\n", "---|".repeat(self.columns.len())));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.render().replace('|', "\\|")).collect();
            out.push_str(&format!("| {} |\n", cells.join(" | ")));
        }
        for note in &self.notes {
            out.push_str(&format!("\n_{note}_\n"));
        }
        out
    }

    /// Writes `<name>.csv` and `<name>.md` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, name: &str) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(format!("{name}.csv"));
        fs::write(&csv_path, self.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
        let md_path = dir.join(format!("{name}.md"));
        fs::write(&md_path, self.to_markdown()).map_err(|e| Error::io(&md_path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ReportTable {
        let mut t = ReportTable::new(
            "demo",
            &["algorithm", "ndcg"],
            Provenance {
                experiment: "comparison".into(),
                seed: 42,
                config: "abcd".into(),
            },
        );
        t.push(vec![Cell::text("lambdamart"), Cell::Real(0.123456)]).unwrap();
        t.push(vec![Cell::text("a,b"), Cell::Failed("boom".into())]).unwrap();
        t
    }

    #[test]
    fn csv_layout() {
        let csv = table().to_csv().unwrap();
        assert_eq!(
            csv,
            "# provenance: experiment=comparison seed=42 config=abcd\nalgorithm,ndcg\nlambdamart,0.1235\n\"a,b\",failed: boom\n"
        );
    }

    #[test]
    fn rectangular() {
        let mut t = table();
        assert!(t.push(vec![Cell::Int(1)]).is_err());
        assert_eq!(t.real(&["lambdamart"], "ndcg"), Some(0.123456));
        assert_eq!(t.real(&["a,b"], "ndcg"), None);
        assert!(t.to_markdown().contains("| lambdamart | 0.1235 |"));
    }
}
