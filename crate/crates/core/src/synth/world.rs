use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::catalog::{derive_popularity_fields, generate_catalog, SyntheticProduct};
use super::queries::{generate_queries, QueryIntent};
use super::simulate::{derive_seed, simulate_sessions};
use super::spec::SynthSpec;
use super::utility::true_utility;
use crate::dataset::{write_engagement_log, DocId, EngagementRecord, QueryId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub spec: SynthSpec,
    pub seed: u64,
    pub catalog: Vec<SyntheticProduct>,
    pub queries: Vec<QueryIntent>,
}

pub fn generate_world(spec: &SynthSpec, seed: u64) -> Result<SyntheticWorld> {
    spec.validate()?;
    let mut catalog = generate_catalog(&spec.catalog, derive_seed(seed, 1));
    derive_popularity_fields(&mut catalog, &spec.user_model, &spec.simulation, derive_seed(seed, 2));
    let queries = generate_queries(&catalog, &spec.queries, derive_seed(seed, 3));
    Ok(SyntheticWorld {
        spec: spec.clone(),
        seed,
        catalog,
        queries,
    })
}

impl SyntheticWorld {
    /// Engagement log from the world's own seed.
    pub fn simulate(&self) -> Vec<EngagementRecord> {
        simulate_sessions(
            &self.catalog,
            &self.queries,
            &self.spec.user_model,
            &self.spec.simulation,
            derive_seed(self.seed, 4),
        )
    }

    pub fn product_index(&self) -> HashMap<&DocId, &SyntheticProduct> {
        self.catalog.iter().map(|p| (&p.doc_id, p)).collect()
    }

    pub fn query_index(&self) -> HashMap<QueryId, &QueryIntent> {
        self.queries.iter().map(|q| (q.query_id, q)).collect()
    }

    /// Ground-truth utility of every logged pair, in log order.
    pub fn utilities(&self, records: &[EngagementRecord]) -> Result<Vec<f64>> {
        let products = self.product_index();
        let queries = self.query_index();
        records
            .iter()
            .map(|r| {
                let q = queries
                    .get(&r.query_id)
                    .ok_or_else(|| Error::Precondition(format!("unknown query {}", r.query_id)))?;
                let p = products
                    .get(&r.doc_id)
                    .ok_or_else(|| Error::Precondition(format!("unknown product {}", r.doc_id)))?;
                Ok(true_utility(q, p, &self.spec.user_model))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("world serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let world: SyntheticWorld =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        world.spec.validate()?;
        Ok(world)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Writes `world.json`, `catalog.csv`, `queries.csv`, `engagement.csv`
    /// and `utility.csv` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>, records: &[EngagementRecord]) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("world.json");
        fs::write(&json, self.to_json()).map_err(|e| Error::io(&json, e))?;

        let mut w = csv_writer(&dir.join("catalog.csv"))?;
        w.write_record([
            "doc_id",
            "department",
            "price",
            "quality",
            "popularity_prior",
            "sales_count",
            "rating",
            "review_count",
            "attributes",
            "title",
        ])?;
        for p in &self.catalog {
            let attrs: Vec<String> = p.attributes.iter().map(|(k, v)| format!("{k}={v}")).collect();
            w.write_record([
                p.doc_id.to_string(),
                p.department.clone(),
                p.price.to_string(),
                p.quality.to_string(),
                p.popularity_prior.to_string(),
                p.sales_count.to_string(),
                p.rating.to_string(),
                p.review_count.to_string(),
                attrs.join(";"),
                p.text_fields.title.join(" "),
            ])?;
        }
        w.flush().map_err(|e| Error::io(dir.join("catalog.csv"), e))?;

        let mut w = csv_writer(&dir.join("queries.csv"))?;
        w.write_record(["query_id", "department", "sessions", "text", "required_attributes"])?;
        for q in &self.queries {
            let req: Vec<String> = q
                .required_attributes
                .iter()
                .map(|(k, r)| format!("{k}={}:{}", r.value, r.criticality))
                .collect();
            w.write_record([
                q.query_id.to_string(),
                q.department.clone(),
                q.sessions.to_string(),
                q.text.join(" "),
                req.join(";"),
            ])?;
        }
        w.flush().map_err(|e| Error::io(dir.join("queries.csv"), e))?;

        write_engagement_log(records, dir.join("engagement.csv"))?;

        let utilities = self.utilities(records)?;
        let mut w = csv_writer(&dir.join("utility.csv"))?;
        w.write_record(["query_id", "doc_id", "true_utility"])?;
        for (r, u) in records.iter().zip(utilities) {
            w.write_record([r.query_id.to_string(), r.doc_id.to_string(), u.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(dir.join("utility.csv"), e))?;
        Ok(())
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}
