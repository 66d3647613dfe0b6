use crate::dataset::RankingDataset;
use crate::error::{Error, Result};

/// Per-feature affine map to zero mean and unit variance, fit on training data.
/// Constant features keep a unit scale so they map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn identity(n: usize) -> Self {
        Standardizer {
            means: vec![0.0; n],
            scales: vec![1.0; n],
        }
    }

    pub fn fit(dataset: &RankingDataset) -> Self {
        let d = dataset.num_features();
        let mut mean = vec![0.0; d];
        let mut m2 = vec![0.0; d];
        let mut n = 0.0;
        for g in dataset.groups() {
            for inst in &g.instances {
                n += 1.0;
                for (j, &x) in inst.features.values().iter().enumerate() {
                    let delta = x - mean[j];
                    mean[j] += delta / n;
                    m2[j] += delta * (x - mean[j]);
                }
            }
        }
        let scales = m2
            .iter()
            .map(|&s| {
                let sd = if n > 0.0 { (s / n).sqrt() } else { 0.0 };
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { means: mean, scales }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            x.iter()
                .zip(self.means.iter().zip(&self.scales))
                .map(|(&v, (&m, &s))| (v - m) / s),
        );
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        self.apply_into(x, &mut out);
        out
    }

    pub(crate) fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.len() {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.len(),
                found: x.len(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DocId, FeatureRegistry, FeatureVector, Labels, Objective, QueryGroup, QueryId, RankingInstance};

    #[test]
    fn zero_mean_unit_variance() {
        let rows = [[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]];
        let groups = vec![QueryGroup {
            query_id: QueryId(1),
            instances: rows
                .iter()
                .enumerate()
                .map(|(i, r)| RankingInstance {
                    query_id: QueryId(1),
                    doc_id: DocId(format!("d{i}")),
                    features: FeatureVector::new(r.to_vec()),
                    labels: Labels::single(Objective::Ctr, 0),
                })
                .collect(),
        }];
        let ds = RankingDataset::new(FeatureRegistry::anonymous(2), groups).unwrap();
        let s = Standardizer::fit(&ds);
        assert_eq!(s.means, vec![3.0, 5.0]);
        assert!((s.scales[0] - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(s.scales[1], 1.0);
        assert_eq!(s.apply(&[3.0, 5.0]), vec![0.0, 0.0]);
    }
}
