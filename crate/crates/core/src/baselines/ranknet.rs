use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::linear::{prepared_rows, sigmoid, softplus};
use super::standardize::Standardizer;
use crate::dataset::{Objective, RankingDataset};
use crate::error::{Error, Result};
use crate::metrics::Scorer;

/// One hidden layer of sigmoid units feeding a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct RankNetModel {
    pub inputs: usize,
    pub hidden: usize,
    /// Row-major `hidden x inputs`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub standardizer: Standardizer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankNetConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for RankNetConfig {
    fn default() -> Self {
        RankNetConfig {
            hidden: 10,
            learning_rate: 0.05,
            epochs: 20,
            seed: 0,
        }
    }
}

/// A query's standardized inputs and grades.
pub struct PairQuery {
    pub rows: Vec<Vec<f64>>,
    pub grades: Vec<u8>,
}

impl RankNetModel {
    pub fn new(inputs: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = 1.0 / (inputs.max(1) as f64).sqrt();
        let r2 = 1.0 / (hidden.max(1) as f64).sqrt();
        RankNetModel {
            inputs,
            hidden,
            w1: (0..inputs * hidden).map(|_| rng.random_range(-r1..r1)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.random_range(-r2..r2)).collect(),
            b2: 0.0,
            standardizer: Standardizer::identity(inputs),
        }
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Parameters flattened as `w1, b1, w2, b2`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        p.extend(&self.w1);
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, rest) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2 = rest[0];
    }

    /// Output on already standardized input, filling hidden activations.
    fn forward(&self, x: &[f64], h: &mut [f64]) -> f64 {
        let mut out = self.b2;
        for k in 0..self.hidden {
            let row = &self.w1[k * self.inputs..(k + 1) * self.inputs];
            let z = self.b1[k] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            h[k] = sigmoid(z);
            out += self.w2[k] * h[k];
        }
        out
    }

    /// Forward pass on standardized input.
    pub fn forward_standardized(&self, x: &[f64]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        self.forward(x, &mut h)
    }

    pub fn score(&self, features: &[f64]) -> Result<f64> {
        self.standardizer.check(features)?;
        Ok(Scorer::score(self, features))
    }

    /// Mean pairwise cross-entropy per query, summed over queries, and its
    /// gradient with respect to `params()`.
    pub fn loss_and_gradient(&self, queries: &[PairQuery]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.num_params()];
        let mut loss = 0.0;
        let mut hidden = Vec::new();
        let mut scores = Vec::new();
        let mut lambdas = Vec::new();
        for q in queries {
            loss += self.query_step(q, &mut grad, &mut hidden, &mut scores, &mut lambdas);
        }
        (loss, grad)
    }

    /// Accumulates one query's gradient into `grad`; returns its loss.
    fn query_step(
        &self,
        q: &PairQuery,
        grad: &mut [f64],
        hidden: &mut Vec<f64>,
        scores: &mut Vec<f64>,
        lambdas: &mut Vec<f64>,
    ) -> f64 {
        let n = q.rows.len();
        let hsz = self.hidden;
        hidden.clear();
        hidden.resize(n * hsz, 0.0);
        scores.clear();
        for (i, x) in q.rows.iter().enumerate() {
            let s = self.forward(x, &mut hidden[i * hsz..(i + 1) * hsz]);
            scores.push(s);
        }
        lambdas.clear();
        lambdas.resize(n, 0.0);
        let mut pairs = 0usize;
        let mut loss = 0.0;
        for i in 0..n {
            for j in 0..n {
                if q.grades[i] > q.grades[j] {
                    let diff = scores[i] - scores[j];
                    loss += softplus(-diff);
                    let d = -sigmoid(-diff);
                    lambdas[i] += d;
                    lambdas[j] -= d;
                    pairs += 1;
                }
            }
        }
        if pairs == 0 {
            return 0.0;
        }
        let norm = 1.0 / pairs as f64;
        let (w1_len, b1_len) = (self.w1.len(), self.b1.len());
        for (i, x) in q.rows.iter().enumerate() {
            let l = lambdas[i] * norm;
            if l == 0.0 {
                continue;
            }
            let h = &hidden[i * hsz..(i + 1) * hsz];
            for k in 0..hsz {
                grad[w1_len + b1_len + k] += l * h[k];
                let dz = l * self.w2[k] * h[k] * (1.0 - h[k]);
                grad[w1_len + k] += dz;
                let row = &mut grad[k * self.inputs..(k + 1) * self.inputs];
                for (g, &xv) in row.iter_mut().zip(x) {
                    *g += dz * xv;
                }
            }
            grad[w1_len + b1_len + hsz] += l;
        }
        loss * norm
    }
}

impl Scorer for RankNetModel {
    fn score(&self, features: &[f64]) -> f64 {
        let mut out = self.b2;
        for k in 0..self.hidden {
            let row = &self.w1[k * self.inputs..(k + 1) * self.inputs];
            let mut z = self.b1[k];
            for (((&w, &x), &m), &s) in row
                .iter()
                .zip(features)
                .zip(&self.standardizer.means)
                .zip(&self.standardizer.scales)
            {
                z += w * ((x - m) / s);
            }
            out += self.w2[k] * sigmoid(z);
        }
        out
    }
}

/// Per-query stochastic gradient descent over a seeded query order.
pub fn train_ranknet(
    dataset: &RankingDataset,
    objective: Objective,
    config: &RankNetConfig,
) -> Result<RankNetModel> {
    if config.hidden == 0 {
        return Err(Error::Config("RankNet needs at least one hidden unit".into()));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    let standardizer = Standardizer::fit(dataset);
    let (rows, grades) = prepared_rows(dataset, objective, &standardizer)?;
    let mut queries = Vec::with_capacity(dataset.num_queries());
    let mut rows = rows.into_iter();
    let mut grades = grades.into_iter();
    for g in dataset.groups() {
        let q = PairQuery {
            rows: rows.by_ref().take(g.len()).collect(),
            grades: grades.by_ref().take(g.len()).collect(),
        };
        let has_pair = q.grades.iter().any(|&a| q.grades.iter().any(|&b| a > b));
        if has_pair {
            queries.push(q);
        }
    }
    if queries.is_empty() {
        return Err(Error::Training("no query has documents with unequal grades".into()));
    }

    let mut model = RankNetModel::new(dataset.num_features(), config.hidden, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..queries.len()).collect();
    let mut grad = vec![0.0; model.num_params()];
    let (mut hidden, mut scores, mut lambdas) = (Vec::new(), Vec::new(), Vec::new());
    let mut params = model.params();
    for epoch in 0..config.epochs {
        let eta = config.learning_rate / (1.0 + epoch as f64 * 0.1);
        order.shuffle(&mut rng);
        for &qi in &order {
            grad.iter_mut().for_each(|g| *g = 0.0);
            model.query_step(&queries[qi], &mut grad, &mut hidden, &mut scores, &mut lambdas);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= eta * g;
            }
            model.set_params(&params);
        }
    }
    model.standardizer = standardizer;
    Ok(model)
}
