use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::standardize::Standardizer;
use crate::dataset::{Objective, RankingDataset};
use crate::error::{Error, Result};
use crate::metrics::Scorer;

/// Insensitivity margin of the support-vector regressors.
pub const SVR_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearMode {
    Classifier,
    Regressor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Logistic,
    Hinge,
    SquaredHinge,
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularizer {
    L1,
    L2,
}

/// The six supported (mode, loss, regularizer) combinations. For regressors
/// `Hinge` means the epsilon-insensitive absolute loss and `Squared` its square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinearVariant {
    L1Lr,
    L2Lr,
    L1L2Svmc,
    L2L1Svmc,
    L2L2Svmr,
    L2L1Svmr,
}

impl LinearVariant {
    pub const ALL: [LinearVariant; 6] = [
        LinearVariant::L1Lr,
        LinearVariant::L2Lr,
        LinearVariant::L1L2Svmc,
        LinearVariant::L2L1Svmc,
        LinearVariant::L2L2Svmr,
        LinearVariant::L2L1Svmr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LinearVariant::L1Lr => "l1lr",
            LinearVariant::L2Lr => "l2lr",
            LinearVariant::L1L2Svmc => "l1l2svmc",
            LinearVariant::L2L1Svmc => "l2l1svmc",
            LinearVariant::L2L2Svmr => "l2l2svmr",
            LinearVariant::L2L1Svmr => "l2l1svmr",
        }
    }

    pub fn mode(self) -> LinearMode {
        match self {
            LinearVariant::L2L2Svmr | LinearVariant::L2L1Svmr => LinearMode::Regressor,
            _ => LinearMode::Classifier,
        }
    }

    pub fn loss(self) -> Loss {
        match self {
            LinearVariant::L1Lr | LinearVariant::L2Lr => Loss::Logistic,
            LinearVariant::L1L2Svmc => Loss::SquaredHinge,
            LinearVariant::L2L1Svmc | LinearVariant::L2L1Svmr => Loss::Hinge,
            LinearVariant::L2L2Svmr => Loss::Squared,
        }
    }

    pub fn regularizer(self) -> Regularizer {
        match self {
            LinearVariant::L1Lr | LinearVariant::L1L2Svmc => Regularizer::L1,
            _ => Regularizer::L2,
        }
    }

    pub fn resolve(mode: LinearMode, loss: Loss, regularizer: Regularizer) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.mode() == mode && v.loss() == loss && v.regularizer() == regularizer)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unsupported linear model: {mode:?} with {loss:?} loss and {regularizer:?} regularization"
                ))
            })
    }

    /// Per-instance loss at prediction `f` for target `y` (±1 or a grade).
    pub fn loss_value(self, f: f64, y: f64) -> f64 {
        match (self.mode(), self.loss()) {
            (LinearMode::Classifier, Loss::Logistic) => softplus(-y * f),
            (LinearMode::Classifier, Loss::Hinge) => (1.0 - y * f).max(0.0),
            (LinearMode::Classifier, Loss::SquaredHinge) => (1.0 - y * f).max(0.0).powi(2),
            (LinearMode::Regressor, Loss::Squared) => ((f - y).abs() - SVR_EPSILON).max(0.0).powi(2),
            (LinearMode::Regressor, Loss::Hinge) => ((f - y).abs() - SVR_EPSILON).max(0.0),
            _ => unreachable!("variants cover only supported combinations"),
        }
    }

    /// Derivative of `loss_value` in `f` (a subgradient at kinks).
    pub fn loss_derivative(self, f: f64, y: f64) -> f64 {
        match (self.mode(), self.loss()) {
            (LinearMode::Classifier, Loss::Logistic) => -y * sigmoid(-y * f),
            (LinearMode::Classifier, Loss::Hinge) => {
                if y * f < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            (LinearMode::Classifier, Loss::SquaredHinge) => -2.0 * y * (1.0 - y * f).max(0.0),
            (LinearMode::Regressor, Loss::Squared) => {
                let r = f - y;
                2.0 * (r.abs() - SVR_EPSILON).max(0.0) * r.signum()
            }
            (LinearMode::Regressor, Loss::Hinge) => {
                let r = f - y;
                if r.abs() > SVR_EPSILON {
                    r.signum()
                } else {
                    0.0
                }
            }
            _ => unreachable!("variants cover only supported combinations"),
        }
    }

    /// Training target for a grade.
    pub fn target(self, grade: u8) -> f64 {
        match self.mode() {
            LinearMode::Classifier => {
                if grade >= 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            LinearMode::Regressor => grade as f64,
        }
    }
}

impl fmt::Display for LinearVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinearVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown linear model `{s}`")))
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `R(w) + C * sum_i loss(w·x_i + b, y_i)` with `R = |w|_1` or `|w|^2 / 2`;
/// the bias is not regularized.
pub struct LinearObjective<'a> {
    pub variant: LinearVariant,
    pub c: f64,
    pub x: &'a [Vec<f64>],
    pub y: &'a [f64],
}

impl LinearObjective<'_> {
    pub fn value(&self, w: &[f64], b: f64) -> f64 {
        let reg = match self.variant.regularizer() {
            Regularizer::L1 => w.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::L2 => 0.5 * w.iter().map(|v| v * v).sum::<f64>(),
        };
        let loss: f64 = self
            .x
            .iter()
            .zip(self.y)
            .map(|(x, &y)| self.variant.loss_value(dot(w, x) + b, y))
            .sum();
        reg + self.c * loss
    }

    pub fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let mut gw: Vec<f64> = match self.variant.regularizer() {
            Regularizer::L1 => w.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect(),
            Regularizer::L2 => w.to_vec(),
        };
        let mut gb = 0.0;
        for (x, &y) in self.x.iter().zip(self.y) {
            let d = self.c * self.variant.loss_derivative(dot(w, x) + b, y);
            for (g, &xi) in gw.iter_mut().zip(x) {
                *g += d * xi;
            }
            gb += d;
        }
        (gw, gb)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConfig {
    pub variant: LinearVariant,
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl LinearConfig {
    pub fn new(variant: LinearVariant) -> Self {
        LinearConfig {
            variant,
            c: 1.0,
            epochs: 20,
            learning_rate: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub variant: LinearVariant,
    pub c: f64,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Maps raw features to the space the weights live in.
    pub standardizer: Standardizer,
}

impl LinearModel {
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        self.standardizer.check(features)?;
        Ok(self.score_unchecked(features))
    }

    fn score_unchecked(&self, features: &[f64]) -> f64 {
        let mut s = self.bias;
        for (((&x, &w), &m), &sd) in features
            .iter()
            .zip(&self.weights)
            .zip(&self.standardizer.means)
            .zip(&self.standardizer.scales)
        {
            s += w * ((x - m) / sd);
        }
        s
    }
}

impl Scorer for LinearModel {
    fn score(&self, features: &[f64]) -> f64 {
        self.score_unchecked(features)
    }
}

/// Standardized rows and targets for one objective.
pub(crate) fn prepared_rows(
    dataset: &RankingDataset,
    objective: Objective,
    standardizer: &Standardizer,
) -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
    if dataset.num_instances() == 0 {
        return Err(Error::Training("empty training set".into()));
    }
    dataset.require_objective(objective)?;
    let mut rows = Vec::with_capacity(dataset.num_instances());
    let mut grades = Vec::with_capacity(dataset.num_instances());
    for g in dataset.groups() {
        for inst in &g.instances {
            rows.push(standardizer.apply(inst.features.values()));
            grades.push(inst.labels.get(objective).expect("objective checked"));
        }
    }
    Ok((rows, grades))
}

/// Seeded stochastic subgradient descent on the per-instance objective
/// `R(w) / (n C) + loss_i`, whose minimizer matches `LinearObjective`'s.
/// L2 shrinkage is applied multiplicatively and L1 through a cumulative
/// clipped penalty, so L1 weights reach exact zeros.
pub fn train_linear(
    dataset: &RankingDataset,
    objective: Objective,
    config: &LinearConfig,
) -> Result<LinearModel> {
    if !(config.c > 0.0 && config.c.is_finite()) {
        return Err(Error::Config(format!("C = {} must be positive", config.c)));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    let standardizer = Standardizer::fit(dataset);
    let (rows, grades) = prepared_rows(dataset, objective, &standardizer)?;
    let y: Vec<f64> = grades.iter().map(|&g| config.variant.target(g)).collect();
    let (weights, bias) = sgd(&rows, &y, config);
    Ok(LinearModel {
        variant: config.variant,
        c: config.c,
        weights,
        bias,
        standardizer,
    })
}

pub(crate) fn sgd(rows: &[Vec<f64>], y: &[f64], config: &LinearConfig) -> (Vec<f64>, f64) {
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    let lambda = 1.0 / (n as f64 * config.c);
    let mean_sq = rows.iter().map(|r| dot(r, r)).sum::<f64>() / n as f64;
    let base = config.learning_rate / (mean_sq + 1.0);
    let variant = config.variant;

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    // Cumulative L1 penalty bookkeeping.
    let mut u = 0.0;
    let mut q = vec![0.0; d];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut t = 0usize;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = base / (1.0 + t as f64 / n as f64);
            t += 1;
            let x = &rows[i];
            let g = variant.loss_derivative(dot(&w, x) + b, y[i]);
            if g != 0.0 {
                for (wj, &xj) in w.iter_mut().zip(x) {
                    *wj -= eta * g * xj;
                }
                b -= eta * g;
            }
            match variant.regularizer() {
                Regularizer::L2 => {
                    let shrink = (1.0 - eta * lambda).max(0.0);
                    w.iter_mut().for_each(|wj| *wj *= shrink);
                }
                Regularizer::L1 => {
                    u += eta * lambda;
                    for (wj, qj) in w.iter_mut().zip(q.iter_mut()) {
                        let z = *wj;
                        if z > 0.0 {
                            *wj = (z - (u + *qj)).max(0.0);
                        } else if z < 0.0 {
                            *wj = (z + (u - *qj)).min(0.0);
                        }
                        *qj += *wj - z;
                    }
                }
            }
        }
    }
    (w, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn six_variants_and_rejections() {
        for v in LinearVariant::ALL {
            assert_eq!(LinearVariant::resolve(v.mode(), v.loss(), v.regularizer()).unwrap(), v);
            assert_eq!(v.name().parse::<LinearVariant>().unwrap(), v);
        }
        assert!(LinearVariant::resolve(LinearMode::Regressor, Loss::Logistic, Regularizer::L2).is_err());
        assert!(LinearVariant::resolve(LinearMode::Classifier, Loss::Squared, Regularizer::L1).is_err());
        assert!(LinearVariant::resolve(LinearMode::Regressor, Loss::Squared, Regularizer::L1).is_err());
    }

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        while rows.len() < n {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = x[0] + 0.5 * x[1];
            if m.abs() < 0.2 {
                continue;
            }
            y.push(m.signum());
            rows.push(x);
        }
        (rows, y)
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let (rows, y) = separable(200, 1);
        for v in [LinearVariant::L1Lr, LinearVariant::L2Lr, LinearVariant::L1L2Svmc, LinearVariant::L2L1Svmc] {
            let config = LinearConfig {
                epochs: 200,
                c: 100.0,
                ..LinearConfig::new(v)
            };
            let (w, b) = sgd(&rows, &y, &config);
            let correct = rows.iter().zip(&y).filter(|(x, &t)| (dot(&w, x) + b) * t > 0.0).count();
            assert_eq!(correct, rows.len(), "{v}");
        }
    }

    #[test]
    fn tiny_c_shrinks_weights() {
        let (rows, y) = separable(100, 2);
        for v in LinearVariant::ALL {
            let config = LinearConfig {
                c: 1e-8,
                ..LinearConfig::new(v)
            };
            let (w, _) = sgd(&rows, &y, &config);
            assert!(w.iter().all(|x| x.abs() <= 1e-3), "{v}: {w:?}");
        }
    }

    #[test]
    fn l1_zeroes_noise_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = rows.iter().map(|x| (x[0] - x[1]).signum()).collect();
        let config = LinearConfig {
            c: 0.05,
            epochs: 30,
            ..LinearConfig::new(LinearVariant::L1Lr)
        };
        let (w, _) = sgd(&rows, &y, &config);
        assert!(w.iter().skip(2).any(|&x| x == 0.0), "{w:?}");
        assert!(w[0] > 0.0 && w[1] < 0.0);
    }

    #[test]
    fn subgradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for v in LinearVariant::ALL {
            let x: Vec<Vec<f64>> = (0..12)
                .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let y: Vec<f64> = (0..12).map(|_| v.target(rng.random_range(0..=4))).collect();
            let obj = LinearObjective { variant: v, c: 0.7, x: &x, y: &y };
            for _ in 0..20 {
                let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b = rng.random_range(-1.0..1.0);
                let (gw, gb) = obj.gradient(&w, b);
                let h = 1e-6;
                for j in 0..4 {
                    let mut up = w.clone();
                    let mut dn = w.clone();
                    up[j] += h;
                    dn[j] -= h;
                    let fd = (obj.value(&up, b) - obj.value(&dn, b)) / (2.0 * h);
                    assert!((fd - gw[j]).abs() <= 1e-4 * fd.abs().max(1.0), "{v} w{j}: {fd} vs {}", gw[j]);
                }
                let fd = (obj.value(&w, b + h) - obj.value(&w, b - h)) / (2.0 * h);
                assert!((fd - gb).abs() <= 1e-4 * fd.abs().max(1.0), "{v} b: {fd} vs {gb}");
            }
        }
    }

    #[test]
    fn score_examples() {
        let m = LinearModel {
            variant: LinearVariant::L2Lr,
            c: 1.0,
            weights: vec![1.0],
            bias: 0.0,
            standardizer: Standardizer::identity(1),
        };
        assert_eq!(m.score(&[0.7]).unwrap(), 0.7);
        assert!(m.score(&[0.7, 1.0]).is_err());
        let zero = LinearModel {
            weights: vec![0.0; 3],
            standardizer: Standardizer::identity(3),
            ..m
        };
        assert_eq!(zero.score(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }
}
