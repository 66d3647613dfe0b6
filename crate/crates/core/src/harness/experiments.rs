use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::folds::FoldAssignment;
use super::report::{Cell, Provenance, ReportTable};
use crate::baselines::{train_linear, train_ranknet, LinearConfig, LinearVariant};
use crate::config::Config;
use crate::dataset::{Objective, QueryId, RankingDataset};
use crate::error::{Error, Result};
use crate::features::intersection_feature_selection;
use crate::gbdt::{train_lambdamart, train_random_forest};
use crate::metrics::{mean_ndcg, mean_of_scored, per_query_ndcg, wilcoxon_signed_rank, Scorer};
use crate::model::{ModelFile, RankModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    LambdaMart,
    RandomForest,
    RankNet,
    Linear(LinearVariant),
}

impl Algorithm {
    /// LambdaMART, random forest, RankNet and the six linear variants.
    pub fn all() -> Vec<Algorithm> {
        let mut v = vec![Algorithm::LambdaMart, Algorithm::RandomForest, Algorithm::RankNet];
        v.extend(LinearVariant::ALL.map(Algorithm::Linear));
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::LambdaMart => "lambdamart",
            Algorithm::RandomForest => "rf",
            Algorithm::RankNet => "ranknet",
            Algorithm::Linear(v) => v.name(),
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(self, Algorithm::Linear(_))
    }

    /// Trains on `dataset` with the settings in `config`, seeding the
    /// learner with `seed`.
    pub fn train(self, dataset: &RankingDataset, objective: Objective, config: &Config, seed: u64) -> Result<RankModel> {
        Ok(match self {
            Algorithm::LambdaMart => {
                let c = crate::gbdt::LambdaMartConfig {
                    seed,
                    ..config.lambdamart.clone()
                };
                RankModel::Trees(train_lambdamart(dataset, objective, &c)?)
            }
            Algorithm::RandomForest => {
                let c = crate::gbdt::RandomForestConfig {
                    seed,
                    ..config.forest.clone()
                };
                RankModel::Trees(train_random_forest(dataset, objective, &c)?)
            }
            Algorithm::RankNet => {
                let c = crate::baselines::RankNetConfig {
                    seed,
                    ..config.ranknet.clone()
                };
                RankModel::RankNet(train_ranknet(dataset, objective, &c)?)
            }
            Algorithm::Linear(variant) => {
                let c = LinearConfig {
                    variant,
                    c: config.linear.c,
                    epochs: config.linear.epochs,
                    learning_rate: config.linear.learning_rate,
                    seed,
                };
                RankModel::Linear(train_linear(dataset, objective, &c)?)
            }
        })
    }

    /// Training parameters recorded in model files.
    pub fn params(self, config: &Config) -> Vec<(String, String)> {
        let text = config.to_text();
        let prefixes: &[&str] = match self {
            Algorithm::LambdaMart => &["trees.", "boosting.", "learning.", "lambdamart."],
            Algorithm::RandomForest => &["rf."],
            Algorithm::RankNet => &["ranknet."],
            Algorithm::Linear(_) => &["linear."],
        };
        text.lines()
            .filter(|l| prefixes.iter().any(|p| l.starts_with(p)))
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    pub fn model_file(
        self,
        model: RankModel,
        objective: Objective,
        dataset: &RankingDataset,
        config: &Config,
    ) -> ModelFile {
        ModelFile {
            algorithm: self.name().to_string(),
            objective,
            registry_fingerprint: dataset.registry().fingerprint(),
            config_fingerprint: config.fingerprint(),
            params: self.params(config),
            model,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambdamart" => Ok(Algorithm::LambdaMart),
            "rf" => Ok(Algorithm::RandomForest),
            "ranknet" => Ok(Algorithm::RankNet),
            other => other
                .parse()
                .map(Algorithm::Linear)
                .map_err(|_| Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Models of one algorithm per fold and objective; failures keep their
/// message so reports can mark the cell.
#[derive(Debug, Clone)]
pub struct FoldModels {
    pub algorithm: Algorithm,
    pub objectives: Vec<Objective>,
    /// `models[fold][objective index]`.
    pub models: Vec<Vec<std::result::Result<RankModel, String>>>,
}

impl FoldModels {
    pub fn get(&self, fold: usize, objective: Objective) -> Option<&std::result::Result<RankModel, String>> {
        let i = self.objectives.iter().position(|&o| o == objective)?;
        self.models.get(fold)?.get(i)
    }
}

/// Cross-validated training of `algorithm` on each objective.
pub fn train_fold_models(
    dataset: &RankingDataset,
    folds: &FoldAssignment,
    algorithm: Algorithm,
    objectives: &[Objective],
    config: &Config,
    seed: u64,
) -> FoldModels {
    let models = (0..folds.k)
        .map(|f| {
            let (train, _) = folds.split(dataset, f);
            objectives
                .iter()
                .map(|&o| algorithm.train(&train, o, config, seed).map_err(|e| e.to_string()))
                .collect()
        })
        .collect();
    FoldModels {
        algorithm,
        objectives: objectives.to_vec(),
        models,
    }
}

/// Mean train and test NDCG@k over folds for any scorer factory.
pub fn cross_validate<S: Scorer>(
    dataset: &RankingDataset,
    folds: &FoldAssignment,
    objective: Objective,
    k: usize,
    mut model_for: impl FnMut(usize, &RankingDataset) -> std::result::Result<S, String>,
) -> std::result::Result<(f64, f64), String> {
    let (mut train_sum, mut test_sum) = (0.0, 0.0);
    for f in 0..folds.k {
        let (train, test) = folds.split(dataset, f);
        let model = model_for(f, &train)?;
        train_sum += mean_ndcg(&model, &train, objective, k).map_err(|e| e.to_string())?;
        test_sum += mean_ndcg(&model, &test, objective, k).map_err(|e| e.to_string())?;
    }
    Ok((train_sum / folds.k as f64, test_sum / folds.k as f64))
}

fn ndcg_cells(r: std::result::Result<(f64, f64), String>) -> [Cell; 2] {
    match r {
        Ok((a, b)) => [Cell::Real(a), Cell::Real(b)],
        Err(e) => [Cell::Failed(e.clone()), Cell::Failed(e)],
    }
}

fn objective_columns(first: &str, objectives: &[Objective]) -> Vec<String> {
    let mut cols = vec![first.to_string()];
    for o in objectives {
        cols.push(format!("{o}_train"));
        cols.push(format!("{o}_test"));
    }
    cols
}

/// One row per trained algorithm, train/test NDCG@k per objective.
pub fn comparison_table(
    dataset: &RankingDataset,
    folds: &FoldAssignment,
    trained: &[FoldModels],
    objectives: &[Objective],
    k: usize,
    provenance: Provenance,
) -> Result<ReportTable> {
    let cols = objective_columns("algorithm", objectives);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = ReportTable::new("Ranking algorithms, NDCG@10", &cols, provenance);
    for fm in trained {
        let mut row = vec![Cell::text(fm.algorithm.name())];
        for &o in objectives {
            let r = cross_validate(dataset, folds, o, k, |f, _| match fm.get(f, o) {
                Some(Ok(m)) => Ok(move |x: &[f64]| Scorer::score(m, x)),
                Some(Err(e)) => Err(e.clone()),
                None => Err(format!("{o} not trained")),
            });
            row.extend(ndcg_cells(r));
        }
        table.push(row)?;
    }
    Ok(table)
}

pub fn run_algorithm_comparison(
    dataset: &RankingDataset,
    algorithms: &[Algorithm],
    objectives: &[Objective],
    folds: &FoldAssignment,
    config: &Config,
    seed: u64,
) -> Result<ReportTable> {
    let trained: Vec<FoldModels> = algorithms
        .iter()
        .map(|&a| train_fold_models(dataset, folds, a, objectives, config, seed))
        .collect();
    comparison_table(
        dataset,
        folds,
        &trained,
        objectives,
        config.experiment.ndcg_k,
        provenance("comparison", seed, config),
    )
}

pub fn provenance(experiment: &str, seed: u64, config: &Config) -> Provenance {
    Provenance {
        experiment: experiment.to_string(),
        seed,
        config: config.fingerprint(),
    }
}

/// LambdaMART with all features against LambdaMART without the popularity
/// group, cross-validated on `objective`.
pub fn run_popularity_ablation(
    dataset: &RankingDataset,
    objective: Objective,
    folds: &FoldAssignment,
    config: &Config,
    seed: u64,
) -> Result<ReportTable> {
    let popularity = dataset.registry().popularity_ids();
    if popularity.is_empty() {
        return Err(Error::Experiment("registry has no popularity features".into()));
    }
    let keep: Vec<u32> = dataset
        .registry()
        .all_ids()
        .into_iter()
        .filter(|id| !popularity.contains(id))
        .collect();
    let reduced = dataset.project(&keep)?;
    let k = config.experiment.ndcg_k;
    let mut table = ReportTable::new(
        format!("Popularity features, {objective}"),
        &["features", "num_features", "train_ndcg", "test_ndcg"],
        provenance("ablation", seed, config),
    );
    for (name, data) in [("with_popularity", dataset), ("without_popularity", &reduced)] {
        let r = cross_validate(data, folds, objective, k, |_, train| {
            Algorithm::LambdaMart
                .train(train, objective, config, seed)
                .map_err(|e| e.to_string())
        });
        let mut row = vec![Cell::text(name), Cell::Int(data.num_features() as i64)];
        row.extend(ndcg_cells(r));
        table.push(row)?;
    }
    Ok(table)
}

/// Seeded draw of up to `n` distinct departments, sorted.
pub fn sample_departments(departments: &HashMap<QueryId, String>, n: usize, seed: u64) -> Vec<String> {
    let mut all: Vec<&String> = departments.values().collect();
    all.sort();
    all.dedup();
    let mut picked: Vec<String> = all
        .choose_multiple(&mut ChaCha8Rng::seed_from_u64(seed), n)
        .map(|d| (*d).clone())
        .collect();
    picked.sort();
    picked
}

/// Per department: train on every other department, test on it, once with
/// all features and once with the intersection selection.
pub fn run_department_holdout(
    dataset: &RankingDataset,
    query_departments: &HashMap<QueryId, String>,
    departments: &[String],
    objective: Objective,
    config: &Config,
    seed: u64,
) -> Result<ReportTable> {
    let k = config.experiment.ndcg_k;
    let mut table = ReportTable::new(
        format!("Department holdout, {objective}"),
        &[
            "department",
            "train_pairs",
            "test_pairs",
            "num_features",
            "selected_features",
            "test_ndcg_all",
            "test_ndcg_intersection",
            "increase_pct",
        ],
        provenance("holdout", seed, config),
    );
    for dept in departments {
        let in_dept = |q: QueryId| query_departments.get(&q) == Some(dept);
        let test = dataset.filter_queries(in_dept);
        let train = dataset.filter_queries(|q| !in_dept(q));
        if test.is_empty() || train.is_empty() {
            table.notes.push(format!("{dept}: skipped, no queries on one side"));
            continue;
        }
        let all = Algorithm::LambdaMart.train(&train, objective, config, seed)?;
        let base = mean_ndcg(&all, &test, objective, k)?;
        let ids = intersection_feature_selection(&train, &test, config.experiment.min_support)?;
        let (train_sel, test_sel) = (train.project(&ids)?, test.project(&ids)?);
        let selected = Algorithm::LambdaMart.train(&train_sel, objective, config, seed)?;
        let improved = mean_ndcg(&selected, &test_sel, objective, k)?;
        table.push(vec![
            Cell::text(dept.as_str()),
            Cell::Int(train.num_instances() as i64),
            Cell::Int(test.num_instances() as i64),
            Cell::Int(dataset.num_features() as i64),
            Cell::Int(ids.len() as i64),
            Cell::Real(base),
            Cell::Real(improved),
            Cell::Real(100.0 * (improved - base) / base),
        ])?;
    }
    Ok(table)
}

/// Per-query test NDCG@k for every (training objective, test objective),
/// pooled over folds.
pub type CrossObjectiveScores = BTreeMap<(Objective, Objective), Vec<(QueryId, Option<f64>)>>;

pub fn cross_objective_scores(
    dataset: &RankingDataset,
    folds: &FoldAssignment,
    trained: &FoldModels,
    k: usize,
) -> Result<CrossObjectiveScores> {
    let mut out: CrossObjectiveScores = BTreeMap::new();
    for f in 0..folds.k {
        let (_, test) = folds.split(dataset, f);
        for &train_o in &trained.objectives {
            let model = match trained.get(f, train_o) {
                Some(Ok(m)) => m,
                Some(Err(e)) => return Err(Error::Training(e.clone())),
                None => return Err(Error::Experiment(format!("no model for {train_o}"))),
            };
            for test_o in Objective::ALL {
                let scores = per_query_ndcg(model, &test, test_o, k)?;
                out.entry((train_o, test_o)).or_default().extend(scores);
            }
        }
    }
    for v in out.values_mut() {
        v.sort_by_key(|(q, _)| *q);
    }
    Ok(out)
}

/// Rows are training objectives, columns test objectives; cells are mean
/// test NDCG@k.
pub fn cross_objective_table(scores: &CrossObjectiveScores, provenance: Provenance) -> Result<ReportTable> {
    let mut cols = vec!["train_objective".to_string()];
    cols.extend(Objective::ALL.iter().map(|o| format!("test_{o}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = ReportTable::new("Cross objective learning, NDCG@10", &cols, provenance);
    let trained: Vec<Objective> = scores.keys().map(|(t, _)| *t).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    for train_o in trained {
        let mut row = vec![Cell::text(train_o.name())];
        for test_o in Objective::ALL {
            row.push(match scores.get(&(train_o, test_o)) {
                Some(s) => match mean_of_scored(s) {
                    Ok(x) => Cell::Real(x),
                    Err(e) => Cell::Failed(e.to_string()),
                },
                None => Cell::Failed("not trained".into()),
            });
        }
        table.push(row)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSet {
    pub test_objective: Objective,
    pub best: Objective,
    pub optimal: Vec<Objective>,
    pub suboptimal: Vec<Objective>,
    /// Two-sided p-value of each training objective against the best.
    pub p_values: Vec<(Objective, f64)>,
}

/// For each test objective, the training objectives not significantly worse
/// than the column best under a paired Wilcoxon test at `level`.
pub fn run_significance(scores: &CrossObjectiveScores, level: f64) -> Result<Vec<OptimalSet>> {
    let mut out = Vec::new();
    for test_o in Objective::ALL {
        let column: Vec<(Objective, BTreeMap<QueryId, f64>)> = scores
            .iter()
            .filter(|((_, t), _)| *t == test_o)
            .map(|((train_o, _), v)| (*train_o, v.iter().filter_map(|(q, x)| x.map(|x| (*q, x))).collect()))
            .collect();
        if column.is_empty() {
            continue;
        }
        let mean = |m: &BTreeMap<QueryId, f64>| m.values().sum::<f64>() / m.len().max(1) as f64;
        let (best, best_scores) = column
            .iter()
            .max_by(|a, b| mean(&a.1).total_cmp(&mean(&b.1)))
            .map(|(o, s)| (*o, s))
            .expect("nonempty column");
        let mut set = OptimalSet {
            test_objective: test_o,
            best,
            optimal: Vec::new(),
            suboptimal: Vec::new(),
            p_values: Vec::new(),
        };
        for (train_o, s) in &column {
            let pairs: Vec<(f64, f64)> = best_scores
                .iter()
                .filter_map(|(q, b)| s.get(q).map(|x| (*b, *x)))
                .collect();
            if pairs.is_empty() {
                return Err(Error::Experiment(format!("no paired queries for {train_o} on {test_o}")));
            }
            let r = wilcoxon_signed_rank(&pairs, level)?;
            set.p_values.push((*train_o, r.p_value));
            if *train_o != best && r.significant && r.statistic > 0.0 {
                set.suboptimal.push(*train_o);
            } else {
                set.optimal.push(*train_o);
            }
        }
        out.push(set);
    }
    Ok(out)
}

pub fn significance_table(sets: &[OptimalSet], provenance: Provenance) -> Result<ReportTable> {
    let mut cols = vec!["test_objective", "best", "optimal", "suboptimal"].into_iter().map(String::from).collect::<Vec<_>>();
    cols.extend(Objective::ALL.iter().map(|o| format!("p_{o}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = ReportTable::new("Optimal training objectives (Wilcoxon)", &cols, provenance);
    let names = |v: &[Objective]| v.iter().map(|o| o.name()).collect::<Vec<_>>().join(";");
    for s in sets {
        let mut row = vec![
            Cell::text(s.test_objective.name()),
            Cell::text(s.best.name()),
            Cell::text(names(&s.optimal)),
            Cell::text(names(&s.suboptimal)),
        ];
        for o in Objective::ALL {
            row.push(match s.p_values.iter().find(|(t, _)| *t == o) {
                Some((_, p)) => Cell::Real(*p),
                None => Cell::text(""),
            });
        }
        table.push(row)?;
    }
    Ok(table)
}

/// Cross-objective matrix and significance sets from one set of LambdaMART
/// models per fold and training objective.
pub fn run_cross_objective(
    dataset: &RankingDataset,
    folds: &FoldAssignment,
    config: &Config,
    seed: u64,
) -> Result<(ReportTable, ReportTable, Vec<OptimalSet>)> {
    for o in Objective::ALL {
        dataset.require_objective(o)?;
    }
    let trained = train_fold_models(dataset, folds, Algorithm::LambdaMart, &Objective::ALL, config, seed);
    cross_objective_reports(dataset, folds, &trained, config, seed)
}

pub fn cross_objective_reports(
    dataset: &RankingDataset,
    folds: &FoldAssignment,
    trained: &FoldModels,
    config: &Config,
    seed: u64,
) -> Result<(ReportTable, ReportTable, Vec<OptimalSet>)> {
    let scores = cross_objective_scores(dataset, folds, trained, config.experiment.ndcg_k)?;
    let matrix = cross_objective_table(&scores, provenance("crossobj", seed, config))?;
    let sets = run_significance(&scores, config.experiment.significance_level)?;
    let table = significance_table(&sets, provenance("significance", seed, config))?;
    Ok((matrix, table, sets))
}
