use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ecomrank::config::Config;
use ecomrank::dataset::{format_letor, read_dataset, read_engagement_log, FeatureRegistry, Objective, RankingDataset};
use ecomrank::error::{Error, Result};
use ecomrank::harness::{
    info_gain_report, judgments_csv, kfold_split, label_distribution_table, provenance, read_judgments,
    run_algorithm_comparison, run_crowdsourcing_audit, run_cross_objective, run_department_holdout,
    run_popularity_ablation, sample_departments, synthetic_judgments, Algorithm, Cell, Provenance, ReportTable,
};
use ecomrank::labels::{build_labeled_dataset, filter_low_impressions};
use ecomrank::metrics::{mean_of_scored, per_query_ndcg};
use ecomrank::model::ModelFile;
use ecomrank::pipeline::{benchmark_from_log, featurize, Benchmark};
use ecomrank::synth::{generate_world, SyntheticWorld};

#[derive(Parser)]
#[command(name = "ecomrank", version, about = "Learning to rank for e-commerce search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output file or directory.
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<Config> {
        match &self.config {
            Some(p) => Config::load(p),
            None => Ok(Config::default()),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Comparison,
    Ablation,
    Holdout,
    Crossobj,
    Audit,
    Infogain,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world and simulate its engagement log.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Extract features for every logged pair of a generated world.
    Featurize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        world: PathBuf,
        /// Overrides `features.predictor-accuracy`.
        #[arg(long)]
        predictor_accuracy: Option<f64>,
    },
    /// Filter the log and write one labeled LETOR file per objective.
    Labels {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        world: PathBuf,
        /// Unlabeled LETOR file written by `featurize`.
        #[arg(long)]
        features: PathBuf,
        /// Defaults to `registry.csv` next to the features.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Assign queries to folds and write per-fold train/test files.
    Split {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Overrides `experiment.folds`.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Train a ranker on a labeled LETOR file.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "lambdamart")]
        algo: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Defaults to the objective named in the data header.
        #[arg(long)]
        objective: Option<Objective>,
    },
    /// Per-query NDCG of a model on a labeled LETOR file.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long)]
        objective: Option<Objective>,
    },
    /// Run an experiment on the synthetic benchmark built from the config.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        #[command(flatten)]
        common: Common,
        /// Judgments CSV for `audit`; synthetic judgments when absent.
        #[arg(long)]
        judgments: Option<PathBuf>,
        /// Utility at which synthetic judgments rate an item 4.
        #[arg(long, default_value_t = 0.75)]
        judgment_threshold: f64,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_letor(dataset: &RankingDataset, objective: Option<Objective>, path: &Path) -> Result<()> {
    write(path, &format_letor(dataset, objective)?)
}

fn registry_for(data: &Path, registry: &Option<PathBuf>) -> Result<FeatureRegistry> {
    let path = match registry {
        Some(p) => p.clone(),
        None => data.with_file_name("registry.csv"),
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    FeatureRegistry::from_csv(&text)
}

fn labeled(data: &Path, registry: &Option<PathBuf>, objective: Option<Objective>) -> Result<(RankingDataset, Objective)> {
    let registry = registry_for(data, registry)?;
    let letor = read_dataset(data, &registry)?;
    let objective = objective
        .or(letor.objective)
        .ok_or_else(|| Error::Config("no objective given and the data file is unlabeled".into()))?;
    letor.dataset.require_objective(objective)?;
    Ok((letor.dataset, objective))
}

fn world_log(dir: &Path) -> Result<(SyntheticWorld, Vec<ecomrank::dataset::EngagementRecord>)> {
    let world = SyntheticWorld::load(dir.join("world.json"))?;
    let log = read_engagement_log(dir.join("engagement.csv"))?;
    for w in &log.warnings {
        eprintln!("warning: {w}");
    }
    Ok((world, log.records))
}

fn benchmark(config: &Config, seed: u64) -> Result<(SyntheticWorld, Vec<ecomrank::dataset::EngagementRecord>, Benchmark)> {
    let world = generate_world(&config.synth, seed)?;
    let records = world.simulate();
    let bench = benchmark_from_log(&world, &records, &config.featurize, config.experiment.impression_threshold)?;
    eprintln!(
        "benchmark: {} queries, {} pairs, {} features",
        bench.dataset.num_queries(),
        bench.dataset.num_instances(),
        bench.dataset.num_features()
    );
    Ok((world, records, bench))
}

fn save(table: &ReportTable, dir: &Path, name: &str) -> Result<()> {
    table.write(dir, name)?;
    eprintln!("wrote {}", dir.join(format!("{name}.csv")).display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { common } => {
            let config = common.config()?;
            let world = generate_world(&config.synth, common.seed)?;
            let records = world.simulate();
            world.write_dir(&common.out, &records)?;
            eprintln!(
                "{} products, {} queries, {} logged pairs",
                world.catalog.len(),
                world.queries.len(),
                records.len()
            );
        }
        Command::Featurize {
            common,
            world,
            predictor_accuracy,
        } => {
            let mut config = common.config()?;
            if let Some(a) = predictor_accuracy {
                config.featurize.predictor_accuracy = a;
            }
            let (world, records) = world_log(&world)?;
            let table = featurize(&world, &records, &config.featurize)?;
            let dataset = table.to_dataset(&records)?;
            write_letor(&dataset, None, &common.out)?;
            write(&common.out.with_file_name("registry.csv"), &table.registry.to_csv())?;
            eprintln!("{} pairs, {} features", dataset.num_instances(), dataset.num_features());
        }
        Command::Labels {
            common,
            world,
            features,
            registry,
        } => {
            let config = common.config()?;
            let (_, records) = world_log(&world)?;
            let registry = registry_for(&features, &registry)?;
            let unlabeled = read_dataset(&features, &registry)?.dataset;
            let vectors = unlabeled
                .groups()
                .iter()
                .flat_map(|g| g.instances.iter())
                .map(|i| ((i.query_id, i.doc_id.clone()), i.features.clone()))
                .collect();
            let pool = filter_low_impressions(&records, config.experiment.impression_threshold)?;
            let dataset = build_labeled_dataset(&pool, &vectors, &registry)?;
            for o in Objective::ALL {
                write_letor(&dataset, Some(o), &common.out.join(format!("{o}.letor")))?;
            }
            write(&common.out.join("registry.csv"), &registry.to_csv())?;
            let table = label_distribution_table(&dataset, provenance("labels", common.seed, &config))?;
            save(&table, &common.out, "label_distribution")?;
        }
        Command::Split {
            common,
            data,
            registry,
            k,
        } => {
            let config = common.config()?;
            let (dataset, objective) = labeled(&data, &registry, None)?;
            let folds = kfold_split(&dataset, k.unwrap_or(config.experiment.folds), common.seed)?;
            write(&common.out.join("folds.csv"), &folds.to_csv())?;
            write(&common.out.join("registry.csv"), &dataset.registry().to_csv())?;
            for f in 0..folds.k {
                let (train, test) = folds.split(&dataset, f);
                write_letor(&train, Some(objective), &common.out.join(format!("fold{f}_train.letor")))?;
                write_letor(&test, Some(objective), &common.out.join(format!("fold{f}_test.letor")))?;
            }
        }
        Command::Train {
            common,
            algo,
            data,
            registry,
            objective,
        } => {
            let config = common.config()?;
            let algorithm: Algorithm = algo.parse()?;
            let (dataset, objective) = labeled(&data, &registry, objective)?;
            let model = algorithm.train(&dataset, objective, &config, common.seed)?;
            let file = algorithm.model_file(model, objective, &dataset, &config);
            write(&common.out, &file.to_text())?;
        }
        Command::Eval {
            common,
            model,
            data,
            registry,
            objective,
        } => {
            let config = common.config()?;
            let file = ModelFile::load(&model)?;
            let (dataset, objective) = labeled(&data, &registry, objective.or(Some(file.objective)))?;
            if file.registry_fingerprint != dataset.registry().fingerprint() {
                return Err(Error::Registry("model and data registries differ".into()));
            }
            let k = config.experiment.ndcg_k;
            let scores = per_query_ndcg(&file.model, &dataset, objective, k)?;
            let mut table = ReportTable::new(
                format!("NDCG@{k}, {objective}"),
                &["query_id", "ndcg"],
                Provenance {
                    experiment: "eval".into(),
                    seed: common.seed,
                    config: config.fingerprint(),
                },
            );
            for (q, v) in &scores {
                table.push(vec![Cell::Int(q.0 as i64), v.map_or(Cell::text(""), Cell::Real)])?;
            }
            let mean = mean_of_scored(&scores)?;
            table.notes.push(format!("mean ndcg {mean:.4}"));
            write(&common.out, &table.to_csv()?)?;
            println!("ndcg@{k} {mean:.4}");
        }
        Command::Experiment {
            kind,
            common,
            judgments,
            judgment_threshold,
        } => {
            let config = common.config()?;
            let seed = common.seed;
            let out = &common.out;
            let (world, records, bench) = benchmark(&config, seed)?;
            let ds = &bench.dataset;
            let folds = || kfold_split(ds, config.experiment.folds, seed);
            match kind {
                ExperimentKind::Comparison => {
                    let t = run_algorithm_comparison(ds, &Algorithm::all(), &Objective::ALL, &folds()?, &config, seed)?;
                    save(&t, out, "comparison")?;
                }
                ExperimentKind::Ablation => {
                    let t = run_popularity_ablation(ds, Objective::Or, &folds()?, &config, seed)?;
                    save(&t, out, "ablation")?;
                }
                ExperimentKind::Holdout => {
                    let depts = sample_departments(&bench.departments, config.experiment.holdout_departments, seed);
                    let t = run_department_holdout(ds, &bench.departments, &depts, Objective::Or, &config, seed)?;
                    save(&t, out, "holdout")?;
                }
                ExperimentKind::Crossobj => {
                    let (matrix, significance, _) = run_cross_objective(ds, &folds()?, &config, seed)?;
                    save(&matrix, out, "crossobj")?;
                    save(&significance, out, "significance")?;
                }
                ExperimentKind::Audit => {
                    let js = match judgments {
                        Some(p) => read_judgments(p)?,
                        None => {
                            let js = synthetic_judgments(&world, &records, judgment_threshold)?;
                            write(&out.join("judgments.csv"), &judgments_csv(&js))?;
                            js
                        }
                    };
                    let t = run_crowdsourcing_audit(&js, &records, provenance("audit", seed, &config))?;
                    save(&t, out, "audit")?;
                }
                ExperimentKind::Infogain => {
                    let (t, gains) = info_gain_report(
                        ds,
                        Objective::Ctr,
                        config.experiment.infogain_bins,
                        config.experiment.histogram_buckets,
                        provenance("infogain", seed, &config),
                    )?;
                    save(&t, out, "infogain")?;
                    let mut per = ReportTable::new(
                        "Information gain per feature",
                        &["feature", "gain"],
                        provenance("infogain", seed, &config),
                    );
                    for (name, g) in gains {
                        per.push(vec![Cell::text(name), Cell::Real(g)])?;
                    }
                    save(&per, out, "feature_gains")?;
                    let labels = label_distribution_table(ds, provenance("labels", seed, &config))?;
                    save(&labels, out, "label_distribution")?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
