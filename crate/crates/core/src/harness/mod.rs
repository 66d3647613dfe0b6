//! Cross-validated experiments and their report tables.

mod audit;
mod experiments;
mod folds;
mod report;

pub use audit::{
    click_bin, info_gain_report, judgments_csv, label_distribution_table, parse_judgments, read_judgments,
    run_crowdsourcing_audit, synthetic_judgments, CrowdJudgment, CLICK_BINS,
};
pub use experiments::{
    comparison_table, cross_objective_reports, cross_objective_scores, cross_objective_table, cross_validate,
    provenance, run_algorithm_comparison, run_cross_objective, run_department_holdout, run_popularity_ablation,
    run_significance, sample_departments, significance_table, train_fold_models, Algorithm, CrossObjectiveScores,
    FoldModels, OptimalSet,
};
pub use folds::{kfold_split, FoldAssignment};
pub use report::{Cell, Provenance, ReportTable};
