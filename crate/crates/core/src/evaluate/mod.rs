//! Subject-grouped repeated cross-validation, voting, fusion, and channel search.

mod cv;
mod fit;
mod folds;
mod vote;

pub use cv::{
    all_channel_subsets, channel_combination_search, cross_validate, cross_validate_score_level, evaluate_channels,
    train_full_and_predict, CombinationRow, CombinationTable, CvConfig, EvaluationReport, FusionMode, MetricSummary,
    ModelTrace, SubjectPrediction, REPORT_SCHEMA_VERSION,
};
pub use fit::{
    evaluate_split, fast_svm_curve, fit_pipeline, inner_split, search_dimension, DimSelection, FitConfig,
    FittedPipeline, GridSpec,
};
pub use folds::{iteration_rng, stratified_group_kfold, stratified_group_kfold_with};
pub use vote::{feature_level_fuse, majority_vote, score_level_fuse, vote_subjects, SubjectVote};
