//! Experiment orchestration: seed derivation, configs, outer runs over
//! internal seeds, the decomposition and seed-budget frontier protocols,
//! file formats and reports.

mod config;
mod experiment;
mod frontier;
pub mod io;
mod prepare;
mod report;
mod seed;

pub use config::{ClusterSource, DatasetSource, ExperimentConfig, RedundancySpec};
pub use experiment::{
    compare_methods, evaluate, run_decomposition, run_experiment, score_outer_runs,
    selection_gap_metric, subset_overlap_metric, utility_metric, ExperimentResult, Record, AUROC,
    BOTTOMK_JACCARD, PRECISION_AT_K, RECALL_AT_K, SPEARMAN_VS_OTHERS, STABILITY,
    SUSPICIOUS_OVERLAP, TOPK_JACCARD,
};
pub use frontier::{
    frontier_grid, frontier_rows, run_frontier, run_frontier_synthetic, FrontierInputs,
    FrontierRow, ScoreModelConfig, SyntheticScores,
};
pub use prepare::{prepare, Prepared};
pub use report::{
    emit_frontier, emit_report, read_results_csv, write_results_csv, ReportFormat,
    FRONTIER_HEADER, RESULTS_HEADER,
};
pub use seed::derive_seed;
