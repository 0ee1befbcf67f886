//! Ranking-stability, decision-reproducibility and retrieval metrics, and the
//! paired tests used to compare methods across outer runs.

mod retrieval;
mod significance;
mod stability;

pub use retrieval::{auroc, precision_recall_at_k};
pub use significance::{
    paired_bootstrap_ci, paired_comparison, wilcoxon_signed_rank, wilcoxon_with, TestResult,
    Wilcoxon, WilcoxonMethod, DEFAULT_RESAMPLES, EXACT_WILCOXON_MAX_N,
};
pub use stability::{
    jaccard_ids, pairwise_stability, pairwise_values, selection_gap, spearman, spearman_rankings,
    subset_overlap, topk_jaccard, End, StabilityReport,
};
