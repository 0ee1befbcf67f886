use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use log::info;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::derive_seed;
use super::io::fmt_float;
use super::prepare::{prepare, Prepared};
use crate::base::{ExampleId, Ranking, ScoreMatrix};
use crate::error::{Error, Result};
use crate::evalstats::{
    auroc, paired_comparison, precision_recall_at_k, selection_gap, spearman_rankings,
    subset_overlap, topk_jaccard, End, TestResult,
};
use crate::modelkit::{accuracy, train_logreg};
use crate::proxies::score_proxy;
use crate::scarv::{run_method, MethodInputs, MethodKind};

pub const STABILITY: &str = "stability";
pub const SPEARMAN_VS_OTHERS: &str = "spearman_vs_others";
pub const TOPK_JACCARD: &str = "topk_jaccard";
pub const BOTTOMK_JACCARD: &str = "bottomk_jaccard";
pub const SUSPICIOUS_OVERLAP: &str = "suspicious_overlap";
pub const AUROC: &str = "auroc";
pub const PRECISION_AT_K: &str = "precision_at_k";
pub const RECALL_AT_K: &str = "recall_at_k";

pub fn subset_overlap_metric(budget: f64) -> String {
    format!("subset_overlap@{}", fmt_float(budget))
}

/// Cross-run max minus min of retained-subset utility.
pub fn selection_gap_metric(budget: f64) -> String {
    format!("selection_gap_maxmin@{}", fmt_float(budget))
}

pub fn utility_metric(budget: f64) -> String {
    format!("utility@{}", fmt_float(budget))
}

/// One row of the long-format results table. `outer_run` is `None` for
/// values aggregated over all runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub outer_run: Option<usize>,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub records: Vec<Record>,
    /// Per-method rankings, one per outer run, when requested.
    pub rankings: Option<BTreeMap<String, Vec<Ranking<f64>>>>,
    pub wall_clock: Option<Duration>,
}

impl PartialEq for ExperimentResult {
    fn eq(&self, other: &Self) -> bool {
        self.config_hash == other.config_hash && self.records == other.records
    }
}

impl ExperimentResult {
    /// Aggregate value of `metric` for `method`.
    pub fn value(&self, method: &str, metric: &str) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.outer_run.is_none() && r.method == method && r.metric == metric)
            .map(|r| r.value)
    }

    /// Per-run values of `metric` for `method`, in run order.
    pub fn run_values(&self, method: &str, metric: &str) -> Vec<f64> {
        let mut v: Vec<(usize, f64)> = self
            .records
            .iter()
            .filter(|r| r.method == method && r.metric == metric)
            .filter_map(|r| r.outer_run.map(|o| (o, r.value)))
            .collect();
        v.sort_by_key(|p| p.0);
        v.into_iter().map(|p| p.1).collect()
    }

    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }
}

/// Trains and scores every `(outer_run, seed)` pair concurrently; returns
/// one matrix per outer run with columns labeled by their derived seeds.
pub fn score_outer_runs(prep: &Prepared, cfg: &ExperimentConfig) -> Result<Vec<ScoreMatrix<f64>>> {
    let r = cfg.seeds_per_run;
    let input = &prep.scoring;
    let jobs: Vec<(usize, usize)> = (0..cfg.outer_runs)
        .flat_map(|o| (0..r).map(move |j| (o, j)))
        .collect();
    let columns = jobs
        .par_iter()
        .map(|&(o, j)| {
            let seed = derive_seed(cfg.master_seed, o, "score", j);
            let model = train_logreg(&input.vectors, &input.labels, input.n_classes, seed, &cfg.train)?;
            score_proxy(cfg.proxy, &model, input.train(), input.val())
        })
        .collect::<Result<Vec<_>>>()?;
    // barrier: assemble in canonical (run, seed) order
    let mut columns = columns.into_iter();
    (0..cfg.outer_runs)
        .map(|o| {
            let cols: Vec<Vec<f64>> = columns.by_ref().take(r).collect();
            let seeds = (0..r).map(|j| derive_seed(cfg.master_seed, o, "score", j)).collect();
            ScoreMatrix::from_columns(input.ids.clone(), seeds, cols)
        })
        .collect()
}

/// Runs the configured methods on every outer run and computes all metrics.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    let prep = prepare(cfg)?;
    let matrices = score_outer_runs(&prep, cfg)?;
    info!("scored {} outer runs x {} seeds", cfg.outer_runs, cfg.seeds_per_run);
    let mut result = evaluate(cfg, &prep, &matrices)?;
    result.wall_clock = Some(start.elapsed());
    Ok(result)
}

/// Mechanism decomposition: every method on the same derived seeds.
pub fn run_decomposition(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut cfg = cfg.clone();
    cfg.methods = MethodKind::DECOMPOSITION.to_vec();
    run_experiment(&cfg)
}

/// Paired comparison of two methods on a per-run metric.
pub fn compare_methods(
    result: &ExperimentResult,
    method: &str,
    baseline: &str,
    metric: &str,
    resamples: usize,
    seed: u64,
) -> Result<TestResult> {
    let a = result.run_values(method, metric);
    let b = result.run_values(baseline, metric);
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::invalid(format!(
            "no paired per-run values of {metric} for {method} and {baseline}"
        )));
    }
    let deltas: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    paired_comparison(&deltas, resamples, 0.95, seed)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_pairwise(rankings: &[Ranking<f64>], f: impl Fn(&Ranking<f64>, &Ranking<f64>) -> Result<f64>) -> Result<f64> {
    let mut acc = Vec::new();
    for i in 0..rankings.len() {
        for j in i + 1..rankings.len() {
            acc.push(f(&rankings[i], &rankings[j])?);
        }
    }
    Ok(mean(&acc))
}

/// Trains on the retained ids (in id order) with the shared retrain seed
/// and returns held-out accuracy.
fn subset_utility(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    ranking: &Ranking<f64>,
    budget: f64,
    row_of: &std::collections::HashMap<ExampleId, usize>,
) -> Result<f64> {
    let (test_x, test_y) = prep.test.as_ref().expect("caller checks for a test set");
    let keep = crate::textgen::count_for_rate(budget, ranking.len());
    if keep == 0 {
        return Err(Error::invalid(format!("budget {budget} retains no examples")));
    }
    let mut rows: Vec<usize> = ranking.top(keep).iter().map(|id| row_of[id]).collect();
    rows.sort_unstable();
    let x: Vec<_> = rows.iter().map(|&r| prep.scoring.vectors[r].clone()).collect();
    let y: Vec<u32> = rows.iter().map(|&r| prep.scoring.labels[r]).collect();
    if y.iter().all(|&c| c == y[0]) {
        // a one-class subset trains a constant predictor
        return Ok(test_y.iter().filter(|&&c| c == y[0]).count() as f64 / test_y.len() as f64);
    }
    let seed = derive_seed(cfg.master_seed, 0, "retrain", 0);
    let model = train_logreg(&x, &y, prep.scoring.n_classes, seed, &cfg.train)?;
    accuracy(&model, test_x, test_y)
}

/// Metrics for already-scored outer runs.
pub fn evaluate(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    matrices: &[ScoreMatrix<f64>],
) -> Result<ExperimentResult> {
    let n = prep.scoring.ids.len();
    let runs = matrices.len();
    let jobs: Vec<(usize, usize)> = (0..cfg.methods.len())
        .flat_map(|m| (0..runs).map(move |o| (m, o)))
        .collect();
    let flat = jobs
        .par_iter()
        .map(|&(m, o)| {
            let inputs = MethodInputs {
                scores: &matrices[o],
                clusters: &prep.clusters,
                approx_clusters: Some(&prep.approx_clusters),
                oracle_clusters: prep.injected.as_ref(),
                diversity: &prep.diversity,
            };
            run_method(cfg.methods[m], &inputs, &cfg.scarv)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut flat = flat.into_iter();
    let rankings: Vec<Vec<Ranking<f64>>> = (0..cfg.methods.len())
        .map(|_| flat.by_ref().take(runs).collect())
        .collect();

    let row_of: std::collections::HashMap<ExampleId, usize> =
        prep.scoring.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let utilities: Vec<Vec<Vec<f64>>> = if prep.test.is_some() {
        rankings
            .par_iter()
            .map(|per_run| {
                cfg.budgets
                    .iter()
                    .map(|&b| {
                        per_run
                            .iter()
                            .map(|r| subset_utility(cfg, prep, r, b, &row_of))
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let k = ((cfg.top_k_fraction * n as f64).floor() as usize).clamp(1, n);
    let flipped = prep
        .flipped
        .as_ref()
        .filter(|f| cfg.noise_rate.is_some() && f.iter().any(|&x| x) && f.iter().any(|&x| !x));
    let mut records = Vec::new();
    for (m, kind) in cfg.methods.iter().enumerate() {
        let method = kind.to_string();
        let rs = &rankings[m];
        let mut push = |outer_run: Option<usize>, metric: &str, value: f64| {
            records.push(Record {
                outer_run,
                method: method.clone(),
                metric: metric.to_string(),
                value,
            })
        };
        let mut pair = vec![vec![1.0; runs]; runs];
        for i in 0..runs {
            for j in i + 1..runs {
                let s: f64 = spearman_rankings(&rs[i], &rs[j])?;
                pair[i][j] = s;
                pair[j][i] = s;
            }
        }
        for (o, row) in pair.iter().enumerate() {
            let others: f64 = row.iter().enumerate().filter(|&(j, _)| j != o).map(|(_, v)| v).sum();
            push(Some(o), SPEARMAN_VS_OTHERS, others / (runs - 1) as f64);
        }
        let per_run_suspicion = match flipped {
            Some(pos) => {
                let mut out = Vec::new();
                let n_pos = pos.iter().filter(|&&p| p).count();
                for (o, r) in rs.iter().enumerate() {
                    // lower ranked = more suspicious
                    let at = r.positions();
                    let suspicion: Vec<f64> = prep.scoring.ids.iter().map(|id| at[id] as f64).collect();
                    let a: f64 = auroc(&suspicion, pos)?;
                    let (p, rc): (f64, f64) = precision_recall_at_k(&suspicion, pos, n_pos)?;
                    push(Some(o), AUROC, a);
                    push(Some(o), PRECISION_AT_K, p);
                    push(Some(o), RECALL_AT_K, rc);
                    out.push((a, p, rc));
                }
                Some((n_pos, out))
            }
            None => None,
        };
        if !utilities.is_empty() {
            for (bi, &b) in cfg.budgets.iter().enumerate() {
                for (o, &u) in utilities[m][bi].iter().enumerate() {
                    push(Some(o), &utility_metric(b), u);
                }
            }
        }
        let stability = mean_pairwise(rs, |a, b| spearman_rankings(a, b))?;
        push(None, STABILITY, stability);
        push(None, TOPK_JACCARD, mean_pairwise(rs, |a, b| topk_jaccard(a, b, k, End::Top))?);
        push(None, BOTTOMK_JACCARD, mean_pairwise(rs, |a, b| topk_jaccard(a, b, k, End::Bottom))?);
        for (bi, &b) in cfg.budgets.iter().enumerate() {
            push(None, &subset_overlap_metric(b), subset_overlap(rs, b)?);
            if !utilities.is_empty() {
                let u = &utilities[m][bi];
                push(None, &utility_metric(b), mean(u));
                push(None, &selection_gap_metric(b), selection_gap(u)?);
            }
        }
        if let Some((n_pos, per_run)) = per_run_suspicion {
            push(None, SUSPICIOUS_OVERLAP, mean_pairwise(rs, |a, b| topk_jaccard(a, b, n_pos.max(1), End::Bottom))?);
            push(None, AUROC, mean(&per_run.iter().map(|t| t.0).collect::<Vec<_>>()));
            push(None, PRECISION_AT_K, mean(&per_run.iter().map(|t| t.1).collect::<Vec<_>>()));
            push(None, RECALL_AT_K, mean(&per_run.iter().map(|t| t.2).collect::<Vec<_>>()));
        }
    }
    let kept = cfg.keep_rankings.then(|| {
        cfg.methods
            .iter()
            .zip(rankings)
            .map(|(k, r)| (k.to_string(), r))
            .collect()
    });
    Ok(ExperimentResult {
        config_hash: cfg.hash(),
        records,
        rankings: kept,
        wall_clock: None,
    })
}
