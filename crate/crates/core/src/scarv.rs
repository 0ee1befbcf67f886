//! Structure- and seed-aware aggregation of proxy score matrices.
//!
//! Within each seed column: min-max normalize, blend in the diversity term,
//! summarize each redundancy cluster and allocate the summary back to its
//! members. Across seeds: a robust row-wise aggregate. The named methods
//! ([`MethodKind`]) switch stages on and off.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::base::{
    fractional_ranks, minmax_normalize, ClusterMap, DenseClusters, Direction, ExampleId, Ranking,
    ScoreMatrix, DEFAULT_EPSILON,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_SOFTMAX_TEMPERATURE: f64 = 0.25;

/// Cluster summary operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum ClusterAgg {
    Mean,
    Median,
    /// `sum u exp(u/T) / sum exp(u/T)`.
    Softmax { temperature: f64 },
}

/// Rule that hands a cluster summary back to the cluster's members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Allocation {
    /// `lambda * u_i + (1 - lambda) * a_c`.
    Shrink { lambda: f64 },
    /// Every member takes the cluster summary.
    Collapse,
}

/// Row-wise aggregate over seed columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedAgg {
    Median,
    Mean,
    Borda,
}

impl SeedAgg {
    pub const ALL: [SeedAgg; 3] = [SeedAgg::Mean, SeedAgg::Median, SeedAgg::Borda];
}

impl fmt::Display for SeedAgg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeedAgg::Median => "median",
            SeedAgg::Mean => "mean",
            SeedAgg::Borda => "borda",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScarvConfig {
    pub diversity_weight: f64,
    pub knn_k: usize,
    pub cluster_agg: ClusterAgg,
    pub allocation: Allocation,
    pub cross_seed: SeedAgg,
    pub epsilon: f64,
}

impl Default for ScarvConfig {
    fn default() -> Self {
        ScarvConfig {
            diversity_weight: 0.2,
            knn_k: 10,
            cluster_agg: ClusterAgg::Mean,
            allocation: Allocation::Shrink { lambda: 0.5 },
            cross_seed: SeedAgg::Median,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl ScarvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.diversity_weight) {
            return Err(Error::Config("diversity_weight must lie in [0, 1]".into()));
        }
        if self.knn_k == 0 {
            return Err(Error::Config("knn_k must be at least 1".into()));
        }
        if let Allocation::Shrink { lambda } = self.allocation {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::Config("shrink lambda must lie in [0, 1]".into()));
            }
        }
        if let ClusterAgg::Softmax { temperature } = self.cluster_agg {
            if !(temperature > 0.0) {
                return Err(Error::Config("softmax temperature must be positive".into()));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }

    /// Named ablation variants. These names have no canonical definition;
    /// the mapping here is this crate's convention:
    /// `c_div` = cluster-only with doubled diversity weight, `c_col` and
    /// `unif` = collapse allocation, `med` = median cluster summary,
    /// `soft` = softmax cluster summary.
    pub fn variant(&self, name: &str) -> Option<(MethodKind, ScarvConfig)> {
        let mut cfg = self.clone();
        let kind = match name {
            "c_div" => {
                cfg.diversity_weight = (2.0 * cfg.diversity_weight).min(1.0);
                MethodKind::ClusterOnly
            }
            "c_col" | "unif" => {
                cfg.allocation = Allocation::Collapse;
                MethodKind::FullScarv
            }
            "med" => {
                cfg.cluster_agg = ClusterAgg::Median;
                MethodKind::FullScarv
            }
            "soft" => {
                cfg.cluster_agg = ClusterAgg::Softmax {
                    temperature: DEFAULT_SOFTMAX_TEMPERATURE,
                };
                MethodKind::FullScarv
            }
            _ => return None,
        };
        Some((kind, cfg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MethodKind {
    /// Raw scores of the first seed column.
    Bare,
    /// Cross-seed aggregation of normalized columns.
    SeedOnly(SeedAgg),
    /// Structural stage on the first seed column only.
    ClusterOnly,
    /// Structural stage per seed, then cross-seed aggregation.
    FullScarv,
    /// One representative per mined cluster, seed-median on representatives.
    DedupApprox,
    /// Same, using the ground-truth injected clusters.
    DedupOracle,
}

impl MethodKind {
    /// Methods compared in a mechanism decomposition.
    pub const DECOMPOSITION: [MethodKind; 8] = [
        MethodKind::Bare,
        MethodKind::ClusterOnly,
        MethodKind::SeedOnly(SeedAgg::Mean),
        MethodKind::SeedOnly(SeedAgg::Median),
        MethodKind::SeedOnly(SeedAgg::Borda),
        MethodKind::FullScarv,
        MethodKind::DedupApprox,
        MethodKind::DedupOracle,
    ];
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodKind::Bare => f.write_str("bare"),
            MethodKind::SeedOnly(agg) => write!(f, "seed_{agg}"),
            MethodKind::ClusterOnly => f.write_str("cluster_only"),
            MethodKind::FullScarv => f.write_str("full_scarv"),
            MethodKind::DedupApprox => f.write_str("dedup_approx"),
            MethodKind::DedupOracle => f.write_str("dedup_oracle"),
        }
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bare" => MethodKind::Bare,
            "seed_mean" => MethodKind::SeedOnly(SeedAgg::Mean),
            "seed_median" => MethodKind::SeedOnly(SeedAgg::Median),
            "seed_borda" => MethodKind::SeedOnly(SeedAgg::Borda),
            "cluster_only" => MethodKind::ClusterOnly,
            "full_scarv" => MethodKind::FullScarv,
            "dedup_approx" => MethodKind::DedupApprox,
            "dedup_oracle" => MethodKind::DedupOracle,
            other => return Err(Error::Config(format!("unknown method `{other}`"))),
        })
    }
}

impl TryFrom<String> for MethodKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MethodKind> for String {
    fn from(m: MethodKind) -> String {
        m.to_string()
    }
}

/// `u = (1 - w) * normalized + w * d`.
pub fn diversity_blend<T: Scalar>(normalized: &[T], d: &[T], w: T) -> Result<Vec<T>> {
    if normalized.len() != d.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} diversity values",
            normalized.len(),
            d.len()
        )));
    }
    Ok(normalized
        .iter()
        .zip(d)
        .map(|(&s, &di)| (T::one() - w) * s + w * di)
        .collect())
}

pub(crate) fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::of_usize(v.len())
}

pub(crate) fn median<T: Scalar>(v: &[T]) -> T {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        (s[m - 1] + s[m]) / T::of(2.0)
    }
}

fn softmax_weighted<T: Scalar>(v: &[T], temperature: T) -> T {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let (num, den) = v.iter().fold((T::zero(), T::zero()), |(num, den), &u| {
        let e = ((u - max) / temperature).exp();
        (num + u * e, den + e)
    });
    num / den
}

/// One summary value per cluster, indexed like `clusters.members`.
pub fn cluster_aggregate<T: Scalar>(u: &[T], clusters: &DenseClusters, rule: ClusterAgg) -> Vec<T> {
    clusters
        .members
        .iter()
        .map(|rows| {
            let vals: Vec<T> = rows.iter().map(|&i| u[i]).collect();
            match rule {
                ClusterAgg::Mean => mean(&vals),
                ClusterAgg::Median => median(&vals),
                ClusterAgg::Softmax { temperature } => softmax_weighted(&vals, T::of(temperature)),
            }
        })
        .collect()
}

/// Per-example allocated score. Singleton clusters always keep `u_i`.
pub fn allocate<T: Scalar>(u: &[T], a: &[T], clusters: &DenseClusters, rule: Allocation) -> Vec<T> {
    u.iter()
        .enumerate()
        .map(|(i, &ui)| {
            let k = clusters.of_row[i];
            if clusters.members[k].len() == 1 {
                return ui;
            }
            match rule {
                Allocation::Shrink { lambda } => {
                    let l = T::of(lambda);
                    l * ui + (T::one() - l) * a[k]
                }
                Allocation::Collapse => a[k],
            }
        })
        .collect()
}

/// Row-wise aggregate of equally long columns.
///
/// Borda gives each example `n - r` points per column, where `r` is its
/// fractional rank counted from the highest score, and sums the points.
pub fn cross_seed_aggregate<T: Scalar>(columns: &[Vec<T>], rule: SeedAgg) -> Result<Vec<T>> {
    let first = columns
        .first()
        .ok_or_else(|| Error::invalid("cross-seed aggregation needs at least one column"))?;
    let n = first.len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::invalid("seed columns differ in length"));
    }
    Ok(match rule {
        SeedAgg::Mean | SeedAgg::Median => (0..n)
            .map(|i| {
                let row: Vec<T> = columns.iter().map(|c| c[i]).collect();
                if rule == SeedAgg::Mean {
                    mean(&row)
                } else {
                    median(&row)
                }
            })
            .collect(),
        SeedAgg::Borda => {
            let mut points = vec![T::zero(); n];
            let nn = T::of_usize(n);
            for col in columns {
                let asc = fractional_ranks(col)?;
                for (p, r) in points.iter_mut().zip(asc) {
                    // descending rank = n + 1 - ascending rank
                    *p += nn - (nn + T::one() - r);
                }
            }
            points
        }
    })
}

/// Intermediate values of the within-seed stage for one column.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace<T> {
    pub normalized: Vec<T>,
    pub blended: Vec<T>,
    pub cluster_summary: Vec<T>,
    pub allocated: Vec<T>,
}

/// normalize -> blend -> cluster summary -> allocation, for one column.
pub fn structural_stage<T: Scalar>(
    column: &[T],
    diversity: &[T],
    clusters: &DenseClusters,
    cfg: &ScarvConfig,
) -> Result<StageTrace<T>> {
    let normalized = minmax_normalize(column, T::of(cfg.epsilon))?;
    let blended = diversity_blend(&normalized, diversity, T::of(cfg.diversity_weight))?;
    let cluster_summary = cluster_aggregate(&blended, clusters, cfg.cluster_agg);
    let allocated = allocate(&blended, &cluster_summary, clusters, cfg.allocation);
    Ok(StageTrace {
        normalized,
        blended,
        cluster_summary,
        allocated,
    })
}

/// Every intermediate of a full run, for inspection and fixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct ScarvTrace<T> {
    pub per_seed: Vec<StageTrace<T>>,
    pub aggregated: Vec<T>,
    pub ranking: Ranking<T>,
}

pub fn trace_full_scarv<T: Scalar>(
    m: &ScoreMatrix<T>,
    clusters: &ClusterMap,
    diversity: &[T],
    cfg: &ScarvConfig,
) -> Result<ScarvTrace<T>> {
    cfg.validate()?;
    let dense = clusters.dense(m.example_ids())?;
    let per_seed = m
        .columns()
        .iter()
        .map(|c| structural_stage(c, diversity, &dense, cfg))
        .collect::<Result<Vec<_>>>()?;
    let allocated: Vec<Vec<T>> = per_seed.iter().map(|t| t.allocated.clone()).collect();
    let aggregated = cross_seed_aggregate(&allocated, cfg.cross_seed)?;
    let ranking = Ranking::from_scores(m.example_ids(), &aggregated, Direction::Descending)?;
    Ok(ScarvTrace {
        per_seed,
        aggregated,
        ranking,
    })
}

/// Inputs shared by every method in one outer run.
#[derive(Debug, Clone, Copy)]
pub struct MethodInputs<'a, T> {
    pub scores: &'a ScoreMatrix<T>,
    /// Map used by the structural stage.
    pub clusters: &'a ClusterMap,
    /// Mined map for `dedup_approx`; falls back to `clusters`.
    pub approx_clusters: Option<&'a ClusterMap>,
    /// Ground-truth map for `dedup_oracle`.
    pub oracle_clusters: Option<&'a ClusterMap>,
    /// Diversity term aligned to score rows, in `[0, 1]`.
    pub diversity: &'a [T],
}

fn seed_only<T: Scalar>(m: &ScoreMatrix<T>, agg: SeedAgg, eps: T) -> Result<Vec<T>> {
    let normalized = m
        .columns()
        .iter()
        .map(|c| minmax_normalize(c, eps))
        .collect::<Result<Vec<_>>>()?;
    cross_seed_aggregate(&normalized, agg)
}

fn dedup_then_rank<T: Scalar>(m: &ScoreMatrix<T>, map: &ClusterMap, eps: T) -> Result<Ranking<T>> {
    let ids = m.example_ids();
    let dense = map.dense(ids)?;
    // representative = lowest id in each cluster
    let reps: Vec<usize> = dense
        .members
        .iter()
        .map(|rows| *rows.iter().min_by_key(|&&r| ids[r]).expect("clusters are non-empty"))
        .collect();
    let sub = m.select_rows(&reps)?;
    let scores = seed_only(&sub, SeedAgg::Median, eps)?;
    let rep_ranking = Ranking::from_scores(sub.example_ids(), &scores, Direction::Descending)?;
    let rep_scores = rep_ranking.scores().expect("scored ranking").to_vec();

    let cluster_of_rep: std::collections::HashMap<ExampleId, usize> = reps
        .iter()
        .enumerate()
        .map(|(k, &r)| (ids[r], k))
        .collect();
    let mut order = Vec::with_capacity(ids.len());
    let mut out_scores = Vec::with_capacity(ids.len());
    for (rep_id, score) in rep_ranking.order().iter().zip(rep_scores) {
        let k = cluster_of_rep[rep_id];
        let mut members: Vec<ExampleId> = dense.members[k].iter().map(|&r| ids[r]).collect();
        members.sort_unstable();
        // the representative is the smallest id, so it leads its members
        for id in members {
            order.push(id);
            out_scores.push(score);
        }
    }
    Ok(Ranking::from_parts_unchecked(order, Some(out_scores)))
}

/// Produces the final ranking of one method.
pub fn run_method<T: Scalar>(
    kind: MethodKind,
    inputs: &MethodInputs<'_, T>,
    cfg: &ScarvConfig,
) -> Result<Ranking<T>> {
    cfg.validate()?;
    let m = inputs.scores;
    let ids = m.example_ids();
    let eps = T::of(cfg.epsilon);
    if inputs.diversity.len() != m.n_examples() {
        return Err(Error::invalid(format!(
            "{} diversity values for {} examples",
            inputs.diversity.len(),
            m.n_examples()
        )));
    }
    let scores = match kind {
        MethodKind::Bare => m.column(0).to_vec(),
        MethodKind::SeedOnly(agg) => seed_only(m, agg, eps)?,
        MethodKind::ClusterOnly => {
            let dense = inputs.clusters.dense(ids)?;
            structural_stage(m.column(0), inputs.diversity, &dense, cfg)?.allocated
        }
        MethodKind::FullScarv => {
            return Ok(trace_full_scarv(m, inputs.clusters, inputs.diversity, cfg)?.ranking)
        }
        MethodKind::DedupApprox => {
            let map = inputs.approx_clusters.unwrap_or(inputs.clusters);
            return dedup_then_rank(m, map, eps);
        }
        MethodKind::DedupOracle => {
            let map = inputs.oracle_clusters.ok_or_else(|| {
                Error::Config("dedup_oracle needs the injected cluster map".into())
            })?;
            return dedup_then_rank(m, map, eps);
        }
    };
    Ranking::from_scores(ids, &scores, Direction::Descending)
}
