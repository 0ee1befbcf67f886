use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::derive_seed;
use super::experiment::score_outer_runs;
use super::prepare::prepare;
use crate::base::{ClusterMap, ExampleId, Ranking, ScoreMatrix};
use crate::error::{Error, Result};
use crate::evalstats::pairwise_stability;
use crate::scarv::{run_method, MethodInputs, MethodKind, ScarvConfig, SeedAgg};

/// Stability of full SCARV against the best seed-only rule at one seed budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub r: usize,
    pub full_scarv: f64,
    pub seed_mean: f64,
    pub seed_median: f64,
    pub seed_borda: f64,
    /// Largest of the three seed-only values.
    pub best_upper: f64,
    /// `full_scarv - best_upper`.
    pub delta_best: f64,
    pub winner_rule: SeedAgg,
}

impl FrontierRow {
    pub fn seed_only(&self, rule: SeedAgg) -> f64 {
        match rule {
            SeedAgg::Mean => self.seed_mean,
            SeedAgg::Median => self.seed_median,
            SeedAgg::Borda => self.seed_borda,
        }
    }
}

/// Score matrices for several outer runs sharing one cluster map. Each
/// matrix holds at least `max(R)` columns; smaller budgets use a prefix, so
/// seeds are nested across `R`.
#[derive(Debug, Clone)]
pub struct FrontierInputs {
    pub clusters: ClusterMap,
    pub diversity: Vec<f64>,
    pub runs: Vec<ScoreMatrix<f64>>,
}

pub fn frontier_rows(inputs: &FrontierInputs, r_list: &[usize], cfg: &ScarvConfig) -> Result<Vec<FrontierRow>> {
    if r_list.is_empty() {
        return Err(Error::Config("R list is empty".into()));
    }
    if inputs.runs.len() < 2 {
        return Err(Error::Config("frontier needs at least 2 outer runs".into()));
    }
    let widest = inputs.runs.iter().map(|m| m.n_seeds()).min().unwrap_or(0);
    if let Some(r) = r_list.iter().find(|&&r| r == 0 || r > widest) {
        return Err(Error::Config(format!("R = {r} outside 1..={widest}")));
    }
    let methods = [
        MethodKind::FullScarv,
        MethodKind::SeedOnly(SeedAgg::Mean),
        MethodKind::SeedOnly(SeedAgg::Median),
        MethodKind::SeedOnly(SeedAgg::Borda),
    ];
    r_list
        .iter()
        .map(|&r| {
            let truncated = inputs
                .runs
                .iter()
                .map(|m| m.truncate_seeds(r))
                .collect::<Result<Vec<_>>>()?;
            let values = methods
                .par_iter()
                .map(|&kind| {
                    let rankings = truncated
                        .iter()
                        .map(|m| {
                            let mi = MethodInputs {
                                scores: m,
                                clusters: &inputs.clusters,
                                approx_clusters: None,
                                oracle_clusters: None,
                                diversity: &inputs.diversity,
                            };
                            run_method(kind, &mi, cfg)
                        })
                        .collect::<Result<Vec<Ranking<f64>>>>()?;
                    pairwise_stability::<f64, f64>(&rankings)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mut winner_rule, mut best_upper) = (SeedAgg::Mean, values[1]);
            for (rule, &v) in [SeedAgg::Median, SeedAgg::Borda].iter().zip(&values[2..]) {
                if v > best_upper {
                    winner_rule = *rule;
                    best_upper = v;
                }
            }
            Ok(FrontierRow {
                r,
                full_scarv: values[0],
                seed_mean: values[1],
                seed_median: values[2],
                seed_borda: values[3],
                best_upper,
                delta_best: values[0] - best_upper,
                winner_rule,
            })
        })
        .collect()
}

/// Frontier on trained proxy scores. Trains `max(R)` seeds per outer run.
pub fn run_frontier(cfg: &ExperimentConfig, r_list: &[usize]) -> Result<Vec<FrontierRow>> {
    let mut cfg = cfg.clone();
    cfg.seeds_per_run = r_list.iter().copied().max().ok_or_else(|| Error::Config("R list is empty".into()))?;
    cfg.validate()?;
    let prep = prepare(&cfg)?;
    let runs = score_outer_runs(&prep, &cfg)?;
    frontier_rows(
        &FrontierInputs {
            clusters: prep.clusters,
            diversity: prep.diversity,
            runs,
        },
        r_list,
        &cfg.scarv,
    )
}

/// Parameters of the synthetic score model
/// `s_i = q_i + gamma * g_c(i) + sigma * eps_i`, a test oracle for the
/// frontier rather than a stand-in for trained proxies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreModelConfig {
    pub n: usize,
    /// Fraction of examples placed in non-singleton clusters.
    pub coverage: f64,
    pub min_cluster: usize,
    pub max_cluster: usize,
    /// Scale of the shared cluster effect.
    pub gamma: f64,
    /// Scale of the per-seed noise.
    pub sigma: f64,
    /// Scale of the planted per-example quality.
    pub quality_sd: f64,
}

impl Default for ScoreModelConfig {
    fn default() -> Self {
        ScoreModelConfig {
            n: 1000,
            coverage: 0.5,
            min_cluster: 2,
            max_cluster: 4,
            gamma: 1.0,
            sigma: 0.7,
            quality_sd: 0.5,
        }
    }
}

/// A drawn instance of the synthetic score model.
#[derive(Debug, Clone)]
pub struct SyntheticScores {
    pub ids: Vec<ExampleId>,
    pub clusters: ClusterMap,
    /// Noise-free score `q_i + gamma * g_c(i)`.
    pub signal: Vec<f64>,
    pub sigma: f64,
}

impl SyntheticScores {
    pub fn generate(cfg: &ScoreModelConfig, seed: u64) -> Result<Self> {
        if cfg.n < 2 || !(0.0..=1.0).contains(&cfg.coverage) {
            return Err(Error::Config("score model needs n >= 2 and coverage in [0, 1]".into()));
        }
        if cfg.min_cluster < 2 || cfg.max_cluster < cfg.min_cluster {
            return Err(Error::Config("cluster sizes need 2 <= min <= max".into()));
        }
        if !(cfg.sigma >= 0.0 && cfg.gamma >= 0.0 && cfg.quality_sd >= 0.0) {
            return Err(Error::Config("scales must be non-negative".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<ExampleId> = (0..cfg.n as u64).map(ExampleId).collect();
        let mut perm: Vec<usize> = (0..cfg.n).collect();
        perm.shuffle(&mut rng);
        let target = (cfg.coverage * cfg.n as f64).round() as usize;
        let mut groups = Vec::new();
        let mut used = 0;
        while used + cfg.min_cluster <= target {
            let size = rng.random_range(cfg.min_cluster..=cfg.max_cluster).min(target - used);
            let size = size.max(cfg.min_cluster);
            groups.push(perm[used..used + size].iter().map(|&i| ids[i]).collect::<Vec<_>>());
            used += size;
        }
        let clusters = ClusterMap::from_groups(&ids, &groups)?;
        let dense = clusters.dense(&ids)?;
        let effect: Vec<f64> = (0..dense.n_clusters()).map(|_| rng.sample(StandardNormal)).collect();
        let signal = (0..cfg.n)
            .map(|i| {
                let q: f64 = rng.sample(StandardNormal);
                cfg.quality_sd * q + cfg.gamma * effect[dense.of_row[i]]
            })
            .collect();
        Ok(SyntheticScores {
            ids,
            clusters,
            signal,
            sigma: cfg.sigma,
        })
    }

    /// One column per seed: signal plus fresh Gaussian noise.
    pub fn matrix(&self, seeds: &[u64]) -> Result<ScoreMatrix<f64>> {
        let columns = seeds
            .iter()
            .map(|&s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                self.signal
                    .iter()
                    .map(|&x| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        x + self.sigma * e
                    })
                    .collect()
            })
            .collect();
        ScoreMatrix::from_columns(self.ids.clone(), seeds.to_vec(), columns)
    }
}

/// Frontier on the synthetic score model. The diversity term is zero, so
/// the blend only rescales.
pub fn run_frontier_synthetic(
    model: &ScoreModelConfig,
    outer_runs: usize,
    master_seed: u64,
    r_list: &[usize],
    cfg: &ScarvConfig,
) -> Result<Vec<FrontierRow>> {
    let max_r = r_list.iter().copied().max().ok_or_else(|| Error::Config("R list is empty".into()))?;
    let scores = SyntheticScores::generate(model, derive_seed(master_seed, 0, "score-model", 0))?;
    let runs = (0..outer_runs)
        .map(|o| {
            let seeds: Vec<u64> = (0..max_r).map(|j| derive_seed(master_seed, o, "score", j)).collect();
            scores.matrix(&seeds)
        })
        .collect::<Result<Vec<_>>>()?;
    frontier_rows(
        &FrontierInputs {
            diversity: vec![0.0; model.n],
            clusters: scores.clusters,
            runs,
        },
        r_list,
        cfg,
    )
}

/// `count` score-model configurations with informative clusters, drawn
/// from `master_seed`.
pub fn frontier_grid(master_seed: u64, count: usize) -> Vec<ScoreModelConfig> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, i, "frontier-grid", 0));
            ScoreModelConfig {
                n: 1000,
                coverage: rng.random_range(0.4..=0.6),
                min_cluster: 2,
                max_cluster: 4,
                gamma: rng.random_range(0.8..=1.2),
                sigma: rng.random_range(0.5..=1.0),
                quality_sd: rng.random_range(0.3..=0.6),
            }
        })
        .collect()
}
