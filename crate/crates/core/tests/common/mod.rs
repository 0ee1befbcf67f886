//! Independent oracles, the hand-traced fixture and the invariant checks
//! shared by the integration and acceptance targets.
#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use scarv::base::{fractional_ranks, minmax_normalize, DenseClusters, DEFAULT_EPSILON};
use scarv::evalstats::{auroc, spearman, subset_overlap, topk_jaccard, wilcoxon_signed_rank, End};
use scarv::harness::{
    frontier_rows, prepare, run_experiment, score_outer_runs, write_results_csv, ExperimentConfig,
    FrontierInputs, ScoreModelConfig, SyntheticScores,
};
use scarv::mining::{chargram_jaccard_pairs, threshold_clusters, tfidf_cosine_pairs, SimilarityPair};
use scarv::modelkit::{
    accuracy, knn_raw_distances, predict_proba, tfidf_fit_transform, train_logreg, Checkpoint,
    LinearModel, LinearParams, TfidfConfig, TrainConfig, train_logreg_without,
};
use scarv::proxies::{loo_values, score_proxy, Labeled, LooConfig, ProxyKind};
use scarv::scarv::{allocate, cross_seed_aggregate, trace_full_scarv, Allocation};
use scarv::textgen::{inject_near_duplicates, make_synthetic_corpus, perturb_text, PerturbationConfig};
use scarv::{
    run_method, ClusterMap, Direction, ExampleId, MethodInputs, MethodKind, Ranking, ScarvConfig,
    ScoreMatrix, SeedAgg, SparseVector,
};

pub type Check = Result<(), String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ids(n: usize) -> Vec<ExampleId> {
    (0..n as u64).map(ExampleId).collect()
}

/// Runs a property over a fixed-seed generator so every caller sees the
/// same cases.
pub fn property<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Check {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    TestRunner::new_with_rng(config, rng)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// oracles

/// Ascending 1-based ranks of distinct values.
fn plain_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut r = vec![0.0; v.len()];
    for (p, &i) in idx.iter().enumerate() {
        r[i] = (p + 1) as f64;
    }
    r
}

/// `1 - 6 sum d^2 / (n (n^2 - 1))` for tie-free inputs.
pub fn closed_form_spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (plain_ranks(a), plain_ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Two-sided signed-rank p-value by listing all `2^n` sign patterns.
/// `None` when every delta is zero.
pub fn enumerated_wilcoxon(deltas: &[f64]) -> Option<f64> {
    let nz: Vec<f64> = deltas.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return None;
    }
    // mid-ranks of |d|, counted by hand
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|&a| {
            let below = abs.iter().filter(|&&b| b < a).count() as f64;
            let equal = abs.iter().filter(|&&b| b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    Some((2.0 * le.min(ge) as f64 / total).min(1.0))
}

/// Share of (positive, negative) pairs ordered correctly, ties counting half.
pub fn all_pairs_auroc(scores: &[f64], positives: &[bool]) -> f64 {
    let (mut hits, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if positives[i] && !positives[j] {
                pairs += 1.0;
                if si > sj {
                    hits += 1.0;
                } else if si == sj {
                    hits += 0.5;
                }
            }
        }
    }
    hits / pairs
}

/// Order by mean descending fractional rank across columns, ties by id.
pub fn mean_rank_order(columns: &[Vec<f64>], ids: &[ExampleId]) -> Vec<ExampleId> {
    let n = ids.len();
    let mut total = vec![0.0; n];
    for col in columns {
        for i in 0..n {
            let above = col.iter().filter(|&&v| v > col[i]).count() as f64;
            let level = col.iter().filter(|&&v| v == col[i]).count() as f64;
            total[i] += above + (level + 1.0) / 2.0;
        }
    }
    let mean: Vec<f64> = total.iter().map(|t| t / columns.len() as f64).collect();
    let mut rows: Vec<usize> = (0..n).collect();
    rows.sort_by(|&a, &b| mean[a].partial_cmp(&mean[b]).unwrap().then(ids[a].cmp(&ids[b])));
    rows.into_iter().map(|r| ids[r]).collect()
}

pub struct OracleReport {
    pub spearman: Check,
    pub borda: Check,
    pub wilcoxon: Check,
    pub auroc: Check,
}

pub fn spearman_vs_closed_form() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let n = rng.random_range(2..60);
        let a: Vec<f64> = rand::seq::index::sample(&mut rng, 10_000, n).into_iter().map(|v| v as f64).collect();
        let b: Vec<f64> = rand::seq::index::sample(&mut rng, 10_000, n).into_iter().map(|v| v as f64).collect();
        let got: f64 = spearman(&a, &b).map_err(|e| e.to_string())?;
        let want = closed_form_spearman(&a, &b);
        ensure((got - want).abs() <= 1e-12, || format!("case {case}: {got} vs {want}"))?;
    }
    Ok(())
}

pub fn borda_vs_mean_rank() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..200 {
        let n = rng.random_range(1..40);
        let r = rng.random_range(1..8);
        // few distinct values so ties are common
        let levels = rng.random_range(2..10);
        let columns: Vec<Vec<f64>> = (0..r)
            .map(|_| (0..n).map(|_| rng.random_range(0..levels) as f64).collect())
            .collect();
        let ids: Vec<ExampleId> = rand::seq::index::sample(&mut rng, 1000, n)
            .into_iter()
            .map(|v| ExampleId(v as u64))
            .collect();
        let points = cross_seed_aggregate(&columns, SeedAgg::Borda).map_err(|e| e.to_string())?;
        let got = Ranking::from_scores(&ids, &points, Direction::Descending).map_err(|e| e.to_string())?;
        let want = mean_rank_order(&columns, &ids);
        ensure(got.order() == want.as_slice(), || format!("case {case}: orders differ"))?;
    }
    Ok(())
}

pub fn wilcoxon_vs_enumeration() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut compared = 0;
    for n in 1..=10 {
        for case in 0..100 {
            // small integers give ties and zeros
            let deltas: Vec<f64> = (0..n).map(|_| rng.random_range(-6i32..=6) as f64).collect();
            let got = wilcoxon_signed_rank(&deltas).map_err(|e| e.to_string())?;
            match enumerated_wilcoxon(&deltas) {
                None => ensure(got.degenerate && got.p_value == 1.0, || format!("n={n} case {case}: zeros not degenerate"))?,
                Some(want) => {
                    ensure(got.exact, || format!("n={n} case {case}: normal path used"))?;
                    ensure((got.p_value - want).abs() <= 1e-12, || {
                        format!("n={n} case {case} {deltas:?}: {} vs {want}", got.p_value)
                    })?;
                    compared += 1;
                }
            }
        }
    }
    ensure(compared >= 900, || format!("only {compared} non-degenerate instances"))
}

pub fn auroc_vs_all_pairs() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for case in 0..100 {
        let n = rng.random_range(2..80);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..25) as f64 / 4.0).collect();
        let mut positives: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        positives[0] = true;
        positives[1] = false;
        let got: f64 = auroc(&scores, &positives).map_err(|e| e.to_string())?;
        let want = all_pairs_auroc(&scores, &positives);
        ensure((got - want).abs() <= 1e-12, || format!("case {case}: {got} vs {want}"))?;
    }
    Ok(())
}

pub fn oracle_suite() -> OracleReport {
    OracleReport {
        spearman: spearman_vs_closed_form(),
        borda: borda_vs_mean_rank(),
        wilcoxon: wilcoxon_vs_enumeration(),
        auroc: auroc_vs_all_pairs(),
    }
}

// ---------------------------------------------------------------------------
// hand-traced fixture: 6 examples, 3 seeds, clusters {0,1} {2,3,4} {5},
// default weights (w = 0.2, cluster mean, shrink 0.5, seed median)

pub struct Fixture {
    pub matrix: ScoreMatrix<f64>,
    pub clusters: ClusterMap,
    pub diversity: Vec<f64>,
}

pub fn fixture() -> Fixture {
    let matrix = ScoreMatrix::from_columns(
        ids(6),
        vec![1, 2, 3],
        vec![
            vec![1.0, 3.0, 5.0, 2.0, 4.0, 0.0],
            vec![2.0, 2.0, 6.0, 10.0, 4.0, 8.0],
            vec![0.0, 4.0, 1.0, 2.0, 3.0, 2.0],
        ],
    )
    .unwrap();
    let clusters = ClusterMap::from_assignment([
        (ExampleId(0), 7),
        (ExampleId(1), 7),
        (ExampleId(2), 8),
        (ExampleId(3), 8),
        (ExampleId(4), 8),
        (ExampleId(5), 9),
    ])
    .unwrap();
    Fixture {
        matrix,
        clusters,
        diversity: vec![0.0, 0.5, 1.0, 0.25, 0.75, 0.5],
    }
}

/// Worked by hand, one stage per row.
pub struct SeedTrace {
    pub normalized: [f64; 6],
    pub blended: [f64; 6],
    /// Summaries of clusters {0,1}, {2,3,4}, {5}.
    pub summary: [f64; 3],
    pub allocated: [f64; 6],
}

pub fn hand_trace() -> ([SeedTrace; 3], [f64; 6], [u64; 6]) {
    let seeds = [
        SeedTrace {
            normalized: [0.2, 0.6, 1.0, 0.4, 0.8, 0.0],
            blended: [0.16, 0.58, 1.0, 0.37, 0.79, 0.1],
            summary: [0.37, 0.72, 0.1],
            allocated: [0.265, 0.475, 0.86, 0.545, 0.755, 0.1],
        },
        SeedTrace {
            normalized: [0.0, 0.0, 0.5, 1.0, 0.25, 0.75],
            blended: [0.0, 0.1, 0.6, 0.85, 0.35, 0.7],
            summary: [0.05, 0.6, 0.7],
            allocated: [0.025, 0.075, 0.6, 0.725, 0.475, 0.7],
        },
        SeedTrace {
            normalized: [0.0, 1.0, 0.25, 0.5, 0.75, 0.5],
            blended: [0.0, 0.9, 0.4, 0.45, 0.75, 0.5],
            summary: [0.45, 1.6 / 3.0, 0.5],
            allocated: [0.225, 0.675, 7.0 / 15.0, 59.0 / 120.0, 77.0 / 120.0, 0.5],
        },
    ];
    let aggregated = [0.225, 0.475, 0.6, 0.545, 77.0 / 120.0, 0.5];
    let order = [4, 2, 3, 5, 1, 0];
    (seeds, aggregated, order)
}

/// Largest deviation between the pipeline and the hand trace over every
/// intermediate value; `Err` if the final order differs.
pub fn fixture_deviation() -> Result<f64, String> {
    let f = fixture();
    let t = trace_full_scarv(&f.matrix, &f.clusters, &f.diversity, &ScarvConfig::default())
        .map_err(|e| e.to_string())?;
    let (seeds, aggregated, order) = hand_trace();
    let mut worst: f64 = 0.0;
    let mut cmp = |got: &[f64], want: &[f64]| {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
    };
    for (got, want) in t.per_seed.iter().zip(&seeds) {
        cmp(&got.normalized, &want.normalized);
        cmp(&got.blended, &want.blended);
        cmp(&got.cluster_summary, &want.summary);
        cmp(&got.allocated, &want.allocated);
    }
    cmp(&t.aggregated, &aggregated);
    let want_order: Vec<ExampleId> = order.iter().map(|&i| ExampleId(i)).collect();
    ensure(t.ranking.order() == want_order.as_slice(), || {
        format!("order {:?}", t.ranking.order())
    })?;
    Ok(worst)
}

// ---------------------------------------------------------------------------
// shared data

pub struct Corpus {
    pub ids: Vec<ExampleId>,
    pub vectors: Vec<SparseVector>,
    pub labels: Vec<u32>,
    pub texts: Vec<String>,
}

pub fn corpus(n: usize, vocab: usize, classes: usize, seed: u64) -> Corpus {
    let d = make_synthetic_corpus(n, vocab, classes, seed).unwrap();
    let texts = d.texts();
    let (_, vectors) = tfidf_fit_transform(&texts, &TfidfConfig::default()).unwrap();
    Corpus {
        ids: d.ids(),
        vectors,
        labels: d.labels(),
        texts,
    }
}

fn random_params(classes: usize, features: usize, seed: u64) -> LinearParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = LinearParams::zeros(classes, features);
    p.weights.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
    p.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    p
}

fn random_dense(features: usize, rng: &mut ChaCha8Rng) -> SparseVector {
    let v: Vec<f64> = (0..features).map(|_| rng.random_range(-1.0..1.0)).collect();
    SparseVector::from_dense(&v).unwrap()
}

/// Small experiment used by the determinism checks.
pub fn small_experiment(n: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::synthetic(n);
    cfg.outer_runs = 2;
    cfg.seeds_per_run = 2;
    cfg.noise_rate = Some(0.1);
    cfg.methods = MethodKind::DECOMPOSITION.to_vec();
    if let scarv::harness::DatasetSource::Synthetic { test_size, val_size, .. } = &mut cfg.dataset {
        *test_size = 100;
        *val_size = 50;
    }
    cfg
}

// ---------------------------------------------------------------------------
// invariants: base

pub fn normalize_idempotent() -> Check {
    property(256, prop::collection::vec(-1e3f64..1e3, 1..50), |v| {
        let once = minmax_normalize(&v, DEFAULT_EPSILON).unwrap();
        let twice = minmax_normalize(&once, DEFAULT_EPSILON).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 2.0 * DEFAULT_EPSILON, "{a} vs {b}");
        }
        Ok(())
    })
}

fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    idx
}

pub fn normalize_keeps_argsort() -> Check {
    property(256, prop::collection::hash_set(-100_000i32..100_000, 1..60), |v| {
        let v: Vec<f64> = v.into_iter().map(|x| f64::from(x) / 7.0).collect();
        let out = minmax_normalize(&v, DEFAULT_EPSILON).unwrap();
        prop_assert_eq!(argsort(&v), argsort(&out));
        Ok(())
    })
}

pub fn ranking_round_trip() -> Check {
    let perm = Just((0u64..50).collect::<Vec<_>>()).prop_shuffle();
    property(256, perm, |perm| {
        let r = Ranking::<f64>::from_order(perm.into_iter().map(ExampleId).collect()).unwrap();
        let (ids, scores) = r.to_scores();
        let back = Ranking::from_scores(&ids, &scores, Direction::Descending).unwrap();
        prop_assert_eq!(back.order(), r.order());
        Ok(())
    })
}

pub fn fractional_rank_sum() -> Check {
    property(256, prop::collection::vec(0u8..8, 0..80), |v| {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let n = v.len() as f64;
        let sum: f64 = fractional_ranks(&v).unwrap().iter().sum();
        prop_assert_eq!(sum, n * (n + 1.0) / 2.0);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// invariants: textgen

pub fn injection_keeps_originals() -> Check {
    let strategy = (20usize..80, 0.0f64..0.9, 2usize..5, any::<u64>());
    property(48, strategy, |(n, rate, size, seed)| {
        let d = make_synthetic_corpus(n, 200, 2, seed).unwrap();
        let cfg = PerturbationConfig::new(0.6).unwrap();
        let (out, map) = match inject_near_duplicates(&d, rate, &cfg, size, seed ^ 1) {
            Ok(x) => x,
            // asking for more sources than exist is a documented error
            Err(_) => return Ok(()),
        };
        prop_assert_eq!(&out.examples()[..n], d.examples());
        let unique: BTreeSet<_> = out.ids().into_iter().collect();
        prop_assert_eq!(unique.len(), out.len());
        let prov = out.provenance();
        for group in map.groups().values().filter(|g| g.len() > 1) {
            let sources: Vec<_> = group.iter().filter(|id| !prov.contains_key(id)).collect();
            prop_assert_eq!(sources.len(), 1);
            for id in group.iter().filter(|id| prov.contains_key(id)) {
                prop_assert_eq!(prov[id], *sources[0]);
            }
        }
        Ok(())
    })
}

fn token_edit_distance(a: &[&str], b: &[&str]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Mean token edit fraction of `perturb_text` at each strength.
pub fn edit_fractions(strengths: &[f64], seeds: u64) -> Vec<f64> {
    let text = "the quick brown fox jumps over the lazy dog while seven tired cats watch from a warm sunny window";
    let vocab: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
    let original: Vec<&str> = text.split(' ').collect();
    strengths
        .iter()
        .map(|&s| {
            let cfg = PerturbationConfig::new(s).unwrap().with_vocabulary(vocab.clone());
            let total: f64 = (0..seeds)
                .map(|seed| {
                    let out = perturb_text(text, &cfg, seed).unwrap();
                    let tokens: Vec<&str> = out.split(' ').collect();
                    token_edit_distance(&original, &tokens) as f64 / original.len().max(tokens.len()) as f64
                })
                .sum();
            total / seeds as f64
        })
        .collect()
}

pub fn perturbation_monotone() -> Check {
    let f = edit_fractions(&[0.0, 0.3, 0.6, 1.0], 1000);
    ensure(f[0] == 0.0, || format!("s = 0 edited: {f:?}"))?;
    ensure(f.windows(2).all(|w| w[0] <= w[1]), || format!("not monotone: {f:?}"))
}

// ---------------------------------------------------------------------------
// invariants: mining

pub fn threshold_monotone() -> Check {
    let pairs = prop::collection::vec((0u64..25, 0u64..25, -1.0f64..=1.0), 0..60);
    property(256, (pairs, -1.0f64..=1.0, 0.0f64..1.0), |(raw, t1, dt)| {
        let t2 = (t1 + dt).min(1.0);
        let ids: Vec<ExampleId> = (0..25).map(ExampleId).collect();
        let pairs: Vec<SimilarityPair> = raw
            .iter()
            .filter(|(a, b, _)| a != b)
            .map(|&(a, b, s)| SimilarityPair { a: ExampleId(a), b: ExampleId(b), similarity: s })
            .collect();
        let low = threshold_clusters(&ids, &pairs, t1).unwrap();
        let high = threshold_clusters(&ids, &pairs, t2).unwrap();
        for group in high.groups().values() {
            let parents: BTreeSet<u64> = group.iter().map(|id| low.cluster_of(*id).unwrap()).collect();
            prop_assert_eq!(parents.len(), 1, "cluster {:?} split at the lower threshold", group);
        }
        Ok(())
    })
}

pub fn miners_deterministic() -> Check {
    let c = corpus(200, 300, 2, 5);
    let items: Vec<(ExampleId, SparseVector)> = c.ids.iter().copied().zip(c.vectors.clone()).collect();
    let docs: Vec<(ExampleId, String)> = c.ids.iter().copied().zip(c.texts.clone()).collect();
    let a = tfidf_cosine_pairs(&items, 0.3);
    let b = tfidf_cosine_pairs(&items, 0.3);
    ensure(a == b, || "tfidf pairs differ between runs".into())?;
    let x = chargram_jaccard_pairs(&docs, 3, 0.3).map_err(|e| e.to_string())?;
    let y = chargram_jaccard_pairs(&docs, 3, 0.3).map_err(|e| e.to_string())?;
    ensure(x == y, || "chargram pairs differ between runs".into())?;
    let mut reversed = items.clone();
    reversed.reverse();
    let m1 = threshold_clusters(&c.ids, &a, 0.3).map_err(|e| e.to_string())?;
    let m2 = threshold_clusters(&c.ids, &tfidf_cosine_pairs(&reversed, 0.3), 0.3).map_err(|e| e.to_string())?;
    ensure(m1.same_partition(&m2), || "input order changed the clustering".into())
}

pub fn exact_duplicates_recovered() -> Check {
    for seed in 0..4u64 {
        let d = make_synthetic_corpus(400, 3000, 2, seed).unwrap();
        let cfg = PerturbationConfig::new(0.0).unwrap();
        let (out, injected) = inject_near_duplicates(&d, 0.3, &cfg, 2 + seed as usize % 3, seed + 10)
            .map_err(|e| e.to_string())?;
        let (_, vectors) = tfidf_fit_transform(&out.texts(), &TfidfConfig::default()).unwrap();
        let ids = out.ids();
        let items: Vec<_> = ids.iter().copied().zip(vectors).collect();
        let mined = threshold_clusters(&ids, &tfidf_cosine_pairs(&items, 1.0), 1.0).map_err(|e| e.to_string())?;
        ensure(mined.same_partition(&injected), || {
            format!(
                "seed {seed}: mined {} clusters, injected {}",
                mined.n_clusters(),
                injected.n_clusters()
            )
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// invariants: modelkit

pub fn gradient_matches_finite_differences() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..20 {
        let p = random_params(3, 5, trial);
        let x = random_dense(5, &mut rng);
        let y = rng.random_range(0..3);
        let (dw, db) = p.gradient(&x, y);
        let h = 1e-6;
        let numeric = |bump: &dyn Fn(&mut LinearParams, f64)| {
            let (mut plus, mut minus) = (p.clone(), p.clone());
            bump(&mut plus, h);
            bump(&mut minus, -h);
            (plus.cross_entropy(&x, y) - minus.cross_entropy(&x, y)) / (2.0 * h)
        };
        let check = |analytic: f64, numeric: f64| {
            let err = (analytic - numeric).abs();
            ensure(err <= 1e-5 * analytic.abs().max(numeric.abs()) || err < 1e-9, || {
                format!("trial {trial}: analytic {analytic} numeric {numeric}")
            })
        };
        for k in 0..dw.len() {
            check(dw[k], numeric(&|q: &mut LinearParams, d| q.weights[k] += d))?;
        }
        for c in 0..db.len() {
            check(db[c], numeric(&|q: &mut LinearParams, d| q.bias[c] += d))?;
        }
    }
    Ok(())
}

pub fn training_ignores_concurrent_evaluation() -> Check {
    let c = corpus(300, 800, 3, 2);
    let cfg = TrainConfig::default();
    let reference = train_logreg(&c.vectors, &c.labels, 3, 77, &cfg).map_err(|e| e.to_string())?;
    let models: Vec<LinearModel> = (0..8)
        .into_par_iter()
        .map(|k| {
            // interleave metric evaluation with training on other workers
            if k % 2 == 0 {
                let _ = accuracy(&reference, &c.vectors, &c.labels);
            }
            train_logreg(&c.vectors, &c.labels, 3, 77, &cfg).unwrap()
        })
        .collect();
    ensure(models.iter().all(|m| *m == reference), || "concurrent training diverged".into())
}

pub fn duplicate_pair_has_zero_distance() -> Check {
    let c = corpus(60, 500, 2, 3);
    let mut vectors = c.vectors.clone();
    vectors.push(vectors[17].clone());
    let raw = knn_raw_distances(&vectors, 1).map_err(|e| e.to_string())?;
    ensure(raw[17].abs() < 1e-12 && raw[60].abs() < 1e-12, || {
        format!("twin distances {} and {}", raw[17], raw[60])
    })
}

// ---------------------------------------------------------------------------
// invariants: proxies

pub fn proxy_ranges() -> Check {
    for classes in [2usize, 3] {
        let c = corpus(200, 600, classes, 4);
        let model = train_logreg(&c.vectors, &c.labels, classes, 1, &TrainConfig::default())
            .map_err(|e| e.to_string())?;
        let data = Labeled::new(&c.vectors, &c.labels).unwrap();
        let get = |k| score_proxy(k, &model, data, None).unwrap();
        ensure(get(ProxyKind::Margin).iter().all(|v| (-1.0..=1.0).contains(v)), || "margin".into())?;
        ensure(get(ProxyKind::Confidence).iter().all(|v| (0.0..=1.0).contains(v)), || "confidence".into())?;
        ensure(get(ProxyKind::Loss).iter().all(|v| *v <= 0.0), || "loss".into())?;
    }
    Ok(())
}

pub fn margin_and_confidence_agree() -> Check {
    for seed in 0..5u64 {
        let c = corpus(300, 800, 2, seed);
        let model = train_logreg(&c.vectors, &c.labels, 2, seed, &TrainConfig::default())
            .map_err(|e| e.to_string())?;
        let data = Labeled::new(&c.vectors, &c.labels).unwrap();
        let rank = |k| {
            let s = score_proxy(k, &model, data, None).unwrap();
            Ranking::from_scores(&c.ids, &s, Direction::Descending).unwrap()
        };
        ensure(rank(ProxyKind::Margin).order() == rank(ProxyKind::Confidence).order(), || {
            format!("seed {seed}: margin and confidence rankings differ")
        })?;
    }
    Ok(())
}

fn mean_loss(p: &LinearParams, xs: &[SparseVector], ys: &[u32]) -> f64 {
    xs.iter().zip(ys).map(|(x, &y)| p.cross_entropy(x, y as usize)).sum::<f64>() / xs.len() as f64
}

/// Worst relative error of the one-checkpoint score against the validation
/// loss drop after one explicit gradient step on each example.
pub fn tracin_first_order_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (classes, features) = (3, 6);
    let params = random_params(classes, features, 5);
    let eta = 1e-6;
    let train: Vec<SparseVector> = (0..25).map(|_| random_dense(features, &mut rng)).collect();
    let train_y: Vec<u32> = (0..25).map(|_| rng.random_range(0..classes as u32)).collect();
    let val: Vec<SparseVector> = (0..10).map(|_| random_dense(features, &mut rng)).collect();
    let val_y: Vec<u32> = (0..10).map(|_| rng.random_range(0..classes as u32)).collect();
    let model = LinearModel {
        params: params.clone(),
        trace: vec![Checkpoint {
            step: 1,
            learning_rate: eta,
            params: params.clone(),
        }],
    };
    let scores = score_proxy(
        ProxyKind::Tracin,
        &model,
        Labeled::new(&train, &train_y).unwrap(),
        Some(Labeled::new(&val, &val_y).unwrap()),
    )
    .unwrap();
    let before = mean_loss(&params, &val, &val_y);
    let mut worst: f64 = 0.0;
    for (i, (x, &y)) in train.iter().zip(&train_y).enumerate() {
        let (dw, db) = params.gradient(x, y as usize);
        let mut stepped = params.clone();
        stepped.weights.iter_mut().zip(&dw).for_each(|(w, g)| *w -= eta * g);
        stepped.bias.iter_mut().zip(&db).for_each(|(b, g)| *b -= eta * g);
        let drop = before - mean_loss(&stepped, &val, &val_y);
        worst = worst.max((scores[i] - drop).abs() / drop.abs());
    }
    worst
}

pub fn tracin_first_order() -> Check {
    let err = tracin_first_order_error();
    ensure(err < 0.10, || format!("worst relative error {err}"))
}

/// Brute-force double loop: retrain without each example, count correct
/// validation predictions one by one.
pub fn loo_brute_force(
    train: &[SparseVector],
    labels: &[u32],
    val: &[SparseVector],
    val_labels: &[u32],
    classes: usize,
    cfg: &LooConfig,
) -> Vec<f64> {
    let utility = |removed: Option<usize>| {
        let model = match removed {
            None => train_logreg(train, labels, classes, cfg.seed, &cfg.train),
            Some(i) => train_logreg_without(train, labels, classes, cfg.seed, &cfg.train, i),
        }
        .unwrap();
        let probs = predict_proba(&model, val).unwrap();
        let mut correct = 0usize;
        for (p, &y) in probs.iter().zip(val_labels) {
            let mut best = 0;
            for c in 1..p.len() {
                if p[c] > p[best] {
                    best = c;
                }
            }
            if best == y as usize {
                correct += 1;
            }
        }
        correct as f64 / val.len() as f64
    };
    let full = utility(None);
    (0..train.len()).map(|i| full - utility(Some(i))).collect()
}

pub struct TwinReport {
    pub twin_values: (f64, f64),
    pub resolution: f64,
    pub matches_oracle: bool,
}

/// 49 distinct examples plus an exact copy of one of them.
pub fn loo_twins(seed: u64) -> TwinReport {
    let d = make_synthetic_corpus(49, 3000, 2, seed).unwrap();
    let v = make_synthetic_corpus(200, 3000, 2, seed + 1000).unwrap();
    let mut texts = d.texts();
    let mut labels = d.labels();
    texts.push(texts[7].clone());
    labels.push(labels[7]);
    let tfidf = scarv::modelkit::TfidfModel::fit(&texts, &TfidfConfig::default()).unwrap();
    let train: Vec<SparseVector> = texts.iter().map(|t| tfidf.transform(t)).collect();
    let val: Vec<SparseVector> = v.texts().iter().map(|t| tfidf.transform(t)).collect();
    let val_labels = v.labels();
    let cfg = LooConfig {
        seed: 3,
        ..LooConfig::default()
    };
    let got = loo_values(
        Labeled::new(&train, &labels).unwrap(),
        Labeled::new(&val, &val_labels).unwrap(),
        2,
        &cfg,
    )
    .unwrap();
    let oracle = loo_brute_force(&train, &labels, &val, &val_labels, 2, &cfg);
    TwinReport {
        twin_values: (got.values[7], got.values[49]),
        resolution: 1.0 / val.len() as f64,
        matches_oracle: got.values == oracle,
    }
}

// ---------------------------------------------------------------------------
// invariants: scarv

pub fn bare_ignores_increasing_transforms() -> Check {
    property(256, prop::collection::vec(-3.0f64..3.0, 2..40), |v| {
        let n = v.len();
        let ids = ids(n);
        let transformed: Vec<f64> = v.iter().map(|x| x.exp() + x * x * x).collect();
        let d = vec![0.0; n];
        let map = ClusterMap::singletons(&ids);
        let rank = |col: Vec<f64>| {
            let m = ScoreMatrix::from_columns(ids.clone(), vec![0], vec![col]).unwrap();
            let inputs = MethodInputs {
                scores: &m,
                clusters: &map,
                approx_clusters: None,
                oracle_clusters: None,
                diversity: &d,
            };
            run_method(MethodKind::Bare, &inputs, &ScarvConfig::default()).unwrap()
        };
        let (x, y) = (rank(v.clone()), rank(transformed));
        prop_assert_eq!(x.order(), y.order());
        Ok(())
    })
}

pub fn normalize_ignores_affine_maps() -> Check {
    let strategy = (prop::collection::vec(-10.0f64..10.0, 2..40), 0.1f64..100.0, -50.0f64..50.0);
    property(256, strategy, |(v, a, b)| {
        let mapped: Vec<f64> = v.iter().map(|x| a * x + b).collect();
        let x = minmax_normalize(&v, DEFAULT_EPSILON).unwrap();
        let y = minmax_normalize(&mapped, DEFAULT_EPSILON).unwrap();
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((p - q).abs() < 1e-9, "{p} vs {q}");
        }
        Ok(())
    })
}

pub fn singleton_allocation_identity() -> Check {
    let strategy = (prop::collection::vec(0.0f64..1.0, 1..30), 0.0f64..=1.0, any::<bool>());
    property(256, strategy, |(u, lambda, collapse)| {
        let clusters = DenseClusters::all_singletons(u.len());
        let a = u.clone();
        let rule = if collapse { Allocation::Collapse } else { Allocation::Shrink { lambda } };
        prop_assert_eq!(allocate(&u, &a, &clusters, rule), u);
        Ok(())
    })
}

pub fn shrink_preserves_cluster_order() -> Check {
    let strategy = (prop::collection::hash_set(0u32..1000, 2..20), 0.01f64..=1.0, 0.0f64..1.0);
    property(256, strategy, |(values, lambda, summary)| {
        let u: Vec<f64> = values.into_iter().map(|v| f64::from(v) / 1000.0).collect();
        let n = u.len();
        let clusters = DenseClusters {
            of_row: vec![0; n],
            members: vec![(0..n).collect()],
        };
        let s = allocate(&u, &[summary], &clusters, Allocation::Shrink { lambda });
        for i in 0..n {
            for j in 0..n {
                if u[i] > u[j] {
                    prop_assert!(s[i] > s[j]);
                }
            }
        }
        Ok(())
    })
}

/// Relative deviation of the seed-mean variance from `sigma^2 / R`.
pub fn variance_law(rs: &[usize], n: usize, sigma: f64, seed: u64) -> Vec<(usize, f64)> {
    let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rs.iter()
        .map(|&r| {
            let columns: Vec<Vec<f64>> = (0..r)
                .map(|_| (0..n).map(|_| rng.sample(normal)).collect())
                .collect();
            let mean = cross_seed_aggregate(&columns, SeedAgg::Mean).unwrap();
            let mu = mean.iter().sum::<f64>() / n as f64;
            let var = mean.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
            let target = sigma * sigma / r as f64;
            (r, (var - target).abs() / target)
        })
        .collect()
}

pub fn seed_mean_variance_law() -> Check {
    let dev = variance_law(&[2, 5, 10], 10_000, 1.5, 41);
    ensure(dev.iter().all(|(_, d)| *d <= 0.2), || format!("deviations {dev:?}"))
}

pub fn full_scarv_deterministic() -> Check {
    let model = ScoreModelConfig {
        n: 400,
        ..ScoreModelConfig::default()
    };
    let s = SyntheticScores::generate(&model, 8).map_err(|e| e.to_string())?;
    let m = s.matrix(&[1, 2, 3, 4, 5]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d: Vec<f64> = (0..m.n_examples()).map(|_| rng.random()).collect();
    let run = || {
        let inputs = MethodInputs {
            scores: &m,
            clusters: &s.clusters,
            approx_clusters: None,
            oracle_clusters: None,
            diversity: &d,
        };
        run_method(MethodKind::FullScarv, &inputs, &ScarvConfig::default()).unwrap()
    };
    let bits = |r: &Ranking<f64>| -> (Vec<ExampleId>, Vec<u64>) {
        (r.order().to_vec(), r.scores().unwrap().iter().map(|x| x.to_bits()).collect())
    };
    let first = bits(&run());
    let parallel: Vec<_> = (0..8).into_par_iter().map(|_| bits(&run())).collect();
    ensure(parallel.iter().all(|b| *b == first), || "repeated runs differ".into())
}

// ---------------------------------------------------------------------------
// invariants: evalstats

pub fn spearman_symmetric_and_monotone() -> Check {
    let strategy = prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..40);
    property(256, strategy, |pairs| {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ab = spearman::<f64>(&a, &b);
        let ba = spearman::<f64>(&b, &a);
        prop_assert_eq!(ab.is_ok(), ba.is_ok());
        if let (Ok(x), Ok(y)) = (ab, ba) {
            prop_assert!((x - y).abs() < 1e-12);
            let a2: Vec<f64> = a.iter().map(|v| v.exp()).collect();
            let b2: Vec<f64> = b.iter().map(|v| 3.0 * v - 1.0).collect();
            let z = spearman::<f64>(&a2, &b2).unwrap();
            prop_assert!((x - z).abs() < 1e-12);
        }
        Ok(())
    })
}

pub fn auroc_complement() -> Check {
    let strategy = (prop::collection::hash_set(-1000i32..1000, 2..50), any::<u64>());
    property(256, strategy, |(values, seed)| {
        let scores: Vec<f64> = values.into_iter().map(f64::from).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pos: Vec<bool> = scores.iter().map(|_| rng.random_bool(0.5)).collect();
        pos[0] = true;
        pos[1] = false;
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let total = auroc(&scores, &pos).unwrap() + auroc(&neg, &pos).unwrap();
        prop_assert!((total - 1.0f64).abs() < 1e-12);
        Ok(())
    })
}

pub fn overlap_symmetric_and_exact() -> Check {
    let perm = Just((0u64..30).collect::<Vec<_>>()).prop_shuffle();
    let strategy = (perm.clone(), perm, 1usize..=30, 0.05f64..=1.0);
    property(256, strategy, |(p, q, k, budget)| {
        let a = Ranking::<f64>::from_order(p.into_iter().map(ExampleId).collect()).unwrap();
        let b = Ranking::<f64>::from_order(q.into_iter().map(ExampleId).collect()).unwrap();
        for end in [End::Top, End::Bottom] {
            let ab = topk_jaccard(&a, &b, k, end).unwrap();
            prop_assert_eq!(ab, topk_jaccard(&b, &a, k, end).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            let (sa, sb): (BTreeSet<_>, BTreeSet<_>) = match end {
                End::Top => (a.top(k).iter().collect(), b.top(k).iter().collect()),
                End::Bottom => (a.bottom(k).iter().collect(), b.bottom(k).iter().collect()),
            };
            prop_assert_eq!(ab == 1.0, sa == sb);
        }
        let k = (budget * 30.0).floor() as usize;
        if k >= 1 {
            let ab = subset_overlap(&[a.clone(), b.clone()], budget).unwrap();
            prop_assert_eq!(ab, subset_overlap(&[b.clone(), a.clone()], budget).unwrap());
            let same: BTreeSet<_> = a.top(k).iter().collect::<BTreeSet<_>>();
            prop_assert_eq!(ab == 1.0, same == b.top(k).iter().collect::<BTreeSet<_>>());
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// invariants: harness

/// Results CSV bytes of one experiment on a dedicated pool of `threads`.
pub fn results_bytes(cfg: &ExperimentConfig, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let result = pool.install(|| run_experiment(cfg)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    write_results_csv(&path, &result).unwrap();
    std::fs::read(path).unwrap()
}

pub fn end_to_end_deterministic() -> Check {
    let cfg = small_experiment(240);
    let one = results_bytes(&cfg, 1);
    for threads in [2, 4, 7] {
        ensure(results_bytes(&cfg, threads) == one, || {
            format!("{threads} threads changed the results CSV")
        })?;
    }
    Ok(())
}

pub fn methods_share_score_seeds() -> Check {
    let mut cfg = small_experiment(200);
    cfg.keep_rankings = true;
    let result = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let prep = prepare(&cfg).map_err(|e| e.to_string())?;
    let matrices = score_outer_runs(&prep, &cfg).map_err(|e| e.to_string())?;
    let rankings = result.rankings.as_ref().ok_or("rankings were not kept")?;
    for method in [MethodKind::Bare, MethodKind::SeedOnly(SeedAgg::Mean), MethodKind::FullScarv] {
        for (o, m) in matrices.iter().enumerate() {
            let inputs = MethodInputs {
                scores: m,
                clusters: &prep.clusters,
                approx_clusters: Some(&prep.approx_clusters),
                oracle_clusters: prep.injected.as_ref(),
                diversity: &prep.diversity,
            };
            let want = run_method(method, &inputs, &cfg.scarv).map_err(|e| e.to_string())?;
            let got = &rankings[&method.to_string()][o];
            ensure(got.order() == want.order(), || format!("{method} run {o} used other scores"))?;
        }
    }
    Ok(())
}

pub fn frontier_max_contract() -> Check {
    property(12, (any::<u64>(), 0.5f64..1.5), |(seed, gamma)| {
        let model = ScoreModelConfig {
            n: 200,
            gamma,
            ..ScoreModelConfig::default()
        };
        let s = SyntheticScores::generate(&model, seed).unwrap();
        let runs: Vec<ScoreMatrix<f64>> = (0..3)
            .map(|o| s.matrix(&(0..5).map(|j| seed ^ (o * 10 + j)).collect::<Vec<_>>()).unwrap())
            .collect();
        let inputs = FrontierInputs {
            clusters: s.clusters.clone(),
            diversity: vec![0.0; model.n],
            runs,
        };
        for row in frontier_rows(&inputs, &[1, 3, 5], &ScarvConfig::default()).unwrap() {
            for rule in SeedAgg::ALL {
                prop_assert!(row.best_upper >= row.seed_only(rule));
            }
            prop_assert_eq!(row.delta_best, row.full_scarv - row.best_upper);
        }
        Ok(())
    })
}

/// Every invariant check, by module.
pub fn invariant_suite() -> Vec<(&'static str, fn() -> Check)> {
    vec![
        ("normalize idempotent", normalize_idempotent as fn() -> Check),
        ("normalize keeps argsort", normalize_keeps_argsort),
        ("ranking round trip", ranking_round_trip),
        ("fractional ranks sum", fractional_rank_sum),
        ("injection keeps originals", injection_keeps_originals),
        ("perturbation monotone", perturbation_monotone),
        ("threshold monotone", threshold_monotone),
        ("miners deterministic", miners_deterministic),
        ("duplicate recovery", exact_duplicates_recovered),
        ("gradient check", gradient_matches_finite_differences),
        ("training vs concurrent evaluation", training_ignores_concurrent_evaluation),
        ("kNN duplicate distance", duplicate_pair_has_zero_distance),
        ("proxy ranges", proxy_ranges),
        ("margin/confidence equality", margin_and_confidence_agree),
        ("tracin first order", tracin_first_order),
        ("bare monotone invariance", bare_ignores_increasing_transforms),
        ("normalize affine invariance", normalize_ignores_affine_maps),
        ("singleton allocation identity", singleton_allocation_identity),
        ("shrink order preservation", shrink_preserves_cluster_order),
        ("borda vs mean rank", borda_vs_mean_rank),
        ("seed-mean variance law", seed_mean_variance_law),
        ("full_scarv deterministic", full_scarv_deterministic),
        ("spearman symmetry and monotonicity", spearman_symmetric_and_monotone),
        ("auroc complement", auroc_complement),
        ("overlap symmetry", overlap_symmetric_and_exact),
        ("wilcoxon vs enumeration", wilcoxon_vs_enumeration),
        ("end-to-end determinism", end_to_end_deterministic),
        ("paired seeds", methods_share_score_seeds),
        ("frontier max contract", frontier_max_contract),
    ]
}
