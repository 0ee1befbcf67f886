//! `scarv` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use scarv::base::{ClusterMap, ExampleId};
use scarv::evalstats::{pairwise_values, subset_overlap, topk_jaccard, End};
use scarv::harness::io::{
    read_cluster_csv, read_ranking_csv, read_score_csv, read_vectors_csv, write_cluster_csv,
    write_ranking_csv, write_score_csv,
};
use scarv::harness::{
    compare_methods, derive_seed, emit_frontier, emit_report, frontier_grid, prepare,
    read_results_csv, run_decomposition, run_experiment, run_frontier, run_frontier_synthetic,
    DatasetSource, ExperimentConfig, ExperimentResult, ReportFormat, SPEARMAN_VS_OTHERS,
};
use scarv::mining::{
    chargram_jaccard_pairs, cluster_stats, dense_cosine_pairs, threshold_clusters,
    tfidf_cosine_pairs, DEFAULT_CHARGRAM_THRESHOLD, DEFAULT_NGRAM, DEFAULT_TFIDF_THRESHOLD,
};
use scarv::modelkit::{knn_mean_cosine_distance, tfidf_fit_transform, TfidfConfig};
use scarv::proxies::{score_matrix, ProxyKind, ScoringInput};
use scarv::textgen::Dataset;
use scarv::{run_method, Error, MethodInputs, MethodKind, Ranking, ScarvConfig};

#[derive(Parser)]
#[command(name = "scarv", version, about = "Stabilize proxy-induced sample rankings")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    master_seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic corpus with injected redundancy and noise.
    Gen {
        /// Corpus size when no config is given.
        #[arg(long, default_value_t = 2000)]
        n: usize,
    },
    /// Near-duplicate clusters from a dataset or dense vectors.
    Mine {
        #[arg(long, conflicts_with = "vectors", required_unless_present = "vectors")]
        input: Option<PathBuf>,
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MineMethod::Tfidf)]
        method: MineMethod,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_NGRAM)]
        ngram: usize,
    },
    /// Train one model per seed and write the score matrix.
    Score {
        #[arg(long)]
        input: PathBuf,
        /// Labeled validation set for the tracin proxy.
        #[arg(long)]
        holdout: Option<PathBuf>,
        #[arg(long, default_value = "loss")]
        proxy: ProxyKind,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
    /// Rank examples from a score matrix.
    Aggregate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Ground-truth clusters for dedup_oracle.
        #[arg(long)]
        oracle_clusters: Option<PathBuf>,
        /// Dataset used for the kNN diversity term; zero diversity without it.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "full_scarv")]
        method: MethodKind,
    },
    /// Stability metrics across rankings, or paired tests on a results file.
    Eval {
        #[arg(long, num_args = 2.., conflicts_with = "results")]
        rankings: Vec<PathBuf>,
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long, default_value = "bare")]
        baseline: String,
        #[arg(long, default_value_t = 0.3)]
        budget: f64,
        /// Top/bottom set size; defaults to a tenth of the ranking.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run the configured methods across outer runs.
    Run,
    /// Seed-budget frontier.
    Frontier {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,7,10")]
        r_list: Vec<usize>,
        /// Synthetic score-model configurations when no config is given.
        #[arg(long, default_value_t = 10)]
        configs: usize,
        #[arg(long, default_value_t = 5)]
        outer_runs: usize,
    },
    /// Mechanism decomposition over all methods.
    Decompose,
    /// Charts from a results CSV.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MineMethod {
    Tfidf,
    Chargram,
}

fn load_config(common: &Common) -> scarv::Result<Option<ExperimentConfig>> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => return Ok(None),
    };
    if let Some(s) = common.master_seed {
        cfg.master_seed = s;
    }
    Ok(Some(cfg))
}

fn config_or_default(common: &Common, n: usize) -> scarv::Result<ExperimentConfig> {
    Ok(match load_config(common)? {
        Some(c) => c,
        None => {
            let mut c = ExperimentConfig::synthetic(n);
            c.master_seed = common.master_seed.unwrap_or(0);
            c
        }
    })
}

fn require_config(common: &Common) -> scarv::Result<ExperimentConfig> {
    load_config(common)?.ok_or_else(|| Error::Config("this command needs --config".into()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> scarv::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(dir: &Path) -> scarv::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_lines(path: &Path, header: &str, rows: &[String]) -> scarv::Result<()> {
    let mut body = String::from(header);
    body.push('\n');
    for r in rows {
        body.push_str(r);
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_gen(common: &Common, n: usize) -> scarv::Result<()> {
    let cfg = config_or_default(common, n)?;
    if !matches!(cfg.dataset, DatasetSource::Synthetic { .. }) {
        return Err(Error::Config("gen needs a synthetic dataset config".into()));
    }
    let prep = prepare(&cfg)?;
    create_dir(&common.out_dir)?;
    prep.dataset.write_jsonl(&common.out_dir.join("dataset.jsonl"))?;
    let clusters = prep.injected.unwrap_or_else(|| ClusterMap::singletons(&prep.dataset.ids()));
    write_cluster_csv(&common.out_dir.join("clusters.csv"), &clusters)?;
    if let DatasetSource::Synthetic { test_size, vocab_size, n_classes, .. } = cfg.dataset {
        let test = scarv::textgen::make_synthetic_corpus(
            test_size,
            vocab_size,
            n_classes,
            derive_seed(cfg.master_seed, 0, "test", 0),
        )?;
        test.write_jsonl(&common.out_dir.join("holdout.jsonl"))?;
    }
    info!("wrote {} examples to {}", prep.dataset.len(), common.out_dir.display());
    Ok(())
}

fn cmd_mine(
    common: &Common,
    input: Option<&Path>,
    vectors: Option<&Path>,
    method: MineMethod,
    threshold: Option<f64>,
    ngram: usize,
) -> scarv::Result<()> {
    let (ids, map, features, labels) = if let Some(path) = vectors {
        let items = read_vectors_csv(path)?;
        let ids: Vec<ExampleId> = items.iter().map(|p| p.0).collect();
        let dense: Vec<(ExampleId, Vec<f64>)> = items.iter().map(|(id, v)| (*id, v.to_dense())).collect();
        let t = threshold.unwrap_or(DEFAULT_TFIDF_THRESHOLD);
        let map = threshold_clusters(&ids, &dense_cosine_pairs(&dense, t)?, t)?;
        (ids, map, items.into_iter().collect(), None)
    } else {
        let d = Dataset::read_jsonl(input.expect("clap requires one input"))?;
        let ids = d.ids();
        let texts = d.texts();
        let (_, vecs) = tfidf_fit_transform(&texts, &TfidfConfig::default())?;
        let items: Vec<_> = ids.iter().copied().zip(vecs).collect();
        let map = match method {
            MineMethod::Tfidf => {
                let t = threshold.unwrap_or(DEFAULT_TFIDF_THRESHOLD);
                threshold_clusters(&ids, &tfidf_cosine_pairs(&items, t), t)?
            }
            MineMethod::Chargram => {
                let t = threshold.unwrap_or(DEFAULT_CHARGRAM_THRESHOLD);
                let docs: Vec<(ExampleId, String)> = ids.iter().copied().zip(texts).collect();
                threshold_clusters(&ids, &chargram_jaccard_pairs(&docs, ngram, t)?, t)?
            }
        };
        let labels = ids.iter().copied().zip(d.labels()).collect();
        (ids, map, items.into_iter().collect(), Some(labels))
    };
    create_dir(&common.out_dir)?;
    write_cluster_csv(&common.out_dir.join("clusters.csv"), &map)?;
    let labels = labels.unwrap_or_else(|| ids.iter().map(|&id| (id, 0)).collect());
    let stats = cluster_stats(&map, Some(&features), &labels)?;
    write_json(&common.out_dir.join("cluster_stats.json"), &stats)?;
    info!("{} clusters over {} examples", map.n_clusters(), ids.len());
    Ok(())
}

fn cmd_score(common: &Common, input: &Path, holdout: Option<&Path>, proxy: ProxyKind, seeds: usize) -> scarv::Result<()> {
    let cfg = load_config(common)?;
    let master = common.master_seed.or(cfg.as_ref().map(|c| c.master_seed)).unwrap_or(0);
    let train = cfg.map(|c| c.train).unwrap_or_default();
    let d = Dataset::read_jsonl(input)?;
    let texts = d.texts();
    let (model, vectors) = tfidf_fit_transform(&texts, &TfidfConfig::default())?;
    let val = match holdout {
        Some(p) => {
            let h = Dataset::read_jsonl(p)?;
            Some((h.texts().iter().map(|t| model.transform(t)).collect(), h.labels()))
        }
        None => None,
    };
    let scoring = ScoringInput {
        ids: d.ids(),
        vectors,
        labels: d.labels(),
        n_classes: d.n_classes() as usize,
        val,
    };
    let seed_list: Vec<u64> = (0..seeds).map(|j| derive_seed(master, 0, "score", j)).collect();
    let m = score_matrix(&scoring, proxy, &seed_list, &train)?;
    create_dir(&common.out_dir)?;
    write_score_csv(&common.out_dir.join("scores.csv"), &m)
}

fn cmd_aggregate(
    common: &Common,
    scores: &Path,
    clusters: Option<&Path>,
    oracle: Option<&Path>,
    input: Option<&Path>,
    method: MethodKind,
) -> scarv::Result<()> {
    let scarv_cfg = load_config(common)?.map(|c| c.scarv).unwrap_or_default();
    let m = read_score_csv(scores)?;
    let ids = m.example_ids().to_vec();
    let load_map = |p: Option<&Path>| -> scarv::Result<Option<ClusterMap>> {
        p.map(|p| ClusterMap::from_partial(&ids, &read_cluster_csv(p)?)).transpose()
    };
    let map = load_map(clusters)?.unwrap_or_else(|| ClusterMap::singletons(&ids));
    let oracle = load_map(oracle)?;
    if method == MethodKind::DedupOracle && oracle.is_none() {
        return Err(Error::Config("dedup_oracle needs --oracle-clusters".into()));
    }
    let diversity = match input {
        Some(p) => {
            let d = Dataset::read_jsonl(p)?;
            let (_, vectors) = tfidf_fit_transform(&d.texts(), &TfidfConfig::default())?;
            let raw = knn_mean_cosine_distance(&vectors, scarv_cfg.knn_k)?;
            let by_id: std::collections::HashMap<ExampleId, f64> = d.ids().into_iter().zip(raw).collect();
            ids.iter()
                .map(|id| by_id.get(id).copied().ok_or(Error::MissingScore(*id)))
                .collect::<scarv::Result<Vec<f64>>>()?
        }
        None => {
            if scarv_cfg.diversity_weight > 0.0 {
                warn!("no --input given; diversity term is zero");
            }
            vec![0.0; ids.len()]
        }
    };
    let inputs = MethodInputs {
        scores: &m,
        clusters: &map,
        approx_clusters: None,
        oracle_clusters: oracle.as_ref(),
        diversity: &diversity,
    };
    let ranking = run_method(method, &inputs, &scarv_cfg)?;
    create_dir(&common.out_dir)?;
    write_ranking_csv(&common.out_dir.join("ranking.csv"), &ranking)
}

fn fmt(x: f64) -> String {
    scarv::harness::io::fmt_float(x)
}

fn cmd_eval(
    common: &Common,
    rankings: &[PathBuf],
    results: Option<&Path>,
    baseline: &str,
    budget: f64,
    k: Option<usize>,
) -> scarv::Result<()> {
    create_dir(&common.out_dir)?;
    if let Some(path) = results {
        let res = read_results_csv(path)?;
        let seed = derive_seed(common.master_seed.unwrap_or(0), 0, "bootstrap", 0);
        let mut rows = Vec::new();
        for m in res.methods().iter().filter(|m| *m != baseline) {
            let t = compare_methods(&res, m, baseline, SPEARMAN_VS_OTHERS, 10_000, seed)?;
            rows.push(format!(
                "{m},{baseline},{},{},{},{},{},{}",
                fmt(t.mean_delta),
                fmt(t.ci_low),
                fmt(t.ci_high),
                fmt(t.p_value),
                t.n,
                t.exact
            ));
        }
        return write_lines(
            &common.out_dir.join("significance.csv"),
            "method,baseline,mean_delta,ci_low,ci_high,p_value,n,exact",
            &rows,
        );
    }
    if rankings.len() < 2 {
        return Err(Error::Config("eval needs at least two --rankings or a --results file".into()));
    }
    let rs = rankings
        .iter()
        .map(|p| read_ranking_csv(p))
        .collect::<scarv::Result<Vec<Ranking<f64>>>>()?;
    let n = rs[0].len();
    let k = k.unwrap_or((n / 10).max(1));
    let pairs: Vec<f64> = pairwise_values(&rs)?;
    let mut top = Vec::new();
    let mut bottom = Vec::new();
    for i in 0..rs.len() {
        for j in i + 1..rs.len() {
            top.push(topk_jaccard(&rs[i], &rs[j], k, End::Top)?);
            bottom.push(topk_jaccard(&rs[i], &rs[j], k, End::Bottom)?);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let rows = vec![
        format!("stability,{}", fmt(mean(&pairs))),
        format!("topk_jaccard,{}", fmt(mean(&top))),
        format!("bottomk_jaccard,{}", fmt(mean(&bottom))),
        format!("subset_overlap@{},{}", fmt(budget), fmt(subset_overlap(&rs, budget)?)),
    ];
    write_lines(&common.out_dir.join("metrics.csv"), "metric,value", &rows)
}

fn write_result(common: &Common, res: &ExperimentResult) -> scarv::Result<()> {
    emit_report(res, ReportFormat::Csv, &common.out_dir)?;
    emit_report(res, ReportFormat::Svg, &common.out_dir)?;
    if let Some(rankings) = &res.rankings {
        for (method, runs) in rankings {
            for (o, r) in runs.iter().enumerate() {
                write_ranking_csv(&common.out_dir.join("rankings").join(format!("{method}_run{o}.csv")), r)?;
            }
        }
    }
    if let Some(t) = res.wall_clock {
        info!("finished in {:.1}s", t.as_secs_f64());
    }
    Ok(())
}

fn cmd_frontier(common: &Common, r_list: &[usize], configs: usize, outer_runs: usize) -> scarv::Result<()> {
    if let Some(cfg) = load_config(common)? {
        let rows = run_frontier(&cfg, r_list)?;
        emit_frontier(&rows, ReportFormat::Csv, &common.out_dir)?;
        emit_frontier(&rows, ReportFormat::Svg, &common.out_dir)?;
        return Ok(());
    }
    let master = common.master_seed.unwrap_or(0);
    let scarv_cfg = ScarvConfig::default();
    let mut summary = Vec::new();
    for (i, model) in frontier_grid(master, configs).iter().enumerate() {
        let rows = run_frontier_synthetic(model, outer_runs, derive_seed(master, i, "frontier", 0), r_list, &scarv_cfg)?;
        let dir = common.out_dir.join(format!("config{i}"));
        emit_frontier(&rows, ReportFormat::Csv, &dir)?;
        emit_frontier(&rows, ReportFormat::Svg, &dir)?;
        write_json(&dir.join("score_model.json"), model)?;
        for r in &rows {
            summary.push(format!("{i},{},{},{}", r.r, fmt(r.delta_best), r.winner_rule));
        }
    }
    write_lines(&common.out_dir.join("frontier_summary.csv"), "config,r,delta_best,winner_rule", &summary)
}

fn run(cli: Cli) -> scarv::Result<()> {
    let common = &cli.common;
    if let Some(j) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Gen { n } => cmd_gen(common, *n),
        Command::Mine { input, vectors, method, threshold, ngram } => {
            cmd_mine(common, input.as_deref(), vectors.as_deref(), *method, *threshold, *ngram)
        }
        Command::Score { input, holdout, proxy, seeds } => cmd_score(common, input, holdout.as_deref(), *proxy, *seeds),
        Command::Aggregate { scores, clusters, oracle_clusters, input, method } => cmd_aggregate(
            common,
            scores,
            clusters.as_deref(),
            oracle_clusters.as_deref(),
            input.as_deref(),
            *method,
        ),
        Command::Eval { rankings, results, baseline, budget, k } => {
            cmd_eval(common, rankings, results.as_deref(), baseline, *budget, *k)
        }
        Command::Run => write_result(common, &run_experiment(&require_config(common)?)?),
        Command::Frontier { r_list, configs, outer_runs } => cmd_frontier(common, r_list, *configs, *outer_runs),
        Command::Decompose => {
            let res = run_decomposition(&require_config(common)?)?;
            write_result(common, &res)
        }
        Command::Report { results } => {
            let res = read_results_csv(results)?;
            emit_report(&res, ReportFormat::Svg, &common.out_dir).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
