use std::collections::HashMap;

use log::{info, warn};

use super::config::{ClusterSource, DatasetSource, ExperimentConfig};
use super::derive_seed;
use super::io::read_cluster_csv;
use crate::base::{ClusterMap, ExampleId, SparseVector};
use crate::error::{Error, Result};
use crate::mining::{
    chargram_jaccard_pairs, threshold_clusters, tfidf_cosine_pairs, DEFAULT_TFIDF_THRESHOLD,
};
use crate::modelkit::{knn_mean_cosine_distance, TfidfConfig, TfidfModel};
use crate::proxies::ScoringInput;
use crate::textgen::{
    inject_label_noise, inject_near_duplicates, make_synthetic_corpus, Dataset,
    PerturbationConfig,
};

/// Everything an experiment needs that does not depend on the outer run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub scoring: ScoringInput,
    /// Map used by the structural stage.
    pub clusters: ClusterMap,
    /// Mined TF-IDF map for `dedup_approx`.
    pub approx_clusters: ClusterMap,
    /// Ground truth, when the data carries provenance.
    pub injected: Option<ClusterMap>,
    pub diversity: Vec<f64>,
    /// Held-out set for subset-selection utility.
    pub test: Option<(Vec<SparseVector>, Vec<u32>)>,
    pub flipped: Option<Vec<bool>>,
}

fn provenance_map(d: &Dataset) -> Option<ClusterMap> {
    let prov = d.provenance();
    if prov.is_empty() {
        return None;
    }
    let mut groups: HashMap<ExampleId, Vec<ExampleId>> = HashMap::new();
    for (copy, src) in prov {
        groups.entry(src).or_insert_with(|| vec![src]).push(copy);
    }
    let mut groups: Vec<Vec<ExampleId>> = groups.into_values().collect();
    groups.sort();
    ClusterMap::from_groups(&d.ids(), &groups).ok()
}

fn mine_tfidf(ids: &[ExampleId], vectors: &[SparseVector], threshold: f64) -> Result<ClusterMap> {
    let items: Vec<(ExampleId, SparseVector)> =
        ids.iter().copied().zip(vectors.iter().cloned()).collect();
    threshold_clusters(ids, &tfidf_cosine_pairs(&items, threshold), threshold)
}

/// Builds or loads the dataset, featurizes it and resolves cluster maps.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let m = cfg.master_seed;
    let (dataset, injected, test, val) = match &cfg.dataset {
        DatasetSource::Synthetic {
            n,
            vocab_size,
            n_classes,
            test_size,
            val_size,
        } => {
            let base = make_synthetic_corpus(*n, *vocab_size, *n_classes, derive_seed(m, 0, "corpus", 0))?;
            let noisy = match cfg.noise_rate {
                Some(rate) => inject_label_noise(&base, rate, derive_seed(m, 0, "noise", 0))?,
                None => base,
            };
            let (data, map) = match &cfg.redundancy {
                Some(red) => {
                    let vocab = (0..*vocab_size).map(|i| format!("w{i}")).collect();
                    let pc = PerturbationConfig::new(red.strength)?.with_vocabulary(vocab);
                    let (d, map) = inject_near_duplicates(
                        &noisy,
                        red.rate,
                        &pc,
                        red.cluster_size,
                        derive_seed(m, 0, "redundancy", 0),
                    )?;
                    (d, Some(map))
                }
                None => (noisy, None),
            };
            let test = make_synthetic_corpus(*test_size, *vocab_size, *n_classes, derive_seed(m, 0, "test", 0))?;
            let val = if *val_size > 0 {
                Some(make_synthetic_corpus(*val_size, *vocab_size, *n_classes, derive_seed(m, 0, "validation", 0))?)
            } else {
                None
            };
            (data, map, Some(test), val)
        }
        DatasetSource::Jsonl { path, holdout } => {
            let data = Dataset::read_jsonl(path)?;
            let map = provenance_map(&data);
            let hold = holdout.as_deref().map(Dataset::read_jsonl).transpose()?;
            (data, map, hold.clone(), hold)
        }
    };
    let n_classes = dataset.n_classes().max(test.as_ref().map_or(0, |t| t.n_classes())) as usize;
    let texts = dataset.texts();
    let tfidf = TfidfModel::fit(&texts, &TfidfConfig::default())?;
    let vectors: Vec<SparseVector> = texts.iter().map(|t| tfidf.transform(t)).collect();
    let featurize = |d: &Dataset| -> (Vec<SparseVector>, Vec<u32>) {
        (d.texts().iter().map(|t| tfidf.transform(t)).collect(), d.labels())
    };
    let ids = dataset.ids();
    let approx_clusters = mine_tfidf(&ids, &vectors, DEFAULT_TFIDF_THRESHOLD)?;
    let clusters = match &cfg.clusters {
        ClusterSource::Injected => match &injected {
            Some(map) => map.clone(),
            None => {
                warn!("no injected clusters available; using singletons");
                ClusterMap::singletons(&ids)
            }
        },
        ClusterSource::Tfidf { threshold } => mine_tfidf(&ids, &vectors, *threshold)?,
        ClusterSource::Chargram { n, threshold } => {
            let items: Vec<(ExampleId, String)> = ids.iter().copied().zip(texts).collect();
            threshold_clusters(&ids, &chargram_jaccard_pairs(&items, *n, *threshold)?, *threshold)?
        }
        ClusterSource::Imported { path } => {
            let partial = read_cluster_csv(path)?;
            ClusterMap::from_partial(&ids, &partial)?
        }
    };
    let needs_oracle = cfg
        .methods
        .contains(&crate::scarv::MethodKind::DedupOracle);
    if needs_oracle && injected.is_none() {
        return Err(Error::Config("dedup_oracle needs an injected cluster map".into()));
    }
    let diversity = knn_mean_cosine_distance(&vectors, cfg.scarv.knn_k)?;
    info!(
        "prepared {} examples, {} clusters ({} mined)",
        dataset.len(),
        clusters.n_clusters(),
        approx_clusters.n_clusters()
    );
    let flipped = dataset.flip_mask();
    let scoring = ScoringInput {
        ids,
        vectors,
        labels: dataset.labels(),
        n_classes,
        val: val.as_ref().map(&featurize),
    };
    Ok(Prepared {
        test: test.as_ref().map(&featurize),
        dataset,
        scoring,
        clusters,
        approx_clusters,
        injected,
        diversity,
        flipped,
    })
}
