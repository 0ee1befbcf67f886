use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mining::{DEFAULT_CHARGRAM_THRESHOLD, DEFAULT_NGRAM, DEFAULT_TFIDF_THRESHOLD};
use crate::modelkit::TrainConfig;
use crate::proxies::ProxyKind;
use crate::scarv::{MethodKind, ScarvConfig, SeedAgg};

/// Where the training examples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic {
        n: usize,
        #[serde(default = "default_vocab")]
        vocab_size: usize,
        #[serde(default = "default_classes")]
        n_classes: usize,
        /// Held-out examples for subset-selection utility.
        #[serde(default = "default_test_size")]
        test_size: usize,
        /// Validation batch for TracIn-style scoring.
        #[serde(default = "default_val_size")]
        val_size: usize,
    },
    Jsonl {
        path: PathBuf,
        /// Labeled held-out set used for utility and as the validation batch.
        #[serde(default)]
        holdout: Option<PathBuf>,
    },
}

fn default_vocab() -> usize {
    3000
}
fn default_classes() -> usize {
    2
}
fn default_test_size() -> usize {
    1000
}
fn default_val_size() -> usize {
    200
}

/// Near-duplicate injection applied after label noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RedundancySpec {
    pub rate: f64,
    pub strength: f64,
    pub cluster_size: usize,
}

impl Default for RedundancySpec {
    fn default() -> Self {
        RedundancySpec {
            rate: 0.3,
            strength: 0.6,
            cluster_size: 2,
        }
    }
}

/// Which cluster map feeds the structural stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum ClusterSource {
    /// Ground truth from injection or `source_id` provenance.
    Injected,
    Tfidf {
        #[serde(default = "default_tfidf_threshold")]
        threshold: f64,
    },
    Chargram {
        #[serde(default = "default_ngram")]
        n: usize,
        #[serde(default = "default_chargram_threshold")]
        threshold: f64,
    },
    Imported {
        path: PathBuf,
    },
}

fn default_tfidf_threshold() -> f64 {
    DEFAULT_TFIDF_THRESHOLD
}
fn default_ngram() -> usize {
    DEFAULT_NGRAM
}
fn default_chargram_threshold() -> f64 {
    DEFAULT_CHARGRAM_THRESHOLD
}

impl Default for ClusterSource {
    fn default() -> Self {
        ClusterSource::Injected
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub redundancy: Option<RedundancySpec>,
    #[serde(default)]
    pub clusters: ClusterSource,
    #[serde(default = "default_proxy")]
    pub proxy: ProxyKind,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodKind>,
    /// Internal scoring seeds per outer run (`R`).
    #[serde(default = "default_r")]
    pub seeds_per_run: usize,
    #[serde(default = "default_outer")]
    pub outer_runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<f64>,
    #[serde(default)]
    pub noise_rate: Option<f64>,
    /// Size of the top/bottom sets compared by Jaccard, as a fraction of `n`.
    #[serde(default = "default_top_k_fraction")]
    pub top_k_fraction: f64,
    /// Keep every per-run ranking in the result.
    #[serde(default)]
    pub keep_rankings: bool,
    #[serde(default)]
    pub scarv: ScarvConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_proxy() -> ProxyKind {
    ProxyKind::Loss
}
fn default_methods() -> Vec<MethodKind> {
    vec![
        MethodKind::Bare,
        MethodKind::SeedOnly(SeedAgg::Mean),
        MethodKind::FullScarv,
    ]
}
fn default_r() -> usize {
    5
}
fn default_outer() -> usize {
    5
}
fn default_budgets() -> Vec<f64> {
    vec![0.3]
}
fn default_top_k_fraction() -> f64 {
    0.1
}

impl ExperimentConfig {
    /// The desk-scale default regime on a synthetic corpus of `n` examples.
    pub fn synthetic(n: usize) -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic {
                n,
                vocab_size: default_vocab(),
                n_classes: default_classes(),
                test_size: default_test_size(),
                val_size: default_val_size(),
            },
            redundancy: Some(RedundancySpec::default()),
            clusters: ClusterSource::Injected,
            proxy: default_proxy(),
            methods: default_methods(),
            seeds_per_run: default_r(),
            outer_runs: default_outer(),
            master_seed: 0,
            budgets: default_budgets(),
            noise_rate: None,
            top_k_fraction: default_top_k_fraction(),
            keep_rankings: false,
            scarv: ScarvConfig::default(),
            train: TrainConfig::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Rejects inconsistent settings before any compute.
    pub fn validate(&self) -> Result<()> {
        self.scarv.validate()?;
        self.train.validate()?;
        if self.outer_runs < 2 {
            return Err(Error::Config("stability needs at least 2 outer runs".into()));
        }
        if self.seeds_per_run == 0 {
            return Err(Error::Config("seeds_per_run must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("method list is empty".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::Config(format!("method {m} listed twice")));
            }
        }
        if let Some(b) = self.budgets.iter().find(|b| !(**b > 0.0 && **b <= 1.0)) {
            return Err(Error::Config(format!("budget {b} outside (0, 1]")));
        }
        if !(self.top_k_fraction > 0.0 && self.top_k_fraction <= 1.0) {
            return Err(Error::Config("top_k_fraction must lie in (0, 1]".into()));
        }
        if let Some(r) = self.noise_rate {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("noise rate {r} outside [0, 1)")));
            }
        }
        if let Some(red) = &self.redundancy {
            if !(red.rate >= 0.0) || !(0.0..=1.0).contains(&red.strength) || red.cluster_size < 2 {
                return Err(Error::Config(
                    "redundancy needs rate >= 0, strength in [0, 1], cluster_size >= 2".into(),
                ));
            }
        }
        match &self.dataset {
            DatasetSource::Synthetic {
                n,
                vocab_size,
                n_classes,
                test_size,
                ..
            } => {
                if *n < 2 || *vocab_size < 2 || *n_classes < 2 || *test_size == 0 {
                    return Err(Error::Config(
                        "synthetic corpus needs n >= 2, vocab_size >= 2, n_classes >= 2, test_size >= 1"
                            .into(),
                    ));
                }
            }
            DatasetSource::Jsonl { holdout, .. } => {
                if self.redundancy.is_some() {
                    return Err(Error::Config(
                        "redundancy injection applies to synthetic corpora only".into(),
                    ));
                }
                if self.noise_rate.is_some() {
                    return Err(Error::Config(
                        "noise injection applies to synthetic corpora only".into(),
                    ));
                }
                if self.proxy.needs_validation() && holdout.is_none() {
                    return Err(Error::Config("tracin proxy needs a holdout file".into()));
                }
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
