use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::base::SparseVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfConfig {
    /// Tokens seen in fewer documents are dropped.
    pub min_df: usize,
    /// Keep only the most frequent tokens (by document frequency).
    pub max_features: Option<usize>,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            min_df: 1,
            max_features: None,
        }
    }
}

/// Fitted vocabulary with smoothed idf, `ln((1 + N) / (1 + df)) + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub vocabulary: BTreeMap<String, u32>,
    pub idf: Vec<f64>,
    pub config: TfidfConfig,
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(str::to_lowercase)
}

impl TfidfModel {
    pub fn fit(texts: &[String], config: &TfidfConfig) -> Result<Self> {
        if texts.is_empty() {
            return Err(Error::invalid("cannot fit TF-IDF on an empty corpus"));
        }
        let mut df: HashMap<String, usize> = HashMap::new();
        for text in texts {
            let uniq: HashSet<String> = tokenize(text).collect();
            for tok in uniq {
                *df.entry(tok).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> =
            df.into_iter().filter(|(_, c)| *c >= config.min_df).collect();
        if let Some(max) = config.max_features {
            kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            kept.truncate(max);
        }
        if kept.is_empty() {
            return Err(Error::invalid("TF-IDF vocabulary is empty after filtering"));
        }
        kept.sort_by(|a, b| a.0.cmp(&b.0));
        let n = texts.len() as f64;
        let idf = kept
            .iter()
            .map(|(_, c)| ((1.0 + n) / (1.0 + *c as f64)).ln() + 1.0)
            .collect();
        let vocabulary = kept
            .into_iter()
            .enumerate()
            .map(|(col, (tok, _))| (tok, col as u32))
            .collect();
        Ok(TfidfModel {
            vocabulary,
            idf,
            config: config.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    /// Raw term counts times idf, L2-normalized. Unknown tokens are ignored;
    /// a text with no known token maps to the zero vector.
    pub fn transform(&self, text: &str) -> SparseVector {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for tok in tokenize(text) {
            if let Some(&col) = self.vocabulary.get(&tok) {
                *counts.entry(col).or_default() += 1.0;
            }
        }
        let entries = counts
            .into_iter()
            .map(|(col, tf)| (col, tf * self.idf[col as usize]))
            .collect();
        SparseVector::from_entries(self.dim(), entries)
            .expect("vocabulary columns are in range")
            .normalized()
    }
}

pub fn tfidf_fit_transform(
    texts: &[String],
    config: &TfidfConfig,
) -> Result<(TfidfModel, Vec<SparseVector>)> {
    let model = TfidfModel::fit(texts, config)?;
    let vectors = texts.iter().map(|t| model.transform(t)).collect();
    Ok((model, vectors))
}
