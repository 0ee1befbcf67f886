use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Strength of the near-duplicate perturbation pipeline.
///
/// Per-transform probabilities scale linearly with `strength`:
/// dropout `0.15s` per token, adjacent swap `0.15s` per pair, repetition
/// `0.1s` per token, replacement `0.15s` per token and segment shuffle `0.3s`
/// per text. Replacement draws from `vocabulary`, or from the text's own
/// tokens when no vocabulary is given.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationConfig {
    strength: f64,
    vocabulary: Arc<Vec<String>>,
}

impl PerturbationConfig {
    pub fn new(strength: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::Config(format!(
                "perturbation strength {strength} outside [0, 1]"
            )));
        }
        Ok(PerturbationConfig {
            strength,
            vocabulary: Arc::new(Vec::new()),
        })
    }

    pub fn with_vocabulary(mut self, vocabulary: Vec<String>) -> Self {
        self.vocabulary = Arc::new(vocabulary);
        self
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn dropout(&self) -> f64 {
        0.15 * self.strength
    }

    pub fn swap(&self) -> f64 {
        0.15 * self.strength
    }

    pub fn repetition(&self) -> f64 {
        0.1 * self.strength
    }

    pub fn replacement(&self) -> f64 {
        0.15 * self.strength
    }

    pub fn segment_shuffle(&self) -> f64 {
        0.3 * self.strength
    }
}

/// Applies segment shuffle, local swaps, replacement, repetition and dropout,
/// in that order. Strength zero returns the input unchanged; otherwise the
/// output is whitespace-joined and always keeps at least one token.
pub fn perturb_text(text: &str, cfg: &PerturbationConfig, seed: u64) -> Result<String> {
    let mut tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(Error::invalid("cannot perturb empty text"));
    }
    if cfg.strength == 0.0 {
        return Ok(text.to_string());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if tokens.len() >= 2 && rng.random_bool(cfg.segment_shuffle()) {
        shuffle_segments(&mut tokens, &mut rng);
    }

    let mut i = 0;
    while i + 1 < tokens.len() {
        if rng.random_bool(cfg.swap()) {
            tokens.swap(i, i + 1);
            i += 2;
        } else {
            i += 1;
        }
    }

    let originals: Vec<&str> = tokens.clone();
    for tok in tokens.iter_mut() {
        if rng.random_bool(cfg.replacement()) {
            let pool: Vec<&str> = if cfg.vocabulary.is_empty() {
                originals.iter().copied().filter(|t| t != tok).collect()
            } else {
                cfg.vocabulary
                    .iter()
                    .map(String::as_str)
                    .filter(|t| t != tok)
                    .collect()
            };
            if let Some(&pick) = pool.choose(&mut rng) {
                *tok = pick;
            }
        }
    }

    let mut repeated = Vec::with_capacity(tokens.len() * 2);
    for tok in tokens {
        repeated.push(tok);
        if rng.random_bool(cfg.repetition()) {
            repeated.push(tok);
        }
    }

    let keep: Vec<bool> = repeated
        .iter()
        .map(|_| !rng.random_bool(cfg.dropout()))
        .collect();
    let mut out: Vec<&str> = repeated
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(t, _)| *t)
        .collect();
    if out.is_empty() {
        out.push(repeated[rng.random_range(0..repeated.len())]);
    }
    Ok(out.join(" "))
}

/// Splits into 2-3 contiguous segments and applies a non-identity permutation.
fn shuffle_segments(tokens: &mut Vec<&str>, rng: &mut ChaCha8Rng) {
    let n = tokens.len();
    let pieces = if n >= 3 { rng.random_range(2..=3) } else { 2 };
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, n - 1, pieces - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(n);
    let segments: Vec<Vec<&str>> = bounds.windows(2).map(|w| tokens[w[0]..w[1]].to_vec()).collect();
    let mut perm: Vec<usize> = (0..segments.len()).collect();
    while perm.iter().enumerate().all(|(i, &p)| i == p) {
        perm.shuffle(rng);
    }
    *tokens = perm.iter().flat_map(|&p| segments[p].iter().copied()).collect();
}
