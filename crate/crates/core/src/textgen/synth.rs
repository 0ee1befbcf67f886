use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{count_for_rate, perturb_text, Dataset, Example, PerturbationConfig, Text};
use crate::base::{ClusterMap, ExampleId};
use crate::error::{Error, Result};

/// Token name for vocabulary index `i`.
pub(crate) fn token(i: usize) -> String {
    format!("w{i}")
}

/// Keyword token indices owned by class `c`: `c, c + C, c + 2C, ...`.
fn keywords_per_class(vocab_size: usize, class_count: usize) -> usize {
    (vocab_size / (4 * class_count)).clamp(1, 25)
}

/// Generates `n` labeled token strings of 5-30 tokens.
///
/// Each class owns a fixed set of keyword tokens (independent of `seed`, so
/// corpora drawn with different seeds follow the same labeling rule). Each
/// example draws a keyword rate in `[0.05, 0.45]`; its tokens come from its
/// class's keywords at that rate, from another class's keywords at rate
/// 0.04, and otherwise from a skewed distribution over the remaining
/// vocabulary.
pub fn make_synthetic_corpus(
    n: usize,
    vocab_size: usize,
    class_count: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("corpus size must be at least 1".into()));
    }
    if vocab_size < 2 {
        return Err(Error::Config("vocabulary needs at least 2 tokens".into()));
    }
    if class_count < 2 {
        return Err(Error::Config("need at least 2 classes".into()));
    }
    let kw = keywords_per_class(vocab_size, class_count);
    let keyword_span = (kw * class_count).min(vocab_size - 1);
    let neutral = vocab_size - keyword_span;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class_keyword = |c: usize, rng: &mut ChaCha8Rng| {
        let slots = (0..kw).filter(|j| c + class_count * j < keyword_span).count().max(1);
        (c + class_count * rng.random_range(0..slots)).min(keyword_span - 1)
    };

    // balanced classes in shuffled order
    let mut labels: Vec<usize> = (0..n).map(|i| i % class_count).collect();
    labels.shuffle(&mut rng);
    let mut examples = Vec::with_capacity(n);
    for (id, &label) in labels.iter().enumerate() {
        let len = rng.random_range(5..=30);
        let rate = rng.random_range(0.05..=0.45);
        let tokens: Vec<String> = (0..len)
            .map(|_| {
                let u: f64 = rng.random();
                let idx = if u < rate {
                    class_keyword(label, &mut rng)
                } else if u < rate + 0.04 {
                    let other = (label + rng.random_range(1..class_count)) % class_count;
                    class_keyword(other, &mut rng)
                } else {
                    let v: f64 = rng.random();
                    keyword_span + ((v * v * neutral as f64) as usize).min(neutral - 1)
                };
                token(idx)
            })
            .collect();
        examples.push(Example {
            id: ExampleId(id as u64),
            text: Text::Single(tokens.join(" ")),
            label: label as u32,
            flipped: None,
            source_id: None,
        });
    }
    Dataset::new(examples, class_count as u32)
}

/// Appends `floor(rate * n)` perturbed copies of sampled source examples.
///
/// Copies are dealt round-robin over `ceil(copies / (cluster_size - 1))`
/// sources, so every source cluster holds at most `cluster_size` members.
/// Copies get fresh ids above the current maximum, inherit label and flip
/// flag, and record their source. The returned map groups each source with
/// its copies; everything else is a singleton.
pub fn inject_near_duplicates(
    d: &Dataset,
    rate: f64,
    cfg: &PerturbationConfig,
    cluster_size: usize,
    seed: u64,
) -> Result<(Dataset, ClusterMap)> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::Config(format!("redundancy rate {rate} must be >= 0")));
    }
    if cluster_size < 2 {
        return Err(Error::Config("cluster size must be at least 2".into()));
    }
    let n = d.len();
    let copies = count_for_rate(rate, n);
    if copies == 0 {
        return Ok((d.clone(), ClusterMap::singletons(&d.ids())));
    }
    let n_sources = copies.div_ceil(cluster_size - 1);
    if n_sources > n {
        return Err(Error::Config(format!(
            "rate {rate} needs {n_sources} source examples at cluster size {cluster_size}, \
             but only {n} exist"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources: Vec<usize> = rand::seq::index::sample(&mut rng, n, n_sources).into_vec();
    sources.sort_unstable();

    let mut next_id = d.max_id().map_or(0, |m| m.0 + 1);
    let mut examples = d.examples().to_vec();
    let mut groups: Vec<Vec<ExampleId>> = sources.iter().map(|&s| vec![d.examples()[s].id]).collect();
    for j in 0..copies {
        let slot = j % n_sources;
        let src = &d.examples()[sources[slot]];
        let copy_seed = rng.next_u64();
        let text = match &src.text {
            Text::Single(t) => Text::Single(perturb_text(t, cfg, copy_seed)?),
            Text::Pair(a, b) => Text::Pair(
                perturb_text(a, cfg, copy_seed)?,
                perturb_text(b, cfg, copy_seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?,
            ),
        };
        let id = ExampleId(next_id);
        next_id += 1;
        groups[slot].push(id);
        examples.push(Example {
            id,
            text,
            label: src.label,
            flipped: src.flipped,
            source_id: Some(src.id),
        });
    }
    let out = Dataset::new(examples, d.n_classes())?;
    let map = ClusterMap::from_groups(&out.ids(), &groups)?;
    Ok((out, map))
}

/// Flips exactly `floor(rate * n)` labels, each to a uniformly chosen other
/// class, and marks them in the flip mask.
pub fn inject_label_noise(d: &Dataset, rate: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Config(format!("noise rate {rate} outside [0, 1]")));
    }
    if rate > 0.0 && d.n_classes() < 2 {
        return Err(Error::Config("cannot flip labels of a single-class dataset".into()));
    }
    let n = d.len();
    let flips = count_for_rate(rate, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flip = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, flips) {
        flip[i] = true;
    }
    let c = d.n_classes();
    let examples = d
        .examples()
        .iter()
        .zip(&flip)
        .map(|(ex, &f)| {
            let mut ex = ex.clone();
            if f {
                let k = rng.random_range(0..c - 1);
                ex.label = if k >= ex.label { k + 1 } else { k };
            }
            ex.flipped = Some(f);
            ex
        })
        .collect();
    Dataset::new(examples, c)
}
