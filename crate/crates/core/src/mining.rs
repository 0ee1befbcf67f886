//! Redundancy-cluster discovery by similarity thresholding, and cluster
//! quality statistics.
//!
//! All miners reduce to a list of `(id, id, similarity)` pairs which
//! [`threshold_clusters`] closes transitively with union-find. Pair lists are
//! sorted before clustering so output never depends on enumeration order.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;

use crate::base::{ClusterMap, ExampleId, SparseVector};
use crate::error::{Error, Result};

pub const DEFAULT_TFIDF_THRESHOLD: f64 = 0.9;
pub const DEFAULT_CHARGRAM_THRESHOLD: f64 = 0.6;
pub const DEFAULT_NGRAM: usize = 3;

/// All-pairs enumeration beyond this many examples logs a cost warning.
pub const ALL_PAIRS_WARN_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityPair {
    pub a: ExampleId,
    pub b: ExampleId,
    pub similarity: f64,
}

impl SimilarityPair {
    fn new(x: ExampleId, y: ExampleId, similarity: f64) -> Self {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        SimilarityPair { a, b, similarity }
    }
}

fn canonicalize(pairs: &mut [SimilarityPair]) {
    pairs.sort_by(|p, q| (p.a, p.b).cmp(&(q.a, q.b)));
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Connected components of the graph whose edges are the pairs with
/// similarity `>= threshold`. Examples without such an edge are singletons.
pub fn threshold_clusters(
    ids: &[ExampleId],
    pairs: &[SimilarityPair],
    threshold: f64,
) -> Result<ClusterMap> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!("threshold {threshold} outside [-1, 1]")));
    }
    let index: HashMap<ExampleId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    if index.len() != ids.len() {
        return Err(Error::invalid("duplicate ids given to threshold_clusters"));
    }
    let mut sorted = pairs.to_vec();
    canonicalize(&mut sorted);
    let mut uf = UnionFind::new(ids.len());
    for p in &sorted {
        if !(-1.0..=1.0).contains(&p.similarity) {
            return Err(Error::invalid(format!(
                "similarity {} for ({}, {}) outside [-1, 1]",
                p.similarity, p.a, p.b
            )));
        }
        let ia = *index.get(&p.a).ok_or(Error::UnknownId(p.a))?;
        let ib = *index.get(&p.b).ok_or(Error::UnknownId(p.b))?;
        if p.similarity >= threshold {
            uf.union(ia, ib);
        }
    }
    let assignment: Vec<_> = (0..ids.len())
        .map(|i| (ids[i], uf.find(i) as u64 + 1))
        .collect();
    Ok(ClusterMap::from_assignment(assignment)?.canonical())
}

fn warn_if_large(n: usize) {
    if n > ALL_PAIRS_WARN_LIMIT {
        log::warn!("all-pairs similarity over {n} examples; cost grows quadratically");
    }
}

/// Rounding can leave identical unit vectors a few ulps short of cosine 1.
fn snap_cosine(dot: f64) -> f64 {
    if dot > 1.0 - COSINE_SNAP {
        1.0
    } else {
        dot.max(-1.0)
    }
}

const COSINE_SNAP: f64 = 1e-12;

/// Cosine similarity of every unordered pair whose cosine is `>= threshold`.
///
/// Vectors are L2-normalized first. An all-zero vector emits no pairs and is
/// left as a singleton. For positive thresholds candidates come from an
/// inverted index (pairs sharing no feature have cosine 0).
pub fn tfidf_cosine_pairs(
    vectors: &[(ExampleId, SparseVector)],
    threshold: f64,
) -> Vec<SimilarityPair> {
    warn_if_large(vectors.len());
    let normed: Vec<SparseVector> = vectors
        .iter()
        .map(|(id, v)| {
            if v.is_zero() {
                log::warn!("example {id} has an all-zero vector; treating it as a singleton");
            }
            v.normalized()
        })
        .collect();
    let live: Vec<usize> = (0..normed.len()).filter(|&i| !normed[i].is_zero()).collect();
    let mut pairs: Vec<SimilarityPair> = if threshold > 0.0 {
        let mut postings: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        for &i in &live {
            for (f, v) in normed[i].iter() {
                postings.entry(f).or_default().push((i, v));
            }
        }
        live.par_iter()
            .flat_map_iter(|&i| {
                let mut acc: HashMap<usize, f64> = HashMap::new();
                for (f, v) in normed[i].iter() {
                    for &(j, w) in &postings[&f] {
                        if j > i {
                            *acc.entry(j).or_insert(0.0) += v * w;
                        }
                    }
                }
                acc.into_iter()
                    .map(|(j, dot)| (j, snap_cosine(dot)))
                    .filter(|&(_, sim)| sim >= threshold)
                    .map(|(j, sim)| SimilarityPair::new(vectors[i].0, vectors[j].0, sim))
                    .collect::<Vec<_>>()
            })
            .collect()
    } else {
        live.par_iter()
            .flat_map_iter(|&i| {
                live.iter()
                    .filter(|&&j| j > i)
                    .map(|&j| (j, snap_cosine(normed[i].dot(&normed[j]))))
                    .filter(|&(_, sim)| sim >= threshold)
                    .map(|(j, sim)| SimilarityPair::new(vectors[i].0, vectors[j].0, sim))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    canonicalize(&mut pairs);
    pairs
}

/// Cosine pairs over imported dense vectors (e.g. sentence embeddings).
pub fn dense_cosine_pairs(
    vectors: &[(ExampleId, Vec<f64>)],
    threshold: f64,
) -> Result<Vec<SimilarityPair>> {
    let sparse = vectors
        .iter()
        .map(|(id, v)| Ok((*id, SparseVector::from_dense(v)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(tfidf_cosine_pairs(&sparse, threshold))
}

/// Set of character n-grams; texts shorter than `n` form a single gram.
pub fn char_ngrams(text: &str, n: usize) -> BTreeSet<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < n {
        return std::iter::once(text.to_string()).collect();
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Jaccard similarity of character n-gram sets for every unordered pair with
/// similarity `>= threshold`.
pub fn chargram_jaccard_pairs(
    texts: &[(ExampleId, String)],
    n: usize,
    threshold: f64,
) -> Result<Vec<SimilarityPair>> {
    if n == 0 {
        return Err(Error::Config("n-gram length must be at least 1".into()));
    }
    warn_if_large(texts.len());
    let grams: Vec<BTreeSet<String>> = texts.iter().map(|(_, t)| char_ngrams(t, n)).collect();
    let candidates: Vec<Vec<usize>> = if threshold > 0.0 {
        let mut postings: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, g) in grams.iter().enumerate() {
            for gram in g {
                postings.entry(gram.as_str()).or_default().push(i);
            }
        }
        (0..grams.len())
            .map(|i| {
                let mut js: HashSet<usize> = HashSet::new();
                for gram in &grams[i] {
                    js.extend(postings[gram.as_str()].iter().filter(|&&j| j > i));
                }
                let mut js: Vec<usize> = js.into_iter().collect();
                js.sort_unstable();
                js
            })
            .collect()
    } else {
        (0..grams.len()).map(|i| (i + 1..grams.len()).collect()).collect()
    };
    let mut pairs: Vec<SimilarityPair> = candidates
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, js)| {
            let grams = &grams;
            js.iter().filter_map(move |&j| {
                let sim = jaccard(&grams[i], &grams[j]);
                (sim >= threshold).then(|| SimilarityPair::new(texts[i].0, texts[j].0, sim))
            })
        })
        .collect();
    canonicalize(&mut pairs);
    Ok(pairs)
}

/// Summary of a cluster map, in the shape of a mining-quality table row.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ClusterStats {
    /// Fraction of examples in clusters of size >= 2.
    pub coverage: f64,
    pub non_singleton_count: usize,
    /// Mean size of non-singleton clusters (0 when there are none).
    pub mean_size: f64,
    pub max_size: usize,
    /// Mean pairwise cosine over all within-cluster pairs of non-singleton
    /// clusters; `None` without vectors or without such clusters.
    pub mean_within_similarity: Option<f64>,
    /// Size-weighted majority-label fraction over non-singleton clusters
    /// (1.0 when there are none).
    pub purity: f64,
}

pub fn cluster_stats(
    map: &ClusterMap,
    vectors: Option<&HashMap<ExampleId, SparseVector>>,
    labels: &HashMap<ExampleId, u32>,
) -> Result<ClusterStats> {
    let n = map.len();
    let groups = map.groups();
    let big: Vec<&Vec<ExampleId>> = groups.values().filter(|g| g.len() >= 2).collect();
    let covered: usize = big.iter().map(|g| g.len()).sum();
    let max_size = groups.values().map(Vec::len).max().unwrap_or(0);

    let mut majority_total = 0usize;
    for g in &big {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for id in g.iter() {
            let label = labels.get(id).ok_or(Error::MissingScore(*id))?;
            *counts.entry(*label).or_default() += 1;
        }
        majority_total += counts.values().max().copied().unwrap_or(0);
    }

    let mean_within_similarity = match vectors {
        Some(vecs) if !big.is_empty() => {
            let mut sum = 0.0;
            let mut count = 0usize;
            for g in &big {
                for (x, a) in g.iter().enumerate() {
                    for b in &g[x + 1..] {
                        let va = vecs.get(a).ok_or(Error::UnknownId(*a))?;
                        let vb = vecs.get(b).ok_or(Error::UnknownId(*b))?;
                        sum += va.cosine(vb);
                        count += 1;
                    }
                }
            }
            Some(sum / count as f64)
        }
        _ => None,
    };

    Ok(ClusterStats {
        coverage: if n == 0 { 0.0 } else { covered as f64 / n as f64 },
        non_singleton_count: big.len(),
        mean_size: if big.is_empty() {
            0.0
        } else {
            covered as f64 / big.len() as f64
        },
        max_size,
        mean_within_similarity,
        purity: if covered == 0 {
            1.0
        } else {
            majority_total as f64 / covered as f64
        },
    })
}
