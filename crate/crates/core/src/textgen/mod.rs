//! Synthetic corpora, redundancy injection and label-noise injection.

mod dataset;
mod perturb;
mod synth;

pub use dataset::{Dataset, Example, Text, PAIR_SEPARATOR};
pub use perturb::{perturb_text, PerturbationConfig};
pub use synth::{inject_label_noise, inject_near_duplicates, make_synthetic_corpus};

/// `floor(rate * n)` with a guard against `0.3 * 1000 = 299.999..`.
pub(crate) fn count_for_rate(rate: f64, n: usize) -> usize {
    (rate * n as f64 + 1e-9).floor() as usize
}
