use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::base::fractional_ranks;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest sample size (after dropping zeros) for the exact null distribution.
pub const EXACT_WILCOXON_MAX_N: usize = 25;

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Paired comparison across outer runs: mean delta, percentile bootstrap
/// interval and two-sided Wilcoxon signed-rank p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub mean_delta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    /// Non-zero deltas entering the signed-rank test.
    pub n: usize,
    /// Whether the p-value comes from the exact null distribution.
    pub exact: bool,
    /// Every delta was zero; the p-value is 1 by convention.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wilcoxon {
    /// Sum of ranks of the positive deltas.
    pub w_plus: f64,
    pub p_value: f64,
    pub n: usize,
    pub exact: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    /// Exact up to [`EXACT_WILCOXON_MAX_N`], normal approximation above.
    Auto,
    Exact,
    Normal,
}

/// Two-sided Wilcoxon signed-rank test. Zero deltas are dropped; tied
/// magnitudes share fractional ranks.
pub fn wilcoxon_signed_rank<T: Scalar>(deltas: &[T]) -> Result<Wilcoxon> {
    wilcoxon_with(deltas, WilcoxonMethod::Auto)
}

pub fn wilcoxon_with<T: Scalar>(deltas: &[T], method: WilcoxonMethod) -> Result<Wilcoxon> {
    let nonzero: Vec<f64> = deltas
        .iter()
        .map(|d| d.to_f64_lossy())
        .filter(|&d| d != 0.0)
        .collect();
    if nonzero.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("non-finite delta"));
    }
    let n = nonzero.len();
    if n == 0 {
        return Ok(Wilcoxon {
            w_plus: 0.0,
            p_value: 1.0,
            n: 0,
            exact: true,
            degenerate: true,
        });
    }
    let mags: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = fractional_ranks(&mags)?;
    let w_plus: f64 = ranks
        .iter()
        .zip(&nonzero)
        .filter(|(_, &d)| d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let exact = match method {
        WilcoxonMethod::Auto => n <= EXACT_WILCOXON_MAX_N,
        WilcoxonMethod::Exact => {
            if n > 62 {
                return Err(Error::invalid("exact test limited to 62 non-zero deltas"));
            }
            true
        }
        WilcoxonMethod::Normal => false,
    };
    let p_value = if exact {
        exact_p(&ranks, w_plus)
    } else {
        normal_p(&ranks, w_plus)
    };
    Ok(Wilcoxon {
        w_plus,
        p_value,
        n,
        exact,
        degenerate: false,
    })
}

/// Null distribution of W+ counted over all `2^n` sign assignments, using
/// doubled ranks so tied half-integer ranks stay integral.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(ranks.len() as i32);
    let w = (2.0 * w_plus).round() as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
    let upper: f64 = counts[w..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Normal approximation with tie and continuity corrections.
fn normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let diff = w_plus - mean;
    let corrected = (diff.abs() - 0.5).max(0.0);
    let z = corrected / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Percentile bootstrap interval for the mean of paired deltas.
pub fn paired_bootstrap_ci<T: Scalar>(
    deltas: &[T],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(T, T)> {
    if deltas.len() < 2 {
        return Err(Error::invalid("bootstrap needs at least two deltas"));
    }
    if resamples < 1000 {
        return Err(Error::Config("bootstrap needs at least 1000 resamples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level {level} outside (0, 1)")));
    }
    let n = deltas.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<T> = (0..resamples)
        .map(|_| {
            let s: T = (0..n).map(|_| deltas[rng.random_range(0..n)]).sum();
            s / T::of_usize(n)
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile(&means, alpha), quantile(&means, 1.0 - alpha)))
}

/// Linear-interpolation quantile of sorted data.
fn quantile<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn paired_comparison<T: Scalar>(
    deltas: &[T],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<TestResult> {
    let (lo, hi) = paired_bootstrap_ci(deltas, resamples, level, seed)?;
    let w = wilcoxon_signed_rank(deltas)?;
    let mean = deltas.iter().copied().sum::<T>() / T::of_usize(deltas.len());
    Ok(TestResult {
        mean_delta: mean.to_f64_lossy(),
        ci_low: lo.to_f64_lossy(),
        ci_high: hi.to_f64_lossy(),
        p_value: w.p_value,
        n: w.n,
        exact: w.exact,
        degenerate: w.degenerate,
    })
}
