//! Stabilizing proxy-induced sample rankings.
//!
//! Per-seed proxy scores are normalized, blended with a diversity signal,
//! shrunk toward their near-duplicate cluster and aggregated across training
//! seeds. The crate also ships the synthetic text generator, near-duplicate
//! mining, a small logistic-regression trainer for computing proxies, the
//! stability and retrieval metrics, and an experiment harness.
//!
//! ```
//! use scarv::{ClusterMap, ExampleId, MethodKind, MethodInputs, ScarvConfig, ScoreMatrix64};
//!
//! let ids: Vec<ExampleId> = (0..4).map(ExampleId).collect();
//! let scores = ScoreMatrix64::from_columns(
//!     ids.clone(),
//!     vec![1, 2],
//!     vec![vec![0.9, 0.8, 0.1, 0.4], vec![0.7, 0.9, 0.2, 0.3]],
//! )
//! .unwrap();
//! let clusters = ClusterMap::from_groups(&ids, &[vec![ExampleId(0), ExampleId(1)]]).unwrap();
//! let diversity = vec![0.0; 4];
//! let inputs = MethodInputs {
//!     scores: &scores,
//!     clusters: &clusters,
//!     approx_clusters: None,
//!     oracle_clusters: None,
//!     diversity: &diversity,
//! };
//! let ranking = scarv::run_method(MethodKind::FullScarv, &inputs, &ScarvConfig::default()).unwrap();
//! assert_eq!(ranking.len(), 4);
//! ```

pub mod base;
pub mod error;
pub mod evalstats;
pub mod harness;
pub mod mining;
pub mod modelkit;
pub mod proxies;
pub mod scalar;
pub mod scarv;
pub mod textgen;

pub use base::{ClusterMap, Direction, ExampleId, Ranking, ScoreMatrix, SparseVector};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use scarv::{run_method, Allocation, ClusterAgg, MethodInputs, MethodKind, ScarvConfig, SeedAgg};

pub type ScoreMatrix64 = ScoreMatrix<f64>;
pub type ScoreMatrix32 = ScoreMatrix<f32>;
pub type Ranking64 = Ranking<f64>;
pub type Ranking32 = Ranking<f32>;
