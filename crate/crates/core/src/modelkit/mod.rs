//! Desk-scale featurization and training: TF-IDF, multinomial logistic
//! regression by seeded mini-batch SGD, and kNN cosine distances.

mod knn;
mod logreg;
mod tfidf;

pub use knn::{knn_mean_cosine_distance, knn_raw_distances};
pub use logreg::{
    accuracy, predict_proba, train_logreg, train_logreg_without, Checkpoint, LinearModel,
    LinearParams, TrainConfig,
};
pub use tfidf::{tfidf_fit_transform, tokenize, TfidfConfig, TfidfModel};
