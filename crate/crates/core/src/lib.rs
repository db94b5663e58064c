//! Data-owner side of the private recommender: rating ingestion, ReuseKNN
//! recommendation models, and the stash/cluster preprocessing of a model.
//!
//! The real-valued parts (similarity, scores, k-means, noise) are generic
//! over [`Scalar`]; the aliases below fix them to `f64`.

pub mod cluster;
pub mod dataset;
pub mod error;
pub mod reuse_knn;
pub mod rm_format;
pub mod scalar;
pub mod synth;

pub use cluster::{
    deserialize_sets, kmeans, partition_stash, prepare_sets, serialize_sets, Cluster, ItemVector, KMeans, PartitionConfig,
    PreparedSets, SetsLayout, PAD_ITEM, PAD_LANE,
};
pub use dataset::{
    load_ratings, parse_ratings, perturb_ratings, remap_levels, DatasetStats, IdMap, PerturbationPolicy, RatingDataset,
    RatingScale, RecordFormat,
};
pub use error::{Error, Result};
pub use reuse_knn::{
    apply_feedback, build_all, build_rm, cosine_similarity, exposure_report, gain_score, ExposureReport, ModelConfig,
    NeighborScore, RecommendationModel, RmEntry, SimilarityKind, VulnerabilityPolicy,
};
pub use rm_format::{deserialize_rm, serialize_rm};
pub use scalar::Scalar;

pub type Real = f64;
pub type ModelConfigF64 = ModelConfig<f64>;
pub type NeighborScoreF64 = NeighborScore<f64>;
pub type KMeansF64 = KMeans<f64>;
pub type PerturbationPolicyF64 = PerturbationPolicy<f64>;
