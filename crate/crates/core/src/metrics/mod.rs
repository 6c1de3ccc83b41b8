//! Distance correlation, linear probes, retrieval and confusion matrices.

pub mod confusion;
pub mod dcor;
pub mod probe;
pub mod retrieval;

pub use confusion::ConfusionMatrix;
pub use dcor::{
    distance_correlation, distance_correlation_dense, distance_correlation_report,
    distance_correlation_streamed, distance_covariance, double_center, pairwise_euclidean, DcReport,
};
pub use probe::{evaluate_probe, train_probe, LinearProbe, LrSchedule, ProbeConfig, ProbeEvaluation};
pub use retrieval::{precision_at_k, retrieve_topk, self_excluded_rankings, Ranking};
