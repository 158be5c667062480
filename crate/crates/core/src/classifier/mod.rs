//! Pixel-wise LDA on multi-channel DOCI maps, block-level scoring and
//! channel subset sweeps.

pub mod blocks;
pub mod lda;
pub mod metrics;
pub mod overlay;
pub mod sweep;

pub use blocks::{blockify, BlockGrid, BlockMap, DEFAULT_BLOCK_MM};
pub use lda::{train_lda, train_lda_with, FeatureMatrix, LdaModel, Priors, DEFAULT_LAMBDA};
pub use metrics::{
    confusion, format_percent, metrics, metrics_csv, ConfusionCounts, Metrics, MetricsRow,
};
pub use overlay::render_overlay;
pub use sweep::{
    build_features, channel_subsets, channel_sweep, predict_map, rank_rows, sample_training_rois,
    ClassifierConfig, EvalMode, Evaluation, Evaluator, PixelPrediction, TrainingRoi,
};
