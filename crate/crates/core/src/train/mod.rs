//! Training loop, evaluation and diagnostic studies.

mod checkpoint;
mod config;
mod diagnostics;
mod model;
mod presets;
mod trainer;

pub use checkpoint::{Checkpoint, CHECKPOINT_SCHEMA};
pub use config::{TrainConfig, Variant, DEFAULT_EPOCHS};
pub use diagnostics::{
    degree_correlation, message_norms, random_features, timing_fit, timing_sweep, DegreeCorrelation, TimingConfig,
    TimingRow,
};
pub use model::{DinesModel, Forward};
pub use presets::{Dataset, DatasetStats, Hyperparams, Metric};
pub use trainer::{
    evaluate, predict_test, report_from_predictions, train, EdgePrediction, EvalReport, StepStats, TrainOutcome,
    Trainer,
};
