//! Optimizer, training loop, configuration files and ablation runs.

pub mod ablation;
pub mod config;
pub mod sgd;
pub mod train;

pub use ablation::{run_ablation, AblationTable, Variant, VariantResult};
pub use config::{Granularity, TrainConfig};
pub use sgd::{sgd_step, sgd_update, OptimState, SgdConfig};
pub use train::{train, train_from_path, RunLog, StepLog, TrainOutput};
