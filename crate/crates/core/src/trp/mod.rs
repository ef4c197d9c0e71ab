//! Trained rank pruning: momentum SGD interleaved with periodic low-rank
//! projection of convolution weights, optional nuclear-norm sub-gradient
//! regularization, and rank-trajectory logging.

mod config;
mod monitor;
mod trainer;
mod trajectory;

pub use config::{
    Preset, TrainMode, TrpConfig, DEFAULT_BASE_LR, DEFAULT_ENERGY, DEFAULT_MOMENTUM,
    DEFAULT_NUCLEAR_LAMBDA, DEFAULT_PERIOD, DEFAULT_WEIGHT_DECAY,
};
pub use monitor::{theorem2_monitor, MonitorReport, PairCheck};
pub use trainer::{train, EpochMetrics, GradBoundTracker, TrainOutcome, Trainer};
pub use trajectory::{energy_ratios, RankTrajectory, TsvdEvent};
