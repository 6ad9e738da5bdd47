//! File formats and experiment configuration.

mod config;
mod files;

pub use config::{
    DensityConfig, EstimatorKind, ExperimentConfig, GridConfig, JumpConfig, LawConfig, ModelConfig,
    PsiConfig, ShapeConfig, TrajectoryConfig,
};
pub use files::{read_curve, read_trajectory, write_curve, write_curve_to, write_trajectory};
