//! Two-stream fake image detection: a frequency stream over blockwise
//! DFT and Haar DWT coefficients and a spatial stream over RGB pixels,
//! fused by averaging their class probabilities.

pub mod augmentation;
pub mod colorspace;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod image;
pub mod network;
pub mod seeding;
pub mod transforms;

pub use augmentation::{AugmentConfig, AugmentPolicy};
pub use colorspace::{ChromaConvention, ColorCoefficients};
pub use config::RunConfig;
pub use corpus::{Label, LabeledDataset, LabeledItem, Split, SynthConfig};
pub use error::{Error, Result};
pub use evaluation::{MetricsReport, Perturbation, RobustnessConfig};
pub use image::PlanarImage;
pub use network::{ModelParams, NetworkSpec, Probabilities, StreamKind, TrainConfig};
pub use transforms::{
    BlockSize, ChannelNormalizer, ColorSpace, FrequencyCube, TransformConfig, TransformSet,
};
