//! Compact residual classifier, its trainer and the model file.

mod adam;
mod file;
mod kernels;
mod model;
mod spec;
mod tensor;
mod train;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use file::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use kernels::Scalar;
pub use model::{softmax, Batch, LossAndGrad, Network, Precision};
pub use spec::{NetworkShape, NetworkSpec, NUM_CLASSES};
pub use tensor::{ParamSet, Tensor};
pub use train::{
    accuracy, train_stream, EpochRecord, ModelParams, StreamKind, TrainConfig, TrainingSummary,
};

use crate::corpus::Label;

/// A `(p_real, p_fake)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probabilities {
    pub real: f64,
    pub fake: f64,
}

impl Probabilities {
    pub fn from_logits(logits: &[f64; NUM_CLASSES]) -> Self {
        let [real, fake] = softmax(logits);
        Self { real, fake }
    }

    /// Fake iff `p_fake > threshold`.
    pub fn predict(&self, threshold: f64) -> Label {
        if self.fake > threshold {
            Label::Fake
        } else {
            Label::Real
        }
    }

    pub fn predicted(&self) -> Label {
        self.predict(0.5)
    }
}
