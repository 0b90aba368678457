//! Composite segmentation/regression loss, momentum SGD, sample pairing
//! and the epoch loop.

mod loss;
mod pairing;
mod sgd;
mod trainer;

pub use loss::{
    masked_mse, masked_mse_grad, seg_loss, seg_loss_grad, targets_as_outputs, total_loss,
    LossBreakdown, LossWeights, BCE_CLAMP, DICE_EPS,
};
pub use pairing::{pair_samples, SamplePair, SampleSource};
pub use sgd::sgd_step;
pub use trainer::{
    evaluate_loss, predict, train, EpochLogLine, EpochRecord, TrainConfig, TrainOutcome,
};
