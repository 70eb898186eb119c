//! Denoising diffusion over grids: schedule, U-Net, training and sampling.

mod checkpoint;
mod gradcheck;
mod net;
mod noise;
mod optim;
mod sample;
mod schedule;
mod tensor;
mod train;

pub use checkpoint::{Checkpoint, CheckpointHeader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{
    fixture, grad_check, grad_check_with_fault, GradCheckOptions, GradCheckReport,
    GRADCHECK_STEP, GRADCHECK_TOLERANCE,
};
pub use net::{Activation, DenoiserNet, Forward, NetConfig, ParamSpec, DEFAULT_BASE_CHANNELS};
pub use noise::{fill_normal, stream, Purpose};
pub use optim::AdamW;
pub use sample::{sample, sample_with, SampleOptions};
pub use schedule::{NoiseSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_TIMESTEPS};
pub use train::{
    draw_noise, encode_grids, loss, loss_and_grad, loss_log_csv, train, BatchKey, EpochLoss,
    NoisePredictor, TrainConfig, TrainError, TrainOutcome, DEFAULT_BATCH_SIZE,
    DEFAULT_LEARNING_RATE, DEFAULT_WEIGHT_DECAY,
};
