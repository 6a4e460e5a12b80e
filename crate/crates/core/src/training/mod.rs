//! Loss, learning-rate schedule, Adam and the epoch loop with checkpoints.

pub mod config;
pub mod loss;
pub mod optim;
pub mod schedule;
pub mod trainer;

pub use config::TrainConfig;
pub use loss::{bce_dice_loss, loss_terms, LossTerms, LossWeights, DICE_SMOOTH, PRED_CLAMP};
pub use optim::{Adam, AdamConfig};
pub use schedule::{lr_at, lr_schedule};
pub use trainer::{
    train, EpochRecord, TrainData, TrainHistory, TrainOutcome, Trainer, BEST_FILE, HISTORY_HEADER, MODEL_FILE, OPTIM_FILE,
    STATE_FILE,
};
