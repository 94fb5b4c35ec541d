//! Classifier training, masked-LM pre-training and optimization.

mod batch;
mod classifier;
mod mlm;
mod optimizer;

pub use batch::epoch_batches;
pub use classifier::{train_classifier, EpochStats, StopReason, TrainHistory};
pub use mlm::{mask_tokens, mask_tokens_with, pretrain_mlm, MaskScheme, PretrainStats};
pub use optimizer::{optimizer_step, sgd_sparse_rows, OptState, OptimizerKind, TrainHyper};


