//! The two-layer correlation network: forward scoring, exact gradients of the
//! L1 loss, and SGD-with-momentum training.

mod netfile;
mod network;
mod train;

pub use netfile::{NetworkFile, NETFILE_VERSION};
pub use network::{
    backward, filter_similarity, forward, init_network, l1_loss, relu, GradientSet, NccNetwork, NormMode,
    PreparedFilters, INIT_TAP_BOUND, MAX_FILTERS, UNNORMALIZED_GAIN,
};
pub use train::{
    accuracy, sgd_step, train, EpochRecord, LabeledPatch, SampleSource, TrainConfig, TrainHistory, Velocity,
    DECISION_THRESHOLD, DEFAULT_LR_DECAY,
};
