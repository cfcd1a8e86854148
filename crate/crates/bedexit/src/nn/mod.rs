//! Minimal tensor core and the network classifiers.
//!
//! Everything is f64, single-threaded and explicitly seeded; with a fixed
//! seed two training runs produce bit-identical parameters.

pub mod adam;
pub mod convlstm;
pub mod fcn;
pub mod gradcheck;
pub mod lstm;
pub mod ops;
pub mod tensor;
pub mod train;

pub use adam::Adam;
pub use convlstm::{ConvLstmConfig, ConvLstmModel};
pub use fcn::{FcnConfig, FcnModel};
pub use lstm::{Lstm, LstmState};
pub use ops::{softmax, softmax_cross_entropy, ActKind, Activation, Conv1d, Dense, Dropout, MaxPool1d, Padding};
pub use tensor::{Param, Tensor};
pub use train::{
    class_weights, dense_windows, fit_channel_stats, reading_channels, seq_windows, standardize,
    train_convlstm, train_fcn, ChannelStats, DenseWindowSet, EpochStats, SeqWindowSet,
    TrainConfig, CHANNELS,
};
