//! Bed-exit recognition from passive RFID streams.
//!
//! A worn batteryless tag with two tilt-switched identifiers reports to a
//! UHF reader; the reader-side stream of (time, antenna, RSSI, phase,
//! channel, identifier) readings is all the system sees. This crate covers
//! the full pipeline:
//!
//! - [`data`]: the canonical record model, CSV dataset format and validation;
//! - [`features`]: fixed-time sliding-window segmentation and the engineered
//!   per-segment feature set, in `tag` and `idsensor` flavours;
//! - [`nn`]: a small f64 tensor core (convolution, pooling, LSTM, Adam) and
//!   the two network classifiers, a dense-labeling FCN and a ConvLSTM;
//! - [`lr`]: logistic regression over the engineered features;
//! - [`alarm`]: alarm generation from prediction streams and the event-based
//!   TP/FP/FN scoring protocol with delay statistics;
//! - [`eval`]: leave-one-patient-out cross-validation wiring it together;
//! - [`sim`]: a physics-grounded ward simulator (kinematics, tilt switch,
//!   path-loss channel, Poisson read process) that generates labeled
//!   datasets for verification without clinical data;
//! - [`model`]: the versioned trained-model container.
//!
//! The guide under `book/` walks through the concepts chapter by chapter;
//! its code blocks compile and run as part of this crate's doc-tests.

pub mod alarm;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod lr;
pub mod model;
pub mod nn;
pub mod sim;
pub mod util;

pub use alarm::{
    delay_histogram, metrics, raise_alarms, score_alarms, smooth_predictions, AlarmConfig,
    AlarmEvent, DelayBucket, EvaluationReport, PatientOutcome, Prediction, ReportMeta,
    ScoreCounts,
};
pub use data::{
    load_dataset, load_patient, write_patient, Antenna, DeploymentConfig, Label, LabelInterval,
    PatientRecord, TagId, TagReading,
};
pub use error::{Error, Result};
pub use eval::{
    lopo_cv, predict_record, score_fold_predictions, train_pipeline, ClassifierKind,
    FoldPredictions, PipelineSpec,
};
pub use features::{
    compute_cfpr, event_features, extract_features, moving_flag, segment_stream, FeatureLayout,
    Mode, Normalizer, Segment, SegmentationConfig,
};
pub use lr::{lr_predict, lr_train, LrModel};
pub use model::{load_model, save_model, TrainedClassifier, TrainedModel};
pub use nn::{ConvLstmConfig, FcnConfig, TrainConfig};
pub use sim::{generate_cohort, write_cohort, Scenario};

/// The guide chapters double as doc-tests so every code block in the book
/// keeps compiling against the current API.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data-model.md")]
    mod data_model {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/classifiers.md")]
    mod classifiers {}
    #[doc = include_str!("../../../book/src/alarms.md")]
    mod alarms {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
