//! Physics-grounded synthetic ward generator.
//!
//! Scripted activities drive a sensor trajectory; a hysteretic tilt switch
//! turns torso pitch into identifier modulation; a two-way path-loss channel
//! with shadowing and quantization synthesizes RSSI and phase; a Poisson
//! read process assembles the final labeled streams.

pub mod cohort;
pub mod pose;
pub mod read;
pub mod rf;
pub mod scenario;
pub mod script;
pub mod tilt;

pub use cohort::{generate_cohort, generate_patient, write_cohort, Manifest, ManifestPatient, PatientSim};
pub use pose::{pose_trajectory, PoseSample, Trajectory};
pub use read::read_process;
pub use rf::{
    antenna_channel_offset, carrier_phase_rad, channel_at, channel_freq_mhz, mean_rssi_dbm,
    synth_phase, synth_rssi, wavelength_m, C_M_PER_S,
};
pub use scenario::{ReadParams, RfChannelParams, RoomGeometry, Scenario, ScriptBounds, SensorModel};
pub use script::{random_script, Activity, ActivityScript, ScriptStep};
pub use tilt::tilt_switch;
