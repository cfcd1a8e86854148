//! Scenario description: room geometry, RF channel parameters, sensor model,
//! script bounds and read-process settings. Serializable as a TOML document
//! so a cohort is fully reproducible from (scenario file, seed).

use serde::{Deserialize, Serialize};

use crate::data::{Antenna, DeploymentConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomGeometry {
    /// Room extents in meters.
    pub size: [f64; 3],
    /// Bed bounding volume; a sensor outside it is out-of-bed.
    pub bed_min: [f64; 3],
    pub bed_max: [f64; 3],
    pub mattress_height: f64,
    /// Sensor x,y while lying.
    pub lying_xy: [f64; 2],
    /// Sensor x,y while sitting on the bed edge.
    pub bed_edge_xy: [f64; 2],
    /// Sensor x,y while standing next to the bed.
    pub standing_xy: [f64; 2],
    pub chair_xy: [f64; 2],
    pub chair_seat_height: f64,
    /// Intermediate walking waypoint between bed and chair.
    pub walk_via_xy: [f64; 2],
    pub antennas: Vec<Antenna>,
}

impl Default for RoomGeometry {
    fn default() -> Self {
        // A single-bed room: bed along one wall, chair across the room,
        // three ceiling-corner antennas covering bed and chair.
        RoomGeometry {
            size: [4.0, 5.0, 2.7],
            bed_min: [0.15, 0.35, 0.0],
            bed_max: [1.55, 2.75, 2.0],
            mattress_height: 0.65,
            lying_xy: [0.85, 1.55],
            bed_edge_xy: [1.30, 1.70],
            standing_xy: [1.95, 1.70],
            chair_xy: [3.10, 1.40],
            chair_seat_height: 0.45,
            walk_via_xy: [2.50, 1.60],
            antennas: vec![
                Antenna { id: 1, position: [0.9, 0.3, 2.3], boresight: [0.0, 0.6, -0.8] },
                Antenna { id: 2, position: [2.0, 3.1, 2.3], boresight: [0.0, -0.55, -0.835] },
                Antenna { id: 3, position: [3.5, 0.7, 2.1], boresight: [-0.25, 0.45, -0.86] },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfChannelParams {
    pub reader_power_w: f64,
    pub reader_gain_dbi: f64,
    /// Backscatter gain, dimensionless (models tag modulation loss).
    pub backscatter_gain: f64,
    /// Absorption coefficient of the medium, 1/m.
    pub absorption_per_m: f64,
    /// Log-normal shadowing sigma in dB.
    pub shadowing_sigma_db: f64,
    pub rssi_quantum_db: f64,
    pub phase_quantum_rad: f64,
    /// Readings below this synthesized level are lost.
    pub sensitivity_floor_dbm: f64,
    /// Floor of |cos| in the orientation loss.
    pub orientation_epsilon: f64,
    pub band_mhz: [f64; 2],
    pub n_channels: usize,
    /// The reader hops to the next channel each inventory round of this
    /// length.
    pub hop_interval_s: f64,
}

impl Default for RfChannelParams {
    fn default() -> Self {
        RfChannelParams {
            reader_power_w: 1.0,
            reader_gain_dbi: 6.0,
            backscatter_gain: 0.1,
            absorption_per_m: 0.06,
            shadowing_sigma_db: 4.0,
            rssi_quantum_db: 0.5,
            phase_quantum_rad: std::f64::consts::TAU / 4096.0,
            sensitivity_floor_dbm: -66.0,
            orientation_epsilon: 0.03,
            band_mhz: [920.0, 926.0],
            n_channels: 6,
            hop_interval_s: 0.2,
        }
    }
}

impl RfChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.shadowing_sigma_db < 0.0 {
            return Err(Error::Config("shadowing sigma must be >= 0".into()));
        }
        if !(self.rssi_quantum_db > 0.0) || !(self.phase_quantum_rad > 0.0) {
            return Err(Error::Config("quanta must be positive".into()));
        }
        if self.n_channels == 0 || !(self.band_mhz[0] < self.band_mhz[1]) {
            return Err(Error::Config("bad channel plan".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    /// Tilt-switch threshold angle from vertical, degrees.
    pub threshold_deg: f64,
    /// Hysteresis half-width, degrees.
    pub hysteresis_deg: f64,
    /// Probability that a transition leaves the steel ball stuck, producing
    /// chattering identifiers until the next clean crossing.
    pub p_stuck: f64,
    pub chatter_rate_hz: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel { threshold_deg: 45.0, hysteresis_deg: 8.0, p_stuck: 0.05, chatter_rate_hz: 3.0 }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_stuck) {
            return Err(Error::Config("p_stuck must lie in [0, 1]".into()));
        }
        if !(self.hysteresis_deg > 0.0) {
            return Err(Error::Config("hysteresis must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptBounds {
    pub exits_min: u32,
    pub exits_max: u32,
    pub lying_s: [f64; 2],
    pub bed_sit_s: [f64; 2],
    pub stand_s: [f64; 2],
    pub chair_sit_s: [f64; 2],
    /// Posture transition time per patient (ability).
    pub transition_s: [f64; 2],
    pub walk_speed_mps: [f64; 2],
    /// Chance of an aborted sit-up (sit on bed, then lie back down) before a
    /// real exit.
    pub false_sit_prob: f64,
    /// Chance an exit includes walking to the chair rather than standing by
    /// the bed.
    pub chair_visit_prob: f64,
}

impl Default for ScriptBounds {
    fn default() -> Self {
        ScriptBounds {
            exits_min: 2,
            exits_max: 6,
            lying_s: [25.0, 55.0],
            bed_sit_s: [4.0, 12.0],
            stand_s: [3.0, 8.0],
            chair_sit_s: [15.0, 35.0],
            transition_s: [1.5, 4.0],
            walk_speed_mps: [0.4, 0.9],
            false_sit_prob: 0.5,
            chair_visit_prob: 0.7,
        }
    }
}

impl ScriptBounds {
    pub fn validate(&self) -> Result<()> {
        if self.exits_min == 0 || self.exits_min > self.exits_max {
            return Err(Error::Config("exit bounds must satisfy 1 <= min <= max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadParams {
    /// Per-patient target read rate drawn uniformly from this range, Hz.
    pub rate_hz: [f64; 2],
    /// Pose sampling step, seconds.
    pub dt_s: f64,
}

impl Default for ReadParams {
    fn default() -> Self {
        ReadParams { rate_hz: [9.0, 16.0], dt_s: 0.05 }
    }
}

/// A complete simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub n_patients: usize,
    #[serde(default)]
    pub room: RoomGeometry,
    #[serde(default)]
    pub rf: RfChannelParams,
    #[serde(default)]
    pub sensor: SensorModel,
    #[serde(default)]
    pub script: ScriptBounds,
    #[serde(default)]
    pub read: ReadParams,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 7,
            n_patients: 23,
            room: RoomGeometry::default(),
            rf: RfChannelParams::default(),
            sensor: SensorModel::default(),
            script: ScriptBounds::default(),
            read: ReadParams::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 {
            return Err(Error::Config("n_patients must be >= 1".into()));
        }
        self.rf.validate()?;
        self.sensor.validate()?;
        self.script.validate()?;
        if !(self.read.dt_s > 0.0) {
            return Err(Error::Config("dt_s must be positive".into()));
        }
        if self.read.rate_hz[0] > self.read.rate_hz[1] || self.read.rate_hz[1] > 50.0 {
            return Err(Error::Config("rate_hz must be an increasing range within [0, 50]".into()));
        }
        self.deployment().validate()
    }

    /// The reader-side deployment implied by the scenario.
    pub fn deployment(&self) -> DeploymentConfig {
        DeploymentConfig {
            antennas: self.room.antennas.clone(),
            band_mhz: self.rf.band_mhz,
            reader_power_w: self.rf.reader_power_w,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario file: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }
}
