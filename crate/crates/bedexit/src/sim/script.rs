//! Scripted activity routines: the sequence of postures a simulated patient
//! moves through, with per-patient timing drawn from the scenario bounds.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{RoomGeometry, ScriptBounds};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activity {
    LyingOnBed,
    SittingOnBed,
    Standing,
    Walking { waypoints: Vec<[f64; 2]> },
    SittingOnChair,
}

impl Activity {
    pub fn name(&self) -> &'static str {
        match self {
            Activity::LyingOnBed => "lying_on_bed",
            Activity::SittingOnBed => "sitting_on_bed",
            Activity::Standing => "standing",
            Activity::Walking { .. } => "walking",
            Activity::SittingOnChair => "sitting_on_chair",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub activity: Activity,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityScript {
    pub patient_id: u32,
    pub steps: Vec<ScriptStep>,
    /// Posture transition time for this patient, seconds.
    pub transition_s: f64,
    pub walk_speed_mps: f64,
    /// Standing shoulder height scale.
    pub height_factor: f64,
    /// Scripted number of bed exits.
    pub planned_exits: u32,
}

impl ActivityScript {
    pub fn total_duration(&self) -> f64 {
        self.steps.iter().map(|s| s.duration_s).sum()
    }

    pub fn validate(&self, room: &RoomGeometry) -> Result<()> {
        for step in &self.steps {
            if !(step.duration_s > 0.0) {
                return Err(Error::Config("script step durations must be positive".into()));
            }
            if let Activity::Walking { waypoints } = &step.activity {
                for w in waypoints {
                    if w[0] < 0.0 || w[0] > room.size[0] || w[1] < 0.0 || w[1] > room.size[1] {
                        return Err(Error::Config(format!(
                            "walking waypoint {w:?} is outside the room"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn path_length(points: &[[f64; 2]]) -> f64 {
    points
        .windows(2)
        .map(|p| ((p[1][0] - p[0][0]).powi(2) + (p[1][1] - p[0][1]).powi(2)).sqrt())
        .sum()
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    range[0] + rng.random::<f64>() * (range[1] - range[0])
}

/// Build one patient's randomized routine. Every exit cycle produces exactly
/// one in-bed to out-of-bed transition; aborted sit-ups stay in bed.
pub fn random_script(
    patient_id: u32,
    bounds: &ScriptBounds,
    room: &RoomGeometry,
    rng: &mut ChaCha8Rng,
) -> ActivityScript {
    let exits = rng.random_range(bounds.exits_min..=bounds.exits_max);
    let transition_s = uniform(rng, bounds.transition_s);
    let walk_speed = uniform(rng, bounds.walk_speed_mps);
    let height_factor = 0.9 + rng.random::<f64>() * 0.2;

    let to_chair = vec![room.standing_xy, room.walk_via_xy, room.chair_xy];
    let to_bed = vec![room.chair_xy, room.walk_via_xy, room.standing_xy];
    let walk_dur = (path_length(&to_chair) / walk_speed).max(1.0);

    let mut steps = Vec::new();
    steps.push(ScriptStep {
        activity: Activity::LyingOnBed,
        duration_s: uniform(rng, bounds.lying_s),
    });
    for _ in 0..exits {
        if rng.random::<f64>() < bounds.false_sit_prob {
            // Aborted attempt: sit up, lie back down.
            steps.push(ScriptStep {
                activity: Activity::SittingOnBed,
                duration_s: uniform(rng, bounds.bed_sit_s),
            });
            steps.push(ScriptStep {
                activity: Activity::LyingOnBed,
                duration_s: uniform(rng, [8.0, 20.0]),
            });
        }
        steps.push(ScriptStep {
            activity: Activity::SittingOnBed,
            duration_s: uniform(rng, bounds.bed_sit_s),
        });
        steps.push(ScriptStep {
            activity: Activity::Standing,
            duration_s: uniform(rng, bounds.stand_s),
        });
        if rng.random::<f64>() < bounds.chair_visit_prob {
            steps.push(ScriptStep {
                activity: Activity::Walking { waypoints: to_chair.clone() },
                duration_s: walk_dur,
            });
            steps.push(ScriptStep {
                activity: Activity::SittingOnChair,
                duration_s: uniform(rng, bounds.chair_sit_s),
            });
            steps.push(ScriptStep {
                activity: Activity::Walking { waypoints: to_bed.clone() },
                duration_s: walk_dur,
            });
            steps.push(ScriptStep {
                activity: Activity::Standing,
                duration_s: uniform(rng, [2.0, 4.0]),
            });
        }
        steps.push(ScriptStep {
            activity: Activity::SittingOnBed,
            duration_s: uniform(rng, [3.0, 6.0]),
        });
        steps.push(ScriptStep {
            activity: Activity::LyingOnBed,
            duration_s: uniform(rng, bounds.lying_s),
        });
    }

    ActivityScript {
        patient_id,
        steps,
        transition_s,
        walk_speed_mps: walk_speed,
        height_factor,
        planned_exits: exits,
    }
}
