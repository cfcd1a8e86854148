//! Scripted activities -> a sampled sensor trajectory with torso pitch,
//! broadside orientation, per-antenna distances and radial velocities, plus
//! the derived ground-truth label intervals.
//!
//! Posture changes interpolate position, pitch and orientation over the
//! patient's transition time with a smoothstep ramp; walking moves along the
//! waypoint path at constant speed. Out-of-bed begins the moment the sensor
//! leaves the bed bounding volume.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::scenario::RoomGeometry;
use super::script::{Activity, ActivityScript, ScriptStep};
use crate::data::{Label, LabelInterval};

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSample {
    pub t: f64,
    pub position: [f64; 3],
    /// Torso pitch from vertical, radians.
    pub pitch_rad: f64,
    /// Unit normal of the sensor face.
    pub broadside: [f64; 3],
    /// Line-of-sight distance to each antenna, room order.
    pub distances: Vec<f64>,
    /// dR/dt per antenna.
    pub radial_velocity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<PoseSample>,
    pub labels: Vec<LabelInterval>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }
}

#[derive(Debug, Clone, Copy)]
struct Pose {
    pos: [f64; 3],
    pitch: f64,
    broadside: [f64; 3],
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n == 0.0 {
        [0.0, 0.0, 1.0]
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

fn blend(a: &Pose, b: &Pose, s: f64) -> Pose {
    Pose {
        pos: [lerp(a.pos[0], b.pos[0], s), lerp(a.pos[1], b.pos[1], s), lerp(a.pos[2], b.pos[2], s)],
        pitch: lerp(a.pitch, b.pitch, s),
        broadside: normalize([
            lerp(a.broadside[0], b.broadside[0], s),
            lerp(a.broadside[1], b.broadside[1], s),
            lerp(a.broadside[2], b.broadside[2], s),
        ]),
    }
}

/// Per-episode randomized target pose for one step.
#[derive(Debug, Clone)]
enum StepPose {
    Fixed(Pose),
    Walk { waypoints: Vec<[f64; 2]>, length: f64, duration: f64, z: f64, pitch: f64 },
}

impl StepPose {
    fn at(&self, u: f64) -> Pose {
        match self {
            StepPose::Fixed(p) => *p,
            StepPose::Walk { waypoints, length, duration, z, pitch } => {
                let dist = (u / duration).clamp(0.0, 1.0) * length;
                let (xy, tangent) = point_along(waypoints, dist);
                // Small pitch sway while stepping; does not move the sensor.
                let sway = 0.05 * (u * 2.0 * std::f64::consts::PI * 1.3).sin();
                Pose {
                    pos: [xy[0], xy[1], *z],
                    pitch: pitch + sway,
                    broadside: normalize([tangent[0], tangent[1], 0.1]),
                }
            }
        }
    }

    fn end(&self, duration: f64) -> Pose {
        self.at(duration)
    }
}

fn point_along(waypoints: &[[f64; 2]], dist: f64) -> ([f64; 2], [f64; 2]) {
    let mut remaining = dist.max(0.0);
    for w in waypoints.windows(2) {
        let seg = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
        let len = (seg[0] * seg[0] + seg[1] * seg[1]).sqrt();
        if remaining <= len || len == 0.0 {
            let f = if len > 0.0 { remaining / len } else { 0.0 };
            let t = if len > 0.0 { [seg[0] / len, seg[1] / len] } else { [1.0, 0.0] };
            return ([w[0][0] + seg[0] * f, w[0][1] + seg[1] * f], t);
        }
        remaining -= len;
    }
    let last = *waypoints.last().unwrap();
    (last, [1.0, 0.0])
}

fn jitter(rng: &mut ChaCha8Rng, amount: f64) -> f64 {
    (rng.random::<f64>() * 2.0 - 1.0) * amount
}

fn episode_pose(
    step: &ScriptStep,
    room: &RoomGeometry,
    height_factor: f64,
    rng: &mut ChaCha8Rng,
) -> StepPose {
    let deg = std::f64::consts::PI / 180.0;
    match &step.activity {
        Activity::LyingOnBed => {
            // Roll decides the facing: supine exposes the sensor upward;
            // lying on the tagged side turns it toward the mattress plane.
            let roll = rng.random::<f64>();
            let broadside = if roll < 0.5 {
                [jitter(rng, 0.15), jitter(rng, 0.15), 1.0]
            } else if roll < 0.75 {
                [-1.0, jitter(rng, 0.2), 0.15]
            } else {
                [1.0, jitter(rng, 0.2), 0.15]
            };
            StepPose::Fixed(Pose {
                pos: [
                    room.lying_xy[0] + jitter(rng, 0.06),
                    room.lying_xy[1] + jitter(rng, 0.15),
                    room.mattress_height + 0.18,
                ],
                pitch: (88.0 + jitter(rng, 4.0)) * deg,
                broadside: normalize(broadside),
            })
        }
        Activity::SittingOnBed => StepPose::Fixed(Pose {
            pos: [
                room.bed_edge_xy[0] + jitter(rng, 0.05),
                room.bed_edge_xy[1] + jitter(rng, 0.08),
                room.mattress_height + 0.52 * height_factor,
            ],
            pitch: (24.0 + jitter(rng, 10.0)) * deg,
            broadside: normalize([1.0, jitter(rng, 0.3), 0.1]),
        }),
        Activity::Standing => StepPose::Fixed(Pose {
            pos: [
                room.standing_xy[0] + jitter(rng, 0.05),
                room.standing_xy[1] + jitter(rng, 0.08),
                1.38 * height_factor,
            ],
            pitch: (6.0 + jitter(rng, 4.0)) * deg,
            broadside: normalize([0.9, jitter(rng, 0.4), 0.05]),
        }),
        Activity::Walking { waypoints } => {
            let length: f64 = waypoints
                .windows(2)
                .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
                .sum();
            StepPose::Walk {
                waypoints: waypoints.clone(),
                length,
                duration: step.duration_s,
                z: 1.38 * height_factor,
                pitch: (8.0 + jitter(rng, 3.0)) * deg,
            }
        }
        Activity::SittingOnChair => StepPose::Fixed(Pose {
            pos: [
                room.chair_xy[0] + jitter(rng, 0.04),
                room.chair_xy[1] + jitter(rng, 0.06),
                room.chair_seat_height + 0.52 * height_factor,
            ],
            pitch: (16.0 + jitter(rng, 8.0)) * deg,
            broadside: normalize([-0.9, jitter(rng, 0.3), 0.12]),
        }),
    }
}

fn in_bed_volume(pos: &[f64; 3], room: &RoomGeometry) -> bool {
    (0..3).all(|i| pos[i] >= room.bed_min[i] && pos[i] <= room.bed_max[i])
}

/// Sample the scripted routine at `dt`.
pub fn pose_trajectory(
    script: &ActivityScript,
    room: &RoomGeometry,
    dt: f64,
    seed: u64,
) -> Trajectory {
    assert!(dt > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Randomize each episode once, up front.
    let poses: Vec<StepPose> = script
        .steps
        .iter()
        .map(|s| episode_pose(s, room, script.height_factor, &mut rng))
        .collect();
    let starts: Vec<f64> = script
        .steps
        .iter()
        .scan(0.0, |acc, s| {
            let start = *acc;
            *acc += s.duration_s;
            Some(start)
        })
        .collect();
    let total = script.total_duration();
    let n = (total / dt).floor() as usize;

    let antenna_pos: Vec<[f64; 3]> = room.antennas.iter().map(|a| a.position).collect();
    let mut samples: Vec<PoseSample> = Vec::with_capacity(n + 1);
    let mut step_idx = 0usize;
    for i in 0..=n {
        let t = i as f64 * dt;
        while step_idx + 1 < script.steps.len() && t >= starts[step_idx + 1] {
            step_idx += 1;
        }
        let u = t - starts[step_idx];
        let mut pose = poses[step_idx].at(u);
        if step_idx > 0 {
            let tau = script
                .transition_s
                .min(script.steps[step_idx].duration_s * 0.8)
                .max(dt);
            if u < tau {
                let prev_end = poses[step_idx - 1].end(script.steps[step_idx - 1].duration_s);
                pose = blend(&prev_end, &pose, smoothstep(u / tau));
            }
        }
        let distances: Vec<f64> = antenna_pos
            .iter()
            .map(|a| {
                ((pose.pos[0] - a[0]).powi(2)
                    + (pose.pos[1] - a[1]).powi(2)
                    + (pose.pos[2] - a[2]).powi(2))
                .sqrt()
            })
            .collect();
        let radial_velocity: Vec<f64> = match samples.last() {
            Some(prev) => distances
                .iter()
                .zip(&prev.distances)
                .map(|(d, pd)| (d - pd) / dt)
                .collect(),
            None => vec![0.0; distances.len()],
        };
        samples.push(PoseSample {
            t,
            position: pose.pos,
            pitch_rad: pose.pitch,
            broadside: pose.broadside,
            distances,
            radial_velocity,
        });
    }

    let labels = derive_labels(&samples, room);
    Trajectory { dt, samples, labels }
}

/// Label intervals tiling [0, t_last] from bed-volume membership.
fn derive_labels(samples: &[PoseSample], room: &RoomGeometry) -> Vec<LabelInterval> {
    let mut labels = Vec::new();
    if samples.is_empty() {
        return labels;
    }
    let to_label = |s: &PoseSample| {
        if in_bed_volume(&s.position, room) {
            Label::InBed
        } else {
            Label::OutOfBed
        }
    };
    let mut current = to_label(&samples[0]);
    let mut start = 0.0;
    for s in &samples[1..] {
        let l = to_label(s);
        if l != current {
            labels.push(LabelInterval { start, end: s.t, label: current });
            start = s.t;
            current = l;
        }
    }
    let end = samples.last().unwrap().t;
    if end > start {
        labels.push(LabelInterval { start, end, label: current });
    } else if labels.is_empty() {
        labels.push(LabelInterval { start: 0.0, end: start.max(1e-6), label: current });
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::ScriptBounds;
    use crate::sim::script::random_script;

    fn simple_script(steps: Vec<ScriptStep>) -> ActivityScript {
        ActivityScript {
            patient_id: 0,
            steps,
            transition_s: 2.0,
            walk_speed_mps: 0.7,
            height_factor: 1.0,
            planned_exits: 0,
        }
    }

    #[test]
    fn lying_pose_matches_geometry() {
        let room = RoomGeometry::default();
        let script = simple_script(vec![ScriptStep {
            activity: Activity::LyingOnBed,
            duration_s: 10.0,
        }]);
        let traj = pose_trajectory(&script, &room, 0.05, 1);
        let mid = &traj.samples[traj.samples.len() / 2];
        // Torso roughly horizontal, sensor at mattress height.
        assert!(mid.pitch_rad > 80.0_f64.to_radians());
        assert!((mid.position[2] - (room.mattress_height + 0.18)).abs() < 1e-9);
        assert_eq!(traj.labels.len(), 1);
        assert_eq!(traj.labels[0].label, Label::InBed);
    }

    #[test]
    fn lying_to_standing_yields_one_exit() {
        let room = RoomGeometry::default();
        let script = simple_script(vec![
            ScriptStep { activity: Activity::LyingOnBed, duration_s: 20.0 },
            ScriptStep { activity: Activity::SittingOnBed, duration_s: 8.0 },
            ScriptStep { activity: Activity::Standing, duration_s: 10.0 },
        ]);
        let traj = pose_trajectory(&script, &room, 0.05, 2);
        let transitions = traj
            .labels
            .windows(2)
            .filter(|w| w[0].label == Label::InBed && w[1].label == Label::OutOfBed)
            .count();
        assert_eq!(transitions, 1);
    }

    #[test]
    fn trajectory_is_continuous() {
        // Numerical continuity oracle: the per-step displacement never
        // exceeds the analytic speed bound. Smoothstep peaks at 1.5x the
        // mean transition speed; walking moves at the scripted speed.
        let room = RoomGeometry::default();
        let bounds = ScriptBounds::default();
        for seed in 0..5u64 {
            let script = random_script(
                seed as u32,
                &bounds,
                &room,
                &mut ChaCha8Rng::seed_from_u64(seed),
            );
            let dt = 0.05;
            let traj = pose_trajectory(&script, &room, dt, seed);
            // Longest anchor-to-anchor gap in the room given default poses.
            let max_gap: f64 = 2.5;
            // Effective transition time is clamped per step to 80% of its
            // duration; smoothstep peaks at 1.5x the mean speed, and a blend
            // out of a walking step adds the walking speed on top.
            let tau_min = script
                .steps
                .iter()
                .map(|s| script.transition_s.min(s.duration_s * 0.8))
                .fold(f64::INFINITY, f64::min)
                .max(dt);
            let v_max = (1.5 * max_gap / tau_min + script.walk_speed_mps) * 1.05;
            for w in traj.samples.windows(2) {
                let d = ((w[1].position[0] - w[0].position[0]).powi(2)
                    + (w[1].position[1] - w[0].position[1]).powi(2)
                    + (w[1].position[2] - w[0].position[2]).powi(2))
                .sqrt();
                assert!(d < v_max * dt, "step displacement {d} exceeds bound");
            }
        }
    }

    #[test]
    fn labels_tile_the_time_span() {
        let room = RoomGeometry::default();
        let bounds = ScriptBounds::default();
        let script = random_script(0, &bounds, &room, &mut ChaCha8Rng::seed_from_u64(3));
        let traj = pose_trajectory(&script, &room, 0.05, 3);
        assert_eq!(traj.labels.first().unwrap().start, 0.0);
        assert_eq!(traj.labels.last().unwrap().end, traj.duration());
        for w in traj.labels.windows(2) {
            assert_eq!(w[0].end, w[1].start);
            assert_ne!(w[0].label, w[1].label);
        }
    }

    #[test]
    fn exits_match_scripted_stand_ups() {
        let room = RoomGeometry::default();
        let bounds = ScriptBounds::default();
        for seed in 0..10u64 {
            let script = random_script(
                seed as u32,
                &bounds,
                &room,
                &mut ChaCha8Rng::seed_from_u64(100 + seed),
            );
            let traj = pose_trajectory(&script, &room, 0.05, seed);
            let exits = traj
                .labels
                .windows(2)
                .filter(|w| w[0].label == Label::InBed && w[1].label == Label::OutOfBed)
                .count();
            assert_eq!(exits as u32, script.planned_exits);
        }
    }
}
