//! Stochastic read-event process: Poisson-timed inventory reads, antenna
//! selection proportional to received power, and assembly of full readings
//! from the channel and sensor models.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::pose::Trajectory;
use super::rf;
use super::scenario::Scenario;
use crate::data::{TagId, TagReading};

/// Generate the reading stream for one patient trajectory.
///
/// Read events arrive as a Poisson process at `rate_hz`. At each event the
/// reporting antenna is sampled with probability proportional to the linear
/// received power at the current pose; the reading is dropped entirely when
/// the shadowed level falls below the reader sensitivity (sparse reads).
pub fn read_process(
    trajectory: &Trajectory,
    tilt_ids: &[TagId],
    scenario: &Scenario,
    rate_hz: f64,
    seed: u64,
) -> Vec<TagReading> {
    assert!(rate_hz >= 0.0 && rate_hz <= 50.0, "rate must lie in [0, 50] Hz");
    let mut readings = Vec::new();
    if rate_hz == 0.0 || trajectory.samples.is_empty() {
        return readings;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = trajectory.duration();
    let params = &scenario.rf;
    let antennas = &scenario.room.antennas;

    let mut t = 0.0;
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / rate_hz;
        if t > horizon {
            break;
        }
        let idx = ((t / trajectory.dt).floor() as usize).min(trajectory.samples.len() - 1);
        let pose = &trajectory.samples[idx];
        let channel = rf::channel_at(params, t);
        let freq = rf::channel_freq_mhz(params, channel);

        // Mean power per antenna decides who captures the read.
        let mut weights = Vec::with_capacity(antennas.len());
        for (k, a) in antennas.iter().enumerate() {
            let cos = dot_unit(&pose.broadside, &a.boresight);
            let mean = rf::mean_rssi_dbm(pose.distances[k], cos, freq, params);
            weights.push(10.0_f64.powf(mean / 10.0));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let mut pick = rng.random::<f64>() * total;
        let mut k = 0;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                k = i;
                break;
            }
            pick -= w;
            k = i;
        }

        let antenna = &antennas[k];
        let cos = dot_unit(&pose.broadside, &antenna.boresight);
        let Some(rssi) = rf::synth_rssi(pose.distances[k], cos, freq, params, &mut rng) else {
            continue;
        };
        let offset = rf::antenna_channel_offset(scenario.seed, antenna.id, channel);
        let phase = rf::synth_phase(pose.distances[k], freq, offset, params);
        readings.push(TagReading {
            t,
            antenna_id: antenna.id,
            // Keep strictly negative even for extreme geometries.
            rssi_dbm: rssi.min(-1.0),
            phase_rad: phase,
            freq_mhz: freq,
            tag_id: tilt_ids[idx.min(tilt_ids.len() - 1)],
        });
    }
    readings
}

fn dot_unit(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    if nb == 0.0 {
        return 0.0;
    }
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / nb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::pose::pose_trajectory;
    use crate::sim::script::{Activity, ActivityScript, ScriptStep};

    fn lying_trajectory(duration: f64, scenario: &Scenario) -> Trajectory {
        let script = ActivityScript {
            patient_id: 0,
            steps: vec![ScriptStep { activity: Activity::LyingOnBed, duration_s: duration }],
            transition_s: 2.0,
            walk_speed_mps: 0.7,
            height_factor: 1.0,
            planned_exits: 0,
        };
        pose_trajectory(&script, &scenario.room, scenario.read.dt_s, 11)
    }

    #[test]
    fn zero_rate_gives_empty_stream() {
        let scenario = Scenario::default();
        let traj = lying_trajectory(30.0, &scenario);
        let ids = vec![TagId::Id2; traj.samples.len()];
        assert!(read_process(&traj, &ids, &scenario, 0.0, 1).is_empty());
    }

    #[test]
    fn poisson_count_is_within_three_sigma() {
        // Poisson count oracle: N ~ rate * T, sd = sqrt(N).
        let mut scenario = Scenario::default();
        // Disable loss so every event yields a reading.
        scenario.rf.sensitivity_floor_dbm = -1e9;
        let t_total = 600.0;
        let rate = 20.0;
        let traj = lying_trajectory(t_total, &scenario);
        let ids = vec![TagId::Id2; traj.samples.len()];
        let readings = read_process(&traj, &ids, &scenario, rate, 2);
        let expected = rate * traj.duration();
        let sd = expected.sqrt();
        let n = readings.len() as f64;
        assert!((n - expected).abs() < 3.0 * sd, "{n} reads vs {expected} +/- {sd}");
    }

    #[test]
    fn nearest_facing_antenna_collects_the_plurality_while_lying() {
        // Power-ratio oracle: while lying supine the bed antenna (id 1) has
        // the strongest mean power, so it must collect the most reads.
        let mut scenario = Scenario::default();
        scenario.rf.sensitivity_floor_dbm = -1e9;
        let traj = lying_trajectory(120.0, &scenario);
        let ids = vec![TagId::Id2; traj.samples.len()];
        let readings = read_process(&traj, &ids, &scenario, 15.0, 3);
        let mut counts = [0usize; 3];
        for r in &readings {
            counts[(r.antenna_id - 1) as usize] += 1;
        }
        assert!(counts[0] > counts[1] && counts[0] > counts[2], "{counts:?}");
    }

    #[test]
    fn readings_are_time_sorted_and_in_band() {
        let scenario = Scenario::default();
        let traj = lying_trajectory(60.0, &scenario);
        let ids = vec![TagId::Id1; traj.samples.len()];
        let readings = read_process(&traj, &ids, &scenario, 12.0, 4);
        assert!(!readings.is_empty());
        for w in readings.windows(2) {
            assert!(w[0].t <= w[1].t);
        }
        for r in &readings {
            assert!(r.freq_mhz >= 920.0 && r.freq_mhz <= 926.0);
            assert!(r.rssi_dbm < 0.0);
            assert!((0.0..std::f64::consts::TAU).contains(&r.phase_rad));
        }
    }
}
