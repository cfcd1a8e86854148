//! Tilt-switch model: a hysteretic comparator on the torso pitch with an
//! optional stuck state.
//!
//! The switch reports Id1 while upright and Id2 while tilted past the
//! threshold; the flip happens when the pitch crosses `threshold +/-
//! hysteresis` in the corresponding direction. With probability `p_stuck` a
//! transition leaves the steel ball stuck, during which the reported
//! identifier chatters randomly at the chatter rate until the next clean
//! crossing.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::scenario::SensorModel;
use crate::data::TagId;

/// Reported identifier at each pitch sample.
pub fn tilt_switch(pitch_rad: &[f64], dt: f64, model: &SensorModel, seed: u64) -> Vec<TagId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let up = (model.threshold_deg + model.hysteresis_deg).to_radians();
    let down = (model.threshold_deg - model.hysteresis_deg).to_radians();

    let mut out = Vec::with_capacity(pitch_rad.len());
    let mut tilted = pitch_rad.first().map_or(false, |&p| p > up);
    let mut stuck = false;
    let mut chatter_id = TagId::Id1;
    let mut next_chatter = 0.0;

    for (i, &theta) in pitch_rad.iter().enumerate() {
        let t = i as f64 * dt;
        let crossed = if tilted { theta < down } else { theta > up };
        if crossed {
            tilted = !tilted;
            // A fresh mechanical transition: either clean or stuck.
            stuck = rng.random::<f64>() < model.p_stuck;
            if stuck {
                chatter_id = if rng.random::<bool>() { TagId::Id1 } else { TagId::Id2 };
                next_chatter = t + exp_gap(&mut rng, model.chatter_rate_hz);
            }
        }
        if stuck {
            while t >= next_chatter {
                chatter_id = match chatter_id {
                    TagId::Id1 => TagId::Id2,
                    TagId::Id2 => TagId::Id1,
                };
                next_chatter += exp_gap(&mut rng, model.chatter_rate_hz);
            }
            out.push(chatter_id);
        } else {
            out.push(if tilted { TagId::Id2 } else { TagId::Id1 });
        }
    }
    out
}

fn exp_gap(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    -(1.0 - rng.random::<f64>()).ln() / rate
}
