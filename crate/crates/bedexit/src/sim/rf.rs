//! Backscatter channel model: two-way free-space path gain with absorption
//! and log-normal shadowing for RSSI, and geometric round-trip phase with
//! per-antenna/channel offsets, both quantized to reader resolution.
//!
//! In linear terms the received power is `P_t * G_t^2 * G_path^2 * K` with
//! the one-way path gain `G_path = (lambda / 4 pi R)^2 * |H|` and
//! `|H| = e^(-alpha R)`, which makes RSSI fall as 1/R^4: doubling the
//! distance costs 40*log10(2) = 12.0412 dB.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::scenario::RfChannelParams;
use crate::util::derive_seed;

/// Speed of light, m/s.
pub const C_M_PER_S: f64 = 299_792_458.0;

/// Center frequency of channel `idx` under the round-robin plan.
pub fn channel_freq_mhz(params: &RfChannelParams, idx: usize) -> f64 {
    let n = params.n_channels as f64;
    let width = (params.band_mhz[1] - params.band_mhz[0]) / n;
    params.band_mhz[0] + (idx as f64 + 0.5) * width
}

/// Channel active at time `t`: the reader hops once per inventory round.
pub fn channel_at(params: &RfChannelParams, t: f64) -> usize {
    ((t / params.hop_interval_s).floor() as usize) % params.n_channels
}

pub fn wavelength_m(freq_mhz: f64) -> f64 {
    C_M_PER_S / (freq_mhz * 1e6)
}

/// Deterministic received level in dBm: no shadowing, no quantization.
/// `cos_orient` is the cosine of the angle between the sensor broadside and
/// the antenna boresight.
pub fn mean_rssi_dbm(
    distance_m: f64,
    cos_orient: f64,
    freq_mhz: f64,
    params: &RfChannelParams,
) -> f64 {
    assert!(distance_m > 0.0, "distance must be positive");
    let lambda = wavelength_m(freq_mhz);
    let c = 10.0 * (params.reader_power_w * 1e3).log10()
        + 2.0 * params.reader_gain_dbi
        + 10.0 * params.backscatter_gain.log10();
    let path = 40.0 * (lambda / (4.0 * std::f64::consts::PI * distance_m)).log10();
    let absorption = -2.0 * params.absorption_per_m * distance_m * 10.0 / std::f64::consts::LN_10;
    let orientation = 10.0 * cos_orient.abs().max(params.orientation_epsilon).log10();
    c + path + absorption + orientation
}

/// Shadowed, quantized RSSI; `None` when the level falls below the reader
/// sensitivity floor (the read is lost).
pub fn synth_rssi(
    distance_m: f64,
    cos_orient: f64,
    freq_mhz: f64,
    params: &RfChannelParams,
    rng: &mut ChaCha8Rng,
) -> Option<f64> {
    let mean = mean_rssi_dbm(distance_m, cos_orient, freq_mhz, params);
    let value = if params.shadowing_sigma_db > 0.0 {
        let normal = Normal::new(0.0, params.shadowing_sigma_db).expect("sigma >= 0");
        mean + normal.sample(rng)
    } else {
        mean
    };
    if value < params.sensitivity_floor_dbm {
        return None;
    }
    let q = params.rssi_quantum_db;
    Some((value / q).round() * q)
}

/// Exact round-trip carrier phase before quantization:
/// `(4 pi R f / c + offset) mod 2 pi`.
pub fn carrier_phase_rad(distance_m: f64, freq_mhz: f64, offset_rad: f64) -> f64 {
    let f = freq_mhz * 1e6;
    (4.0 * std::f64::consts::PI * distance_m * f / C_M_PER_S + offset_rad)
        .rem_euclid(std::f64::consts::TAU)
}

/// Quantized reader phase report in [0, 2 pi).
pub fn synth_phase(
    distance_m: f64,
    freq_mhz: f64,
    offset_rad: f64,
    params: &RfChannelParams,
) -> f64 {
    let exact = carrier_phase_rad(distance_m, freq_mhz, offset_rad);
    let q = params.phase_quantum_rad;
    ((exact / q).round() * q).rem_euclid(std::f64::consts::TAU)
}

/// Fixed per-(antenna, channel) phase offset of the deployment, derived from
/// the scenario seed.
pub fn antenna_channel_offset(seed: u64, antenna_id: u8, channel_idx: usize) -> f64 {
    let h = derive_seed(seed, "phase-offset", ((antenna_id as u64) << 32) | channel_idx as u64);
    (h as f64 / u64::MAX as f64) * std::f64::consts::TAU
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn quiet_params() -> RfChannelParams {
        RfChannelParams { shadowing_sigma_db: 0.0, ..RfChannelParams::default() }
    }

    #[test]
    fn doubling_distance_costs_12_dB() {
        // 1/R^4 law: 40 log10(2) = 12.0412.
        let mut p = quiet_params();
        p.absorption_per_m = 0.0;
        let a = mean_rssi_dbm(1.5, 1.0, 922.5, &p);
        let b = mean_rssi_dbm(3.0, 1.0, 922.5, &p);
        assert!((a - b - 12.041_199_826_559_248).abs() < 1e-9);
    }

    #[test]
    fn noiseless_synthesis_is_deterministic() {
        let p = quiet_params();
        let mut r1 = ChaCha8Rng::seed_from_u64(0);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let a = synth_rssi(2.0, 0.8, 922.5, &p, &mut r1).unwrap();
        let b = synth_rssi(2.0, 0.8, 922.5, &p, &mut r2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rssi_decreases_monotonically_with_distance() {
        let p = quiet_params();
        let mut prev = f64::INFINITY;
        for i in 1..40 {
            let r = 0.5 + i as f64 * 0.25;
            let v = mean_rssi_dbm(r, 0.7, 922.5, &p);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn sample_mean_matches_noiseless_value() {
        // Monte-Carlo mean oracle: mean of n draws is within 3 sigma/sqrt(n)
        // of the noiseless value. Quantization is made negligible so the
        // rounding bias cannot swamp the bound.
        let mut p = RfChannelParams::default();
        p.rssi_quantum_db = 1e-9;
        p.sensitivity_floor_dbm = -1e9;
        let noiseless = mean_rssi_dbm(2.0, 1.0, 922.5, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += synth_rssi(2.0, 1.0, 922.5, &p, &mut rng).unwrap();
        }
        let mean = sum / n as f64;
        let bound = 3.0 * p.shadowing_sigma_db / (n as f64).sqrt();
        assert!((mean - noiseless).abs() < bound, "{mean} vs {noiseless} (bound {bound})");
    }

    #[test]
    fn below_floor_reads_are_suppressed() {
        let mut p = quiet_params();
        p.sensitivity_floor_dbm = -40.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(synth_rssi(6.0, 0.05, 922.5, &p, &mut rng).is_none());
    }

    #[test]
    fn half_wavelength_displacement_returns_the_phase() {
        let lambda = wavelength_m(922.5);
        let a = carrier_phase_rad(3.0, 922.5, 0.4);
        let b = carrier_phase_rad(3.0 + lambda / 2.0, 922.5, 0.4);
        assert!((a - b).abs() < 1e-9 || ((a - b).abs() - std::f64::consts::TAU).abs() < 1e-9);
    }

    #[test]
    fn phase_difference_across_channels_matches_formula() {
        // Direct formula evaluation oracle: two channels df apart differ by
        // 4 pi R df / c (mod 2 pi) before offsets. For R = 3 m, df = 1 MHz
        // that is 0.125_750... rad.
        let r = 3.0;
        let df_hz = 1e6;
        let expected = 4.0 * std::f64::consts::PI * r * df_hz / C_M_PER_S;
        assert!((expected - 0.125_750_701_317_100_9).abs() < 1e-12);
        let a = carrier_phase_rad(r, 922.0, 0.0);
        let b = carrier_phase_rad(r, 923.0, 0.0);
        let diff = (b - a).rem_euclid(std::f64::consts::TAU);
        assert!((diff - expected).abs() < 1e-9, "{diff} vs {expected}");
    }

    #[test]
    fn phase_rate_tracks_radial_velocity() {
        // Analytic derivative oracle: R(t) = R0 + v t gives
        // dPsi/dt = 4 pi v f / c, sign included.
        let f_mhz = 922.5;
        let v = -0.35; // approaching
        let r0 = 2.5;
        let h = 1e-5;
        let psi = |t: f64| carrier_phase_rad(r0 + v * t, f_mhz, 1.0);
        let raw = (psi(1.0 + h) - psi(1.0 - h)) / (2.0 * h);
        // Unwrap the central difference onto the principal branch.
        let rate = crate::util::wrap_to_pi(raw * 2.0 * h) / (2.0 * h);
        let expected = 4.0 * std::f64::consts::PI * v * (f_mhz * 1e6) / C_M_PER_S;
        assert!((rate - expected).abs() < 1e-3 * expected.abs(), "{rate} vs {expected}");
    }

    #[test]
    fn quantized_phase_stays_in_range() {
        let p = RfChannelParams::default();
        for i in 0..200 {
            let phase = synth_phase(1.0 + i as f64 * 0.05, 922.5, i as f64, &p);
            assert!((0.0..std::f64::consts::TAU).contains(&phase));
        }
    }

    #[test]
    fn channel_plan_covers_the_band() {
        let p = RfChannelParams::default();
        for i in 0..p.n_channels {
            let f = channel_freq_mhz(&p, i);
            assert!(f > p.band_mhz[0] && f < p.band_mhz[1]);
        }
        assert_eq!(channel_at(&p, 0.0), 0);
        assert_eq!(channel_at(&p, p.hop_interval_s * 1.5), 1);
        assert_eq!(channel_at(&p, p.hop_interval_s * (p.n_channels as f64 + 0.5)), 0);
    }
}
