use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use udts_core::baselines::{eab_boundaries, eib_boundaries, plb_boundaries};
use udts_core::channel::total_path_loss;
use udts_core::link::{
    dbm_to_watts, noise_power, sir_success, sir_success_integral, time_on_air, SNR_THRESHOLDS_DB,
};
use udts_core::special::hyp2f1_special;
use udts_core::{ScenarioConfig, SpreadingFactor};

/// Airtime from the float form of the modem datasheet formula.
fn toa_reference(sf: u32, payload: u32, bw: f64) -> f64 {
    let sf = sf as f64;
    let de = if sf >= 11.0 && bw <= 125e3 { 1.0 } else { 0.0 };
    let ts = 2f64.powf(sf) / bw;
    let n = ((8.0 * payload as f64 - 4.0 * sf + 28.0 + 16.0) / (4.0 * (sf - 2.0 * de))).ceil();
    let symbols = 8.0 + (n * 5.0).max(0.0);
    (8.0 + 4.25 + symbols) * ts
}

#[test]
fn airtime_matches_reference_formula() {
    for sf in SpreadingFactor::ALL {
        for payload in [1, 10, 23, 51, 100, 222, 255] {
            for bw in [125e3, 250e3, 500e3] {
                let got = time_on_air(sf, payload, bw);
                let want = toa_reference(sf.value() as u32, payload, bw);
                assert_relative_eq!(got, want, max_relative = 1e-14);
            }
        }
    }
}

#[test]
fn integral_and_closed_form_sir_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for i in 0..100 {
        let eta = [2.0, 2.5, 3.0][i % 3];
        let mut c = ScenarioConfig::default();
        c.radio.pathloss_exp = eta;
        c.radio.sir_threshold_db = rng.random_range(0.0..10.0);
        c.network.report_period_s = rng.random_range(60.0..3600.0);
        let d = rng.random_range(c.satellite.orbit_height_m..c.max_slant_m());
        let sf = SpreadingFactor::ALL[rng.random_range(0..6)];
        let n = rng.random_range(1..3000);
        let a = sir_success_integral(d, sf, n, &c).unwrap();
        let b = sir_success(d, sf, n, &c).unwrap();
        assert!(((a - b) / b).abs() < 1e-6, "eta={eta} d={d} n={n}: {a} vs {b}");
    }
}

#[test]
fn eta_two_log_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let x = 10f64.powf(rng.random_range(-6.0..6.0));
        let want = x.ln_1p() / x;
        assert_relative_eq!(hyp2f1_special(2.0, x).unwrap(), want, max_relative = 1e-10);
    }
}

#[test]
fn eib_boundaries_are_exact_multiples() {
    let b = eib_boundaries(&ScenarioConfig::default());
    for (k, v) in b.iter().enumerate() {
        assert_eq!(*v, 137e3 * (k + 1) as f64);
    }
}

#[test]
fn eab_boundaries_split_equal_areas() {
    let b = eab_boundaries(&ScenarioConfig::default());
    for (k, v) in b.iter().enumerate() {
        let want_km = 822.0 * ((k + 1) as f64 / 6.0).sqrt();
        assert!((v / 1e3 - want_km).abs() < 1e-6, "{k}: {v}");
    }
}

#[test]
fn plb_boundaries_match_bisection() {
    let c = ScenarioConfig::default();
    let r = &c.radio;
    let eirp = dbm_to_watts(r.tx_power_dbm) * 10f64.powf((r.gain_tx_dbi + r.gain_rx_dbi) / 10.0);
    let noise = noise_power(r.bandwidth_hz, r.noise_figure_db);
    let got = plb_boundaries(&c).unwrap();
    for (k, q_db) in SNR_THRESHOLDS_DB.iter().enumerate() {
        let q = 10f64.powf(q_db / 10.0);
        let margin = |d: f64| eirp / (total_path_loss(d, &c).unwrap() * noise) - q;
        let (mut lo, mut hi) = (1.0, 1e8);
        assert!(margin(lo) > 0.0 && margin(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if margin(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((got[k] - lo).abs() < 1.0, "SF{}: {} vs {lo}", k + 7, got[k]);
    }
}
