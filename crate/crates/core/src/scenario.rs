//! Scenario configuration and device deployment.
//!
//! All lengths are meters, frequencies hertz, powers dBm, gains dBi and
//! thresholds dB, as the field suffixes indicate. Conversions to linear units
//! happen in [`crate::link`].

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seeds::{self, Domain};
use crate::sf::SpreadingFactor;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_devices: usize,
    pub payload_bytes: u32,
    pub report_period_s: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_devices: 1000,
            payload_bytes: 23,
            report_period_s: 600.0,
        }
    }
}

/// Soil description. `eps_real`/`eps_imag` are the complex dielectric
/// constant and drive the propagation model directly; `vwc_frac` and
/// `clay_frac` record the soil they were derived from.
///
/// The default dielectric pair comes from the mineralogy-based moist-soil
/// dielectric model evaluated offline at 11.19 % water content, 16.86 % clay
/// and 915 MHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoilConfig {
    pub burial_depth_m: f64,
    pub vwc_frac: f64,
    pub clay_frac: f64,
    pub eps_real: f64,
    pub eps_imag: f64,
    pub rel_permeability: f64,
}

impl Default for SoilConfig {
    fn default() -> Self {
        Self {
            burial_depth_m: 0.4,
            vwc_frac: 0.1119,
            clay_frac: 0.1686,
            eps_real: 5.7988,
            eps_imag: 0.5530,
            rel_permeability: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SatelliteConfig {
    pub orbit_height_m: f64,
    pub coverage_radius_m: f64,
}

impl Default for SatelliteConfig {
    fn default() -> Self {
        Self {
            orbit_height_m: 200e3,
            coverage_radius_m: 822e3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub carrier_hz: f64,
    pub gain_tx_dbi: f64,
    pub gain_rx_dbi: f64,
    pub sir_threshold_db: f64,
    pub pathloss_exp: f64,
    pub n_channels: u32,
    pub tx_power_dbm: f64,
    pub tx_current_a: f64,
    pub supply_v: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 915e6,
            gain_tx_dbi: 2.15,
            gain_rx_dbi: 35.0,
            sir_threshold_db: 6.0,
            pathloss_exp: 2.0,
            n_channels: 1,
            tx_power_dbm: 20.0,
            tx_current_a: 0.133,
            supply_v: 3.3,
            bandwidth_hz: 125e3,
            noise_figure_db: 6.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: NetworkConfig,
    pub soil: SoilConfig,
    pub satellite: SatelliteConfig,
    pub radio: RadioConfig,
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(what.to_owned()))
    }
}

impl ScenarioConfig {
    pub fn with_devices(mut self, n: usize) -> Self {
        self.network.n_devices = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (n, s, sat, r) = (&self.network, &self.soil, &self.satellite, &self.radio);
        require(n.n_devices >= 1, "network.n_devices must be >= 1")?;
        require(n.payload_bytes >= 1, "network.payload_bytes must be >= 1")?;
        require(
            n.report_period_s.is_finite() && n.report_period_s > 0.0,
            "network.report_period_s must be > 0",
        )?;
        require(
            s.burial_depth_m.is_finite() && s.burial_depth_m > 0.0,
            "soil.burial_depth_m must be > 0",
        )?;
        require(
            s.eps_real.is_finite() && s.eps_real > 1.0,
            "soil.eps_real must be > 1",
        )?;
        require(
            s.eps_imag.is_finite() && s.eps_imag >= 0.0,
            "soil.eps_imag must be >= 0",
        )?;
        require(
            s.rel_permeability.is_finite() && s.rel_permeability > 0.0,
            "soil.rel_permeability must be > 0",
        )?;
        require(
            sat.orbit_height_m.is_finite() && sat.orbit_height_m > 0.0,
            "satellite.orbit_height_m must be > 0",
        )?;
        require(
            sat.coverage_radius_m.is_finite() && sat.coverage_radius_m > 0.0,
            "satellite.coverage_radius_m must be > 0",
        )?;
        require(
            r.carrier_hz.is_finite() && r.carrier_hz > 0.0,
            "radio.carrier_hz must be > 0",
        )?;
        require(
            r.pathloss_exp.is_finite() && r.pathloss_exp >= 2.0,
            "radio.pathloss_exp must be >= 2",
        )?;
        require(r.n_channels >= 1, "radio.n_channels must be >= 1")?;
        require(
            r.bandwidth_hz.is_finite() && r.bandwidth_hz > 0.0,
            "radio.bandwidth_hz must be > 0",
        )?;
        require(
            r.tx_current_a.is_finite() && r.tx_current_a > 0.0,
            "radio.tx_current_a must be > 0",
        )?;
        require(
            r.supply_v.is_finite() && r.supply_v > 0.0,
            "radio.supply_v must be > 0",
        )?;
        for (v, name) in [
            (r.gain_tx_dbi, "radio.gain_tx_dbi"),
            (r.gain_rx_dbi, "radio.gain_rx_dbi"),
            (r.tx_power_dbm, "radio.tx_power_dbm"),
            (r.noise_figure_db, "radio.noise_figure_db"),
            (r.sir_threshold_db, "radio.sir_threshold_db"),
        ] {
            require(v.is_finite(), &format!("{name} must be finite"))?;
        }
        Ok(())
    }

    /// Largest device-to-gateway distance in the coverage disk.
    pub fn max_slant_m(&self) -> f64 {
        self.satellite
            .orbit_height_m
            .hypot(self.satellite.coverage_radius_m)
    }
}

/// One buried node.
#[derive(Clone, Debug, PartialEq)]
pub struct EndDevice {
    pub id: usize,
    /// Ground distance from the beam center.
    pub radial_m: f64,
    pub azimuth_rad: f64,
    /// Device-to-gateway distance.
    pub slant_m: f64,
    pub sf: SpreadingFactor,
}

/// Flat-ground slant range `sqrt(H^2 + r^2)`.
pub fn slant_distance(radial_m: f64, config: &ScenarioConfig) -> Result<f64> {
    if !(radial_m >= 0.0) || !radial_m.is_finite() {
        return Err(Error::Domain(format!(
            "radial distance must be finite and >= 0, got {radial_m}"
        )));
    }
    Ok(config.satellite.orbit_height_m.hypot(radial_m))
}

/// Places exactly `n_devices` nodes uniformly on the coverage disk (a Poisson
/// point process conditioned on its count). Device `sf` starts at SF7.
pub fn sample_deployment(config: &ScenarioConfig, seed: u64) -> Result<Vec<EndDevice>> {
    config.validate()?;
    let radius = config.satellite.coverage_radius_m;
    let mut rng = seeds::stream(seed, Domain::Deployment, 0);
    (0..config.network.n_devices)
        .map(|id| {
            let u: f64 = rng.random();
            let azimuth_rad = 2.0 * PI * rng.random::<f64>();
            let radial_m = radius * u.sqrt();
            Ok(EndDevice {
                id,
                radial_m,
                azimuth_rad,
                slant_m: slant_distance(radial_m, config)?,
                sf: SpreadingFactor::SF7,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn defaults_match_reference_parameters() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        assert!((1000..=10000).contains(&c.network.n_devices));
        assert_eq!(c.soil.burial_depth_m, 0.4);
        assert_eq!(c.network.payload_bytes, 23);
        assert_eq!(c.network.report_period_s, 600.0);
        assert_eq!(c.satellite.orbit_height_m, 200e3);
        assert_eq!(c.satellite.coverage_radius_m, 822e3);
        assert_eq!(c.radio.carrier_hz, 915e6);
        assert_eq!(c.radio.gain_tx_dbi, 2.15);
        assert_eq!(c.radio.gain_rx_dbi, 35.0);
        assert_eq!(c.radio.sir_threshold_db, 6.0);
        assert_eq!(c.radio.pathloss_exp, 2.0);
        assert_eq!(c.radio.n_channels, 1);
        assert_eq!(c.radio.tx_power_dbm, 20.0);
        assert_eq!(c.radio.tx_current_a, 0.133);
        assert_eq!(c.radio.supply_v, 3.3);
        assert_eq!(c.radio.bandwidth_hz, 125e3);
        assert_eq!(c.soil.rel_permeability, 1.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = ScenarioConfig::default();
        c.soil.eps_real = 1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ScenarioConfig::default();
        c.radio.pathloss_exp = 1.5;
        assert!(c.validate().is_err());
        let c = ScenarioConfig::default().with_devices(0);
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.radio.n_channels = 0;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.network.report_period_s = 0.0;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.satellite.coverage_radius_m = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn slant_examples() {
        let c = ScenarioConfig::default();
        assert_eq!(slant_distance(0.0, &c).unwrap(), 200e3);
        let edge = slant_distance(822e3, &c).unwrap();
        // sqrt(200^2 + 822^2) km
        assert_relative_eq!(edge, 845_981.087_259_047, max_relative = 1e-10);
        assert_relative_eq!(edge, c.max_slant_m(), max_relative = 1e-15);
        assert!(matches!(slant_distance(-1.0, &c), Err(Error::Domain(_))));
        assert!(slant_distance(f64::NAN, &c).is_err());
    }

    #[test]
    fn single_device_in_disk() {
        let c = ScenarioConfig::default().with_devices(1);
        let d = sample_deployment(&c, 42).unwrap();
        assert_eq!(d.len(), 1);
        assert!((0.0..=822e3).contains(&d[0].radial_m));
    }

    #[test]
    fn deployment_is_deterministic() {
        let c = ScenarioConfig::default().with_devices(50);
        assert_eq!(sample_deployment(&c, 3).unwrap(), sample_deployment(&c, 3).unwrap());
        assert_ne!(sample_deployment(&c, 3).unwrap(), sample_deployment(&c, 4).unwrap());
    }

    #[test]
    fn deployment_matches_uniform_disk() {
        let c = ScenarioConfig::default().with_devices(100_000);
        let devices = sample_deployment(&c, 11).unwrap();
        let r = c.satellite.coverage_radius_m;
        let mut u: Vec<f64> = devices.iter().map(|d| (d.radial_m / r).powi(2)).collect();
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean (r/R)^2 = {mean}");

        // Kolmogorov-Smirnov against F(r) = (r/R)^2, i.e. u ~ U(0,1).
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        let ks = u
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max);
        // alpha = 0.01 critical value
        let critical = 1.6276 / n.sqrt();
        assert!(ks < critical, "KS statistic {ks} >= {critical}");
        for d in &devices {
            assert!(d.slant_m >= c.satellite.orbit_height_m && d.slant_m <= c.max_slant_m());
        }
    }

    proptest! {
        #[test]
        fn slant_is_monotone_and_bounded(a in 0.0..822e3f64, b in 0.0..822e3f64) {
            let c = ScenarioConfig::default();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (sl, sh) = (slant_distance(lo, &c).unwrap(), slant_distance(hi, &c).unwrap());
            prop_assert!(sl <= sh);
            if hi - lo > 1e-3 { prop_assert!(sl < sh); }
            prop_assert!(sl >= 200e3 && sh <= c.max_slant_m());
        }
    }
}
