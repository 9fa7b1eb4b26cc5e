//! Benchmark SF allocation schemes: a single common SF, equal-width annuli
//! (EIB), equal-area annuli (EAB), and path-loss based annuli (PLB). All of
//! them map SF7 to the innermost region and SF12 to the outermost.

use std::fmt;
use std::str::FromStr;

use crate::link::{Assignment, LinkModel};
use crate::scenario::{EndDevice, ScenarioConfig};
use crate::sf::{SpreadingFactor, NUM_SF};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    SameSf(SpreadingFactor),
    Eib,
    Eab,
    Plb,
}

impl Scheme {
    pub const ALL_DEFAULT: [Scheme; 4] = [
        Scheme::SameSf(SpreadingFactor::SF9),
        Scheme::Eib,
        Scheme::Eab,
        Scheme::Plb,
    ];

    pub fn allocate(self, devices: &[EndDevice], config: &ScenarioConfig) -> Result<Assignment> {
        match self {
            Scheme::SameSf(sf) => Ok(allocate_same_sf(devices, sf)),
            Scheme::Eib => Ok(allocate_eib(devices, config)),
            Scheme::Eab => Ok(allocate_eab(devices, config)),
            Scheme::Plb => allocate_plb(devices, config),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::SameSf(sf) if *sf == SpreadingFactor::SF9 => write!(f, "same-sf"),
            Scheme::SameSf(sf) => write!(f, "same-sf{}", sf.value()),
            Scheme::Eib => write!(f, "eib"),
            Scheme::Eab => write!(f, "eab"),
            Scheme::Plb => write!(f, "plb"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    /// Accepts `same-sf` (SF9), `same-sf7` .. `same-sf12`, `eib`, `eab`, `plb`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "same-sf" => Ok(Scheme::SameSf(SpreadingFactor::SF9)),
            "eib" => Ok(Scheme::Eib),
            "eab" => Ok(Scheme::Eab),
            "plb" => Ok(Scheme::Plb),
            other => other
                .strip_prefix("same-sf")
                .and_then(|v| v.parse::<u8>().ok())
                .and_then(|v| SpreadingFactor::from_value(v).ok())
                .map(Scheme::SameSf)
                .ok_or_else(|| {
                    Error::Domain(format!(
                        "unknown scheme '{s}' (expected same-sf, same-sf7..same-sf12, eib, eab or plb)"
                    ))
                }),
        }
    }
}

pub fn allocate_same_sf(devices: &[EndDevice], sf: SpreadingFactor) -> Assignment {
    Assignment::uniform(devices.len(), sf)
}

/// Outer radius of each equal-width annulus, `k R / 6`.
pub fn eib_boundaries(config: &ScenarioConfig) -> [f64; NUM_SF] {
    let width = config.satellite.coverage_radius_m / NUM_SF as f64;
    std::array::from_fn(|k| width * (k + 1) as f64)
}

/// Outer radius of each equal-area annulus, `R sqrt(k / 6)`.
pub fn eab_boundaries(config: &ScenarioConfig) -> [f64; NUM_SF] {
    let r = config.satellite.coverage_radius_m;
    std::array::from_fn(|k| r * ((k + 1) as f64 / NUM_SF as f64).sqrt())
}

fn annulus_sf(index: f64) -> SpreadingFactor {
    // devices exactly on the rim belong to the last annulus
    SpreadingFactor::ALL[(index.max(0.0) as usize).min(NUM_SF - 1)]
}

pub fn allocate_eib(devices: &[EndDevice], config: &ScenarioConfig) -> Assignment {
    let width = config.satellite.coverage_radius_m / NUM_SF as f64;
    Assignment::new(
        devices
            .iter()
            .map(|d| annulus_sf((d.radial_m / width).floor()))
            .collect(),
    )
}

pub fn allocate_eab(devices: &[EndDevice], config: &ScenarioConfig) -> Assignment {
    let r = config.satellite.coverage_radius_m;
    Assignment::new(
        devices
            .iter()
            .map(|d| annulus_sf((NUM_SF as f64 * (d.radial_m / r).powi(2)).floor()))
            .collect(),
    )
}

/// Slant distance at which the fade-free SNR equals each SF's threshold.
/// SF `k` covers every device no farther than its boundary.
pub fn plb_boundaries(config: &ScenarioConfig) -> Result<[f64; NUM_SF]> {
    let link = LinkModel::new(config)?;
    Ok(SpreadingFactor::ALL.map(|sf| {
        let loss = link.eirp_w() / (link.snr_threshold(sf) * link.noise_w());
        link.path_loss.distance_for(loss)
    }))
}

/// Smallest SF whose fade-free SNR meets its threshold; SF12 when none does.
pub fn allocate_plb(devices: &[EndDevice], config: &ScenarioConfig) -> Result<Assignment> {
    let link = LinkModel::new(config)?;
    Ok(Assignment::new(
        devices
            .iter()
            .map(|d| {
                let snr = link.mean_snr(d.slant_m);
                SpreadingFactor::ALL
                    .into_iter()
                    .find(|&sf| snr >= link.snr_threshold(sf))
                    .unwrap_or(SpreadingFactor::SF12)
            })
            .collect(),
    ))
}
