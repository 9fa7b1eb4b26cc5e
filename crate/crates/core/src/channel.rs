//! Soil electromagnetics and the total underground-to-gateway path loss.
//!
//! The path loss is a linear power ratio `g(d) >= 1`: the free-space term
//! `(4 pi f / c)^2 d^eta` times the soil term `(2 beta d_p / exp(-alpha d_p))^2`.
//! Refraction loss at the soil/air interface is taken as unity.

use std::f64::consts::PI;

use crate::scenario::ScenarioConfig;
use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permeability, H/m.
pub const MU_0: f64 = 4.0 * PI * 1e-7;
/// Vacuum permittivity, F/m.
pub const EPS_0: f64 = 8.854_187_812_8e-12;

/// Attenuation and phase constants of the soil plus the refracted path length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoilPropagation {
    pub alpha_np_per_m: f64,
    pub beta_rad_per_m: f64,
    pub underground_path_m: f64,
}

impl SoilPropagation {
    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        let soil = &config.soil;
        let (alpha_np_per_m, beta_rad_per_m) = attenuation_constants(
            soil.eps_real,
            soil.eps_imag,
            soil.rel_permeability,
            config.radio.carrier_hz,
        )?;
        Ok(Self {
            alpha_np_per_m,
            beta_rad_per_m,
            underground_path_m: underground_path_length(soil.burial_depth_m, soil.eps_real)?,
        })
    }

    /// Linear soil loss factor; independent of the air distance.
    pub fn loss_factor(&self) -> f64 {
        let d_p = self.underground_path_m;
        let ratio = 2.0 * self.beta_rad_per_m * d_p / (-self.alpha_np_per_m * d_p).exp();
        ratio * ratio
    }
}

/// Returns `(alpha, beta)` in Np/m and rad/m.
pub fn attenuation_constants(
    eps_real: f64,
    eps_imag: f64,
    rel_permeability: f64,
    carrier_hz: f64,
) -> Result<(f64, f64)> {
    if !(eps_real >= 1.0) || !(eps_imag >= 0.0) || !eps_real.is_finite() || !eps_imag.is_finite() {
        return Err(Error::Domain(format!(
            "non-physical dielectric constant eps' = {eps_real}, eps'' = {eps_imag}"
        )));
    }
    if !(carrier_hz > 0.0) || !(rel_permeability > 0.0) {
        return Err(Error::Domain(format!(
            "carrier {carrier_hz} Hz and permeability {rel_permeability} must be positive"
        )));
    }
    let omega = 2.0 * PI * carrier_hz;
    let half = rel_permeability * MU_0 * eps_real * EPS_0 / 2.0;
    let tan2 = (eps_imag / eps_real).powi(2);
    let root = (1.0 + tan2).sqrt();
    // sqrt(1 + t^2) - 1 rewritten to avoid cancellation for low-loss soil
    let minus = tan2 / (root + 1.0);
    let plus = root + 1.0;
    Ok((omega * (half * minus).sqrt(), omega * (half * plus).sqrt()))
}

/// Length of the refracted underground path, `d_u / cos(asin(1 / sqrt(eps')))`.
pub fn underground_path_length(burial_depth_m: f64, eps_real: f64) -> Result<f64> {
    if !(eps_real > 1.0) || !eps_real.is_finite() {
        return Err(Error::Domain(format!(
            "refraction geometry needs eps' > 1, got {eps_real}"
        )));
    }
    if !(burial_depth_m > 0.0) {
        return Err(Error::Domain(format!(
            "burial depth must be positive, got {burial_depth_m}"
        )));
    }
    // cos(asin(s)) = sqrt(1 - s^2) with s^2 = 1/eps'
    Ok(burial_depth_m / (1.0 - 1.0 / eps_real).sqrt())
}

/// `(4 pi f / c)^2 d^eta`.
pub fn free_space_factor(slant_m: f64, carrier_hz: f64, pathloss_exp: f64) -> f64 {
    let k = 4.0 * PI * carrier_hz / SPEED_OF_LIGHT;
    k * k * slant_m.powf(pathloss_exp)
}

/// Precomputed path-loss model for one configuration.
#[derive(Clone, Copy, Debug)]
pub struct PathLoss {
    pub soil: SoilPropagation,
    carrier_hz: f64,
    pathloss_exp: f64,
    soil_factor: f64,
}

impl PathLoss {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let soil = SoilPropagation::from_config(config)?;
        Ok(Self {
            soil,
            carrier_hz: config.radio.carrier_hz,
            pathloss_exp: config.radio.pathloss_exp,
            soil_factor: soil.loss_factor(),
        })
    }

    pub fn at(&self, slant_m: f64) -> f64 {
        free_space_factor(slant_m, self.carrier_hz, self.pathloss_exp) * self.soil_factor
    }

    pub fn soil_factor(&self) -> f64 {
        self.soil_factor
    }

    /// Slant distance at which the loss equals `loss` (inverse of [`Self::at`]).
    pub fn distance_for(&self, loss: f64) -> f64 {
        let k = 4.0 * PI * self.carrier_hz / SPEED_OF_LIGHT;
        (loss / (k * k * self.soil_factor)).powf(1.0 / self.pathloss_exp)
    }
}

/// Total path loss `g(d)` as a linear ratio.
pub fn total_path_loss(slant_m: f64, config: &ScenarioConfig) -> Result<f64> {
    if !(slant_m > 0.0) || !slant_m.is_finite() {
        return Err(Error::Domain(format!("slant distance must be > 0, got {slant_m}")));
    }
    Ok(PathLoss::new(config)?.at(slant_m))
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
