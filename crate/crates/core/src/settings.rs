//! Full run configuration as read from and written to TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::marl::MarlHyper;
use crate::scenario::{NetworkConfig, RadioConfig, SatelliteConfig, ScenarioConfig, SoilConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub network: NetworkConfig,
    pub soil: SoilConfig,
    pub satellite: SatelliteConfig,
    pub radio: RadioConfig,
    pub marl: MarlHyper,
}

impl Settings {
    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            network: self.network.clone(),
            soil: self.soil.clone(),
            satellite: self.satellite.clone(),
            radio: self.radio.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario().validate()?;
        self.marl.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Settings = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_defaults() {
        assert_eq!(Settings::from_toml("").unwrap(), Settings::default());
    }

    #[test]
    fn round_trip_is_exact() {
        let mut s = Settings::default();
        s.network.n_devices = 1234;
        s.soil.eps_real = 5.123_456_789_012_345;
        s.radio.noise_figure_db = 0.1 + 0.2;
        s.marl.t_max = 77;
        let back = Settings::from_toml(&s.to_toml().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(Settings::from_toml("[network]\nfoo = 1\n").is_err());
        assert!(Settings::from_toml("bogus = 2\n").is_err());
        assert!(Settings::from_toml("[network]\nn_devices = 0\n").is_err());
        assert!(Settings::from_toml("[marl]\nt_max = 0\n").is_err());
        let s = Settings::from_toml("[marl]\neps_anneal = \"per-episode\"\n").unwrap();
        assert_eq!(s.marl.eps_anneal, crate::marl::EpsilonAnneal::PerEpisode);
    }
}
