use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of usable spreading factors (SF7..SF12).
pub const NUM_SF: usize = 6;

/// A LoRa spreading factor, stored as its index `0..6` (SF7 = 0, SF12 = 5).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SpreadingFactor(u8);

impl SpreadingFactor {
    pub const SF7: Self = Self(0);
    pub const SF8: Self = Self(1);
    pub const SF9: Self = Self(2);
    pub const SF10: Self = Self(3);
    pub const SF11: Self = Self(4);
    pub const SF12: Self = Self(5);

    pub const ALL: [Self; NUM_SF] = [
        Self::SF7,
        Self::SF8,
        Self::SF9,
        Self::SF10,
        Self::SF11,
        Self::SF12,
    ];

    pub fn from_index(index: usize) -> Result<Self> {
        if index < NUM_SF {
            Ok(Self(index as u8))
        } else {
            Err(Error::Domain(format!("SF index {index} outside 0..{NUM_SF}")))
        }
    }

    /// From the nominal value, e.g. `9` for SF9.
    pub fn from_value(sf: u8) -> Result<Self> {
        if (7..=12).contains(&sf) {
            Ok(Self(sf - 7))
        } else {
            Err(Error::Domain(format!("spreading factor {sf} outside SF7..SF12")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn value(self) -> u8 {
        self.0 + 7
    }
}

impl TryFrom<u8> for SpreadingFactor {
    type Error = Error;

    fn try_from(sf: u8) -> Result<Self> {
        Self::from_value(sf)
    }
}

impl From<SpreadingFactor> for u8 {
    fn from(sf: SpreadingFactor) -> u8 {
        sf.value()
    }
}

impl fmt::Display for SpreadingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SF{}", self.value())
    }
}
