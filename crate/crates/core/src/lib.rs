//! Spreading-factor allocation toolkit for buried LoRaWAN end devices served
//! by a satellite-mounted gateway.
//!
//! The crate is organised bottom-up:
//!
//! * [`scenario`] holds the physical configuration and samples deployments.
//! * [`channel`] computes soil constants and the total path loss.
//! * [`link`] evaluates per-device success probabilities and energy per packet.
//! * [`baselines`] implements the four geometric/path-loss allocation schemes.
//! * [`marl`] trains per-device dueling double DQN and advantage actor-critic agents.
//! * [`montecarlo`] simulates the uplink packet by packet to validate [`link`].
//!
//! Data-parallel loops go through [`exec::Execution`], which uses rayon when
//! the `parallel` feature is enabled and falls back to plain iterators otherwise.

pub mod baselines;
pub mod channel;
mod error;
pub mod exec;
pub mod link;
pub mod marl;
pub mod montecarlo;
pub mod quad;
pub mod scenario;
pub mod seeds;
pub mod settings;
pub mod sf;
pub mod special;

pub use error::{Error, Result};
pub use exec::Execution;
pub use link::{Assignment, LinkMetrics, NetworkEvaluation};
pub use scenario::{EndDevice, ScenarioConfig};
pub use settings::Settings;
pub use sf::SpreadingFactor;
