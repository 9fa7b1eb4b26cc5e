//! Multi-agent reinforcement learning for SF allocation.
//!
//! Every end device is an independent agent with its own networks, optimizer
//! state and random stream. One episode is one environment step: all agents
//! pick an SF, the analytical link model scores the joint assignment, and
//! each agent receives reward `1 / EPP` for its own device.

mod a2c;
mod d3qn;
pub mod nn;
mod replay;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::link::{Assignment, LinkMetrics, NetworkEvaluation, NetworkModel, EPP_SENTINEL_J};
use crate::scenario::{EndDevice, ScenarioConfig};
use crate::sf::{SpreadingFactor, NUM_SF};
use crate::{Error, Result};

pub use a2c::{
    actor_critic_update, actor_loss_and_grad, critic_loss_and_grad, train_maa2c, train_maa2c_with,
    A2cAgent,
};
pub use d3qn::{
    double_q_targets, dueling_q_forward, d3qn_loss_and_grad, d3qn_update, select_action_epsilon_greedy,
    train_mad3qn, train_mad3qn_with, D3qnAgent, DuelingQNet,
};
pub use replay::ReplayMemory;
pub use report::{convergence_episode, TrainingReport};

/// Size of the per-agent observation.
pub const STATE_DIM: usize = 5;
/// One action per spreading factor.
pub const NUM_ACTIONS: usize = NUM_SF;
/// EPP that maps to a normalised state value of 1.
pub const EPP_STATE_SCALE_J: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Mad3qn,
    Maa2c,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Mad3qn => "mad3qn",
            Algorithm::Maa2c => "maa2c",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mad3qn" => Ok(Algorithm::Mad3qn),
            "maa2c" => Ok(Algorithm::Maa2c),
            _ => Err(Error::Domain(format!("unknown algorithm '{s}' (expected mad3qn or maa2c)"))),
        }
    }
}

/// How the shared exploration threshold grows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonAnneal {
    /// Incremented once for every agent update, i.e. `N` times per episode.
    PerAgent,
    /// Incremented once per episode.
    PerEpisode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarlHyper {
    pub t_max: usize,
    pub gamma: f64,
    pub lr: f64,
    pub memory_capacity: usize,
    pub batch_size: usize,
    /// Target network refresh period, in episodes.
    pub target_clone_period: usize,
    pub eps_increment: f64,
    pub eps_cap: f64,
    pub eps_anneal: EpsilonAnneal,
    pub hidden_units: usize,
}

impl Default for MarlHyper {
    fn default() -> Self {
        Self {
            t_max: 6000,
            gamma: 0.7,
            lr: 0.001,
            memory_capacity: 16,
            batch_size: 4,
            target_clone_period: 100,
            eps_increment: 0.0002,
            eps_cap: 0.9999,
            eps_anneal: EpsilonAnneal::PerEpisode,
            hidden_units: 16,
        }
    }
}

impl MarlHyper {
    pub fn with_t_max(mut self, t_max: usize) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("marl.{m}")));
        if self.t_max == 0 {
            return bad("t_max must be >= 1");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad("lr must be > 0");
        }
        if self.batch_size == 0 || self.batch_size > self.memory_capacity {
            return bad("batch_size must lie in 1..=memory_capacity");
        }
        if self.target_clone_period == 0 {
            return bad("target_clone_period must be >= 1");
        }
        if !(self.eps_increment >= 0.0) || !(0.0..=1.0).contains(&self.eps_cap) {
            return bad("eps_increment must be >= 0 and eps_cap in [0, 1]");
        }
        if self.hidden_units == 0 {
            return bad("hidden_units must be >= 1");
        }
        Ok(())
    }

    /// Exploration threshold in force while actions are chosen in episode
    /// `episode` (0-based) of a run with `agents` agents.
    pub fn epsilon(&self, episode: usize, agents: usize) -> f64 {
        let updates = match self.eps_anneal {
            EpsilonAnneal::PerAgent => episode as f64 * agents as f64,
            EpsilonAnneal::PerEpisode => episode as f64,
        };
        (updates * self.eps_increment).min(self.eps_cap)
    }
}

/// Observation `{a, P_SNR, P_SIR, P_S, EPP}` with the SF scaled to `(0, 1]`
/// and the EPP divided by 10 J and clipped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentState(pub [f64; STATE_DIM]);

impl AgentState {
    pub fn observe(sf: SpreadingFactor, m: &LinkMetrics) -> Self {
        let epp = if m.epp_j.is_finite() { m.epp_j } else { EPP_SENTINEL_J };
        Self([
            (sf.index() + 1) as f64 / NUM_SF as f64,
            m.p_snr,
            m.p_sir,
            m.p_s,
            (epp / EPP_STATE_SCALE_J).clamp(0.0, 1.0),
        ])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `1 / EPP`, with the EPP capped at [`EPP_SENTINEL_J`] so the reward stays positive.
pub fn reward(m: &LinkMetrics) -> f64 {
    1.0 / m.epp_j.min(EPP_SENTINEL_J)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub state: AgentState,
    pub action: usize,
    pub reward: f64,
    pub next_state: AgentState,
}

/// The shared environment: a fixed deployment scored by the link model.
pub struct Environment {
    model: NetworkModel,
}

impl Environment {
    pub fn new(devices: &[EndDevice], config: &ScenarioConfig, exec: Execution) -> Result<Self> {
        Ok(Self {
            model: NetworkModel::new(devices, config, exec)?,
        })
    }

    pub fn agents(&self) -> usize {
        self.model.len()
    }

    pub fn step(&self, actions: &[usize]) -> Result<(Assignment, NetworkEvaluation)> {
        let assignment = Assignment::new(
            actions
                .iter()
                .map(|&a| SpreadingFactor::from_index(a))
                .collect::<Result<_>>()?,
        );
        let eval = self.model.evaluate(&assignment)?;
        Ok((assignment, eval))
    }
}

/// What the shared training loop needs from an agent.
pub trait Learner: Send {
    fn state(&self) -> &AgentState;
    fn set_state(&mut self, state: AgentState);
    fn explore(&mut self, epsilon: f64) -> usize;
    fn exploit(&self) -> usize;
    fn learn(&mut self, transition: Transition, episode: usize) -> Result<()>;
}

fn check_finite(eval: &NetworkEvaluation, episode: usize) -> Result<()> {
    if eval.avg_epp_j.is_nan() {
        return Err(Error::Numeric(format!("episode {episode}: average EPP is NaN")));
    }
    Ok(())
}

/// Runs `hyper.t_max` episodes. After the agents learn from each episode,
/// their greedy actions are scored as well; that score is the reported
/// trace, while the explored actions' score is kept as `behavior_epp`.
pub(crate) fn run_episodes<L: Learner>(
    algorithm: Algorithm,
    agents: &mut [L],
    env: &Environment,
    hyper: &MarlHyper,
    exec: Execution,
    initial_actions: &[usize],
) -> Result<TrainingReport> {
    let n = agents.len();
    let (_, eval) = env.step(initial_actions)?;
    exec.map_mut(agents, |i, agent| {
        let sf = SpreadingFactor::ALL[initial_actions[i]];
        agent.set_state(AgentState::observe(sf, &eval.metrics[i]));
    });

    let mut avg_epp = Vec::with_capacity(hyper.t_max);
    let mut behavior_epp = Vec::with_capacity(hyper.t_max);
    let mut sf_histograms = Vec::with_capacity(hyper.t_max);
    let mut greedy_eval = None;
    for episode in 0..hyper.t_max {
        let epsilon = hyper.epsilon(episode, n);
        let actions = exec.map_mut(agents, |_, agent| agent.explore(epsilon));
        let (_, eval) = env.step(&actions)?;
        check_finite(&eval, episode)?;
        behavior_epp.push(eval.avg_epp_j);
        let outcomes = exec.map_mut(agents, |i, agent| {
            let action = actions[i];
            let next_state = AgentState::observe(SpreadingFactor::ALL[action], &eval.metrics[i]);
            let transition = Transition {
                state: *agent.state(),
                action,
                reward: reward(&eval.metrics[i]),
                next_state,
            };
            agent
                .learn(transition, episode)
                .map_err(|e| Error::Numeric(format!("agent {i}, episode {episode}: {e}")))?;
            agent.set_state(next_state);
            Ok(())
        });
        outcomes.into_iter().collect::<Result<Vec<()>>>()?;

        let greedy = exec.map_mut(agents, |_, agent| agent.exploit());
        let (assignment, eval) = env.step(&greedy)?;
        check_finite(&eval, episode)?;
        avg_epp.push(eval.avg_epp_j);
        sf_histograms.push(assignment.counts());
        greedy_eval = Some((assignment, eval));
    }

    let (final_assignment, final_evaluation) = match greedy_eval {
        Some(last) => last,
        None => env.step(&exec.map_mut(agents, |_, agent| agent.exploit()))?,
    };
    Ok(TrainingReport::new(
        algorithm,
        avg_epp,
        behavior_epp,
        sf_histograms,
        final_assignment,
        final_evaluation,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::evaluate_network;
    use crate::scenario::sample_deployment;

    #[test]
    fn epsilon_schedules() {
        let h = MarlHyper {
            eps_anneal: EpsilonAnneal::PerAgent,
            ..MarlHyper::default()
        };
        assert_eq!(h.epsilon(0, 100), 0.0);
        assert!((h.epsilon(1, 100) - 0.02).abs() < 1e-15);
        assert_eq!(h.epsilon(10_000, 100), 0.9999);
        let h = MarlHyper::default();
        assert_eq!(h.eps_anneal, EpsilonAnneal::PerEpisode);
        assert!((h.epsilon(1, 100) - 0.0002).abs() < 1e-15);
        assert!((h.epsilon(2500, 100) - 0.5).abs() < 1e-12);
        assert_eq!(h.epsilon(100_000, 1), 0.9999);
    }

    #[test]
    fn hyper_validation() {
        assert!(MarlHyper::default().validate().is_ok());
        assert!(MarlHyper::default().with_t_max(0).validate().is_err());
        let h = MarlHyper { gamma: 1.0, ..MarlHyper::default() };
        assert!(h.validate().is_err());
        let h = MarlHyper { batch_size: 17, ..MarlHyper::default() };
        assert!(h.validate().is_err());
    }

    #[test]
    fn state_is_normalised() {
        let m = LinkMetrics { p_snr: 0.5, p_sir: 0.4, p_s: 0.2, epp_j: 3.0 };
        let s = AgentState::observe(SpreadingFactor::SF9, &m);
        assert_eq!(s.0, [0.5, 0.5, 0.4, 0.2, 0.3]);
        let dead = LinkMetrics { p_snr: 0.0, p_sir: 1.0, p_s: 0.0, epp_j: f64::INFINITY };
        let s = AgentState::observe(SpreadingFactor::SF12, &dead);
        assert_eq!(s.0[0], 1.0);
        assert_eq!(s.0[4], 1.0);
        assert!(reward(&dead) > 0.0 && reward(&dead).is_finite());
        assert_eq!(reward(&m), 1.0 / 3.0);
    }

    #[test]
    fn environment_agrees_with_link_evaluation() {
        let c = ScenarioConfig::default().with_devices(300);
        let d = sample_deployment(&c, 4).unwrap();
        let env = Environment::new(&d, &c, Execution::default()).unwrap();
        let actions: Vec<usize> = (0..300).map(|i| (i * 5 + 1) % 6).collect();
        let (a, eval) = env.step(&actions).unwrap();
        let direct = evaluate_network(&d, &a, &c).unwrap();
        assert_eq!(eval.avg_epp_j, direct.avg_epp_j);
        assert_eq!(eval, direct);
        assert!(env.step(&[7]).is_err());
    }
}
