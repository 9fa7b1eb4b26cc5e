use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::exec::Execution;
use crate::scenario::{EndDevice, ScenarioConfig};
use crate::seeds::{stream, Domain};
use crate::{Error, Result};

use super::nn::{argmax, softmax, Adam, DenseNet};
use super::{
    run_episodes, AgentState, Algorithm, Environment, Learner, MarlHyper, TrainingReport,
    Transition, NUM_ACTIONS, STATE_DIM,
};

/// Floor applied to the taken action's probability before the log.
pub const MIN_PROBABILITY: f64 = 1e-12;

/// TD error `z = r + γ·C(s') - C(s)` and loss `z²`. The bootstrap term is
/// constant, so only `C(s)` contributes to the gradient accumulated in `grad`.
pub fn critic_loss_and_grad(critic: &DenseNet, t: &Transition, gamma: f64, grad: &mut [f64]) -> (f64, f64) {
    let x = t.state.as_slice();
    let act = critic.forward(x);
    let z = t.reward + gamma * critic.output(t.next_state.as_slice())[0] - act.output[0];
    critic.backward(x, &act, &[-2.0 * z], grad);
    (z * z, z)
}

/// `-z·log π(a|s)` with `z` held constant.
pub fn actor_loss_and_grad(
    actor: &DenseNet,
    state: &AgentState,
    action: usize,
    z: f64,
    grad: &mut [f64],
) -> f64 {
    let x = state.as_slice();
    let act = actor.forward(x);
    let pi = softmax(&act.output);
    let log_p = log_softmax(&act.output, action);
    if log_p < MIN_PROBABILITY.ln() {
        return -z * MIN_PROBABILITY.ln();
    }
    let d_logits: Vec<f64> = pi
        .iter()
        .enumerate()
        .map(|(i, p)| -z * (if i == action { 1.0 } else { 0.0 } - p))
        .collect();
    actor.backward(x, &act, &d_logits, grad);
    -z * log_p
}

fn log_softmax(logits: &[f64], i: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits[i] - lse
}

/// Critic step then actor step, both driven by the same advantage computed
/// before either update. Returns `(actor_loss, critic_loss)`.
pub fn actor_critic_update(
    actor: &mut DenseNet,
    actor_opt: &mut Adam,
    critic: &mut DenseNet,
    critic_opt: &mut Adam,
    t: &Transition,
    gamma: f64,
) -> Result<(f64, f64)> {
    let mut critic_grad = vec![0.0; critic.num_params()];
    let (critic_loss, z) = critic_loss_and_grad(critic, t, gamma, &mut critic_grad);
    let mut actor_grad = vec![0.0; actor.num_params()];
    let actor_loss = actor_loss_and_grad(actor, &t.state, t.action, z, &mut actor_grad);
    if !critic_loss.is_finite() || !actor_loss.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite A2C loss (actor {actor_loss}, critic {critic_loss})"
        )));
    }
    critic_opt.step(critic.params_mut(), &critic_grad);
    actor_opt.step(actor.params_mut(), &actor_grad);
    if critic.params().iter().chain(actor.params()).any(|p| !p.is_finite()) {
        return Err(Error::Numeric("non-finite actor/critic parameters".into()));
    }
    Ok((actor_loss, critic_loss))
}

pub struct A2cAgent {
    pub actor: DenseNet,
    pub critic: DenseNet,
    actor_opt: Adam,
    critic_opt: Adam,
    rng: ChaCha8Rng,
    state: AgentState,
    gamma: f64,
}

impl A2cAgent {
    pub fn new(hyper: &MarlHyper, init_rng: &mut ChaCha8Rng, rng: ChaCha8Rng) -> Self {
        let actor = DenseNet::xavier(STATE_DIM, hyper.hidden_units, NUM_ACTIONS, init_rng);
        let critic = DenseNet::xavier(STATE_DIM, hyper.hidden_units, 1, init_rng);
        Self {
            actor_opt: Adam::new(actor.num_params(), hyper.lr),
            critic_opt: Adam::new(critic.num_params(), hyper.lr),
            actor,
            critic,
            rng,
            state: AgentState([0.0; STATE_DIM]),
            gamma: hyper.gamma,
        }
    }

    pub fn policy(&self) -> Vec<f64> {
        softmax(&self.actor.output(self.state.as_slice()))
    }
}

impl Learner for A2cAgent {
    fn state(&self) -> &AgentState {
        &self.state
    }

    fn set_state(&mut self, state: AgentState) {
        self.state = state;
    }

    fn explore(&mut self, _epsilon: f64) -> usize {
        let pi = self.policy();
        match WeightedIndex::new(&pi) {
            Ok(d) => d.sample(&mut self.rng),
            Err(_) => argmax(&pi),
        }
    }

    fn exploit(&self) -> usize {
        argmax(&self.policy())
    }

    fn learn(&mut self, transition: Transition, _episode: usize) -> Result<()> {
        actor_critic_update(
            &mut self.actor,
            &mut self.actor_opt,
            &mut self.critic,
            &mut self.critic_opt,
            &transition,
            self.gamma,
        )
        .map(|_| ())
    }
}

pub fn train_maa2c(
    devices: &[EndDevice],
    config: &ScenarioConfig,
    hyper: &MarlHyper,
    seed: u64,
) -> Result<TrainingReport> {
    train_maa2c_with(devices, config, hyper, seed, Execution::default())
}

pub fn train_maa2c_with(
    devices: &[EndDevice],
    config: &ScenarioConfig,
    hyper: &MarlHyper,
    seed: u64,
    exec: Execution,
) -> Result<TrainingReport> {
    hyper.validate()?;
    let env = Environment::new(devices, config, exec)?;
    let (mut agents, initial): (Vec<_>, Vec<_>) = exec
        .map_range(devices.len(), |i| {
            let mut init = stream(seed, Domain::Init, i as u64);
            let agent = A2cAgent::new(hyper, &mut init, stream(seed, Domain::Exploration, i as u64));
            (agent, init.random_range(0..NUM_ACTIONS))
        })
        .into_iter()
        .unzip();
    run_episodes(Algorithm::Maa2c, &mut agents, &env, hyper, exec, &initial)
}
