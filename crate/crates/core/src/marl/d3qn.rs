use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::exec::Execution;
use crate::scenario::{EndDevice, ScenarioConfig};
use crate::seeds::{stream, Domain};
use crate::{Error, Result};

use super::nn::{argmax, Adam, DenseNet};
use super::{
    run_episodes, AgentState, Algorithm, Environment, Learner, MarlHyper, ReplayMemory,
    TrainingReport, Transition, NUM_ACTIONS, STATE_DIM,
};

/// Dueling Q-network. The single hidden layer is the shared encoder; output
/// 0 is the state value and outputs `1..=6` are the action advantages.
#[derive(Clone, Debug, PartialEq)]
pub struct DuelingQNet {
    pub net: DenseNet,
}

impl DuelingQNet {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            net: DenseNet::zeros(STATE_DIM, hidden, 1 + NUM_ACTIONS),
        }
    }

    pub fn xavier<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        Self {
            net: DenseNet::xavier(STATE_DIM, hidden, 1 + NUM_ACTIONS, rng),
        }
    }

    pub fn q_values(&self, state: &[f64]) -> [f64; NUM_ACTIONS] {
        aggregate(&self.net.output(state))
    }
}

/// `Q(s,a) = V(s) + A(s,a) - mean_a A(s,a)`.
fn aggregate(heads: &[f64]) -> [f64; NUM_ACTIONS] {
    let v = heads[0];
    let adv = &heads[1..=NUM_ACTIONS];
    let mean = adv.iter().sum::<f64>() / NUM_ACTIONS as f64;
    std::array::from_fn(|a| v + adv[a] - mean)
}

pub fn dueling_q_forward(net: &DuelingQNet, state: &AgentState) -> [f64; NUM_ACTIONS] {
    net.q_values(state.as_slice())
}

/// Random action when `rand() > eps`, otherwise the greedy one. The
/// threshold grows during training, so exploration fades as it rises.
pub fn select_action_epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], eps: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() > eps {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// `y = r + γ·Q_target(s', argmax_a Q_policy(s', a))` for each transition.
pub fn double_q_targets(
    policy: &DuelingQNet,
    target: &DuelingQNet,
    batch: &[Transition],
    gamma: f64,
) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            let next = t.next_state.as_slice();
            let a_star = argmax(&policy.q_values(next));
            t.reward + gamma * target.q_values(next)[a_star]
        })
        .collect()
}

/// Mean squared TD error over the batch. Gradients w.r.t. the policy
/// parameters are accumulated into `grad`; the targets are held constant.
pub fn d3qn_loss_and_grad(
    policy: &DuelingQNet,
    target: &DuelingQNet,
    batch: &[Transition],
    gamma: f64,
    grad: &mut [f64],
) -> f64 {
    let ys = double_q_targets(policy, target, batch, gamma);
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut d_heads = [0.0; 1 + NUM_ACTIONS];
    for (t, y) in batch.iter().zip(ys) {
        let x = t.state.as_slice();
        let act = policy.net.forward(x);
        let q = aggregate(&act.output)[t.action];
        let err = q - y;
        loss += err * err * scale;
        let dq = 2.0 * err * scale;
        d_heads[0] = dq;
        for (j, d) in d_heads[1..].iter_mut().enumerate() {
            let own = if j == t.action { 1.0 } else { 0.0 };
            *d = dq * (own - 1.0 / NUM_ACTIONS as f64);
        }
        policy.net.backward(x, &act, &d_heads, grad);
    }
    loss
}

/// One Adam step on the D3QN loss. Returns the pre-update loss.
pub fn d3qn_update(
    policy: &mut DuelingQNet,
    optimizer: &mut Adam,
    target: &DuelingQNet,
    batch: &[Transition],
    gamma: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Domain("d3qn update needs at least one transition".into()));
    }
    let mut grad = vec![0.0; policy.net.num_params()];
    let loss = d3qn_loss_and_grad(policy, target, batch, gamma, &mut grad);
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite D3QN loss {loss}")));
    }
    optimizer.step(policy.net.params_mut(), &grad);
    if policy.net.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("non-finite Q-network parameters".into()));
    }
    Ok(loss)
}

pub struct D3qnAgent {
    pub policy: DuelingQNet,
    pub target: DuelingQNet,
    optimizer: Adam,
    memory: ReplayMemory,
    rng: ChaCha8Rng,
    state: AgentState,
    batch_size: usize,
    gamma: f64,
    clone_period: usize,
    updates: usize,
}

impl D3qnAgent {
    pub fn new(hyper: &MarlHyper, init_rng: &mut ChaCha8Rng, rng: ChaCha8Rng) -> Self {
        let policy = DuelingQNet::xavier(hyper.hidden_units, init_rng);
        Self {
            target: policy.clone(),
            optimizer: Adam::new(policy.net.num_params(), hyper.lr),
            policy,
            memory: ReplayMemory::new(hyper.memory_capacity),
            rng,
            state: AgentState([0.0; STATE_DIM]),
            batch_size: hyper.batch_size,
            gamma: hyper.gamma,
            clone_period: hyper.target_clone_period,
            updates: 0,
        }
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    /// Number of gradient steps taken so far.
    pub fn updates(&self) -> usize {
        self.updates
    }
}

impl Learner for D3qnAgent {
    fn state(&self) -> &AgentState {
        &self.state
    }

    fn set_state(&mut self, state: AgentState) {
        self.state = state;
    }

    fn explore(&mut self, epsilon: f64) -> usize {
        let q = self.policy.q_values(self.state.as_slice());
        select_action_epsilon_greedy(&q, epsilon, &mut self.rng)
    }

    fn exploit(&self) -> usize {
        argmax(&self.policy.q_values(self.state.as_slice()))
    }

    fn learn(&mut self, transition: Transition, episode: usize) -> Result<()> {
        self.memory.push(transition);
        if self.memory.is_full() {
            let batch = self.memory.sample(self.batch_size, &mut self.rng);
            d3qn_update(&mut self.policy, &mut self.optimizer, &self.target, &batch, self.gamma)?;
            self.updates += 1;
        }
        if (episode + 1).is_multiple_of(self.clone_period) {
            self.target = self.policy.clone();
        }
        Ok(())
    }
}

pub fn train_mad3qn(
    devices: &[EndDevice],
    config: &ScenarioConfig,
    hyper: &MarlHyper,
    seed: u64,
) -> Result<TrainingReport> {
    train_mad3qn_with(devices, config, hyper, seed, Execution::default())
}

pub fn train_mad3qn_with(
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
            let agent = D3qnAgent::new(hyper, &mut init, stream(seed, Domain::Exploration, i as u64));
            (agent, init.random_range(0..NUM_ACTIONS))
        })
        .into_iter()
        .unzip();
    run_episodes(Algorithm::Mad3qn, &mut agents, &env, hyper, exec, &initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::{stream, Domain};

    fn state(v: f64) -> AgentState {
        AgentState([v, 0.5, 0.25, 0.125, 1.0 - v])
    }

    #[test]
    fn zero_net_gives_zero_q() {
        let net = DuelingQNet::zeros(16);
        assert_eq!(dueling_q_forward(&net, &state(0.3)), [0.0; 6]);
    }

    #[test]
    fn equal_advantages_collapse_to_value() {
        let mut net = DuelingQNet::zeros(4);
        let (_, _, _, b2) = net.net.split_mut();
        b2[0] = 1.5;
        for b in &mut b2[1..] {
            b.clone_from(&-2.0);
        }
        assert_eq!(dueling_q_forward(&net, &state(0.1)), [1.5; 6]);
    }

    #[test]
    fn advantage_offset_leaves_q_unchanged() {
        let mut rng = stream(3, Domain::Init, 0);
        let mut net = DuelingQNet::xavier(16, &mut rng);
        let s = state(0.7);
        let before = dueling_q_forward(&net, &s);
        let (_, _, _, b2) = net.net.split_mut();
        for b in &mut b2[1..] {
            *b += 4.25;
        }
        let after = dueling_q_forward(&net, &s);
        for (x, y) in before.iter().zip(after) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn epsilon_convention() {
        let mut rng = stream(0, Domain::Exploration, 0);
        let q = [0.0, 0.0, 5.0, 0.0, 0.0, 0.0];
        let greedy = (0..10_000)
            .filter(|_| select_action_epsilon_greedy(&q, 0.0, &mut rng) == 2)
            .count();
        // Uniform draws: about one in six.
        assert!((1400..1950).contains(&greedy), "{greedy}");
        let greedy = (0..10_000)
            .filter(|_| select_action_epsilon_greedy(&q, 0.9999, &mut rng) == 2)
            .count();
        assert!(greedy >= 9990);
        assert_eq!(select_action_epsilon_greedy(&[1.0, 1.0, 0.0], 1.0, &mut rng), 0);
    }

    #[test]
    fn myopic_target_is_reward() {
        let mut rng = stream(1, Domain::Init, 0);
        let p = DuelingQNet::xavier(16, &mut rng);
        let t = DuelingQNet::xavier(16, &mut rng);
        let batch = [Transition { state: state(0.2), action: 3, reward: 0.37, next_state: state(0.9) }];
        assert_eq!(double_q_targets(&p, &t, &batch, 0.0), vec![0.37]);
    }

    #[test]
    fn update_reduces_loss_on_fixed_batch() {
        let mut rng = stream(2, Domain::Init, 0);
        let mut p = DuelingQNet::xavier(16, &mut rng);
        let t = p.clone();
        let mut opt = Adam::new(p.net.num_params(), 0.01);
        let batch: Vec<_> = (0..4)
            .map(|i| Transition {
                state: state(i as f64 / 4.0),
                action: i,
                reward: 1.0 + i as f64,
                next_state: state(0.5),
            })
            .collect();
        let first = d3qn_update(&mut p, &mut opt, &t, &batch, 0.0).unwrap();
        let mut last = first;
        for _ in 0..300 {
            last = d3qn_update(&mut p, &mut opt, &t, &batch, 0.0).unwrap();
        }
        assert!(last < 0.05 * first, "{first} -> {last}");
        assert!(d3qn_update(&mut p, &mut opt, &t, &[], 0.7).is_err());
    }
}
