//! Two-layer dense networks (`linear -> ReLU -> linear`) with hand-written
//! backpropagation, and the Adam optimizer.
//!
//! Parameters live in one flat vector laid out as `[W1, b1, W2, b2]`, with
//! weight matrices row-major (`out x in`), so the optimizer, target-network
//! cloning and finite-difference checks all work on plain slices.

use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    params: Vec<f64>,
}

/// Intermediate values of one forward pass, needed by [`DenseNet::backward`].
#[derive(Clone, Debug)]
pub struct Activations {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

impl DenseNet {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        let n = hidden * inputs + hidden + outputs * hidden + outputs;
        Self {
            inputs,
            hidden,
            outputs,
            params: vec![0.0; n],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn xavier<R: Rng + ?Sized>(inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(inputs, hidden, outputs);
        let l1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + outputs) as f64).sqrt();
        let (w1, _, w2, _) = net.split_mut();
        for w in w1.iter_mut() {
            *w = rng.random_range(-l1..l1);
        }
        for w in w2.iter_mut() {
            *w = rng.random_range(-l2..l2);
        }
        net
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        (b1, w2, b2)
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (b1, w2, b2) = self.offsets();
        let (w1, rest) = self.params.split_at(b1);
        let (bias1, rest) = rest.split_at(w2 - b1);
        let (weight2, bias2) = rest.split_at(b2 - w2);
        (w1, bias1, weight2, bias2)
    }

    /// Mutable views `(W1, b1, W2, b2)`.
    pub fn split_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64], &mut [f64]) {
        let (b1, w2, b2) = self.offsets();
        let (w1, rest) = self.params.split_at_mut(b1);
        let (bias1, rest) = rest.split_at_mut(w2 - b1);
        let (weight2, bias2) = rest.split_at_mut(b2 - w2);
        (w1, bias1, weight2, bias2)
    }

    pub fn forward(&self, x: &[f64]) -> Activations {
        debug_assert_eq!(x.len(), self.inputs);
        let (w1, b1, w2, b2) = self.split();
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &w1[j * self.inputs..(j + 1) * self.inputs];
                let pre = b1[j] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
                pre.max(0.0)
            })
            .collect();
        let output = (0..self.outputs)
            .map(|o| {
                let row = &w2[o * self.hidden..(o + 1) * self.hidden];
                b2[o] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()
            })
            .collect();
        Activations { hidden, output }
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).output
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
    pub fn backward(&self, x: &[f64], act: &Activations, d_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let (b1_off, w2_off, b2_off) = self.offsets();
        let (_, _, w2, _) = self.split();
        let mut d_hidden = vec![0.0; self.hidden];
        for (o, &g) in d_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[b2_off + o] += g;
            let row = o * self.hidden;
            for j in 0..self.hidden {
                grad[w2_off + row + j] += g * act.hidden[j];
                d_hidden[j] += g * w2[row + j];
            }
        }
        for j in 0..self.hidden {
            // ReLU gate: the unit was active iff its output is positive
            if act.hidden[j] <= 0.0 || d_hidden[j] == 0.0 {
                continue;
            }
            let g = d_hidden[j];
            grad[b1_off + j] += g;
            let row = j * self.inputs;
            for (i, &xi) in x.iter().enumerate() {
                grad[row + i] += g * xi;
            }
        }
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "optimizer/parameter shape mismatch");
        assert_eq!(grads.len(), self.m.len(), "optimizer/gradient shape mismatch");
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

pub fn adam_step(params: &mut [f64], grads: &[f64], optimizer: &mut Adam) {
    optimizer.step(params, grads);
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::{stream, Domain};
    use rand::Rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn layout_and_shapes() {
        let net = DenseNet::zeros(5, 16, 7);
        assert_eq!(net.num_params(), 5 * 16 + 16 + 16 * 7 + 7);
        assert_eq!(net.output(&[1.0; 5]), vec![0.0; 7]);
        let adam = Adam::new(net.num_params(), 1e-3);
        assert_eq!(adam.moments().0.len(), net.num_params());
    }

    #[test]
    fn xavier_bounds_and_zero_bias() {
        let mut rng = stream(1, Domain::Init, 0);
        let mut net = DenseNet::xavier(5, 16, 6, &mut rng);
        let l1 = (6.0f64 / 21.0).sqrt();
        let l2 = (6.0f64 / 22.0).sqrt();
        let (w1, b1, w2, b2) = net.split_mut();
        assert!(w1.iter().all(|w| w.abs() <= l1));
        assert!(w2.iter().all(|w| w.abs() <= l2));
        assert!(b1.iter().chain(b2.iter()).all(|&b| b == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = stream(3, Domain::Init, 0);
        let net = DenseNet::xavier(4, 8, 3, &mut rng);
        let mut net = net;
        for p in net.params_mut() {
            *p += rng.random_range(-0.1..0.1);
        }
        let x = [0.3, -0.7, 0.9, 0.1];
        let w = [0.5, -1.5, 2.0];
        let loss = |n: &DenseNet| n.output(&x).iter().zip(&w).map(|(o, w)| o * w).sum::<f64>();
        let act = net.forward(&x);
        let mut grad = vec![0.0; net.num_params()];
        net.backward(&x, &act, &w, &mut grad);
        let h = 1e-6;
        for i in 0..net.num_params() {
            let mut p = net.clone();
            p.params_mut()[i] += h;
            let mut m = net.clone();
            m.params_mut()[i] -= h;
            let fd = (loss(&p) - loss(&m)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7, "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut adam = Adam::new(3, 0.01);
        let mut p = vec![1.0, 1.0, 1.0];
        adam.step(&mut p, &[0.5, -3.0, 1e-3]);
        assert_relative_eq!(p[0], 0.99, epsilon = 1e-6);
        assert_relative_eq!(p[1], 1.01, epsilon = 1e-6);
        assert_relative_eq!(p[2], 0.99, epsilon = 1e-4);
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut adam = Adam::new(2, 0.01);
        let mut p = vec![0.25, -4.0];
        for _ in 0..100 {
            adam_step(&mut p, &[0.0, 0.0], &mut adam);
        }
        assert_eq!(p, vec![0.25, -4.0]);
        assert_eq!(adam.steps(), 100);
    }

    #[test]
    fn adam_converges_on_a_quadratic() {
        let mut adam = Adam::new(1, 0.1);
        let mut w = vec![0.0];
        for _ in 0..100 {
            let g = 2.0 * (w[0] - 3.0);
            adam.step(&mut w, &[g]);
        }
        assert!((w[0] - 3.0).abs() < 0.5, "w = {}", w[0]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0; 6]), 0);
    }

    proptest! {
        #[test]
        fn softmax_is_a_simplex(logits in proptest::collection::vec(-50.0..50.0f64, 1..10)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }
    }
}
