//! Finite-difference audit of [`MlpParams::backward_batch`].

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;

use super::{HiddenActivation, MlpParams, MlpSpec, OutputActivation, Tape};
use crate::rng::Rng;
use crate::Result;

/// Central-difference step.
pub const STEP: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, 1e-2)`: relative for ordinary gradients, absolute
/// below 1e-2 where difference quotients lose their relative precision.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-2)
}

/// A network, a batch of inputs, and output weights defining the scalar
/// `L = sum(weights * net(inputs))`.
#[derive(Debug, Clone)]
pub struct GradCase {
    pub net: MlpParams,
    pub inputs: Vec<f64>,
    pub batch: usize,
    pub weights: Vec<f64>,
}

impl GradCase {
    pub fn loss_at(&self, net: &MlpParams, inputs: &[f64]) -> Result<f64> {
        let mut tape = Tape::new();
        let out = net.forward_batch(inputs, self.batch, &mut tape)?;
        Ok(out.iter().zip(&self.weights).map(|(y, w)| y * w).sum())
    }

    /// Largest [`relative_error`] between backprop and central differences,
    /// over every parameter and every input coordinate.
    pub fn max_error(&self) -> Result<f64> {
        let mut tape = Tape::new();
        self.net.forward_batch(&self.inputs, self.batch, &mut tape)?;
        let mut grads = self.net.zeros_like();
        let mut input_grad = vec![0.0; self.inputs.len()];
        self.net
            .backward_batch(&mut tape, &self.weights, Some(&mut grads), Some(&mut input_grad))?;

        let mut worst: f64 = 0.0;
        for (k, &g) in grads.values().enumerate() {
            let mut plus = self.net.clone();
            if let Some(v) = plus.values_mut().nth(k) {
                *v += STEP;
            }
            let mut minus = self.net.clone();
            if let Some(v) = minus.values_mut().nth(k) {
                *v -= STEP;
            }
            let fd = (self.loss_at(&plus, &self.inputs)? - self.loss_at(&minus, &self.inputs)?) / (2.0 * STEP);
            worst = worst.max(relative_error(g, fd));
        }
        for (k, &g) in input_grad.iter().enumerate() {
            let mut x = self.inputs.clone();
            x[k] += STEP;
            let up = self.loss_at(&self.net, &x)?;
            x[k] -= 2.0 * STEP;
            let down = self.loss_at(&self.net, &x)?;
            worst = worst.max(relative_error(g, (up - down) / (2.0 * STEP)));
        }
        Ok(worst)
    }

    /// Depth 0–2, widths 1–32, either hidden activation, any output head,
    /// batch 1–4.
    pub fn random(rng: &mut Rng) -> Result<Self> {
        let depth = rng.gen_range(0..=2);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=32)).collect();
        let in_dim = rng.gen_range(1..=6);
        let out_dim = rng.gen_range(1..=3);
        let hidden_activation = if rng.gen_bool(0.5) {
            HiddenActivation::Relu
        } else {
            HiddenActivation::Tanh
        };
        let output_activation = match rng.gen_range(0..3) {
            0 => OutputActivation::Linear,
            1 => OutputActivation::Tanh,
            _ => OutputActivation::TanhScaled { bound: 2.0 },
        };
        let spec = MlpSpec::new(in_dim, &hidden, out_dim, hidden_activation, output_activation)?;
        let mut net = MlpParams::init(spec, rng.gen())?;
        // Non-zero biases so nothing sits exactly on a ReLU kink.
        for layer in net.layers_mut() {
            layer.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        }
        let batch = rng.gen_range(1..=4);
        let inputs = (0..batch * in_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let weights = (0..batch * out_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Ok(Self {
            net,
            inputs,
            batch,
            weights,
        })
    }
}
