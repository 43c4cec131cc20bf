use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::MlpSpec;
use crate::math;
use crate::rng;
use crate::{Error, Result};

/// One dense layer. `weight` is row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    fn row(&self, o: usize) -> &[f64] {
        &self.weight[o * self.in_dim..(o + 1) * self.in_dim]
    }

    /// `y[b] = W x[b] + bias` for every sample of the batch.
    fn affine(&self, x: &[f64], y: &mut [f64]) {
        for (xb, yb) in x.chunks_exact(self.in_dim).zip(y.chunks_exact_mut(self.out_dim)) {
            for (o, yo) in yb.iter_mut().enumerate() {
                *yo = self.bias[o] + dot(self.row(o), xb);
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Weights and biases of one network, plus the spec they were built from.
///
/// The same type doubles as a gradient accumulator and as Adam's moment
/// storage, since all three share one shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    spec: MlpSpec,
    layers: Vec<Layer>,
}

/// Activations recorded by a batched forward pass, consumed by the reverse
/// pass. Reusing one tape across calls avoids reallocating its buffers.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    batch: usize,
    /// `acts[0]` is the input batch, `acts[k + 1]` the output of layer `k`.
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Output of the last recorded forward pass.
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl MlpParams {
    /// Uniform init in `±sqrt(1 / fan_in)` per layer, zero biases.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::seeded(seed);
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let mut layer = Layer::zeros(fan_in, fan_out);
                let limit = math::sqrt(1.0 / fan_in as f64);
                for w in &mut layer.weight {
                    *w = rng.gen_range(-limit..=limit);
                }
                layer
            })
            .collect();
        Ok(Self { spec, layers })
    }

    /// All-zero parameters with the shape of `spec`.
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layer_dims().into_iter().map(|(i, o)| Layer::zeros(i, o)).collect();
        Ok(Self { spec, layers })
    }

    /// Builds a network from explicit layers, checking that shapes chain.
    pub fn from_layers(spec: MlpSpec, layers: Vec<Layer>) -> Result<Self> {
        spec.validate()?;
        let dims = spec.layer_dims();
        if dims.len() != layers.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                got: layers.len(),
            });
        }
        for (&(i, o), layer) in dims.iter().zip(&layers) {
            if layer.in_dim != i || layer.out_dim != o {
                return Err(Error::SpecMismatch);
            }
            check_len(layer.weight.len(), i * o)?;
            check_len(layer.bias.len(), o)?;
        }
        let params = Self { spec, layers };
        if !params.is_finite() {
            return Err(Error::NonFinite("parameters"));
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            layers: self.layers.iter().map(|l| Layer::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.spec.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.spec.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Every parameter in layer order: weights (row-major) then biases.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn fill_zero(&mut self) {
        self.values_mut().for_each(|v| *v = 0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim)
    }

    /// Forward pass over a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        self.forward_batch(input, 1, &mut tape)?;
        Ok(tape.output().to_vec())
    }

    /// Forward pass over `batch` row-major inputs, recording activations.
    pub fn forward_batch<'t>(&self, inputs: &[f64], batch: usize, tape: &'t mut Tape) -> Result<&'t [f64]> {
        check_len(inputs.len(), batch * self.spec.in_dim)?;
        if !inputs.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        let n_layers = self.layers.len();
        tape.batch = batch;
        tape.acts.resize_with(n_layers + 1, Vec::new);
        tape.acts[0].clear();
        tape.acts[0].extend_from_slice(inputs);
        for (k, layer) in self.layers.iter().enumerate() {
            let (done, rest) = tape.acts.split_at_mut(k + 1);
            let x = &done[k];
            let y = &mut rest[0];
            y.clear();
            y.resize(batch * layer.out_dim, 0.0);
            layer.affine(x, y);
            if k + 1 == n_layers {
                let act = self.spec.output_activation;
                y.iter_mut().for_each(|v| *v = act.apply(*v));
            } else {
                let act = self.spec.hidden_activation;
                y.iter_mut().for_each(|v| *v = act.apply(*v));
            }
        }
        Ok(tape.output())
    }

    /// Reverse pass for the scalar `sum(output * out_grad)` over the batch
    /// recorded in `tape`. Parameter gradients are *added* to `grads` when
    /// given; the input gradient (batch × in_dim) overwrites `input_grad`.
    pub fn backward_batch(
        &self,
        tape: &mut Tape,
        out_grad: &[f64],
        mut grads: Option<&mut MlpParams>,
        input_grad: Option<&mut [f64]>,
    ) -> Result<()> {
        let batch = tape.batch;
        if tape.acts.len() != self.layers.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len() + 1,
                got: tape.acts.len(),
            });
        }
        check_len(out_grad.len(), batch * self.spec.out_dim)?;
        if let Some(g) = grads.as_deref() {
            if !self.same_shape(g) {
                return Err(Error::SpecMismatch);
            }
        }
        if let Some(ig) = input_grad.as_deref() {
            check_len(ig.len(), batch * self.spec.in_dim)?;
        }

        let out_act = self.spec.output_activation;
        let hid_act = self.spec.hidden_activation;
        let Tape {
            acts,
            delta,
            delta_prev,
            ..
        } = tape;
        delta.clear();
        delta.extend(
            out_grad
                .iter()
                .zip(acts.last().unwrap())
                .map(|(g, y)| g * out_act.derivative_at_output(*y)),
        );

        let want_input = input_grad.is_some();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let x = &acts[k];
            if let Some(g) = grads.as_deref_mut() {
                let gl = &mut g.layers[k];
                for (xb, db) in x.chunks_exact(layer.in_dim).zip(delta.chunks_exact(layer.out_dim)) {
                    for (o, &d) in db.iter().enumerate() {
                        if d != 0.0 {
                            gl.bias[o] += d;
                            axpy(&mut gl.weight[o * layer.in_dim..(o + 1) * layer.in_dim], d, xb);
                        }
                    }
                }
            }
            if k == 0 && !want_input {
                break;
            }
            delta_prev.clear();
            delta_prev.resize(batch * layer.in_dim, 0.0);
            for (pb, db) in delta_prev
                .chunks_exact_mut(layer.in_dim)
                .zip(delta.chunks_exact(layer.out_dim))
            {
                for (o, &d) in db.iter().enumerate() {
                    if d != 0.0 {
                        axpy(pb, d, layer.row(o));
                    }
                }
            }
            if k > 0 {
                for (p, y) in delta_prev.iter_mut().zip(x) {
                    *p *= hid_act.derivative_at_output(*y);
                }
            }
            core::mem::swap(delta, delta_prev);
        }
        if let Some(ig) = input_grad {
            ig.copy_from_slice(delta);
        }
        Ok(())
    }

    /// Gradients of `output · output_grad` with respect to every parameter
    /// and to the input, for a single input vector.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<(MlpParams, Vec<f64>)> {
        let mut tape = Tape::new();
        self.forward_batch(input, 1, &mut tape)?;
        let mut grads = self.zeros_like();
        let mut input_grad = vec![0.0; self.spec.in_dim];
        self.backward_batch(&mut tape, output_grad, Some(&mut grads), Some(&mut input_grad))?;
        Ok((grads, input_grad))
    }

    /// `self += factor * other`, elementwise.
    pub fn add_scaled(&mut self, other: &MlpParams, factor: f64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::SpecMismatch);
        }
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += factor * b;
        }
        Ok(())
    }
}

/// Polyak averaging: `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut MlpParams, online: &MlpParams, tau: f64) -> Result<()> {
    if target.spec != online.spec || !target.same_shape(online) {
        return Err(Error::SpecMismatch);
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidConfig(alloc::format!(
            "tau must lie in [0, 1], got {tau}"
        )));
    }
    let keep = 1.0 - tau;
    for (t, o) in target.values_mut().zip(online.values()) {
        *t = tau * o + keep * *t;
    }
    Ok(())
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{HiddenActivation, OutputActivation};

    fn linear_neuron(w: f64, b: f64, out: OutputActivation) -> MlpParams {
        let spec = MlpSpec::new(1, &[], 1, HiddenActivation::Relu, out).unwrap();
        let layer = Layer {
            in_dim: 1,
            out_dim: 1,
            weight: vec![w],
            bias: vec![b],
        };
        MlpParams::from_layers(spec, vec![layer]).unwrap()
    }

    fn spec_3_16_16_1() -> MlpSpec {
        MlpSpec::new(3, &[16, 16], 1, HiddenActivation::Relu, OutputActivation::Linear).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let a = MlpParams::init(spec_3_16_16_1(), 7).unwrap();
        let b = MlpParams::init(spec_3_16_16_1(), 7).unwrap();
        let bits = |p: &MlpParams| p.values().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = MlpParams::init(spec_3_16_16_1(), 8).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn single_neuron_shape() {
        let spec = MlpSpec::new(1, &[], 1, HiddenActivation::Relu, OutputActivation::Linear).unwrap();
        let p = MlpParams::init(spec, 0).unwrap();
        assert_eq!(p.layers().len(), 1);
        assert_eq!(p.layers()[0].weight.len(), 1);
        assert_eq!(p.layers()[0].bias.len(), 1);
        assert_eq!(p.param_count(), 2);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        for seed in 0..20 {
            let p = MlpParams::init(spec_3_16_16_1(), seed).unwrap();
            for layer in p.layers() {
                let limit = (1.0 / layer.in_dim as f64).sqrt();
                assert!(layer.weight.iter().all(|w| w.abs() <= limit));
                assert!(layer.bias.iter().all(|b| *b == 0.0));
            }
        }
    }

    #[test]
    fn init_rejects_zero_width() {
        let spec = MlpSpec {
            in_dim: 3,
            hidden: vec![0],
            out_dim: 1,
            hidden_activation: HiddenActivation::Relu,
            output_activation: OutputActivation::Linear,
        };
        assert!(matches!(MlpParams::init(spec, 0), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn identity_neuron_is_ideal_toy_policy() {
        let p = linear_neuron(1.0, 0.0, OutputActivation::Linear);
        assert_eq!(p.forward(&[0.37]).unwrap(), vec![0.37]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = MlpParams::zeros(spec_3_16_16_1()).unwrap();
        assert_eq!(p.forward(&[0.3, -1.0, 2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn tanh_output_neuron() {
        let p = linear_neuron(2.0, 0.0, OutputActivation::Tanh);
        let y = p.forward(&[1.0]).unwrap()[0];
        assert!((y - 0.9640).abs() < 1e-4, "{y}");
        assert!((y - 2.0f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let p = MlpParams::init(spec_3_16_16_1(), 0).unwrap();
        assert!(matches!(p.forward(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(p.forward(&[1.0, f64::NAN, 0.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn linear_neuron_gradients() {
        let (w, x) = (0.8, -1.7);
        let p = linear_neuron(w, 0.1, OutputActivation::Linear);
        let (g, ig) = p.backward(&[x], &[1.0]).unwrap();
        assert_eq!(g.layers()[0].weight[0], x);
        assert_eq!(g.layers()[0].bias[0], 1.0);
        assert_eq!(ig, vec![w]);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let p = MlpParams::init(spec_3_16_16_1(), 3).unwrap();
        let (g, ig) = p.backward(&[0.5, -0.2, 0.9], &[0.0]).unwrap();
        assert!(g.values().all(|v| *v == 0.0));
        assert!(ig.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn batched_pass_matches_per_sample_sum() {
        let spec = MlpSpec::new(3, &[8, 5], 2, HiddenActivation::Tanh, OutputActivation::Linear).unwrap();
        let p = MlpParams::init(spec, 5).unwrap();
        let inputs = [0.1, -0.4, 0.9, 1.2, 0.3, -0.7, -0.5, 0.5, 0.05];
        let og = [0.3, -1.0, 0.7, 0.2, -0.4, 1.5];
        let mut tape = Tape::new();
        p.forward_batch(&inputs, 3, &mut tape).unwrap();
        let mut g = p.zeros_like();
        let mut ig = vec![0.0; 9];
        p.backward_batch(&mut tape, &og, Some(&mut g), Some(&mut ig)).unwrap();

        let mut g_ref = p.zeros_like();
        for b in 0..3 {
            let (gb, igb) = p.backward(&inputs[b * 3..b * 3 + 3], &og[b * 2..b * 2 + 2]).unwrap();
            g_ref.add_scaled(&gb, 1.0).unwrap();
            for i in 0..3 {
                assert!((igb[i] - ig[b * 3 + i]).abs() < 1e-14);
            }
        }
        for (a, b) in g.values().zip(g_ref.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_update_extremes() {
        let online = MlpParams::init(spec_3_16_16_1(), 1).unwrap();
        let original = MlpParams::init(spec_3_16_16_1(), 2).unwrap();

        let mut t = original.clone();
        soft_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, online);

        let mut t = original.clone();
        soft_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, original);
    }

    #[test]
    fn soft_update_small_tau() {
        let online = linear_neuron(1.0, 1.0, OutputActivation::Linear);
        let mut target = linear_neuron(0.0, 0.0, OutputActivation::Linear);
        soft_update(&mut target, &online, 0.005).unwrap();
        assert!((target.layers()[0].weight[0] - 0.005).abs() < 1e-15);
    }

    #[test]
    fn soft_update_rejects_mismatch() {
        let online = MlpParams::init(spec_3_16_16_1(), 1).unwrap();
        let mut other = linear_neuron(0.0, 0.0, OutputActivation::Linear);
        assert_eq!(soft_update(&mut other, &online, 0.5), Err(Error::SpecMismatch));
    }

    #[test]
    fn scaled_tanh_output_is_bounded() {
        let spec = MlpSpec::new(
            2,
            &[4],
            3,
            HiddenActivation::Relu,
            OutputActivation::TanhScaled { bound: 2.0 },
        )
        .unwrap();
        let p = MlpParams::init(spec, 9).unwrap();
        for x in [-1e6, -3.0, 0.0, 5.0, 1e9] {
            for y in p.forward(&[x, -x]).unwrap() {
                assert!((-2.0..=2.0).contains(&y));
            }
        }
    }
}
