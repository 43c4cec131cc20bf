//! Minimal dense-network engine: parameters, batched forward and reverse
//! passes, Adam, and Polyak averaging. Everything is `f64`.

mod adam;
pub mod gradcheck;
mod mlp;

pub use adam::{AdamState, ScalarAdam};
pub use mlp::{soft_update, Layer, MlpParams, Tape};

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Deepest network this engine builds (hidden layers).
pub const MAX_HIDDEN_LAYERS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    #[default]
    Relu,
    Tanh,
}

impl HiddenActivation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Self::Relu => z.max(0.0),
            Self::Tanh => math::tanh(z),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Self::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OutputActivation {
    Linear,
    Tanh,
    /// `bound * tanh(z)`.
    TanhScaled {
        bound: f64,
    },
}

impl OutputActivation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Self::Linear => z,
            Self::Tanh => math::tanh(z),
            Self::TanhScaled { bound } => bound * math::tanh(z),
        }
    }

    #[inline]
    pub fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Self::Linear => 1.0,
            Self::Tanh => 1.0 - y * y,
            Self::TanhScaled { bound } => {
                let t = y / bound;
                bound * (1.0 - t * t)
            }
        }
    }
}

/// Shape of a feed-forward network. `hidden` lists hidden-layer widths only;
/// the output layer is implied by `out_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub in_dim: usize,
    pub hidden: Vec<usize>,
    pub out_dim: usize,
    #[serde(default)]
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(
        in_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        let spec = Self {
            in_dim,
            hidden: hidden.to_vec(),
            out_dim,
            hidden_activation,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        validate_dims(self.in_dim, &self.hidden, self.out_dim)?;
        if let OutputActivation::TanhScaled { bound } = self.output_activation {
            if !(bound.is_finite() && bound > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "tanh_scaled bound must be positive and finite, got {bound}"
                )));
            }
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every layer in order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.in_dim;
        for &h in self.hidden.iter().chain(core::iter::once(&self.out_dim)) {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| i * o + o).sum()
    }
}

fn validate_dims(in_dim: usize, hidden: &[usize], out_dim: usize) -> Result<()> {
    if in_dim == 0 || out_dim == 0 {
        return Err(Error::InvalidSpec(format!(
            "input and output dimensions must be positive (got {in_dim} -> {out_dim})"
        )));
    }
    if hidden.len() > MAX_HIDDEN_LAYERS {
        return Err(Error::InvalidSpec(format!(
            "at most {MAX_HIDDEN_LAYERS} hidden layers are supported, got {}",
            hidden.len()
        )));
    }
    if let Some(pos) = hidden.iter().position(|&h| h == 0) {
        return Err(Error::InvalidSpec(format!("hidden layer {pos} has zero width")));
    }
    Ok(())
}

/// Weights plus biases of a dense network with the given layer sizes.
pub fn param_count(in_dim: usize, hidden: &[usize], out_dim: usize) -> Result<usize> {
    validate_dims(in_dim, hidden, out_dim)?;
    let mut fan_in = in_dim;
    let mut total = 0;
    for &fan_out in hidden.iter().chain(core::iter::once(&out_dim)) {
        total += fan_in * fan_out + fan_out;
        fan_in = fan_out;
    }
    Ok(total)
}
