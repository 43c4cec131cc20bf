use serde::{Deserialize, Serialize};

use super::MlpParams;
use crate::math;
use crate::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

/// Adam with bias correction. `m` and `v` mirror the parameter shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step_count: u64,
    pub m: MlpParams,
    pub v: MlpParams,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams, lr: f64) -> Result<Self> {
        Self::with_hyper(params, lr, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS)
    }

    pub fn with_hyper(params: &MlpParams, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        check_hyper(lr, beta1, beta2, eps)?;
        Ok(Self {
            step_count: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
            lr,
            beta1,
            beta2,
            eps,
        })
    }

    /// One descent step on `params` along `grads`. A non-finite gradient
    /// leaves both the parameters and the optimizer state untouched.
    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpParams) -> Result<()> {
        if params.layers().len() != grads.layers().len() || params.param_count() != grads.param_count() {
            return Err(Error::SpecMismatch);
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        self.step_count += 1;
        let (step_size, c2) = self.corrections();
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((p, g), m), v) in params
            .values_mut()
            .zip(grads.values())
            .zip(self.m.values_mut())
            .zip(self.v.values_mut())
        {
            update(p, *g, m, v, b1, b2, eps, step_size, c2);
        }
        Ok(())
    }

    fn corrections(&self) -> (f64, f64) {
        let t = self.step_count as i32;
        let c1 = 1.0 - math::powi(self.beta1, t);
        let c2 = 1.0 - math::powi(self.beta2, t);
        (self.lr / c1, c2)
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn update(p: &mut f64, g: f64, m: &mut f64, v: &mut f64, b1: f64, b2: f64, eps: f64, step_size: f64, c2: f64) {
    *m = b1 * *m + (1.0 - b1) * g;
    *v = b2 * *v + (1.0 - b2) * g * g;
    *p -= step_size * *m / (math::sqrt(*v / c2) + eps);
}

fn check_hyper(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<()> {
    let ok = lr > 0.0 && lr.is_finite() && beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 && eps > 0.0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(alloc::format!(
            "adam hyper-parameters out of range (lr {lr}, betas {beta1}/{beta2}, eps {eps})"
        )))
    }
}

/// Adam for a single scalar (SAC's log-temperature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarAdam {
    pub step_count: u64,
    pub m: f64,
    pub v: f64,
    pub lr: f64,
}

impl ScalarAdam {
    pub fn new(lr: f64) -> Result<Self> {
        check_hyper(lr, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS)?;
        Ok(Self {
            step_count: 0,
            m: 0.0,
            v: 0.0,
            lr,
        })
    }

    pub fn step(&mut self, value: &mut f64, grad: f64) -> Result<()> {
        if !grad.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let step_size = self.lr / (1.0 - math::powi(DEFAULT_BETA1, t));
        let c2 = 1.0 - math::powi(DEFAULT_BETA2, t);
        update(
            value,
            grad,
            &mut self.m,
            &mut self.v,
            DEFAULT_BETA1,
            DEFAULT_BETA2,
            DEFAULT_EPS,
            step_size,
            c2,
        );
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{HiddenActivation, Layer, MlpSpec, OutputActivation};
    use alloc::vec;

    fn scalar(value: f64) -> MlpParams {
        let spec = MlpSpec::new(1, &[], 1, HiddenActivation::Relu, OutputActivation::Linear).unwrap();
        MlpParams::from_layers(
            spec,
            vec![Layer {
                in_dim: 1,
                out_dim: 1,
                weight: vec![value],
                bias: vec![0.0],
            }],
        )
        .unwrap()
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = scalar(0.4);
        let before = p.clone();
        let mut state = AdamState::new(&p, 1e-3).unwrap();
        let zeros = p.zeros_like();
        state.step(&mut p, &zeros).unwrap();
        assert_eq!(p, before);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let lr = 1e-3;
        let mut p = scalar(0.0);
        let mut g = p.zeros_like();
        g.layers_mut()[0].weight[0] = 1.0;
        let mut state = AdamState::new(&p, lr).unwrap();
        state.step(&mut p, &g).unwrap();
        let expected = -lr * 1.0 / (1.0 + DEFAULT_EPS);
        assert!((p.layers()[0].weight[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn identical_states_give_identical_steps() {
        let mut p1 = scalar(0.3);
        let mut g = p1.zeros_like();
        g.layers_mut()[0].weight[0] = -0.25;
        g.layers_mut()[0].bias[0] = 2.0;
        let mut s1 = AdamState::new(&p1, 1e-2).unwrap();
        s1.step(&mut p1, &g).unwrap();
        let (mut p2, mut s2) = (p1.clone(), s1.clone());
        s1.step(&mut p1, &g).unwrap();
        s2.step(&mut p2, &g).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = scalar(0.3);
        let mut g = p.zeros_like();
        g.layers_mut()[0].weight[0] = f64::NAN;
        let mut state = AdamState::new(&p, 1e-3).unwrap();
        assert_eq!(state.step(&mut p, &g), Err(Error::NonFinite("gradient")));
        assert_eq!(state.step_count, 0);
        assert_eq!(p.layers()[0].weight[0], 0.3);
    }

    #[test]
    fn scalar_adam_matches_network_adam() {
        let mut p = scalar(0.1);
        let mut g = p.zeros_like();
        let mut state = AdamState::new(&p, 3e-3).unwrap();
        let mut x = 0.1;
        let mut sa = ScalarAdam::new(3e-3).unwrap();
        for k in 0..10 {
            let grad = (k as f64 - 4.5) * 0.3;
            g.layers_mut()[0].weight[0] = grad;
            state.step(&mut p, &g).unwrap();
            sa.step(&mut x, grad).unwrap();
        }
        assert_eq!(p.layers()[0].weight[0], x);
    }

    #[test]
    fn bad_hyper_parameters() {
        let p = scalar(0.0);
        assert!(AdamState::new(&p, 0.0).is_err());
        assert!(AdamState::with_hyper(&p, 1e-3, 1.0, 0.999, 1e-8).is_err());
    }
}
