//! DDPG, TD3 and SAC learners sharing one agent type.
//!
//! Actor and critic networks are built from the two halves of
//! [`ArchPair`] independently; the critic always sees `[obs; action]` and
//! predicts one value.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use super::buffer::Batch;
use super::config::{ActorOutput, AgentConfig, Algo, Alpha};
use super::eval::Policy;
use crate::math;
use crate::nn::{soft_update, AdamState, MlpParams, MlpSpec, OutputActivation, ScalarAdam, Tape};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Pre-squash log standard deviations are clamped to this range.
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const STREAM_ACTOR_INIT: u64 = 0xA0;
const STREAM_CRITIC_INIT: u64 = 0xC0;
const STREAM_AGENT_NOISE: u64 = 0xE0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Explore,
    Deterministic,
}

/// One Q-network with its target copy and optimizer.
#[derive(Debug, Clone)]
pub struct Critic {
    pub net: MlpParams,
    pub target: MlpParams,
    pub opt: AdamState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub q_loss: f64,
    /// `None` when the actor was not updated (TD3 delay).
    pub pi_loss: Option<f64>,
    /// SAC temperature after the update.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default)]
struct Workspace {
    actor_tape: Tape,
    aux_tape: Tape,
    critic_tapes: Vec<Tape>,
    target_tapes: Vec<Tape>,
    actions: Vec<f64>,
    logp: Vec<f64>,
    sa: Vec<f64>,
    y: Vec<f64>,
    out_grads: Vec<Vec<f64>>,
    sa_grads: Vec<Vec<f64>>,
    actor_out_grad: Vec<f64>,
    pre_squash: Vec<f64>,
    noise: Vec<f64>,
    std: Vec<f64>,
    ls_active: Vec<bool>,
    critic_grads: Vec<MlpParams>,
    actor_grads: Option<MlpParams>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    obs_dim: usize,
    act_dim: usize,
    bound: f64,
    actor: MlpParams,
    actor_target: Option<MlpParams>,
    actor_opt: AdamState,
    critics: Vec<Critic>,
    log_alpha: f64,
    alpha_opt: Option<ScalarAdam>,
    rng: Rng,
    critic_updates: u64,
    actor_updates: u64,
    ws: Workspace,
}

impl Agent {
    pub fn new(config: AgentConfig, obs_dim: usize, act_dim: usize, bound: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "action bound must be positive, got {bound}"
            )));
        }
        let actor_spec = actor_spec(&config, obs_dim, act_dim, bound)?;
        let critic_spec = MlpSpec::new(
            obs_dim + act_dim,
            &config.arch.critic_hidden,
            1,
            config.hidden_activation,
            OutputActivation::Linear,
        )?;

        let actor = MlpParams::init(actor_spec, rng::derive_seed(seed, STREAM_ACTOR_INIT))?;
        let actor_opt = AdamState::new(&actor, config.actor_lr)?;
        let actor_target = match config.algo {
            Algo::Ddpg | Algo::Td3 => Some(actor.clone()),
            Algo::Sac => None,
        };
        let n_critics = if config.algo.twin_critics() { 2 } else { 1 };
        let critics = (0..n_critics)
            .map(|i| {
                let net = MlpParams::init(
                    critic_spec.clone(),
                    rng::derive_seed(seed, STREAM_CRITIC_INIT + i as u64),
                )?;
                Ok(Critic {
                    opt: AdamState::new(&net, config.critic_lr)?,
                    target: net.clone(),
                    net,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let (log_alpha, alpha_opt) = match (config.algo, config.alpha) {
            (Algo::Sac, Alpha::Auto) => (0.0, Some(ScalarAdam::new(config.actor_lr)?)),
            (_, Alpha::Fixed(a)) => (math::ln(a), None),
            (_, Alpha::Auto) => (0.0, None),
        };

        let ws = Workspace {
            critic_tapes: vec![Tape::new(); n_critics],
            target_tapes: vec![Tape::new(); n_critics],
            out_grads: vec![Vec::new(); n_critics],
            sa_grads: vec![Vec::new(); n_critics],
            critic_grads: critics.iter().map(|c| c.net.zeros_like()).collect(),
            actor_grads: Some(actor.zeros_like()),
            ..Workspace::default()
        };

        Ok(Self {
            config,
            obs_dim,
            act_dim,
            bound,
            actor,
            actor_target,
            actor_opt,
            critics,
            log_alpha,
            alpha_opt,
            rng: rng::seeded(rng::derive_seed(seed, STREAM_AGENT_NOISE)),
            critic_updates: 0,
            actor_updates: 0,
            ws,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn action_bound(&self) -> f64 {
        self.bound
    }

    pub fn actor(&self) -> &MlpParams {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut MlpParams {
        &mut self.actor
    }

    pub fn actor_target(&self) -> Option<&MlpParams> {
        self.actor_target.as_ref()
    }

    pub fn actor_target_mut(&mut self) -> Option<&mut MlpParams> {
        self.actor_target.as_mut()
    }

    pub fn critics(&self) -> &[Critic] {
        &self.critics
    }

    pub fn critics_mut(&mut self) -> &mut [Critic] {
        &mut self.critics
    }

    /// Replaces the actor (e.g. from a snapshot). The shape must match.
    pub fn load_actor(&mut self, actor: MlpParams) -> Result<()> {
        if actor.spec() != self.actor.spec() {
            return Err(Error::SpecMismatch);
        }
        self.actor = actor;
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        match self.config.algo {
            Algo::Sac => math::exp(self.log_alpha),
            _ => 0.0,
        }
    }

    pub fn critic_updates(&self) -> u64 {
        self.critic_updates
    }

    pub fn actor_updates(&self) -> u64 {
        self.actor_updates
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite()
            && self.critics.iter().all(|c| c.net.is_finite() && c.target.is_finite())
            && self.actor_target.as_ref().is_none_or(MlpParams::is_finite)
            && !self.alpha().is_nan()
    }

    /// Uniform random action within the bounds.
    pub fn random_action(&mut self) -> Vec<f64> {
        (0..self.act_dim)
            .map(|_| rng::uniform(&mut self.rng, -self.bound, self.bound))
            .collect()
    }

    pub fn select_action(&mut self, obs: &[f64], mode: ActionMode) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim,
                got: obs.len(),
            });
        }
        let out = self.actor.forward(obs)?;
        let bound = self.bound;
        let action = match self.config.algo {
            Algo::Ddpg | Algo::Td3 => {
                let sigma = match mode {
                    ActionMode::Explore => self.config.exploration_sigma * bound,
                    ActionMode::Deterministic => 0.0,
                };
                out.into_iter()
                    .map(|a| {
                        let noisy = if sigma > 0.0 {
                            a + sigma * rng::normal(&mut self.rng)
                        } else {
                            a
                        };
                        noisy.clamp(-bound, bound)
                    })
                    .collect()
            }
            Algo::Sac => {
                let (mean, raw_ls) = out.split_at(self.act_dim);
                mean.iter()
                    .zip(raw_ls)
                    .map(|(&m, &ls)| {
                        let u = match mode {
                            ActionMode::Deterministic => m,
                            ActionMode::Explore => {
                                m + math::exp(ls.clamp(LOG_STD_MIN, LOG_STD_MAX)) * rng::normal(&mut self.rng)
                            }
                        };
                        bound * math::tanh(u)
                    })
                    .collect()
            }
        };
        Ok(action)
    }

    /// One gradient update on a minibatch: critics, then (possibly delayed)
    /// actor, temperature and target networks.
    pub fn update(&mut self, batch: &Batch) -> Result<UpdateStats> {
        let q_loss = self.critic_update(batch)?;
        let pi_loss = match self.config.algo {
            Algo::Ddpg => {
                let l = self.actor_update(batch)?;
                self.soft_update_targets()?;
                Some(l)
            }
            Algo::Td3 => {
                if self.critic_updates.is_multiple_of(self.config.policy_delay as u64) {
                    let l = self.actor_update(batch)?;
                    self.soft_update_targets()?;
                    Some(l)
                } else {
                    None
                }
            }
            Algo::Sac => {
                let l = self.actor_update(batch)?;
                self.soft_update_targets()?;
                Some(l)
            }
        };
        let alpha = matches!(self.config.algo, Algo::Sac).then(|| self.alpha());
        Ok(UpdateStats { q_loss, pi_loss, alpha })
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.len == 0 {
            return Err(Error::InvalidConfig("empty batch".into()));
        }
        if batch.obs_dim != self.obs_dim || batch.act_dim != self.act_dim {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim,
                got: batch.obs_dim,
            });
        }
        Ok(())
    }

    /// Bootstrapped regression targets `y = r + gamma (1 - d) V'(s2)`.
    pub fn compute_targets(&mut self, batch: &Batch) -> Result<Vec<f64>> {
        self.fill_targets(batch)?;
        Ok(self.ws.y.clone())
    }

    fn fill_targets(&mut self, batch: &Batch) -> Result<()> {
        self.check_batch(batch)?;
        let n = batch.len;
        let (od, ad, bound) = (self.obs_dim, self.act_dim, self.bound);
        let alpha = self.alpha();
        let ws = &mut self.ws;

        ws.actions.clear();
        ws.logp.clear();
        match self.config.algo {
            Algo::Ddpg | Algo::Td3 => {
                let target = self.actor_target.as_ref().expect("deterministic actors keep a target");
                let out = target.forward_batch(&batch.obs2, n, &mut ws.aux_tape)?;
                ws.actions.extend_from_slice(out);
                if self.config.algo == Algo::Td3 {
                    let sigma = self.config.target_noise_sigma * bound;
                    let clip = self.config.target_noise_clip * bound;
                    for a in &mut ws.actions {
                        *a += (sigma * rng::normal(&mut self.rng)).clamp(-clip, clip);
                    }
                }
                ws.actions.iter_mut().for_each(|a| *a = a.clamp(-bound, bound));
            }
            Algo::Sac => {
                let out = self.actor.forward_batch(&batch.obs2, n, &mut ws.aux_tape)?;
                for row in out.chunks_exact(2 * ad) {
                    let (mean, raw_ls) = row.split_at(ad);
                    let mut logp = 0.0;
                    for (&m, &rls) in mean.iter().zip(raw_ls) {
                        let ls = rls.clamp(LOG_STD_MIN, LOG_STD_MAX);
                        let eps = rng::normal(&mut self.rng);
                        let u = m + math::exp(ls) * eps;
                        logp += squashed_log_prob(u, ls, eps);
                        ws.actions.push(bound * math::tanh(u));
                    }
                    ws.logp.push(logp);
                }
            }
        }

        concat_rows(&batch.obs2, &ws.actions, od, ad, &mut ws.sa);
        ws.y.clear();
        for (i, critic) in self.critics.iter().enumerate() {
            let q = critic.target.forward_batch(&ws.sa, n, &mut ws.target_tapes[i])?;
            if i == 0 {
                ws.y.extend_from_slice(q);
            } else {
                ws.y.iter_mut().zip(q).for_each(|(m, &v)| *m = m.min(v));
            }
        }
        let gamma = self.config.gamma;
        for b in 0..n {
            let mut next_value = ws.y[b];
            if self.config.algo == Algo::Sac {
                next_value -= alpha * ws.logp[b];
            }
            ws.y[b] = batch.rew[b] + gamma * (1.0 - batch.done[b]) * next_value;
        }
        Ok(())
    }

    /// One Adam step per critic on the mean squared TD error. Returns the
    /// loss averaged over critics.
    pub fn critic_update(&mut self, batch: &Batch) -> Result<f64> {
        self.fill_targets(batch)?;
        let n = batch.len;
        let ws = &mut self.ws;
        concat_rows(&batch.obs, &batch.act, self.obs_dim, self.act_dim, &mut ws.sa);

        let mut total = 0.0;
        for (i, critic) in self.critics.iter_mut().enumerate() {
            let q = critic.net.forward_batch(&ws.sa, n, &mut ws.critic_tapes[i])?;
            let og = &mut ws.out_grads[i];
            og.clear();
            let mut loss = 0.0;
            for (&qv, &y) in q.iter().zip(&ws.y) {
                let d = qv - y;
                loss += d * d;
                og.push(2.0 * d / n as f64);
            }
            loss /= n as f64;
            if !loss.is_finite() {
                return Err(Error::NonFinite("critic loss"));
            }
            let grads = &mut ws.critic_grads[i];
            grads.fill_zero();
            critic
                .net
                .backward_batch(&mut ws.critic_tapes[i], og, Some(grads), None)?;
            critic.opt.step(&mut critic.net, grads)?;
            total += loss;
        }
        self.critic_updates += 1;
        Ok(total / self.critics.len() as f64)
    }

    /// One Adam step on the actor objective, critics held fixed. Returns
    /// the objective as a loss (negated value estimate).
    pub fn actor_update(&mut self, batch: &Batch) -> Result<f64> {
        self.check_batch(batch)?;
        let loss = match self.config.algo {
            Algo::Ddpg | Algo::Td3 => self.deterministic_actor_update(batch)?,
            Algo::Sac => self.sac_actor_update(batch)?,
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite("actor loss"));
        }
        self.actor_updates += 1;
        Ok(loss)
    }

    fn deterministic_actor_update(&mut self, batch: &Batch) -> Result<f64> {
        let n = batch.len;
        let (od, ad) = (self.obs_dim, self.act_dim);
        let ws = &mut self.ws;
        let actions = self.actor.forward_batch(&batch.obs, n, &mut ws.actor_tape)?;
        concat_rows(&batch.obs, actions, od, ad, &mut ws.sa);

        let critic = &self.critics[0];
        let q = critic.net.forward_batch(&ws.sa, n, &mut ws.critic_tapes[0])?;
        let loss = -q.iter().sum::<f64>() / n as f64;

        let og = &mut ws.out_grads[0];
        og.clear();
        og.resize(n, -1.0 / n as f64);
        let sag = &mut ws.sa_grads[0];
        sag.clear();
        sag.resize(n * (od + ad), 0.0);
        critic
            .net
            .backward_batch(&mut ws.critic_tapes[0], og, None, Some(sag))?;

        ws.actor_out_grad.clear();
        for row in sag.chunks_exact(od + ad) {
            ws.actor_out_grad.extend_from_slice(&row[od..]);
        }
        let grads = ws.actor_grads.as_mut().expect("actor gradient buffer");
        grads.fill_zero();
        self.actor
            .backward_batch(&mut ws.actor_tape, &ws.actor_out_grad, Some(grads), None)?;
        self.actor_opt.step(&mut self.actor, grads)?;
        Ok(loss)
    }

    fn sac_actor_update(&mut self, batch: &Batch) -> Result<f64> {
        let n = batch.len;
        let nf = n as f64;
        let (od, ad, bound) = (self.obs_dim, self.act_dim, self.bound);
        let alpha = self.alpha();
        let ws = &mut self.ws;

        let raw = self.actor.forward_batch(&batch.obs, n, &mut ws.actor_tape)?;
        ws.actions.clear();
        ws.logp.clear();
        ws.pre_squash.clear();
        ws.noise.clear();
        ws.std.clear();
        ws.ls_active.clear();
        for row in raw.chunks_exact(2 * ad) {
            let (mean, raw_ls) = row.split_at(ad);
            let mut logp = 0.0;
            for (&m, &rls) in mean.iter().zip(raw_ls) {
                let ls = rls.clamp(LOG_STD_MIN, LOG_STD_MAX);
                let std = math::exp(ls);
                let eps = rng::normal(&mut self.rng);
                let u = m + std * eps;
                logp += squashed_log_prob(u, ls, eps);
                ws.actions.push(bound * math::tanh(u));
                ws.pre_squash.push(u);
                ws.noise.push(eps);
                ws.std.push(std);
                ws.ls_active.push((LOG_STD_MIN..=LOG_STD_MAX).contains(&rls));
            }
            ws.logp.push(logp);
        }
        concat_rows(&batch.obs, &ws.actions, od, ad, &mut ws.sa);

        for (i, critic) in self.critics.iter().enumerate() {
            critic.net.forward_batch(&ws.sa, n, &mut ws.critic_tapes[i])?;
        }
        let (q1, q2) = (ws.critic_tapes[0].output(), ws.critic_tapes[1].output());
        let mut loss = 0.0;
        ws.out_grads.iter_mut().for_each(|g| {
            g.clear();
            g.resize(n, 0.0);
        });
        for b in 0..n {
            let (k, qmin) = if q1[b] <= q2[b] { (0, q1[b]) } else { (1, q2[b]) };
            ws.out_grads[k][b] = -1.0 / nf;
            loss += alpha * ws.logp[b] - qmin;
        }
        loss /= nf;

        for (i, critic) in self.critics.iter().enumerate() {
            let sag = &mut ws.sa_grads[i];
            sag.clear();
            sag.resize(n * (od + ad), 0.0);
            critic
                .net
                .backward_batch(&mut ws.critic_tapes[i], &ws.out_grads[i], None, Some(sag))?;
        }

        ws.actor_out_grad.clear();
        ws.actor_out_grad.resize(n * 2 * ad, 0.0);
        for b in 0..n {
            for j in 0..ad {
                let idx = b * ad + j;
                let col = b * (od + ad) + od + j;
                let d_action = ws.sa_grads[0][col] + ws.sa_grads[1][col];
                let t = ws.actions[idx] / bound;
                let d_u = alpha * 2.0 * t / nf + d_action * bound * (1.0 - t * t);
                ws.actor_out_grad[b * 2 * ad + j] = d_u;
                ws.actor_out_grad[b * 2 * ad + ad + j] = if ws.ls_active[idx] {
                    -alpha / nf + d_u * ws.std[idx] * ws.noise[idx]
                } else {
                    0.0
                };
            }
        }
        let grads = ws.actor_grads.as_mut().expect("actor gradient buffer");
        grads.fill_zero();
        self.actor
            .backward_batch(&mut ws.actor_tape, &ws.actor_out_grad, Some(grads), None)?;
        self.actor_opt.step(&mut self.actor, grads)?;

        if let Some(opt) = self.alpha_opt.as_mut() {
            let target_entropy = -(ad as f64);
            let mean_logp = ws.logp.iter().sum::<f64>() / nf;
            opt.step(&mut self.log_alpha, -(mean_logp + target_entropy))?;
        }
        Ok(loss)
    }

    fn soft_update_targets(&mut self) -> Result<()> {
        let tau = self.config.tau;
        for c in &mut self.critics {
            soft_update(&mut c.target, &c.net, tau)?;
        }
        if let Some(t) = self.actor_target.as_mut() {
            soft_update(t, &self.actor, tau)?;
        }
        Ok(())
    }
}

impl Policy for Agent {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        self.select_action(obs, ActionMode::Deterministic)
    }
}

fn actor_spec(config: &AgentConfig, obs_dim: usize, act_dim: usize, bound: f64) -> Result<MlpSpec> {
    let (out_dim, output) = match (config.algo, config.actor_output) {
        (Algo::Sac, _) => (2 * act_dim, OutputActivation::Linear),
        (_, ActorOutput::Linear) => (act_dim, OutputActivation::Linear),
        (_, ActorOutput::TanhScaled) => (act_dim, OutputActivation::TanhScaled { bound }),
    };
    MlpSpec::new(
        obs_dim,
        &config.arch.actor_hidden,
        out_dim,
        config.hidden_activation,
        output,
    )
}

/// Log-density of `tanh(u)` for `u = mean + exp(ls) * eps`, per component.
fn squashed_log_prob(u: f64, ls: f64, eps: f64) -> f64 {
    let gaussian = -0.5 * eps * eps - ls - 0.5 * math::ln(2.0 * PI);
    gaussian - 2.0 * (LN_2 - u - math::softplus(-2.0 * u))
}

fn concat_rows(left: &[f64], right: &[f64], ld: usize, rd: usize, out: &mut Vec<f64>) {
    out.clear();
    for (l, r) in left.chunks_exact(ld).zip(right.chunks_exact(rd)) {
        out.extend_from_slice(l);
        out.extend_from_slice(r);
    }
}
