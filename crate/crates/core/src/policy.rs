//! Context-conditioned soft actor-critic.
//!
//! The actor is a tanh-squashed diagonal Gaussian `π(a | s, φ)`; two critics
//! `Q(s, a, φ)` with Polyak-averaged targets supply the soft Bellman backup.
//! The temperature is fixed.

use crate::diffcore::gaussian::HALF_LOG_2PI;
use crate::diffcore::{backward, forward_tape, Activation, Adam, LogStdBounds, NetworkShape, ParamVector, Real};
use crate::dynmodel::Transition;
use crate::error::{check_len, Error, Result};
use crate::rng::{normal, Rng};

const LN_2: f64 = std::f64::consts::LN_2;
/// Largest action magnitude `act` emits; keeps samples strictly inside
/// `(-1, 1)` where `tanh` rounds to ±1.
const ACTION_LIMIT: f64 = 1.0 - 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SacConfig {
    pub discount: f64,
    pub lr: f64,
    pub target_update_rate: f64,
    pub target_update_interval: u64,
    pub temperature: f64,
    pub reward_scale: f64,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub log_std: LogStdBounds,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            lr: 3e-4,
            target_update_rate: 0.005,
            target_update_interval: 1,
            temperature: 1.0,
            reward_scale: 1.0,
            batch_size: 256,
            hidden: vec![64, 64, 64],
            activation: Activation::Relu,
            log_std: LogStdBounds { min: -10.0, max: 2.0 },
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("sac.{what} out of range")));
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("discount");
        }
        if !(self.lr > 0.0) {
            return bad("lr");
        }
        if !(self.target_update_rate > 0.0 && self.target_update_rate <= 1.0) {
            return bad("target_update_rate");
        }
        if self.target_update_interval == 0 {
            return bad("target_update_interval");
        }
        if !(self.temperature >= 0.0) {
            return bad("temperature");
        }
        if !(self.reward_scale > 0.0) {
            return bad("reward_scale");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        Ok(())
    }
}

/// Input and output sizes shared by actor and critics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SacDims {
    pub state_dim: usize,
    pub action_dim: usize,
    pub ctx_dim: usize,
    /// Leading state coordinates not fed to the networks.
    pub position_dims: usize,
}

impl SacDims {
    fn obs_dim(&self) -> usize {
        self.state_dim - self.position_dims
    }

    fn actor_shape(&self, cfg: &SacConfig) -> Result<NetworkShape> {
        NetworkShape::new(
            self.obs_dim() + self.ctx_dim,
            cfg.hidden.clone(),
            2 * self.action_dim,
            cfg.activation,
        )
    }

    fn critic_shape(&self, cfg: &SacConfig) -> Result<NetworkShape> {
        NetworkShape::new(
            self.obs_dim() + self.action_dim + self.ctx_dim,
            cfg.hidden.clone(),
            1,
            cfg.activation,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Mean,
}

/// Rows of `(s, a, s′, r, φ)` stored row-major.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SacBatch {
    rows: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    next_states: Vec<f64>,
    rewards: Vec<f64>,
    contexts: Vec<f64>,
}

impl SacBatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, dims: &SacDims, t: &Transition, context: &[f64]) -> Result<()> {
        check_len("sac state", dims.state_dim, t.state.len())?;
        check_len("sac next_state", dims.state_dim, t.next_state.len())?;
        check_len("sac action", dims.action_dim, t.action.len())?;
        check_len("sac context", dims.ctx_dim, context.len())?;
        self.states.extend_from_slice(&t.state[dims.position_dims..]);
        self.next_states.extend_from_slice(&t.next_state[dims.position_dims..]);
        self.actions.extend_from_slice(&t.action);
        self.rewards.push(t.reward);
        self.contexts.extend_from_slice(context);
        self.rows += 1;
        Ok(())
    }

    pub fn from_pairs<'a, I>(dims: &SacDims, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Transition, &'a [f64])>,
    {
        let mut batch = Self::new();
        for (t, c) in pairs {
            batch.push(dims, t, c)?;
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }
}

/// Actor, twin critics, their targets and the optimiser state.
#[derive(Clone, Debug, PartialEq)]
pub struct SacState {
    pub actor: ParamVector,
    pub critic1: ParamVector,
    pub critic2: ParamVector,
    pub target1: ParamVector,
    pub target2: ParamVector,
    pub update_count: u64,
    dims: SacDims,
    log_std: LogStdBounds,
    actor_opt: Adam,
    critic1_opt: Adam,
    critic2_opt: Adam,
}

/// Mean squared Bellman errors of the two critics before their step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticLosses {
    pub q1: f64,
    pub q2: f64,
}

impl CriticLosses {
    pub fn mean(&self) -> f64 {
        0.5 * (self.q1 + self.q2)
    }
}

fn concat_rows(rows: usize, parts: &[(&[f64], usize)]) -> Vec<f64> {
    let width: usize = parts.iter().map(|p| p.1).sum();
    let mut out = Vec::with_capacity(rows * width);
    for r in 0..rows {
        for (data, w) in parts {
            out.extend_from_slice(&data[r * w..(r + 1) * w]);
        }
    }
    out
}

/// `log(1 − tanh²(u))` computed without cancellation.
#[inline]
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - (-2.0 * u).softplus())
}

fn soft_update(target: &mut ParamVector, source: &ParamVector, tau: f64) {
    for (t, &s) in target.values_mut().iter_mut().zip(source.values()) {
        *t = (1.0 - tau) * *t + tau * s;
    }
}

fn check_finite(what: &'static str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what, step: None })
    }
}

/// Squashed sample with its log-density, for one batch of actor outputs.
struct Squashed {
    actions: Vec<f64>,
    log_prob: Vec<f64>,
}

impl SacState {
    pub fn new(dims: SacDims, cfg: &SacConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        if dims.position_dims > dims.state_dim {
            return Err(Error::Config("position_dims exceeds state_dim".into()));
        }
        let actor = ParamVector::init(dims.actor_shape(cfg)?, rng);
        let critic1 = ParamVector::init(dims.critic_shape(cfg)?, rng);
        let critic2 = ParamVector::init(dims.critic_shape(cfg)?, rng);
        Ok(Self {
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor_opt: Adam::new(actor.len(), cfg.lr),
            critic1_opt: Adam::new(critic1.len(), cfg.lr),
            critic2_opt: Adam::new(critic2.len(), cfg.lr),
            actor,
            critic1,
            critic2,
            update_count: 0,
            dims,
            log_std: cfg.log_std,
        })
    }

    /// Reassemble a state from saved parts.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        dims: SacDims,
        cfg: &SacConfig,
        nets: [ParamVector; 5],
        update_count: u64,
        optimizers: [Adam; 3],
    ) -> Result<Self> {
        let [actor, critic1, critic2, target1, target2] = nets;
        if actor.shape() != &dims.actor_shape(cfg)? {
            return Err(Error::Format("actor shape does not match the configuration".into()));
        }
        let critic_shape = dims.critic_shape(cfg)?;
        for net in [&critic1, &critic2, &target1, &target2] {
            if net.shape() != &critic_shape {
                return Err(Error::Format("critic shape does not match the configuration".into()));
            }
        }
        let [actor_opt, critic1_opt, critic2_opt] = optimizers;
        let lens = [actor.len(), critic1.len(), critic2.len()];
        for (opt, len) in [&actor_opt, &critic1_opt, &critic2_opt].into_iter().zip(lens) {
            if opt.state().0.len() != len {
                return Err(Error::Format("optimizer state length does not match its network".into()));
            }
        }
        Ok(Self {
            actor,
            critic1,
            critic2,
            target1,
            target2,
            update_count,
            dims,
            log_std: cfg.log_std,
            actor_opt,
            critic1_opt,
            critic2_opt,
        })
    }

    pub fn dims(&self) -> &SacDims {
        &self.dims
    }

    pub fn optimizers(&self) -> [&Adam; 3] {
        [&self.actor_opt, &self.critic1_opt, &self.critic2_opt]
    }

    fn actor_input(&self, obs: &[f64], contexts: &[f64], rows: usize) -> Vec<f64> {
        concat_rows(rows, &[(obs, self.dims.obs_dim()), (contexts, self.dims.ctx_dim)])
    }

    fn critic_input(&self, obs: &[f64], actions: &[f64], contexts: &[f64], rows: usize) -> Vec<f64> {
        concat_rows(
            rows,
            &[
                (obs, self.dims.obs_dim()),
                (actions, self.dims.action_dim),
                (contexts, self.dims.ctx_dim),
            ],
        )
    }

    /// Draw squashed actions given standard-normal `noise`.
    fn squash(&self, out: &[f64], noise: &[f64], rows: usize) -> Squashed {
        let ad = self.dims.action_dim;
        let mut actions = Vec::with_capacity(rows * ad);
        let mut log_prob = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &out[r * 2 * ad..(r + 1) * 2 * ad];
            let mut lp = 0.0;
            for i in 0..ad {
                let ls = self.log_std.apply(row[ad + i]);
                let eps = noise[r * ad + i];
                let u = row[i] + ls.exp() * eps;
                actions.push(u.tanh());
                lp += -0.5 * eps * eps - ls - HALF_LOG_2PI - log_one_minus_tanh_sq(u);
            }
            log_prob.push(lp);
        }
        Squashed { actions, log_prob }
    }

    /// Action for one observation (full state vector) and context.
    pub fn act(&self, state: &[f64], context: &[f64], mode: ActMode, rng: &mut Rng) -> Result<Vec<f64>> {
        check_len("policy state", self.dims.state_dim, state.len())?;
        check_len("policy context", self.dims.ctx_dim, context.len())?;
        let mut input = state[self.dims.position_dims..].to_vec();
        input.extend_from_slice(context);
        let tape = forward_tape(self.actor.shape(), self.actor.values(), &input, 1)?;
        let out = tape.output();
        let ad = self.dims.action_dim;
        let action: Vec<f64> = (0..ad)
            .map(|i| {
                let u = match mode {
                    ActMode::Mean => out[i],
                    ActMode::Sample => out[i] + self.log_std.apply(out[ad + i]).exp() * normal(rng),
                };
                u.tanh().clamp(-ACTION_LIMIT, ACTION_LIMIT)
            })
            .collect();
        check_finite("policy action", &action)?;
        Ok(action)
    }

    fn q_values(net: &ParamVector, input: &[f64], rows: usize) -> Result<Vec<f64>> {
        Ok(forward_tape(net.shape(), net.values(), input, rows)?.output().to_vec())
    }

    /// Soft Bellman targets `reward_scale·r + γ (min Q̄(s′, a′) − T log π(a′|s′))`.
    pub fn critic_targets(&self, batch: &SacBatch, cfg: &SacConfig, rng: &mut Rng) -> Result<Vec<f64>> {
        let rows = batch.rows;
        let ad = self.dims.action_dim;
        let next_in = self.actor_input(&batch.next_states, &batch.contexts, rows);
        let out = Self::q_values(&self.actor, &next_in, rows)?;
        let noise: Vec<f64> = (0..rows * ad).map(|_| normal(rng)).collect();
        let next = self.squash(&out, &noise, rows);
        let q_in = self.critic_input(&batch.next_states, &next.actions, &batch.contexts, rows);
        let q1 = Self::q_values(&self.target1, &q_in, rows)?;
        let q2 = Self::q_values(&self.target2, &q_in, rows)?;
        let targets: Vec<f64> = (0..rows)
            .map(|r| {
                let soft = q1[r].min(q2[r]) - cfg.temperature * next.log_prob[r];
                cfg.reward_scale * batch.rewards[r] + cfg.discount * soft
            })
            .collect();
        check_finite("critic target", &targets)?;
        Ok(targets)
    }

    /// One step on each critic toward the soft targets, then the periodic
    /// Polyak update of the target networks.
    pub fn critic_update(&mut self, batch: &SacBatch, cfg: &SacConfig, rng: &mut Rng) -> Result<CriticLosses> {
        if batch.is_empty() {
            return Err(Error::Usage("critic update needs a non-empty batch".into()));
        }
        let rows = batch.rows;
        let y = self.critic_targets(batch, cfg, rng)?;
        let input = self.critic_input(&batch.states, &batch.actions, &batch.contexts, rows);
        let mut losses = [0.0; 2];
        for (k, loss) in losses.iter_mut().enumerate() {
            let (net, opt) = match k {
                0 => (&mut self.critic1, &mut self.critic1_opt),
                _ => (&mut self.critic2, &mut self.critic2_opt),
            };
            let tape = forward_tape(net.shape(), net.values(), &input, rows)?;
            let q = tape.output();
            let mut d_out = Vec::with_capacity(rows);
            let mut total = 0.0;
            for r in 0..rows {
                let e = q[r] - y[r];
                total += e * e;
                d_out.push(2.0 * e / rows as f64);
            }
            let (grad, _) = backward(net.shape(), net.values(), &tape, &d_out)?;
            check_finite("critic gradient", &grad)?;
            opt.step(net.values_mut(), &grad);
            *loss = total / rows as f64;
        }
        self.update_count += 1;
        if self.update_count % cfg.target_update_interval == 0 {
            soft_update(&mut self.target1, &self.critic1, cfg.target_update_rate);
            soft_update(&mut self.target2, &self.critic2, cfg.target_update_rate);
        }
        Ok(CriticLosses {
            q1: losses[0],
            q2: losses[1],
        })
    }

    /// Actor loss `mean(T log π(a|s) − min(Q1, Q2)(s, a))` with
    /// `a = tanh(μ + σ ε)` for the given noise, and its gradient with respect
    /// to the actor parameters. States are the batch's `s` rows.
    pub fn actor_objective(&self, batch: &SacBatch, noise: &[f64], cfg: &SacConfig) -> Result<(f64, Vec<f64>)> {
        let rows = batch.rows;
        let ad = self.dims.action_dim;
        check_len("actor noise", rows * ad, noise.len())?;
        let input = self.actor_input(&batch.states, &batch.contexts, rows);
        let tape = forward_tape(self.actor.shape(), self.actor.values(), &input, rows)?;
        let out = tape.output();
        let sq = self.squash(out, noise, rows);

        let q_in = self.critic_input(&batch.states, &sq.actions, &batch.contexts, rows);
        let t1 = forward_tape(self.critic1.shape(), self.critic1.values(), &q_in, rows)?;
        let t2 = forward_tape(self.critic2.shape(), self.critic2.values(), &q_in, rows)?;
        let (q1, q2) = (t1.output(), t2.output());
        let mut d1 = vec![0.0; rows];
        let mut d2 = vec![0.0; rows];
        let mut total = 0.0;
        for r in 0..rows {
            let q = if q1[r] <= q2[r] {
                d1[r] = 1.0;
                q1[r]
            } else {
                d2[r] = 1.0;
                q2[r]
            };
            total += cfg.temperature * sq.log_prob[r] - q;
        }
        let (_, dq1) = backward(self.critic1.shape(), self.critic1.values(), &t1, &d1)?;
        let (_, dq2) = backward(self.critic2.shape(), self.critic2.values(), &t2, &d2)?;

        let in_w = self.dims.obs_dim() + ad + self.dims.ctx_dim;
        let a_off = self.dims.obs_dim();
        let w = 1.0 / rows as f64;
        let temp = cfg.temperature;
        let mut d_out = vec![0.0; out.len()];
        for r in 0..rows {
            for i in 0..ad {
                let raw = out[r * 2 * ad + ad + i];
                let (ls, dls) = self.log_std.apply_with_grad(raw);
                let sigma = ls.exp();
                let eps = noise[r * ad + i];
                let a = sq.actions[r * ad + i];
                let dq_da = dq1[r * in_w + a_off + i] + dq2[r * in_w + a_off + i];
                let jac = 1.0 - a * a;
                // d log π / du = 2 tanh(u)
                d_out[r * 2 * ad + i] = w * (temp * 2.0 * a - dq_da * jac);
                d_out[r * 2 * ad + ad + i] =
                    w * dls * (temp * (-1.0 + 2.0 * a * sigma * eps) - dq_da * jac * sigma * eps);
            }
        }
        let (grad, _) = backward(self.actor.shape(), self.actor.values(), &tape, &d_out)?;
        let loss = total * w;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                what: "actor loss",
                step: None,
            });
        }
        check_finite("actor gradient", &grad)?;
        Ok((loss, grad))
    }

    /// One reparameterised step on the actor. Returns the loss before the
    /// step.
    pub fn actor_update(&mut self, batch: &SacBatch, cfg: &SacConfig, rng: &mut Rng) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Usage("actor update needs a non-empty batch".into()));
        }
        let noise: Vec<f64> = (0..batch.rows * self.dims.action_dim).map(|_| normal(rng)).collect();
        let (loss, grad) = self.actor_objective(batch, &noise, cfg)?;
        self.actor_opt.step(self.actor.values_mut(), &grad);
        Ok(loss)
    }

    /// Critic step followed by an actor step on the same batch.
    pub fn update(&mut self, batch: &SacBatch, cfg: &SacConfig, rng: &mut Rng) -> Result<(f64, f64)> {
        let critic = self.critic_update(batch, cfg, rng)?;
        let actor = self.actor_update(batch, cfg, rng)?;
        Ok((critic.mean(), actor))
    }
}

/// `Σ_t γ^t r_t`.
pub fn discounted_return(rewards: &[f64], discount: f64) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    for r in rewards {
        total += weight * r;
        weight *= discount;
    }
    total
}
