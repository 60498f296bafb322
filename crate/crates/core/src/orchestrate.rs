//! The two top-level loops: meta-training of the context model together
//! with the context-conditioned policy, and test-time adaptation with
//! experience relabeling.

use std::collections::BTreeMap;
use std::path::PathBuf;

use log::{debug, info};
use rand::Rng as _;

use crate::diffcore::{Adam, ContextVector, Gradient, ParamVector};
use crate::dynmodel::{AdaptReport, ContextModel, ContinuedAdaptConfig, Dataset, ModelConfig};
use crate::envs::{self, EnvFamily, Partition, SplitSpec, TaskSpec};
use crate::error::{Error, Result};
use crate::policy::{ActMode, SacBatch, SacConfig, SacDims, SacState};
use crate::replay::{self, ActionSource, MultitaskReplayBuffer, RelabelConfig, RelabelMode, TaskId};
use crate::rng::{stream, Rng, Stream};

/// Meta-trained model parameters `θ` with the prior context `φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaModel {
    pub model: ContextModel,
    pub params: ParamVector,
    pub prior: ContextVector,
}

impl MetaModel {
    pub fn new(cfg: ModelConfig, rng: &mut Rng) -> Result<Self> {
        let model = ContextModel::new(cfg)?;
        let (params, prior) = model.init(rng);
        Ok(Self { model, params, prior })
    }

    /// The meta-trained inner loop: `k` context steps from the prior.
    pub fn identify(&self, data: &Dataset) -> Result<ContextVector> {
        let cfg = self.model.config();
        self.model
            .adapt_context(&self.params, &self.prior, data, cfg.inner_lr, cfg.inner_steps)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaTrainConfig {
    pub outer_iterations: usize,
    /// Size of the enumerated training task set.
    pub train_tasks: usize,
    pub policy_steps_per_iter: usize,
    pub model_meta_steps_per_iter: usize,
    /// Episodes collected per phase (adapt, eval) for the sampled task.
    pub exploration_episodes: usize,
    /// Transitions in each of a task's `D_adapt` / `D_eval` meta-batches.
    pub model_batch_size: usize,
    pub gradient_norm_clip: f64,
    /// Held-out train-partition tasks used for the `mean_return` metric.
    pub eval_tasks: usize,
    /// Evaluate every this many iterations (0 disables).
    pub eval_every: usize,
    pub horizon: usize,
}

impl Default for MetaTrainConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 200,
            train_tasks: 100,
            policy_steps_per_iter: 1000,
            model_meta_steps_per_iter: 10,
            exploration_episodes: 1,
            model_batch_size: 64,
            gradient_norm_clip: 10.0,
            eval_tasks: 5,
            eval_every: 10,
            horizon: envs::HORIZON,
        }
    }
}

impl MetaTrainConfig {
    /// Defaults with the family's meta-train task count.
    pub fn for_family(family: EnvFamily) -> Self {
        Self {
            train_tasks: default_task_counts(family).0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("meta.train_tasks", self.train_tasks),
            ("meta.exploration_episodes", self.exploration_episodes),
            ("meta.model_batch_size", self.model_batch_size),
            ("meta.horizon", self.horizon),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{key} must be positive")));
            }
        }
        if !(self.gradient_norm_clip > 0.0) {
            return Err(Error::Config("meta.gradient_norm_clip must be positive".into()));
        }
        Ok(())
    }
}

/// `(meta-train, meta-test)` task counts per family.
pub fn default_task_counts(family: EnvFamily) -> (usize, usize) {
    match family {
        EnvFamily::Vel1d => (100, 30),
        EnvFamily::Dir2d => (100, 10),
        EnvFamily::NegatedActions => (10, 10),
        EnvFamily::RandParams => (40, 20),
    }
}

/// Model configuration matching a family's dimensions. Reward-only families
/// get a reward-only model.
pub fn model_config_for(family: EnvFamily) -> ModelConfig {
    let mut cfg = ModelConfig::new(family.state_dim(), family.action_dim(), !family.reward_only());
    cfg.position_dims = family.position_dims();
    cfg
}

pub fn sac_dims_for(family: EnvFamily, ctx_dim: usize) -> SacDims {
    SacDims {
        state_dim: family.state_dim(),
        action_dim: family.action_dim(),
        ctx_dim,
        position_dims: family.position_dims(),
    }
}

/// Everything meta-training needs besides the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSetup {
    pub split: SplitSpec,
    pub model: ModelConfig,
    pub sac: SacConfig,
    pub meta: MetaTrainConfig,
}

impl TrainSetup {
    pub fn for_split(split: SplitSpec) -> Self {
        let family = split.family;
        Self {
            model: model_config_for(family),
            sac: SacConfig::default(),
            meta: MetaTrainConfig::for_family(family),
            split,
        }
    }
}

/// Per-iteration summary emitted by [`MetaTrainer`].
#[derive(Clone, Debug, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    pub samples_collected: usize,
    pub model_meta_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub mean_return: Option<f64>,
    /// Largest meta-gradient norm applied this iteration (after clipping).
    pub max_applied_grad_norm: Option<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// State of an in-progress meta-training run.
#[derive(Clone, Debug)]
pub struct MetaTrainer {
    pub setup: TrainSetup,
    pub meta: MetaModel,
    pub sac: SacState,
    pub buffer: MultitaskReplayBuffer,
    /// Freshest adapted context of every visited task.
    pub contexts: BTreeMap<TaskId, ContextVector>,
    pub train_tasks: Vec<TaskSpec>,
    pub eval_tasks: Vec<TaskSpec>,
    pub iteration: usize,
    pub samples_collected: usize,
    model_opt: Adam,
    env_rng: Rng,
    sample_rng: Rng,
    eval_seed: u64,
}

impl MetaTrainer {
    pub fn new(setup: TrainSetup, seed: u64) -> Result<Self> {
        setup.meta.validate()?;
        setup.sac.validate()?;
        let family = setup.split.family;
        if setup.model.state_dim != family.state_dim() || setup.model.action_dim != family.action_dim() {
            return Err(Error::Config("model dimensions do not match the environment family".into()));
        }
        let mut task_rng = stream(seed, Stream::Tasks);
        let train_tasks = setup
            .split
            .enumerate_tasks(Partition::Train, setup.meta.train_tasks, &mut task_rng)?;
        let eval_tasks = setup
            .split
            .enumerate_tasks(Partition::Train, setup.meta.eval_tasks, &mut task_rng)?;
        let meta = MetaModel::new(setup.model.clone(), &mut stream(seed, Stream::ModelInit))?;
        let dims = sac_dims_for(family, setup.model.ctx_dim);
        let sac = SacState::new(dims, &setup.sac, &mut stream(seed, Stream::PolicyInit))?;
        let model_opt = Adam::new(meta.params.len() + meta.prior.dim(), setup.model.outer_lr);
        Ok(Self {
            meta,
            sac,
            buffer: MultitaskReplayBuffer::default(),
            contexts: BTreeMap::new(),
            train_tasks,
            eval_tasks,
            iteration: 0,
            samples_collected: 0,
            model_opt,
            env_rng: stream(seed, Stream::Env),
            sample_rng: stream(seed, Stream::Sampling),
            eval_seed: seed,
            setup,
        })
    }

    fn collect(&mut self, task: &TaskSpec, context: &ContextVector) -> Result<Dataset> {
        let episodes = self.setup.meta.exploration_episodes;
        let horizon = self.setup.meta.horizon;
        let data = collect(
            &self.sac,
            task,
            context,
            episodes * horizon,
            horizon,
            ActMode::Sample,
            &mut self.env_rng,
        )?;
        self.samples_collected += data.len();
        Ok(data)
    }

    /// One meta-gradient step on `(θ, φ)` over a meta-batch of tasks.
    /// Returns the mean post-adaptation loss and the applied gradient norm.
    pub fn model_step(&mut self) -> Result<(f64, f64)> {
        let cfg = self.meta.model.config().clone();
        let np = self.meta.params.len();
        let mut total = vec![0.0; np + self.meta.prior.dim()];
        let mut loss = 0.0;
        for _ in 0..cfg.meta_batch_size {
            let (_, adapt, eval) = self
                .buffer
                .sample_task_batches(self.setup.meta.model_batch_size, &mut self.sample_rng)?;
            let out = self.meta.model.meta_loss(&self.meta.params, &self.meta.prior, &adapt, &eval)?;
            loss += out.value;
            let g = out.gradient;
            let parts = g.wrt_params.iter().flatten().chain(g.wrt_context.iter().flatten());
            for (t, x) in total.iter_mut().zip(parts) {
                *t += x;
            }
        }
        let n = cfg.meta_batch_size as f64;
        total.iter_mut().for_each(|x| *x /= n);
        let ctx_part = total.split_off(np);
        let mut grad = Gradient {
            wrt_params: Some(total),
            wrt_context: Some(ctx_part),
        };
        grad.clip_norm(self.setup.meta.gradient_norm_clip);
        let applied = grad.norm();
        let mut flat: Vec<f64> = self.meta.params.values().to_vec();
        flat.extend_from_slice(self.meta.prior.values());
        let mut g = grad.wrt_params.unwrap_or_default();
        g.extend(grad.wrt_context.unwrap_or_default());
        self.model_opt.step(&mut flat, &g);
        let prior = flat.split_off(np);
        self.meta.params.set_values(flat)?;
        self.meta.prior = ContextVector::new(prior)?;
        Ok((loss / n, applied))
    }

    /// One SAC update on transitions drawn across visited tasks, each
    /// conditioned on its task's stored context.
    pub fn policy_step(&mut self) -> Result<(f64, f64)> {
        let ids: Vec<TaskId> = self.contexts.keys().copied().collect();
        if ids.is_empty() {
            return Err(Error::NotReady("no visited tasks to train the policy on".into()));
        }
        let dims = *self.sac.dims();
        let mut batch = SacBatch::new();
        for _ in 0..self.setup.sac.batch_size {
            let id = ids[self.sample_rng.random_range(0..ids.len())];
            let store = self.buffer.task(id).expect("visited tasks have data");
            let t = &store[self.sample_rng.random_range(0..store.len())];
            batch.push(&dims, t, self.contexts[&id].values())?;
        }
        self.sac.update(&batch, &self.setup.sac, &mut self.sample_rng)
    }

    /// One outer iteration: collect `D_adapt` with the prior context,
    /// identify the task, collect `D_eval` with the adapted context, store
    /// both, then interleave meta-model and policy updates.
    pub fn outer_step(&mut self) -> Result<IterationStats> {
        let id = self.sample_rng.random_range(0..self.train_tasks.len());
        let task = self.train_tasks[id].clone();
        let prior = self.meta.prior.clone();
        let d_adapt = self.collect(&task, &prior)?;
        let phi = self.meta.identify(&d_adapt)?;
        let d_eval = self.collect(&task, &phi)?;
        self.buffer.insert(id, &d_adapt)?;
        self.buffer.insert(id, &d_eval)?;
        self.contexts.insert(id, phi);
        self.meta.model.fit_normalizer(self.buffer.iter().map(|(_, t)| t));

        let meta_steps = self.setup.meta.model_meta_steps_per_iter;
        let policy_steps = self.setup.meta.policy_steps_per_iter;
        let (mut model_losses, mut critic, mut actor) = (Vec::new(), Vec::new(), Vec::new());
        let mut max_norm: Option<f64> = None;
        for i in 0..meta_steps.max(policy_steps) {
            if i < meta_steps {
                let (l, norm) = self.model_step()?;
                model_losses.push(l);
                max_norm = Some(max_norm.map_or(norm, |m| m.max(norm)));
            }
            if i < policy_steps {
                let (c, a) = self.policy_step()?;
                critic.push(c);
                actor.push(a);
            }
        }
        self.iteration += 1;
        let every = self.setup.meta.eval_every;
        let mean_return = if every > 0 && self.iteration % every == 0 && !self.eval_tasks.is_empty() {
            let cfg = EvalConfig {
                context_points: self.setup.meta.horizon,
                episodes: 1,
                horizon: self.setup.meta.horizon,
            };
            let mut rng = crate::rng::substream(self.eval_seed, Stream::Eval, self.iteration as u64);
            mean(&evaluate(&self.meta, &self.sac, &self.eval_tasks, &cfg, &mut rng)?)
        } else {
            None
        };
        let stats = IterationStats {
            iteration: self.iteration,
            samples_collected: self.samples_collected,
            model_meta_loss: mean(&model_losses),
            critic_loss: mean(&critic),
            actor_loss: mean(&actor),
            mean_return,
            max_applied_grad_norm: max_norm,
        };
        debug!("meta-train iteration {}: {:?}", self.iteration, stats);
        Ok(stats)
    }
}

/// Run all outer iterations. `observe` sees each iteration's statistics and
/// the trainer, and may return the path of a checkpoint it wrote; numeric
/// failures are reported as divergence naming the last such checkpoint.
pub fn meta_train<F>(setup: TrainSetup, seed: u64, mut observe: F) -> Result<MetaTrainer>
where
    F: FnMut(&IterationStats, &MetaTrainer) -> Result<Option<PathBuf>>,
{
    let mut trainer = MetaTrainer::new(setup, seed)?;
    let mut last_checkpoint = None;
    for _ in 0..trainer.setup.meta.outer_iterations {
        let stats = match trainer.outer_step() {
            Ok(s) => s,
            Err(e @ Error::NonFinite { .. }) => {
                return Err(Error::Diverged {
                    iteration: trainer.iteration + 1,
                    last_checkpoint,
                    source: Box::new(e),
                })
            }
            Err(e) => return Err(e),
        };
        if stats.iteration % 10 == 0 {
            info!(
                "iteration {} samples {} model {:?} return {:?}",
                stats.iteration, stats.samples_collected, stats.model_meta_loss, stats.mean_return
            );
        }
        if let Some(path) = observe(&stats, &trainer)? {
            last_checkpoint = Some(path);
        }
    }
    Ok(trainer)
}

/// Collect `points` transitions with the policy conditioned on `context`,
/// over as many episodes as needed (the last one possibly cut short).
pub fn collect(
    sac: &SacState,
    task: &TaskSpec,
    context: &ContextVector,
    points: usize,
    horizon: usize,
    mode: ActMode,
    rng: &mut Rng,
) -> Result<Dataset> {
    let mut data = Dataset::default();
    while data.len() < points {
        let h = horizon.min(points - data.len());
        let out = envs::rollout(task, |s, r| sac.act(s, context.values(), mode, r), h, rng)?;
        data.extend(&out.transitions);
    }
    Ok(data)
}

/// Mean undiscounted return of mean-action rollouts.
pub fn policy_return(
    sac: &SacState,
    task: &TaskSpec,
    context: &ContextVector,
    episodes: usize,
    horizon: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if episodes == 0 {
        return Err(Error::Usage("policy_return needs at least one episode".into()));
    }
    let mut total = 0.0;
    for _ in 0..episodes {
        total += envs::rollout(task, |s, r| sac.act(s, context.values(), ActMode::Mean, r), horizon, rng)?.ret;
    }
    Ok(total / episodes as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    /// Transitions collected with the prior context for identification.
    pub context_points: usize,
    pub episodes: usize,
    pub horizon: usize,
}

/// Per task: identify the context from a small prior-context batch, then
/// report the mean return of the mean-action policy.
pub fn evaluate(
    meta: &MetaModel,
    sac: &SacState,
    tasks: &[TaskSpec],
    cfg: &EvalConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if tasks.is_empty() {
        return Err(Error::Usage("evaluate needs at least one task".into()));
    }
    tasks
        .iter()
        .map(|task| {
            let data = collect(sac, task, &meta.prior, cfg.context_points, cfg.horizon, ActMode::Sample, rng)?;
            let phi = meta.identify(&data)?;
            policy_return(sac, task, &phi, cfg.episodes, cfg.horizon, rng)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptConfig {
    pub adapt_points: usize,
    /// Context-only model steps (`N`).
    pub context_steps: usize,
    /// Full-parameter model steps (`M`).
    pub full_steps: usize,
    /// SAC steps per generated synthetic batch.
    pub policy_steps_per_batch: usize,
    /// Total SAC steps on relabeled data; 0 gives context adaptation only.
    pub policy_budget: usize,
    /// Synthetic transitions generated per relabel call.
    pub relabel_batch: usize,
    pub real_fraction: f64,
    pub train_frac: f64,
    pub gate_threshold: f64,
    pub relabel: RelabelConfig,
    pub eval_episodes: usize,
    pub horizon: usize,
}

impl AdaptConfig {
    pub fn for_family(family: EnvFamily) -> Self {
        let (adapt_points, context_steps, full_steps) = match family {
            EnvFamily::Vel1d => (200, 10, 100),
            EnvFamily::Dir2d => (400, 20, 0),
            EnvFamily::NegatedActions => (400, 10, 0),
            EnvFamily::RandParams => (400, 10, 100),
        };
        let mode = if family.reward_only() {
            RelabelMode::RewardOnly
        } else {
            RelabelMode::Full
        };
        Self {
            adapt_points,
            context_steps,
            full_steps,
            policy_steps_per_batch: 250,
            policy_budget: 2000,
            relabel_batch: 10_000,
            real_fraction: 0.05,
            train_frac: 0.8,
            gate_threshold: -3.0,
            relabel: RelabelConfig {
                mode,
                ..RelabelConfig::default()
            },
            eval_episodes: 1,
            horizon: envs::HORIZON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.adapt_points < 2 {
            return Err(Error::Config("adapt.adapt_points must be at least 2".into()));
        }
        if self.policy_budget > 0 && (self.policy_steps_per_batch == 0 || self.relabel_batch == 0) {
            return Err(Error::Config(
                "adapt.policy_steps_per_batch and adapt.relabel_batch must be positive".into(),
            ));
        }
        if self.eval_episodes == 0 || self.horizon == 0 {
            return Err(Error::Config("adapt.eval_episodes and adapt.horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Progress of relabel training after each synthetic batch.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptStats {
    pub round: usize,
    pub policy_steps: usize,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub synthetic_used: usize,
}

#[derive(Clone, Debug)]
pub struct AdaptOutcome {
    pub sac: SacState,
    pub model_params: ParamVector,
    pub context: ContextVector,
    pub report: AdaptReport,
    /// Return with the adapted context before any relabel training.
    pub return_before: f64,
    /// Return after relabel training (equal to `return_before` when none
    /// happened).
    pub return_after: f64,
    /// Synthetic transitions consumed by SAC updates.
    pub synthetic_used: usize,
    pub samples_collected: usize,
    pub rounds: Vec<AdaptStats>,
}

/// Generator for evaluation rollouts, split off `rng` with one draw. Both
/// returns reported by [`adapt`] replay it, so they share initial states.
pub fn fork_eval_rng(rng: &mut Rng) -> Rng {
    <Rng as rand::SeedableRng>::seed_from_u64(rng.random())
}

/// Test-time adaptation on one task: identify the model on fresh data and,
/// if the adapted model validates, keep training the policy on relabeled
/// replay data mixed with the fresh data.
#[allow(clippy::too_many_arguments)]
pub fn adapt(
    meta: &MetaModel,
    sac: &SacState,
    sac_cfg: &SacConfig,
    buffer: &MultitaskReplayBuffer,
    task: &TaskSpec,
    cfg: &AdaptConfig,
    rng: &mut Rng,
) -> Result<AdaptOutcome> {
    cfg.validate()?;
    let eval_rng = fork_eval_rng(rng);
    let d_adapt = collect(sac, task, &meta.prior, cfg.adapt_points, cfg.horizon, ActMode::Sample, rng)?;
    let ca = ContinuedAdaptConfig {
        context_steps: cfg.context_steps,
        full_steps: cfg.full_steps,
        train_frac: cfg.train_frac,
        gate_threshold: cfg.gate_threshold,
    };
    let (params, context, report) = meta.model.continued_adapt(&meta.params, &meta.prior, &d_adapt, &ca, rng)?;
    let return_before = policy_return(sac, task, &context, cfg.eval_episodes, cfg.horizon, &mut eval_rng.clone())?;
    let mut adapted = sac.clone();
    let mut rounds = Vec::new();
    let mut synthetic_used = 0;
    if report.gate_passed && cfg.policy_budget > 0 {
        let dims = *sac.dims();
        let n_real = replay::real_count(cfg.real_fraction, sac_cfg.batch_size);
        let n_syn = sac_cfg.batch_size - n_real;
        let mut steps = 0;
        while steps < cfg.policy_budget {
            let snapshot = adapted.clone();
            let source = ActionSource {
                sac: &snapshot,
                mode: ActMode::Sample,
            };
            let synthetic = replay::relabel(
                buffer,
                &meta.model,
                &params,
                &context,
                cfg.relabel_batch,
                &cfg.relabel,
                Some(source),
                rng,
            )?;
            let this_round = cfg.policy_steps_per_batch.min(cfg.policy_budget - steps);
            let (mut c_sum, mut a_sum) = (0.0, 0.0);
            for _ in 0..this_round {
                let mixed = replay::mixed_batch(
                    &d_adapt,
                    &synthetic.transitions,
                    cfg.real_fraction,
                    sac_cfg.batch_size,
                    rng,
                )?;
                let batch = SacBatch::from_pairs(&dims, mixed.iter().map(|t| (t, context.values())))?;
                let (c, a) = adapted.update(&batch, sac_cfg, rng)?;
                c_sum += c;
                a_sum += a;
                synthetic_used += n_syn;
            }
            steps += this_round;
            rounds.push(AdaptStats {
                round: rounds.len() + 1,
                policy_steps: steps,
                critic_loss: c_sum / this_round as f64,
                actor_loss: a_sum / this_round as f64,
                synthetic_used,
            });
        }
    }
    let return_after = if rounds.is_empty() {
        return_before
    } else {
        policy_return(&adapted, task, &context, cfg.eval_episodes, cfg.horizon, &mut eval_rng.clone())?
    };
    Ok(AdaptOutcome {
        sac: adapted,
        model_params: params,
        context,
        report,
        return_before,
        return_after,
        synthetic_used,
        samples_collected: d_adapt.len(),
        rounds,
    })
}

/// Single-task SAC with the context held at zeros: a baseline, and a check
/// that the policy learner works on its own.
#[derive(Clone, Debug, PartialEq)]
pub struct PlainSacConfig {
    pub env_steps: usize,
    /// Steps of uniform random actions before updates begin.
    pub warmup_steps: usize,
    /// Evaluate every this many environment steps.
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub horizon: usize,
}

impl Default for PlainSacConfig {
    fn default() -> Self {
        Self {
            env_steps: 100_000,
            warmup_steps: 1000,
            eval_every: 5000,
            eval_episodes: 5,
            horizon: envs::HORIZON,
        }
    }
}

/// Train on one task with one SAC update per environment step after the
/// warmup. Returns the final policy and `(env_steps, mean return)` at each
/// evaluation; every evaluation replays the same initial states.
pub fn train_plain_sac(
    task: &TaskSpec,
    ctx_dim: usize,
    sac_cfg: &SacConfig,
    cfg: &PlainSacConfig,
    seed: u64,
) -> Result<(SacState, Vec<(usize, f64)>)> {
    if cfg.eval_every == 0 || cfg.eval_episodes == 0 || cfg.horizon == 0 {
        return Err(Error::Config("plain SAC evaluation settings must be positive".into()));
    }
    let dims = sac_dims_for(task.family, ctx_dim);
    let mut sac = SacState::new(dims, sac_cfg, &mut stream(seed, Stream::PolicyInit))?;
    let mut env_rng = stream(seed, Stream::Env);
    let mut rng = stream(seed, Stream::Sampling);
    let eval_rng = stream(seed, Stream::Eval);
    let ctx = ContextVector::zeros(ctx_dim);
    let mut data = Dataset::default();
    let mut curve = Vec::new();
    let mut st = envs::reset_with_horizon(task, cfg.horizon, &mut env_rng);
    for i in 0..cfg.env_steps {
        let action = if i < cfg.warmup_steps {
            (0..dims.action_dim).map(|_| rng.random_range(-1.0..1.0)).collect()
        } else {
            sac.act(&st.observation, ctx.values(), ActMode::Sample, &mut rng)?
        };
        let out = envs::step(task, &st, &action)?;
        data.push(crate::dynmodel::Transition {
            state: st.observation.clone(),
            action,
            next_state: out.state.observation.clone(),
            reward: out.reward,
            step_index: st.t,
        });
        st = if out.done {
            envs::reset_with_horizon(task, cfg.horizon, &mut env_rng)
        } else {
            out.state
        };
        if i >= cfg.warmup_steps {
            let all = data.transitions();
            let mut batch = SacBatch::new();
            for _ in 0..sac_cfg.batch_size {
                batch.push(&dims, &all[rng.random_range(0..all.len())], ctx.values())?;
            }
            sac.update(&batch, sac_cfg, &mut rng)?;
        }
        if (i + 1) % cfg.eval_every == 0 {
            let ret = policy_return(&sac, task, &ctx, cfg.eval_episodes, cfg.horizon, &mut eval_rng.clone())?;
            debug!("plain SAC step {}: return {ret:.3}", i + 1);
            curve.push((i + 1, ret));
        }
    }
    Ok((sac, curve))
}
