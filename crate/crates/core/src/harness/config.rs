//! Flat `section.key = value` run configuration.
//!
//! Lines are UTF-8; `#` starts a comment; blank lines are ignored. Defaults
//! depend on the environment family, so `env.family` and `env.split` are
//! read first and every other key is applied on top of the family defaults.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::diffcore::{Activation, MetaGradMode};
use crate::envs::{EnvFamily, SplitSpec};
use crate::error::{Error, Result};
use crate::orchestrate::{self, AdaptConfig, EvalConfig, TrainSetup};
use crate::replay::RelabelMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    MetaTrain,
    Adapt,
    Eval,
    CheckGrads,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::MetaTrain => "meta_train",
            Mode::Adapt => "adapt",
            Mode::Eval => "eval",
            Mode::CheckGrads => "check_grads",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "meta_train" => Some(Mode::MetaTrain),
            "adapt" => Some(Mode::Adapt),
            "eval" => Some(Mode::Eval),
            "check_grads" => Some(Mode::CheckGrads),
            _ => None,
        }
    }
}

/// Settings of the finite-difference gradient battery.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub trials: usize,
    pub tolerance: f64,
    pub fd_step: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            tolerance: 1e-4,
            fd_step: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub run_id: String,
    /// Record elapsed time in metrics. Off by default so repeated runs
    /// produce identical files.
    pub wall_clock: bool,
    /// Write a checkpoint every this many meta-training iterations (the
    /// final one is always written).
    pub checkpoint_every: usize,
    /// Checkpoint read by `adapt` and `eval`; defaults to the newest
    /// `ckpt_<iter>.bin` in `out_dir`.
    pub checkpoint: Option<PathBuf>,
    pub test_tasks: usize,
    pub train: TrainSetup,
    pub adapt: AdaptConfig,
    pub eval: EvalConfig,
    pub check_grads: GradCheckConfig,
}

impl RunConfig {
    pub fn defaults(family: EnvFamily, split: &str) -> Result<Self> {
        let split = SplitSpec::named(family, split)?;
        Ok(Self {
            mode: Mode::MetaTrain,
            seed: 0,
            out_dir: PathBuf::from("out"),
            run_id: "run".into(),
            wall_clock: false,
            checkpoint_every: 50,
            checkpoint: None,
            test_tasks: orchestrate::default_task_counts(family).1,
            train: TrainSetup::for_split(split),
            adapt: AdaptConfig::for_family(family),
            eval: EvalConfig {
                context_points: AdaptConfig::for_family(family).adapt_points,
                episodes: 1,
                horizon: crate::envs::HORIZON,
            },
            check_grads: GradCheckConfig::default(),
        })
    }

    pub fn family(&self) -> EnvFamily {
        self.train.split.family
    }

    /// Parse configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `section.key = value`")))?;
            entries.push((line_no, key.trim().to_string(), value.trim().to_string()));
        }
        let lookup = |k: &str| entries.iter().rev().find(|e| e.1 == k).map(|e| (e.0, e.2.clone()));
        let family = match lookup("env.family") {
            Some((line, v)) => EnvFamily::parse(&v)
                .ok_or_else(|| Error::Config(format!("line {line}: env.family: unknown family '{v}'")))?,
            None => EnvFamily::Vel1d,
        };
        let split = lookup("env.split").map_or_else(|| SplitSpec::default_name(family).to_string(), |e| e.1);
        let mut cfg = Self::defaults(family, &split)?;
        for (line, key, value) in &entries {
            if key == "env.family" || key == "env.split" {
                continue;
            }
            cfg.set(key, value)
                .map_err(|msg| Error::Config(format!("line {line}: {key}: {msg}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.meta.validate()?;
        self.train.sac.validate()?;
        self.train.model.shape()?;
        self.adapt.validate()?;
        if self.test_tasks == 0 {
            return Err(Error::Config("env.test_tasks must be positive".into()));
        }
        if self.eval.episodes == 0 || self.eval.context_points == 0 || self.eval.horizon == 0 {
            return Err(Error::Config("eval settings must be positive".into()));
        }
        if self.check_grads.trials == 0 {
            return Err(Error::Config("check_grads.trials must be positive".into()));
        }
        Ok(())
    }

    /// Apply one key. The error message names what was wrong with the
    /// value, or that the key is unknown.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let m = &mut self.train.model;
        let s = &mut self.train.sac;
        let t = &mut self.train.meta;
        let a = &mut self.adapt;
        match key {
            "run.mode" => self.mode = Mode::parse(value).ok_or_else(|| format!("unknown mode '{value}'"))?,
            "run.seed" => self.seed = num(value)?,
            "run.out_dir" => self.out_dir = PathBuf::from(value),
            "run.id" => self.run_id = value.to_string(),
            "run.wall_clock" => self.wall_clock = boolean(value)?,
            "run.checkpoint_every" => self.checkpoint_every = num(value)?,
            "run.checkpoint" => {
                self.checkpoint = (!value.is_empty()).then(|| PathBuf::from(value));
            }
            "env.test_tasks" => self.test_tasks = num(value)?,

            "model.ctx_dim" => m.ctx_dim = num(value)?,
            "model.inner_lr" => m.inner_lr = num(value)?,
            "model.inner_steps" => m.inner_steps = num(value)?,
            "model.meta_batch_size" => m.meta_batch_size = num(value)?,
            "model.predict_delta" => m.predict_delta = boolean(value)?,
            "model.hidden" => m.hidden = list(value)?,
            "model.activation" => m.activation = activation(value)?,
            "model.outer_lr" => m.outer_lr = num(value)?,
            "model.meta_grad_mode" => {
                m.meta_grad_mode = MetaGradMode::parse(value).ok_or_else(|| format!("unknown mode '{value}'"))?
            }
            "model.log_std_min" => m.log_std.min = num(value)?,
            "model.log_std_max" => m.log_std.max = num(value)?,

            "sac.discount" => s.discount = num(value)?,
            "sac.lr" => s.lr = num(value)?,
            "sac.target_update_rate" => s.target_update_rate = num(value)?,
            "sac.target_update_interval" => s.target_update_interval = num(value)?,
            "sac.temperature" => s.temperature = num(value)?,
            "sac.reward_scale" => s.reward_scale = num(value)?,
            "sac.batch_size" => s.batch_size = num(value)?,
            "sac.hidden" => s.hidden = list(value)?,
            "sac.activation" => s.activation = activation(value)?,

            "meta.outer_iterations" => t.outer_iterations = num(value)?,
            "meta.train_tasks" => t.train_tasks = num(value)?,
            "meta.policy_steps_per_iter" => t.policy_steps_per_iter = num(value)?,
            "meta.model_meta_steps_per_iter" => t.model_meta_steps_per_iter = num(value)?,
            "meta.exploration_episodes" => t.exploration_episodes = num(value)?,
            "meta.model_batch_size" => t.model_batch_size = num(value)?,
            "meta.gradient_norm_clip" => t.gradient_norm_clip = num(value)?,
            "meta.eval_tasks" => t.eval_tasks = num(value)?,
            "meta.eval_every" => t.eval_every = num(value)?,
            "meta.horizon" => t.horizon = num(value)?,

            "adapt.adapt_points" => a.adapt_points = num(value)?,
            "adapt.context_steps" => a.context_steps = num(value)?,
            "adapt.full_steps" => a.full_steps = num(value)?,
            "adapt.policy_steps_per_batch" => a.policy_steps_per_batch = num(value)?,
            "adapt.policy_budget" => a.policy_budget = num(value)?,
            "adapt.relabel_batch" => a.relabel_batch = num(value)?,
            "adapt.real_fraction" => a.real_fraction = num(value)?,
            "adapt.train_frac" => a.train_frac = num(value)?,
            "adapt.gate_threshold" => a.gate_threshold = num(value)?,
            "adapt.relabel_mode" => {
                a.relabel.mode = RelabelMode::parse(value).ok_or_else(|| format!("unknown mode '{value}'"))?
            }
            "adapt.cross_task_count" => a.relabel.cross_task_count = num(value)?,
            "adapt.pool_size" => a.relabel.pool_size = num(value)?,
            "adapt.stochastic_relabel" => a.relabel.stochastic = boolean(value)?,
            "adapt.eval_episodes" => a.eval_episodes = num(value)?,
            "adapt.horizon" => a.horizon = num(value)?,

            "eval.context_points" => self.eval.context_points = num(value)?,
            "eval.episodes" => self.eval.episodes = num(value)?,
            "eval.horizon" => self.eval.horizon = num(value)?,

            "check_grads.trials" => self.check_grads.trials = num(value)?,
            "check_grads.tolerance" => self.check_grads.tolerance = num(value)?,
            "check_grads.fd_step" => self.check_grads.fd_step = num(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Every key with its current value, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let m = &self.train.model;
        let s = &self.train.sac;
        let t = &self.train.meta;
        let a = &self.adapt;
        let join = |xs: &[usize]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        vec![
            ("run.mode", self.mode.name().into()),
            ("run.seed", self.seed.to_string()),
            ("run.out_dir", self.out_dir.display().to_string()),
            ("run.id", self.run_id.clone()),
            ("run.wall_clock", self.wall_clock.to_string()),
            ("run.checkpoint_every", self.checkpoint_every.to_string()),
            (
                "run.checkpoint",
                self.checkpoint.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            ),
            ("env.family", self.family().name().into()),
            ("env.split", self.train.split.name.clone()),
            ("env.test_tasks", self.test_tasks.to_string()),
            ("model.ctx_dim", m.ctx_dim.to_string()),
            ("model.inner_lr", m.inner_lr.to_string()),
            ("model.inner_steps", m.inner_steps.to_string()),
            ("model.meta_batch_size", m.meta_batch_size.to_string()),
            ("model.predict_delta", m.predict_delta.to_string()),
            ("model.hidden", join(&m.hidden)),
            ("model.activation", m.activation.name().into()),
            ("model.outer_lr", m.outer_lr.to_string()),
            ("model.meta_grad_mode", m.meta_grad_mode.name().into()),
            ("model.log_std_min", m.log_std.min.to_string()),
            ("model.log_std_max", m.log_std.max.to_string()),
            ("sac.discount", s.discount.to_string()),
            ("sac.lr", s.lr.to_string()),
            ("sac.target_update_rate", s.target_update_rate.to_string()),
            ("sac.target_update_interval", s.target_update_interval.to_string()),
            ("sac.temperature", s.temperature.to_string()),
            ("sac.reward_scale", s.reward_scale.to_string()),
            ("sac.batch_size", s.batch_size.to_string()),
            ("sac.hidden", join(&s.hidden)),
            ("sac.activation", s.activation.name().into()),
            ("meta.outer_iterations", t.outer_iterations.to_string()),
            ("meta.train_tasks", t.train_tasks.to_string()),
            ("meta.policy_steps_per_iter", t.policy_steps_per_iter.to_string()),
            ("meta.model_meta_steps_per_iter", t.model_meta_steps_per_iter.to_string()),
            ("meta.exploration_episodes", t.exploration_episodes.to_string()),
            ("meta.model_batch_size", t.model_batch_size.to_string()),
            ("meta.gradient_norm_clip", t.gradient_norm_clip.to_string()),
            ("meta.eval_tasks", t.eval_tasks.to_string()),
            ("meta.eval_every", t.eval_every.to_string()),
            ("meta.horizon", t.horizon.to_string()),
            ("adapt.adapt_points", a.adapt_points.to_string()),
            ("adapt.context_steps", a.context_steps.to_string()),
            ("adapt.full_steps", a.full_steps.to_string()),
            ("adapt.policy_steps_per_batch", a.policy_steps_per_batch.to_string()),
            ("adapt.policy_budget", a.policy_budget.to_string()),
            ("adapt.relabel_batch", a.relabel_batch.to_string()),
            ("adapt.real_fraction", a.real_fraction.to_string()),
            ("adapt.train_frac", a.train_frac.to_string()),
            ("adapt.gate_threshold", a.gate_threshold.to_string()),
            ("adapt.relabel_mode", a.relabel.mode.name().into()),
            ("adapt.cross_task_count", a.relabel.cross_task_count.to_string()),
            ("adapt.pool_size", a.relabel.pool_size.to_string()),
            ("adapt.stochastic_relabel", a.relabel.stochastic.to_string()),
            ("adapt.eval_episodes", a.eval_episodes.to_string()),
            ("adapt.horizon", a.horizon.to_string()),
            ("eval.context_points", self.eval.context_points.to_string()),
            ("eval.episodes", self.eval.episodes.to_string()),
            ("eval.horizon", self.eval.horizon.to_string()),
            ("check_grads.trials", self.check_grads.trials.to_string()),
            ("check_grads.tolerance", self.check_grads.tolerance.to_string()),
            ("check_grads.fd_step", self.check_grads.fd_step.to_string()),
        ]
    }

    /// The fully resolved configuration in the input format.
    pub fn render(&self) -> String {
        let mut out = String::from("# resolved configuration\n");
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

fn num<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: Display,
{
    value.parse().map_err(|e| format!("cannot parse '{value}': {e}"))
}

fn boolean(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{value}'")),
    }
}

fn list(value: &str) -> std::result::Result<Vec<usize>, String> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|x| num(x.trim())).collect()
}

fn activation(value: &str) -> std::result::Result<Activation, String> {
    Activation::parse(value).ok_or_else(|| format!("unknown activation '{value}'"))
}
