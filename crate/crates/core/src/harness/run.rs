//! Mode dispatch. Every output of a run lives in its `out_dir`.

use std::path::{Path, PathBuf};

use log::info;

use crate::envs::{Partition, TaskSpec};
use crate::error::{Error, Result};
use crate::harness::checkpoint::{read_checkpoint, read_replay, write_checkpoint, write_replay};
use crate::harness::config::{Mode, RunConfig};
use crate::harness::gradcheck::run_battery;
use crate::harness::metrics::{MetricsRow, MetricsWriter};
use crate::orchestrate::{self, meta_train};
use crate::rng::{substream, Stream};

pub const METRICS_FILE: &str = "metrics.csv";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved";
pub const REPLAY_FILE: &str = "replay.bin";
pub const GRAD_CHECK_FILE: &str = "grad_check.csv";

pub const PHASE_META_TRAIN: &str = "meta_train";
pub const PHASE_ADAPT_CONTEXT: &str = "adapt_context";
pub const PHASE_ADAPT_RELABEL: &str = "adapt_relabel";
pub const PHASE_EVAL: &str = "eval";

pub fn checkpoint_path(out_dir: &Path, iteration: usize) -> PathBuf {
    out_dir.join(format!("ckpt_{iteration}.bin"))
}

/// The `ckpt_<iter>.bin` in `dir` with the largest iteration.
pub fn latest_checkpoint(dir: &Path) -> Result<PathBuf> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(format!("list {}", dir.display()), e))?;
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(format!("list {}", dir.display()), e))?.path();
        let iter = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("ckpt_")?.strip_suffix(".bin")?.parse::<usize>().ok());
        if let Some(i) = iter {
            if best.as_ref().is_none_or(|(b, _)| i > *b) {
                best = Some((i, path));
            }
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::Usage(format!("no checkpoint found in {}", dir.display())))
}

/// What a run produced, for the CLI to report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub rows_written: usize,
    pub checkpoint: Option<PathBuf>,
    pub mean_return: Option<f64>,
    pub max_rel_error: Option<f64>,
}

/// Execute the configured mode.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::io(format!("create {}", cfg.out_dir.display()), e))?;
    let resolved = cfg.out_dir.join(RESOLVED_CONFIG_FILE);
    std::fs::write(&resolved, cfg.render()).map_err(|e| Error::io(format!("write {}", resolved.display()), e))?;
    info!("{} run '{}' seed {} into {}", cfg.mode.name(), cfg.run_id, cfg.seed, cfg.out_dir.display());
    match cfg.mode {
        Mode::MetaTrain => run_meta_train(cfg),
        Mode::Adapt => run_adapt(cfg),
        Mode::Eval => run_eval(cfg),
        Mode::CheckGrads => run_check_grads(cfg),
    }
}

fn row(cfg: &RunConfig, phase: &str, iteration: usize) -> MetricsRow {
    MetricsRow {
        run_id: cfg.run_id.clone(),
        phase: phase.into(),
        iteration,
        ..Default::default()
    }
}

fn run_meta_train(cfg: &RunConfig) -> Result<RunSummary> {
    let mut metrics = MetricsWriter::replace_phases(&cfg.out_dir.join(METRICS_FILE), cfg.wall_clock, &[PHASE_META_TRAIN])?;
    let total = cfg.train.meta.outer_iterations;
    let mut summary = RunSummary::default();
    let trainer = meta_train(cfg.train.clone(), cfg.seed, |stats, trainer| {
        metrics.write(MetricsRow {
            samples_collected: stats.samples_collected,
            model_meta_loss: stats.model_meta_loss,
            critic_loss: stats.critic_loss,
            actor_loss: stats.actor_loss,
            mean_return: stats.mean_return,
            ..row(cfg, PHASE_META_TRAIN, stats.iteration)
        })?;
        summary.rows_written += 1;
        if stats.mean_return.is_some() {
            summary.mean_return = stats.mean_return;
        }
        let every = cfg.checkpoint_every;
        if stats.iteration == total || (every > 0 && stats.iteration % every == 0) {
            let path = checkpoint_path(&cfg.out_dir, stats.iteration);
            write_checkpoint(&path, &trainer.meta, &trainer.sac)?;
            return Ok(Some(path));
        }
        Ok(None)
    })?;
    let final_ckpt = checkpoint_path(&cfg.out_dir, trainer.iteration);
    if total == 0 {
        write_checkpoint(&final_ckpt, &trainer.meta, &trainer.sac)?;
    }
    write_replay(&cfg.out_dir.join(REPLAY_FILE), &trainer.buffer, &trainer.contexts)?;
    summary.checkpoint = Some(final_ckpt);
    Ok(summary)
}

/// Meta-test tasks, drawn from their own sub-stream of the task stream.
pub fn test_tasks(cfg: &RunConfig) -> Result<Vec<TaskSpec>> {
    let mut rng = substream(cfg.seed, Stream::Tasks, 1);
    cfg.train.split.enumerate_tasks(Partition::Test, cfg.test_tasks, &mut rng)
}

fn checkpoint_to_load(cfg: &RunConfig) -> Result<PathBuf> {
    match &cfg.checkpoint {
        Some(p) => Ok(p.clone()),
        None => latest_checkpoint(&cfg.out_dir),
    }
}

fn run_adapt(cfg: &RunConfig) -> Result<RunSummary> {
    let ckpt = checkpoint_to_load(cfg)?;
    let (meta, sac) = read_checkpoint(&ckpt, &cfg.train)?;
    let replay_path = ckpt.parent().unwrap_or(Path::new(".")).join(REPLAY_FILE);
    let family = cfg.family();
    let (buffer, _) = read_replay(&replay_path, family.state_dim(), family.action_dim())?;
    let mut metrics = MetricsWriter::replace_phases(
        &cfg.out_dir.join(METRICS_FILE),
        cfg.wall_clock,
        &[PHASE_ADAPT_CONTEXT, PHASE_ADAPT_RELABEL],
    )?;
    let tasks = test_tasks(cfg)?;
    let mut summary = RunSummary {
        checkpoint: Some(ckpt),
        ..Default::default()
    };
    let mut returns = Vec::with_capacity(tasks.len());
    for (i, task) in tasks.iter().enumerate() {
        let mut rng = substream(cfg.seed, Stream::Adapt, i as u64);
        let out = orchestrate::adapt(&meta, &sac, &cfg.train.sac, &buffer, task, &cfg.adapt, &mut rng)?;
        metrics.write(MetricsRow {
            samples_collected: out.samples_collected,
            model_meta_loss: Some(out.report.loss_after),
            mean_return: Some(out.return_before),
            ..row(cfg, PHASE_ADAPT_CONTEXT, i)
        })?;
        let last = out.rounds.last();
        metrics.write(MetricsRow {
            samples_collected: out.samples_collected,
            model_meta_loss: out.report.val_loss,
            critic_loss: last.map(|r| r.critic_loss),
            actor_loss: last.map(|r| r.actor_loss),
            mean_return: Some(out.return_after),
            synthetic_transitions_used: out.synthetic_used,
            ..row(cfg, PHASE_ADAPT_RELABEL, i)
        })?;
        summary.rows_written += 2;
        returns.push(out.return_after);
        info!(
            "task {i}: gate {} return {:.3} -> {:.3}",
            out.report.gate_passed, out.return_before, out.return_after
        );
    }
    summary.mean_return = Some(returns.iter().sum::<f64>() / returns.len() as f64);
    Ok(summary)
}

fn run_eval(cfg: &RunConfig) -> Result<RunSummary> {
    let ckpt = checkpoint_to_load(cfg)?;
    let (meta, sac) = read_checkpoint(&ckpt, &cfg.train)?;
    let mut metrics = MetricsWriter::replace_phases(&cfg.out_dir.join(METRICS_FILE), cfg.wall_clock, &[PHASE_EVAL])?;
    let tasks = test_tasks(cfg)?;
    let eval_cfg = &cfg.eval;
    let mut returns = Vec::with_capacity(tasks.len());
    for (i, task) in tasks.iter().enumerate() {
        let mut rng = substream(cfg.seed, Stream::Eval, i as u64);
        let ret = orchestrate::evaluate(&meta, &sac, std::slice::from_ref(task), eval_cfg, &mut rng)?[0];
        metrics.write(MetricsRow {
            samples_collected: eval_cfg.context_points,
            mean_return: Some(ret),
            ..row(cfg, PHASE_EVAL, i)
        })?;
        returns.push(ret);
    }
    Ok(RunSummary {
        rows_written: returns.len(),
        checkpoint: Some(ckpt),
        mean_return: Some(returns.iter().sum::<f64>() / returns.len() as f64),
        max_rel_error: None,
    })
}

fn run_check_grads(cfg: &RunConfig) -> Result<RunSummary> {
    let report = run_battery(&cfg.check_grads, cfg.seed, Some(&cfg.out_dir.join(GRAD_CHECK_FILE)))?;
    info!(
        "{} gradient checks, max relative error {:e}",
        report.rows.len(),
        report.max_rel_error
    );
    if !report.passed(cfg.check_grads.tolerance) {
        return Err(Error::GradCheck {
            max_rel_error: report.max_rel_error,
            tolerance: cfg.check_grads.tolerance,
        });
    }
    Ok(RunSummary {
        rows_written: report.rows.len(),
        max_rel_error: Some(report.max_rel_error),
        ..Default::default()
    })
}
