//! Finite-difference battery for the exact meta-gradient.

use std::path::Path;

use rand::Rng as _;
use serde::Serialize;

use crate::diffcore::{central_difference, relative_error, Activation, ContextVector, MetaGradMode, ParamVector};
use crate::dynmodel::{ContextModel, Dataset, ModelConfig, Transition};
use crate::error::{Error, Result};
use crate::harness::config::GradCheckConfig;
use crate::rng::{normal, substream, Rng, Stream};

/// Largest network checked, in parameters.
pub const MAX_PARAMS: usize = 64;
pub const MAX_CTX_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckRow {
    pub trial: usize,
    pub params: usize,
    pub ctx_dim: usize,
    pub inner_steps: usize,
    pub predict_state: bool,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub rows: Vec<GradCheckRow>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

fn random_dataset(n: usize, s: usize, a: usize, rng: &mut Rng) -> Dataset {
    (0..n)
        .map(|i| Transition {
            state: (0..s).map(|_| normal(rng)).collect(),
            action: (0..a).map(|_| rng.random_range(-1.0..1.0)).collect(),
            next_state: (0..s).map(|_| normal(rng)).collect(),
            reward: normal(rng),
            step_index: i,
        })
        .collect()
}

/// A random tanh model small enough to fit in [`MAX_PARAMS`].
fn random_instance(rng: &mut Rng) -> Result<(ModelConfig, usize)> {
    let state_dim = rng.random_range(1..=2);
    let predict_state = rng.random_bool(0.5);
    let mut cfg = ModelConfig::new(state_dim, 1, predict_state);
    cfg.ctx_dim = rng.random_range(1..=MAX_CTX_DIM);
    cfg.inner_steps = rng.random_range(1..=2);
    cfg.inner_lr = rng.random_range(0.01..0.2);
    cfg.activation = Activation::Tanh;
    cfg.meta_grad_mode = MetaGradMode::Exact;
    let mut width = rng.random_range(2..=5);
    loop {
        cfg.hidden = vec![width];
        let n = cfg.shape()?.param_count();
        if n <= MAX_PARAMS {
            return Ok((cfg, n));
        }
        width -= 1;
    }
}

/// One trial: the exact meta-gradient of `(θ, φ)` against central
/// differences of the composed inner-then-outer loss.
pub fn check_trial(trial: usize, cfg: &GradCheckConfig, seed: u64) -> Result<GradCheckRow> {
    let mut rng = substream(seed, Stream::ModelInit, trial as u64);
    let (model_cfg, n_params) = random_instance(&mut rng)?;
    let model = ContextModel::new(model_cfg.clone())?;
    let (params, _) = model.init(&mut rng);
    let ctx = ContextVector::new((0..model_cfg.ctx_dim).map(|_| 0.3 * normal(&mut rng)).collect())?;
    let rows = rng.random_range(4..=8);
    let adapt = random_dataset(rows, model_cfg.state_dim, 1, &mut rng);
    let eval = random_dataset(rows, model_cfg.state_dim, 1, &mut rng);

    let out = model.meta_loss(&params, &ctx, &adapt, &eval)?;
    let mut analytic = out.gradient.wrt_params.unwrap_or_default();
    analytic.extend(out.gradient.wrt_context.unwrap_or_default());

    let composed = |x: &[f64]| -> Result<f64> {
        let p = ParamVector::new(params.shape().clone(), x[..n_params].to_vec())?;
        let c = ContextVector::new(x[n_params..].to_vec())?;
        let phi = model.adapt_context(&p, &c, &adapt, model_cfg.inner_lr, model_cfg.inner_steps)?;
        model.model_nll(&p, &phi, &eval)
    };
    let mut x = params.values().to_vec();
    x.extend_from_slice(ctx.values());
    let fd = central_difference(composed, &x, cfg.fd_step)?;
    Ok(GradCheckRow {
        trial,
        params: n_params,
        ctx_dim: model_cfg.ctx_dim,
        inner_steps: model_cfg.inner_steps,
        predict_state: model_cfg.predict_state,
        rel_error: relative_error(&analytic, &fd),
    })
}

/// Run every trial, optionally writing one CSV row per trial.
pub fn run_battery(cfg: &GradCheckConfig, seed: u64, csv_path: Option<&Path>) -> Result<GradCheckReport> {
    let rows = (0..cfg.trials)
        .map(|i| check_trial(i, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let max_rel_error = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_path(path)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(format!("write {}", path.display()), e))?;
    }
    Ok(GradCheckReport { rows, max_rel_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_respect_size_limits() {
        let mut rng = substream(0, Stream::ModelInit, 0);
        for _ in 0..200 {
            let (cfg, n) = random_instance(&mut rng).unwrap();
            assert!(n <= MAX_PARAMS && cfg.ctx_dim <= MAX_CTX_DIM);
            assert!((1..=2).contains(&cfg.inner_steps));
        }
    }

    #[test]
    fn small_battery_passes() {
        let cfg = GradCheckConfig {
            trials: 10,
            ..Default::default()
        };
        let report = run_battery(&cfg, 1, None).unwrap();
        assert_eq!(report.rows.len(), 10);
        assert!(report.passed(cfg.tolerance), "{}", report.max_rel_error);
    }

    #[test]
    fn first_order_gradient_is_caught() {
        // The battery must be sensitive enough to reject a gradient that
        // drops the second-order terms.
        let mut rng = substream(2, Stream::ModelInit, 0);
        let mut cfg = ModelConfig::new(1, 1, true);
        cfg.hidden = vec![4];
        cfg.ctx_dim = 2;
        cfg.inner_lr = 0.2;
        cfg.activation = Activation::Tanh;
        cfg.meta_grad_mode = MetaGradMode::FirstOrder;
        let model = ContextModel::new(cfg.clone()).unwrap();
        let (params, ctx) = model.init(&mut rng);
        let adapt = random_dataset(6, 1, 1, &mut rng);
        let eval = random_dataset(6, 1, 1, &mut rng);
        let out = model.meta_loss(&params, &ctx, &adapt, &eval).unwrap();
        let np = params.len();
        let composed = |x: &[f64]| -> Result<f64> {
            let p = ParamVector::new(params.shape().clone(), x[..np].to_vec())?;
            let c = ContextVector::new(x[np..].to_vec())?;
            let phi = model.adapt_context(&p, &c, &adapt, cfg.inner_lr, cfg.inner_steps)?;
            model.model_nll(&p, &phi, &eval)
        };
        let mut x = params.values().to_vec();
        x.extend_from_slice(ctx.values());
        let fd = central_difference(composed, &x, 1e-5).unwrap();
        let mut g = out.gradient.wrt_params.unwrap();
        g.extend(out.gradient.wrt_context.unwrap());
        assert!(relative_error(&g, &fd) > 1e-4);
    }
}
