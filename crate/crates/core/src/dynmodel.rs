//! Context-conditioned probabilistic dynamics and reward model
//! `p̂(s′, r | s, a; θ, φ)`.
//!
//! The network sees `(normalised s, normalised a, φ)` and outputs a diagonal
//! Gaussian over the prediction target: `(s′ − s, r)` (or `(s′, r)` when not
//! predicting deltas), or just `r` in reward-only mode. Adaptation to a task
//! moves only the context `φ`; meta-training differentiates through that
//! adaptation.

use rand::seq::SliceRandom;

use crate::diffcore::meta::inner_trajectory;
use crate::diffcore::network::{backward, forward_tape};
use crate::diffcore::{
    self, Activation, Adam, ContextVector, DiffLoss, LogStdBounds, LossGrad, MetaGradMode, MetaGradOutput,
    NetworkShape, ParamVector, Real,
};
use crate::error::{check_len, Error, Result};
use crate::rng::{normal, Rng};

/// One environment step `(s, a, s′, r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub step_index: usize,
}

impl Transition {
    pub fn is_finite(&self) -> bool {
        self.reward.is_finite()
            && self
                .state
                .iter()
                .chain(&self.action)
                .chain(&self.next_state)
                .all(|x| x.is_finite())
    }
}

/// Ordered list of transitions with homogeneous dimensions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    transitions: Vec<Transition>,
}

impl Dataset {
    pub fn new(transitions: Vec<Transition>) -> Self {
        Self { transitions }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Transition> {
        self.transitions.iter()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn push(&mut self, t: Transition) {
        self.transitions.push(t);
    }

    pub fn extend(&mut self, other: &Dataset) {
        self.transitions.extend_from_slice(&other.transitions);
    }

    pub fn into_inner(self) -> Vec<Transition> {
        self.transitions
    }

    /// Dataset holding the transitions at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset::new(indices.iter().map(|&i| self.transitions[i].clone()).collect())
    }

    /// Check every transition has the given dimensions and finite entries.
    pub fn validate(&self, state_dim: usize, action_dim: usize) -> Result<()> {
        for t in &self.transitions {
            check_len("transition state", state_dim, t.state.len())?;
            check_len("transition action", action_dim, t.action.len())?;
            check_len("transition next_state", state_dim, t.next_state.len())?;
            if !t.is_finite() {
                return Err(Error::NonFinite {
                    what: "transition",
                    step: None,
                });
            }
        }
        Ok(())
    }
}

impl FromIterator<Transition> for Dataset {
    fn from_iter<I: IntoIterator<Item = Transition>>(iter: I) -> Self {
        Dataset::new(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    /// Leading state coordinates left out of the network input (absolute
    /// positions). Targets still cover the full state.
    pub position_dims: usize,
    pub ctx_dim: usize,
    /// False selects reward-only mode.
    pub predict_state: bool,
    pub predict_delta: bool,
    pub inner_lr: f64,
    pub inner_steps: usize,
    pub meta_batch_size: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub log_std: LogStdBounds,
    /// Adam rate for meta-updates and full-parameter fine-tuning.
    pub outer_lr: f64,
    pub meta_grad_mode: MetaGradMode,
}

impl ModelConfig {
    pub fn new(state_dim: usize, action_dim: usize, predict_state: bool) -> Self {
        Self {
            state_dim,
            action_dim,
            position_dims: 0,
            ctx_dim: 5,
            predict_state,
            predict_delta: true,
            inner_lr: 0.01,
            inner_steps: 2,
            meta_batch_size: 10,
            hidden: vec![64, 64],
            activation: Activation::Relu,
            log_std: LogStdBounds::default(),
            outer_lr: 3e-4,
            meta_grad_mode: MetaGradMode::Exact,
        }
    }

    /// Dimension of the Gaussian the model predicts.
    pub fn target_dim(&self) -> usize {
        if self.predict_state {
            self.state_dim + 1
        } else {
            1
        }
    }

    /// Width of the normalised `(s, a)` part of the network input.
    pub fn feature_dim(&self) -> usize {
        self.state_dim - self.position_dims + self.action_dim
    }

    pub fn shape(&self) -> Result<NetworkShape> {
        if self.position_dims > self.state_dim {
            return Err(Error::Config(format!(
                "position_dims {} exceeds state_dim {}",
                self.position_dims, self.state_dim
            )));
        }
        NetworkShape::new(
            self.feature_dim() + self.ctx_dim,
            self.hidden.clone(),
            2 * self.target_dim(),
            self.activation,
        )
    }
}

/// Per-feature affine normalisation of the `(s, a)` features.
#[derive(Clone, Debug, PartialEq)]
pub struct InputNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InputNormalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Mean and standard deviation of the features `(s[skip..], a)` over
    /// the transitions. Features with (near) zero spread keep unit scale.
    pub fn fit<'a, I>(skip: usize, dim: usize, transitions: I) -> Self
    where
        I: IntoIterator<Item = &'a Transition>,
    {
        let mut count = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for t in transitions {
            count += 1;
            for (i, x) in t.state[skip..].iter().chain(&t.action).enumerate().take(dim) {
                let delta = x - mean[i];
                mean[i] += delta / count as f64;
                m2[i] += delta * (x - mean[i]);
            }
        }
        if count < 2 {
            return Self::identity(dim);
        }
        let std = m2
            .iter()
            .map(|&s| {
                let sd = (s / count as f64).sqrt();
                if sd < 1e-6 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Self { mean, std }
    }

    fn write(&self, skip: usize, state: &[f64], action: &[f64], out: &mut Vec<f64>) {
        for (i, x) in state[skip..].iter().chain(action).enumerate() {
            out.push((x - self.mean[i]) / self.std[i]);
        }
    }
}

/// Outcome of test-time continued adaptation.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptReport {
    pub steps_taken: usize,
    /// Training-split NLL before and after adaptation.
    pub loss_before: f64,
    pub loss_after: f64,
    /// Validation-split NLL after adaptation.
    pub val_loss: Option<f64>,
    pub gate_passed: bool,
}

/// Settings of [`ContextModel::continued_adapt`].
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuedAdaptConfig {
    /// Context-only gradient steps (rate `inner_lr`, halved when a step
    /// would increase the loss).
    pub context_steps: usize,
    /// Full-parameter steps on θ (Adam at `outer_lr`).
    pub full_steps: usize,
    /// Fraction of the data used for fitting; the rest validates.
    pub train_frac: f64,
    pub gate_threshold: f64,
}

impl Default for ContinuedAdaptConfig {
    fn default() -> Self {
        Self {
            context_steps: 10,
            full_steps: 100,
            train_frac: 0.8,
            gate_threshold: -3.0,
        }
    }
}

/// A model sample: reward always, next state unless in reward-only mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub next_state: Option<Vec<f64>>,
    pub reward: f64,
}

/// Architecture plus frozen input normalisation. Parameters `θ` and context
/// `φ` are passed explicitly to every operation.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextModel {
    cfg: ModelConfig,
    shape: NetworkShape,
    normalizer: InputNormalizer,
}

impl ContextModel {
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        let shape = cfg.shape()?;
        let normalizer = InputNormalizer::identity(cfg.feature_dim());
        Ok(Self {
            cfg,
            shape,
            normalizer,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn normalizer(&self) -> &InputNormalizer {
        &self.normalizer
    }

    pub fn set_normalizer(&mut self, normalizer: InputNormalizer) -> Result<()> {
        check_len("normalizer mean", self.cfg.feature_dim(), normalizer.mean.len())?;
        check_len("normalizer std", self.cfg.feature_dim(), normalizer.std.len())?;
        self.normalizer = normalizer;
        Ok(())
    }

    /// Refit the input normalisation to the given transitions.
    pub fn fit_normalizer<'a, I>(&mut self, transitions: I)
    where
        I: IntoIterator<Item = &'a Transition>,
    {
        self.normalizer = InputNormalizer::fit(self.cfg.position_dims, self.cfg.feature_dim(), transitions);
    }

    /// Fresh parameters and a zero prior context.
    pub fn init(&self, rng: &mut Rng) -> (ParamVector, ContextVector) {
        (
            ParamVector::init(self.shape.clone(), rng),
            ContextVector::zeros(self.cfg.ctx_dim),
        )
    }

    fn check_point(&self, params: &ParamVector, context: &ContextVector) -> Result<()> {
        if params.shape() != &self.shape {
            return Err(Error::Usage("parameter shape does not match the model".into()));
        }
        check_len("model context", self.cfg.ctx_dim, context.dim())
    }

    /// Precompute normalised inputs and targets for a batch.
    pub fn nll_loss(&self, batch: &Dataset) -> Result<NllLoss<'_>> {
        if batch.is_empty() {
            return Err(Error::Usage("model_nll needs a non-empty batch".into()));
        }
        batch.validate(self.cfg.state_dim, self.cfg.action_dim)?;
        let rows = batch.len();
        let mut features = Vec::with_capacity(rows * self.cfg.feature_dim());
        let mut targets = Vec::with_capacity(rows * self.cfg.target_dim());
        for t in batch.iter() {
            self.normalizer
                .write(self.cfg.position_dims, &t.state, &t.action, &mut features);
            if self.cfg.predict_state {
                if self.cfg.predict_delta {
                    targets.extend(t.next_state.iter().zip(&t.state).map(|(n, s)| n - s));
                } else {
                    targets.extend_from_slice(&t.next_state);
                }
            }
            targets.push(t.reward);
        }
        Ok(NllLoss {
            model: self,
            rows,
            features,
            targets,
        })
    }

    /// Mean Gaussian NLL of the batch targets.
    pub fn model_nll(&self, params: &ParamVector, context: &ContextVector, batch: &Dataset) -> Result<f64> {
        self.check_point(params, context)?;
        let loss = self.nll_loss(batch)?;
        loss.value(params.values(), context.values())
    }

    /// `k` full-batch gradient steps on the context only.
    pub fn adapt_context(
        &self,
        params: &ParamVector,
        context: &ContextVector,
        data: &Dataset,
        alpha: f64,
        steps: usize,
    ) -> Result<ContextVector> {
        self.check_point(params, context)?;
        if steps == 0 {
            return Ok(context.clone());
        }
        let loss = self.nll_loss(data)?;
        adapt_context_on(&loss, params.values(), context, alpha, steps)
    }

    /// Post-adaptation NLL on `eval` and its meta-gradient over `(θ, φ)`.
    pub fn meta_loss(
        &self,
        params: &ParamVector,
        context: &ContextVector,
        adapt: &Dataset,
        eval: &Dataset,
    ) -> Result<MetaGradOutput> {
        self.check_point(params, context)?;
        let inner = self.nll_loss(adapt)?;
        let outer = self.nll_loss(eval)?;
        diffcore::meta_grad(
            &inner,
            &outer,
            params.values(),
            context.values(),
            self.cfg.inner_lr,
            self.cfg.inner_steps,
            self.cfg.meta_grad_mode,
        )
    }

    /// Test-time adaptation: split the data (seeded shuffle), take
    /// `context_steps` context-only steps then `full_steps` steps on θ over
    /// the training split, and gate on the validation NLL.
    pub fn continued_adapt(
        &self,
        params: &ParamVector,
        context: &ContextVector,
        data: &Dataset,
        cfg: &ContinuedAdaptConfig,
        rng: &mut Rng,
    ) -> Result<(ParamVector, ContextVector, AdaptReport)> {
        self.check_point(params, context)?;
        if !(cfg.train_frac > 0.0 && cfg.train_frac < 1.0) {
            return Err(Error::Usage(format!(
                "train fraction must lie in (0, 1), got {}",
                cfg.train_frac
            )));
        }
        let n = data.len();
        let n_train = (cfg.train_frac * n as f64).ceil() as usize;
        if n < 2 || n_train == 0 || n_train >= n {
            return Err(Error::Usage(format!(
                "{n} transitions cannot be split {:.2}/{:.2} into non-empty train and validation sets",
                cfg.train_frac,
                1.0 - cfg.train_frac
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let train = data.select(&order[..n_train]);
        let val = data.select(&order[n_train..]);
        let train_loss = self.nll_loss(&train)?;
        let val_loss_fn = self.nll_loss(&val)?;

        let loss_before = train_loss.value(params.values(), context.values())?;
        let context = descend_context(
            &train_loss,
            params.values(),
            context,
            self.cfg.inner_lr,
            cfg.context_steps,
        )?;
        let mut params = params.clone();
        if cfg.full_steps > 0 {
            let mut opt = Adam::new(params.len(), self.cfg.outer_lr);
            for step in 0..cfg.full_steps {
                let out = train_loss.eval::<f64>(params.values(), context.values())?;
                if !out.value.is_finite() || out.d_params.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFinite {
                        what: "model fine-tuning gradient",
                        step: Some(step),
                    });
                }
                opt.step(params.values_mut(), &out.d_params);
            }
        }
        let loss_after = train_loss.value(params.values(), context.values())?;
        let val_loss = val_loss_fn.value(params.values(), context.values())?;
        let report = AdaptReport {
            steps_taken: cfg.context_steps + cfg.full_steps,
            loss_before,
            loss_after,
            val_loss: Some(val_loss),
            gate_passed: val_loss < cfg.gate_threshold,
        };
        Ok((params, context, report))
    }

    /// Gaussian parameters `(mean, log_std)` of the prediction target for
    /// each row.
    fn target_distribution(
        &self,
        params: &ParamVector,
        context: &ContextVector,
        states: &[Vec<f64>],
        actions: &[Vec<f64>],
    ) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        self.check_point(params, context)?;
        check_len("prediction actions", states.len(), actions.len())?;
        let rows = states.len();
        let in_dim = self.shape.input_dim;
        let mut input = Vec::with_capacity(rows * in_dim);
        for (s, a) in states.iter().zip(actions) {
            check_len("prediction state", self.cfg.state_dim, s.len())?;
            check_len("prediction action", self.cfg.action_dim, a.len())?;
            self.normalizer.write(self.cfg.position_dims, s, a, &mut input);
            input.extend_from_slice(context.values());
        }
        let out = diffcore::forward_batch(params, &input, rows)?;
        let dim = self.cfg.target_dim();
        Ok(out
            .chunks(2 * dim)
            .map(|row| {
                let mean = row[..dim].to_vec();
                let log_std = row[dim..].iter().map(|&r| self.cfg.log_std.apply(r)).collect();
                (mean, log_std)
            })
            .collect())
    }

    /// Sample (or take the mean of) the model's prediction for one `(s, a)`.
    pub fn predict(
        &self,
        params: &ParamVector,
        context: &ContextVector,
        state: &[f64],
        action: &[f64],
        stochastic: bool,
        rng: &mut Rng,
    ) -> Result<Prediction> {
        let mut out = self.predict_batch(params, context, &[state.to_vec()], &[action.to_vec()], stochastic, rng)?;
        Ok(out.pop().expect("one row in, one row out"))
    }

    /// Batched [`predict`](Self::predict); noise is drawn row by row in
    /// order.
    pub fn predict_batch(
        &self,
        params: &ParamVector,
        context: &ContextVector,
        states: &[Vec<f64>],
        actions: &[Vec<f64>],
        stochastic: bool,
        rng: &mut Rng,
    ) -> Result<Vec<Prediction>> {
        let dists = self.target_distribution(params, context, states, actions)?;
        Ok(dists
            .into_iter()
            .zip(states)
            .map(|((mean, log_std), s)| {
                let sample: Vec<f64> = if stochastic {
                    mean.iter().zip(&log_std).map(|(m, ls)| m + ls.exp() * normal(rng)).collect()
                } else {
                    mean
                };
                let reward = *sample.last().expect("target has a reward dimension");
                let next_state = self.cfg.predict_state.then(|| {
                    let head = &sample[..self.cfg.state_dim];
                    if self.cfg.predict_delta {
                        s.iter().zip(head).map(|(s, d)| s + d).collect()
                    } else {
                        head.to_vec()
                    }
                });
                Prediction { next_state, reward }
            })
            .collect())
    }
}

/// `k` steps of `φ ← φ − α ∇_φ L(θ, φ)` on any differentiable loss.
pub fn adapt_context_on<L: DiffLoss>(
    loss: &L,
    params: &[f64],
    context: &ContextVector,
    alpha: f64,
    steps: usize,
) -> Result<ContextVector> {
    let traj = inner_trajectory(loss, params, context.values(), alpha, steps)?;
    ContextVector::new(traj.into_iter().next_back().expect("trajectory starts non-empty"))
}

/// Halvings tried before a context step is abandoned.
pub const MAX_STEP_HALVINGS: usize = 30;

/// `steps` context-only gradient steps that never increase the loss. Each
/// step starts at rate `alpha` and halves it until the loss decreases; when
/// no halving helps the remaining steps are skipped. Where plain steps at
/// `alpha` already descend this equals [`adapt_context_on`].
pub fn descend_context(
    loss: &NllLoss<'_>,
    params: &[f64],
    context: &ContextVector,
    alpha: f64,
    steps: usize,
) -> Result<ContextVector> {
    let mut phi = context.values().to_vec();
    let mut current = loss.value(params, &phi)?;
    'outer: for _ in 0..steps {
        let (_, g) = diffcore::context_grad(loss, params, &phi)?;
        let mut rate = alpha;
        for _ in 0..=MAX_STEP_HALVINGS {
            let trial: Vec<f64> = phi.iter().zip(&g).map(|(p, g)| p - rate * g).collect();
            let value = loss.eval::<f64>(params, &trial)?.value;
            if value < current {
                phi = trial;
                current = value;
                continue 'outer;
            }
            rate *= 0.5;
        }
        break;
    }
    ContextVector::new(phi)
}

/// Mean NLL of a fixed batch as a differentiable function of `(θ, φ)`.
#[derive(Clone, Debug)]
pub struct NllLoss<'a> {
    model: &'a ContextModel,
    rows: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl NllLoss<'_> {
    pub fn value(&self, params: &[f64], context: &[f64]) -> Result<f64> {
        let v = self.eval::<f64>(params, context)?.value;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                what: "model nll",
                step: None,
            })
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

impl DiffLoss for NllLoss<'_> {
    fn eval<T: Real>(&self, params: &[T], context: &[T]) -> Result<LossGrad<T>> {
        let cfg = &self.model.cfg;
        let shape = &self.model.shape;
        check_len("model context", cfg.ctx_dim, context.len())?;
        let feat = cfg.feature_dim();
        let in_dim = shape.input_dim;
        let rows = self.rows;
        let mut input = Vec::with_capacity(rows * in_dim);
        for r in 0..rows {
            input.extend(self.features[r * feat..(r + 1) * feat].iter().map(|&x| T::from_f64(x)));
            input.extend_from_slice(context);
        }
        let tape = forward_tape(shape, params, &input, rows)?;
        let dim = cfg.target_dim();
        let out = tape.output();
        let mut d_out = vec![T::zero(); out.len()];
        let weight = 1.0 / rows as f64;
        let mut total = T::zero();
        let mut target = vec![T::zero(); dim];
        for r in 0..rows {
            for (t, &x) in target.iter_mut().zip(&self.targets[r * dim..(r + 1) * dim]) {
                *t = T::from_f64(x);
            }
            total += crate::diffcore::gaussian::nll_row(
                &out[r * 2 * dim..(r + 1) * 2 * dim],
                &target,
                cfg.log_std,
                weight,
                &mut d_out[r * 2 * dim..(r + 1) * 2 * dim],
            );
        }
        let (d_params, d_input) = backward(shape, params, &tape, &d_out)?;
        let mut d_context = vec![T::zero(); cfg.ctx_dim];
        for r in 0..rows {
            for (g, &d) in d_context.iter_mut().zip(&d_input[r * in_dim + feat..(r + 1) * in_dim]) {
                *g += d;
            }
        }
        Ok(LossGrad {
            value: total.scale(weight),
            d_params,
            d_context,
        })
    }
}
