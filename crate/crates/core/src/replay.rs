//! Per-task replay storage, cross-task sampling, experience relabeling and
//! real/synthetic mixing.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::index;
use rand::Rng as _;

use crate::diffcore::{ContextVector, ParamVector};
use crate::dynmodel::{ContextModel, Dataset, Transition};
use crate::error::{check_len, Error, Result};
use crate::policy::{ActMode, SacState};
use crate::rng::Rng;

pub type TaskId = usize;

pub const DEFAULT_CAPACITY: usize = 100_000;

/// Replay storage `R(T)`: one FIFO store per task.
#[derive(Clone, Debug, PartialEq)]
pub struct MultitaskReplayBuffer {
    capacity: usize,
    stores: BTreeMap<TaskId, VecDeque<Transition>>,
    inserted: BTreeMap<TaskId, u64>,
    dims: Option<(usize, usize)>,
}

impl Default for MultitaskReplayBuffer {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

impl MultitaskReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            stores: BTreeMap::new(),
            inserted: BTreeMap::new(),
            dims: None,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Append a batch to a task's store, evicting its oldest transitions
    /// past capacity.
    pub fn insert(&mut self, task: TaskId, batch: &Dataset) -> Result<()> {
        for t in batch.iter() {
            let (s, a) = *self.dims.get_or_insert((t.state.len(), t.action.len()));
            check_len("replay state", s, t.state.len())?;
            check_len("replay next_state", s, t.next_state.len())?;
            check_len("replay action", a, t.action.len())?;
        }
        let store = self.stores.entry(task).or_default();
        for t in batch.iter() {
            if store.len() == self.capacity {
                store.pop_front();
            }
            store.push_back(t.clone());
        }
        *self.inserted.entry(task).or_default() += batch.len() as u64;
        Ok(())
    }

    pub fn task_len(&self, task: TaskId) -> usize {
        self.stores.get(&task).map_or(0, VecDeque::len)
    }

    /// Transitions ever inserted for the task, evicted ones included.
    pub fn inserted(&self, task: TaskId) -> u64 {
        self.inserted.get(&task).copied().unwrap_or(0)
    }

    pub fn total_len(&self) -> usize {
        self.stores.values().map(VecDeque::len).sum()
    }

    pub fn num_tasks(&self) -> usize {
        self.stores.values().filter(|s| !s.is_empty()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.num_tasks() == 0
    }

    /// Ids of tasks with at least one transition, ascending.
    pub fn task_ids(&self) -> Vec<TaskId> {
        self.stores
            .iter()
            .filter(|(_, s)| !s.is_empty())
            .map(|(&k, _)| k)
            .collect()
    }

    pub fn task(&self, task: TaskId) -> Option<&VecDeque<Transition>> {
        self.stores.get(&task)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskId, &Transition)> {
        self.stores.iter().flat_map(|(&k, s)| s.iter().map(move |t| (k, t)))
    }

    /// `n` distinct transitions of one task, uniformly without replacement.
    pub fn sample_from_task(&self, task: TaskId, n: usize, rng: &mut Rng) -> Result<Dataset> {
        let store = self
            .stores
            .get(&task)
            .ok_or_else(|| Error::NotReady(format!("task {task} has no data")))?;
        if store.len() < n {
            return Err(Error::NotReady(format!(
                "task {task} holds {} transitions, {n} requested",
                store.len()
            )));
        }
        Ok(index::sample(rng, store.len(), n)
            .into_iter()
            .map(|i| store[i].clone())
            .collect())
    }

    /// A uniformly chosen task among those holding at least `2·batch`
    /// transitions, with two disjoint uniform batches from it.
    pub fn sample_task_batches(&self, batch: usize, rng: &mut Rng) -> Result<(TaskId, Dataset, Dataset)> {
        let eligible: Vec<TaskId> = self
            .stores
            .iter()
            .filter(|(_, s)| s.len() >= 2 * batch && !s.is_empty())
            .map(|(&k, _)| k)
            .collect();
        if eligible.is_empty() {
            return Err(Error::NotReady(format!(
                "no task holds the {} transitions needed for two batches",
                2 * batch
            )));
        }
        let task = eligible[rng.random_range(0..eligible.len())];
        let (adapt, eval) = self.sample_disjoint(task, batch, rng)?;
        Ok((task, adapt, eval))
    }

    /// Two disjoint uniform batches of size `batch` from one task.
    pub fn sample_disjoint(&self, task: TaskId, batch: usize, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
        let mut both = self.sample_from_task(task, 2 * batch, rng)?.into_inner();
        let eval = both.split_off(batch);
        Ok((Dataset::new(both), Dataset::new(eval)))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RelabelMode {
    /// Resample `(s′, r)` from the model (and `a` from the policy if given).
    #[default]
    Full,
    /// Keep `(s, a, s′)`; replace only `r`.
    RewardOnly,
}

impl RelabelMode {
    pub fn name(self) -> &'static str {
        match self {
            RelabelMode::Full => "full",
            RelabelMode::RewardOnly => "reward_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(RelabelMode::Full),
            "reward_only" => Some(RelabelMode::RewardOnly),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelabelConfig {
    /// Tasks drawn as sources per relabel call.
    pub cross_task_count: usize,
    /// Most recent transitions pooled across the chosen tasks.
    pub pool_size: usize,
    pub mode: RelabelMode,
    /// Sample the model (true) or take its mean (false).
    pub stochastic: bool,
}

impl Default for RelabelConfig {
    fn default() -> Self {
        Self {
            cross_task_count: 20,
            pool_size: 100_000,
            mode: RelabelMode::Full,
            stochastic: true,
        }
    }
}

/// Model-generated transitions for one target task.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticBatch {
    pub transitions: Dataset,
    /// Source task of each transition.
    pub source_tasks: Vec<TaskId>,
    pub relabel_mode: RelabelMode,
}

/// Adapted policy used to resample actions, with its context.
#[derive(Clone, Copy, Debug)]
pub struct ActionSource<'a> {
    pub sac: &'a SacState,
    pub mode: ActMode,
}

/// Relabel `n` stored transitions from up to `cross_task_count` tasks as if
/// they came from the task identified by `context` under the adapted model.
#[allow(clippy::too_many_arguments)]
pub fn relabel(
    buf: &MultitaskReplayBuffer,
    model: &ContextModel,
    params: &ParamVector,
    context: &ContextVector,
    n: usize,
    cfg: &RelabelConfig,
    policy: Option<ActionSource<'_>>,
    rng: &mut Rng,
) -> Result<SyntheticBatch> {
    let mc = model.config();
    if buf.is_empty() {
        return Err(Error::NotReady("relabel needs a non-empty buffer".into()));
    }
    if let Some((s, a)) = buf.dims {
        check_len("relabel state (model vs buffer)", mc.state_dim, s)?;
        check_len("relabel action (model vs buffer)", mc.action_dim, a)?;
    }
    if cfg.mode == RelabelMode::Full && !mc.predict_state {
        return Err(Error::Usage(
            "full relabeling needs a model that predicts next states".into(),
        ));
    }
    if cfg.cross_task_count == 0 || cfg.pool_size == 0 {
        return Err(Error::Usage("relabel cross_task_count and pool_size must be positive".into()));
    }

    let ids = buf.task_ids();
    let k = cfg.cross_task_count.min(ids.len());
    let mut chosen: Vec<TaskId> = index::sample(rng, ids.len(), k).into_iter().map(|i| ids[i]).collect();
    chosen.sort_unstable();
    // Recent window of each chosen task, sized to share the pool evenly.
    let share = (cfg.pool_size / k).max(1);
    let windows: Vec<(TaskId, &VecDeque<Transition>, usize)> = chosen
        .iter()
        .map(|&id| {
            let store = &buf.stores[&id];
            let len = store.len().min(share);
            (id, store, store.len() - len)
        })
        .collect();
    let pooled: usize = windows.iter().map(|(_, s, start)| s.len() - start).sum();

    let mut sources = Vec::with_capacity(n);
    let mut source_tasks = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = rng.random_range(0..pooled);
        for (id, store, start) in &windows {
            let len = store.len() - start;
            if pick < len {
                sources.push(store[start + pick].clone());
                source_tasks.push(*id);
                break;
            }
            pick -= len;
        }
    }

    let states: Vec<Vec<f64>> = sources.iter().map(|t| t.state.clone()).collect();
    let actions: Vec<Vec<f64>> = match (cfg.mode, policy) {
        (RelabelMode::Full, Some(p)) => states
            .iter()
            .map(|s| p.sac.act(s, context.values(), p.mode, rng))
            .collect::<Result<_>>()?,
        _ => sources.iter().map(|t| t.action.clone()).collect(),
    };
    let preds = model.predict_batch(params, context, &states, &actions, cfg.stochastic, rng)?;
    let transitions = sources
        .into_iter()
        .zip(actions)
        .zip(preds)
        .map(|((src, action), pred)| match cfg.mode {
            RelabelMode::RewardOnly => Transition {
                reward: pred.reward,
                ..src
            },
            RelabelMode::Full => Transition {
                next_state: pred.next_state.expect("state-predicting model"),
                reward: pred.reward,
                action,
                ..src
            },
        })
        .collect();
    Ok(SyntheticBatch {
        transitions,
        source_tasks,
        relabel_mode: cfg.mode,
    })
}

/// Number of real transitions in a mixed batch: `⌈real_fraction · batch⌉`.
pub fn real_count(real_fraction: f64, batch_size: usize) -> usize {
    // The small slack keeps products like 0.3·10 from rounding up.
    ((real_fraction * batch_size as f64 - 1e-9).ceil().max(0.0) as usize).min(batch_size)
}

/// Draw (with replacement) `real_count` real transitions followed by the
/// remaining synthetic ones.
pub fn mixed_batch(
    real: &Dataset,
    synthetic: &Dataset,
    real_fraction: f64,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&real_fraction) {
        return Err(Error::Usage(format!("real_fraction {real_fraction} outside [0, 1]")));
    }
    if real.is_empty() && synthetic.is_empty() {
        return Err(Error::Usage("mixed batch needs at least one non-empty source".into()));
    }
    let n_real = real_count(real_fraction, batch_size);
    let n_syn = batch_size - n_real;
    if (n_real > 0 && real.is_empty()) || (n_syn > 0 && synthetic.is_empty()) {
        return Err(Error::Usage(format!(
            "mixed batch of {n_real} real + {n_syn} synthetic has an empty source"
        )));
    }
    let mut out = Vec::with_capacity(batch_size);
    for _ in 0..n_real {
        out.push(real.transitions()[rng.random_range(0..real.len())].clone());
    }
    for _ in 0..n_syn {
        out.push(synthetic.transitions()[rng.random_range(0..synthetic.len())].clone());
    }
    Ok(Dataset::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Activation;
    use crate::dynmodel::ModelConfig;
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;

    fn tr(i: usize) -> Transition {
        Transition {
            state: vec![i as f64, 0.5],
            action: vec![0.1 * i as f64],
            next_state: vec![i as f64 + 1.0, 0.25],
            reward: -(i as f64),
            step_index: i,
        }
    }

    fn data(range: std::ops::Range<usize>) -> Dataset {
        range.map(tr).collect()
    }

    fn model(predict_state: bool) -> ContextModel {
        let mut cfg = ModelConfig::new(2, 1, predict_state);
        cfg.ctx_dim = 2;
        cfg.hidden = vec![4];
        cfg.activation = Activation::Tanh;
        ContextModel::new(cfg).unwrap()
    }

    #[test]
    fn fifo_eviction_and_order() {
        let mut buf = MultitaskReplayBuffer::new(5);
        buf.insert(0, &data(0..3)).unwrap();
        assert_eq!(buf.task_len(0), 3);
        buf.insert(0, &data(3..6)).unwrap();
        assert_eq!(buf.task_len(0), 5);
        let steps: Vec<usize> = buf.task(0).unwrap().iter().map(|t| t.step_index).collect();
        assert_eq!(steps, vec![1, 2, 3, 4, 5]);
        assert_eq!(buf.inserted(0), 6);
    }

    #[test]
    fn dimension_change_is_rejected() {
        let mut buf = MultitaskReplayBuffer::default();
        buf.insert(0, &data(0..2)).unwrap();
        let mut bad = tr(0);
        bad.state.push(1.0);
        assert!(buf.insert(1, &Dataset::new(vec![bad])).is_err());
    }

    #[test]
    fn single_task_and_disjoint_batches() {
        let mut buf = MultitaskReplayBuffer::default();
        buf.insert(7, &data(0..40)).unwrap();
        let mut rng = stream(0, Stream::Sampling);
        for _ in 0..50 {
            let (task, a, e) = buf.sample_task_batches(10, &mut rng).unwrap();
            assert_eq!(task, 7);
            assert_eq!(a.len(), 10);
            for t in a.iter() {
                assert!(e.iter().all(|u| u.step_index != t.step_index));
            }
        }
    }

    #[test]
    fn not_ready_when_too_small() {
        let mut buf = MultitaskReplayBuffer::default();
        buf.insert(0, &data(0..5)).unwrap();
        let mut rng = stream(0, Stream::Sampling);
        assert!(matches!(buf.sample_task_batches(3, &mut rng), Err(Error::NotReady(_))));
        assert!(matches!(
            MultitaskReplayBuffer::default().sample_task_batches(1, &mut rng),
            Err(Error::NotReady(_))
        ));
    }

    #[test]
    fn task_frequencies_are_uniform() {
        let mut buf = MultitaskReplayBuffer::default();
        for k in 0..4 {
            buf.insert(k, &data(0..4)).unwrap();
        }
        let mut rng = stream(1, Stream::Sampling);
        let draws = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[buf.sample_task_batches(1, &mut rng).unwrap().0] += 1;
        }
        let p = 0.25;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn mixed_batch_counts() {
        let real = data(0..10);
        let syn = data(100..110);
        let mut rng = stream(2, Stream::Sampling);
        let b = mixed_batch(&real, &syn, 0.05, 256, &mut rng).unwrap();
        let n_real = b.iter().filter(|t| t.step_index < 100).count();
        assert_eq!((n_real, b.len() - n_real), (13, 243));
        let all_real = mixed_batch(&real, &syn, 1.0, 32, &mut rng).unwrap();
        assert!(all_real.iter().all(|t| t.step_index < 100));
        let all_syn = mixed_batch(&real, &syn, 0.0, 32, &mut rng).unwrap();
        assert!(all_syn.iter().all(|t| t.step_index >= 100));
        assert_eq!(real_count(0.3, 10), 3);
        assert!(mixed_batch(&Dataset::default(), &Dataset::default(), 0.5, 4, &mut rng).is_err());
    }

    #[test]
    fn reward_only_with_constant_zero_model() {
        let m = model(false);
        let params = ParamVector::zeros(m.shape().clone());
        let ctx = ContextVector::zeros(2);
        let mut buf = MultitaskReplayBuffer::default();
        buf.insert(0, &data(0..20)).unwrap();
        buf.insert(1, &data(20..30)).unwrap();
        let cfg = RelabelConfig {
            mode: RelabelMode::RewardOnly,
            stochastic: false,
            ..Default::default()
        };
        let mut rng = stream(3, Stream::Sampling);
        let out = relabel(&buf, &m, &params, &ctx, 50, &cfg, None, &mut rng).unwrap();
        assert_eq!(out.transitions.len(), 50);
        for t in out.transitions.iter() {
            let src = tr(t.step_index);
            assert_eq!((&t.state, &t.action, &t.next_state), (&src.state, &src.action, &src.next_state));
            assert_eq!(t.reward, 0.0);
        }
    }

    #[test]
    fn full_mode_identity_model() {
        // Zero network with delta prediction: mean next state = s, reward 0.
        let m = model(true);
        let params = ParamVector::zeros(m.shape().clone());
        let ctx = ContextVector::zeros(2);
        let mut buf = MultitaskReplayBuffer::default();
        buf.insert(0, &data(0..20)).unwrap();
        let cfg = RelabelConfig {
            stochastic: false,
            ..Default::default()
        };
        let mut rng = stream(4, Stream::Sampling);
        let out = relabel(&buf, &m, &params, &ctx, 30, &cfg, None, &mut rng).unwrap();
        for t in out.transitions.iter() {
            assert_eq!(t.next_state, t.state);
            assert_eq!(t.reward, 0.0);
            assert_eq!(t.action, tr(t.step_index).action);
        }
    }

    #[test]
    fn full_mode_needs_state_model_and_matching_dims() {
        let mut buf = MultitaskReplayBuffer::default();
        buf.insert(0, &data(0..5)).unwrap();
        let mut rng = stream(5, Stream::Sampling);
        let m = model(false);
        let params = ParamVector::zeros(m.shape().clone());
        let ctx = ContextVector::zeros(2);
        let err = relabel(&buf, &m, &params, &ctx, 3, &RelabelConfig::default(), None, &mut rng);
        assert!(matches!(err, Err(Error::Usage(_))));

        let mut cfg = ModelConfig::new(3, 1, true);
        cfg.ctx_dim = 2;
        let wrong = ContextModel::new(cfg).unwrap();
        let params = ParamVector::zeros(wrong.shape().clone());
        assert!(relabel(&buf, &wrong, &params, &ctx, 3, &RelabelConfig::default(), None, &mut rng).is_err());
    }

    #[test]
    fn cross_task_sources_are_limited() {
        let mut buf = MultitaskReplayBuffer::default();
        for k in 0..30 {
            buf.insert(k, &data(k * 10..k * 10 + 10)).unwrap();
        }
        let m = model(false);
        let params = ParamVector::zeros(m.shape().clone());
        let cfg = RelabelConfig {
            mode: RelabelMode::RewardOnly,
            ..Default::default()
        };
        let mut rng = stream(6, Stream::Sampling);
        let out = relabel(&buf, &m, &params, &ContextVector::zeros(2), 2000, &cfg, None, &mut rng).unwrap();
        let mut tasks = out.source_tasks.clone();
        tasks.sort_unstable();
        tasks.dedup();
        assert!(tasks.len() <= 20);
        for (t, k) in out.transitions.iter().zip(&out.source_tasks) {
            assert_eq!(t.step_index / 10, *k);
        }
    }

    proptest! {
        #[test]
        fn bookkeeping_under_interleaving(
            ops in proptest::collection::vec((0usize..4, 0usize..12), 1..40),
            capacity in 1usize..20,
        ) {
            let mut buf = MultitaskReplayBuffer::new(capacity);
            let mut model: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            let mut next = 0;
            for (task, n) in ops {
                let batch: Dataset = (next..next + n).map(tr).collect();
                next += n;
                buf.insert(task, &batch).unwrap();
                let m = model.entry(task).or_default();
                m.extend(batch.iter().map(|t| t.step_index));
                if m.len() > capacity {
                    m.drain(..m.len() - capacity);
                }
            }
            let total: usize = model.values().map(Vec::len).sum();
            prop_assert_eq!(buf.total_len(), total);
            for (task, expect) in &model {
                let got: Vec<usize> = buf.task(*task).unwrap().iter().map(|t| t.step_index).collect();
                prop_assert_eq!(&got, expect);
            }
            prop_assert_eq!(buf.num_tasks(), model.values().filter(|v| !v.is_empty()).count());
        }

        #[test]
        fn relabel_size_and_reward_only_preservation(n in 0usize..200, seed in 0u64..500) {
            let m = model(false);
            let mut rng = stream(seed, Stream::ModelInit);
            let (params, _) = m.init(&mut rng);
            let ctx = ContextVector::new(vec![0.3, -0.2]).unwrap();
            let mut buf = MultitaskReplayBuffer::default();
            buf.insert(0, &data(0..15)).unwrap();
            buf.insert(3, &data(15..40)).unwrap();
            let cfg = RelabelConfig { mode: RelabelMode::RewardOnly, ..Default::default() };
            let out = relabel(&buf, &m, &params, &ctx, n, &cfg, None, &mut rng).unwrap();
            prop_assert_eq!(out.transitions.len(), n);
            for t in out.transitions.iter() {
                let src = tr(t.step_index);
                prop_assert!(t.state.iter().zip(&src.state).all(|(a, b)| a.to_bits() == b.to_bits()));
                prop_assert!(t.action.iter().zip(&src.action).all(|(a, b)| a.to_bits() == b.to_bits()));
                prop_assert!(t.next_state.iter().zip(&src.next_state).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }
    }
}
