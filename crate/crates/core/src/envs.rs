//! Point-mass task families with declarative train/test splits.
//!
//! Every family integrates velocities with step `DT = 0.1` and clips actions
//! to `[-1, 1]`. Two families vary only the reward across tasks, two vary the
//! dynamics:
//!
//! | family            | state              | action | task parameters         |
//! |-------------------|--------------------|--------|-------------------------|
//! | `vel1d`           | (x, v)             | 1      | target velocity         |
//! | `dir2d`           | (x, y, vx, vy)     | 2      | target direction angle  |
//! | `negated_actions` | (v1, v2, v3, v4)   | 4      | ±1 mask on the controls |
//! | `rand_params`     | (x, y, vx, vy)     | 2      | per-axis control gains  |

use rand::Rng as _;

use crate::dynmodel::{Dataset, Transition};
use crate::error::{check_len, Error, Result};
use crate::rng::Rng;

pub const HORIZON: usize = 200;
pub const DT: f64 = 0.1;
/// Half-width of the uniform initial-state box around the origin.
pub const INIT_HALF_WIDTH: f64 = 0.05;
pub const VEL1D_MAX_SPEED: f64 = 3.0;
pub const PLANAR_MAX_SPEED: f64 = 3.0;
pub const NEGATED_MAX_SPEED: f64 = 1.0;
pub const NEGATED_DIMS: usize = 4;
/// Forward readout of the negated-actions point: progress = w · v.
pub const NEGATED_READOUT: [f64; NEGATED_DIMS] = [0.25; NEGATED_DIMS];
/// Direction rewarded in `rand_params`.
pub const RAND_PARAMS_HEADING: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvFamily {
    Vel1d,
    Dir2d,
    NegatedActions,
    RandParams,
}

impl EnvFamily {
    pub fn name(self) -> &'static str {
        match self {
            EnvFamily::Vel1d => "vel1d",
            EnvFamily::Dir2d => "dir2d",
            EnvFamily::NegatedActions => "negated_actions",
            EnvFamily::RandParams => "rand_params",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vel1d" => Some(EnvFamily::Vel1d),
            "dir2d" => Some(EnvFamily::Dir2d),
            "negated_actions" => Some(EnvFamily::NegatedActions),
            "rand_params" => Some(EnvFamily::RandParams),
            _ => None,
        }
    }

    pub fn state_dim(self) -> usize {
        match self {
            EnvFamily::Vel1d => 2,
            EnvFamily::Dir2d | EnvFamily::RandParams => 4,
            EnvFamily::NegatedActions => NEGATED_DIMS,
        }
    }

    /// Leading state coordinates holding absolute position. They carry no
    /// reward or dynamics information, so learners leave them out of their
    /// network inputs.
    pub fn position_dims(self) -> usize {
        match self {
            EnvFamily::Vel1d => 1,
            EnvFamily::Dir2d | EnvFamily::RandParams => 2,
            EnvFamily::NegatedActions => 0,
        }
    }

    pub fn action_dim(self) -> usize {
        match self {
            EnvFamily::Vel1d => 1,
            EnvFamily::Dir2d | EnvFamily::RandParams => 2,
            EnvFamily::NegatedActions => NEGATED_DIMS,
        }
    }

    pub fn param_dim(self) -> usize {
        match self {
            EnvFamily::Vel1d | EnvFamily::Dir2d => 1,
            EnvFamily::NegatedActions => NEGATED_DIMS,
            EnvFamily::RandParams => 2,
        }
    }

    /// True when tasks share dynamics and differ only in reward.
    pub fn reward_only(self) -> bool {
        matches!(self, EnvFamily::Vel1d | EnvFamily::Dir2d)
    }
}

/// One MDP drawn from a family's task distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub family: EnvFamily,
    pub params: Vec<f64>,
    pub ood: bool,
}

impl TaskSpec {
    pub fn new(family: EnvFamily, params: Vec<f64>, ood: bool) -> Result<Self> {
        check_len("task parameters", family.param_dim(), params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config(format!("{} task parameters must be finite", family.name())));
        }
        if family == EnvFamily::NegatedActions && params.iter().any(|&m| m != 1.0 && m != -1.0) {
            return Err(Error::Config("negation mask entries must be +1 or -1".into()));
        }
        Ok(Self { family, params, ood })
    }

    pub fn vel1d(target: f64) -> Self {
        Self {
            family: EnvFamily::Vel1d,
            params: vec![target],
            ood: false,
        }
    }
}

/// Interval on the real line with independently open or closed ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub const fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub const fn open_lo(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: true,
        }
    }

    pub const fn open_hi(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi || (self.lo == self.hi && self.lo_closed && self.hi_closed))
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        loop {
            let x = self.lo + (self.hi - self.lo) * rng.random::<f64>();
            if self.contains(x) {
                return x;
            }
        }
    }
}

/// Where a partition's task parameters live.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    /// Axis-aligned box, optionally with an axis-aligned hole cut out.
    Box {
        axes: Vec<Interval>,
        hole: Option<Vec<Interval>>,
    },
    /// A fixed, ordered list of parameter vectors; tasks cycle through it.
    Discrete(Vec<Vec<f64>>),
}

impl Support {
    pub fn interval(iv: Interval) -> Self {
        Support::Box {
            axes: vec![iv],
            hole: None,
        }
    }

    pub fn contains(&self, params: &[f64]) -> bool {
        match self {
            Support::Box { axes, hole } => {
                let inside = |ivs: &[Interval]| {
                    ivs.len() == params.len() && ivs.iter().zip(params).all(|(iv, &p)| iv.contains(p))
                };
                inside(axes) && !hole.as_deref().is_some_and(inside)
            }
            Support::Discrete(points) => points.iter().any(|p| p.as_slice() == params),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Support::Box { axes, .. } => axes.is_empty() || axes.iter().any(Interval::is_empty),
            Support::Discrete(points) => points.is_empty(),
        }
    }

    fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        match self {
            Support::Box { axes, hole } => loop {
                let p: Vec<f64> = axes.iter().map(|iv| iv.sample(rng)).collect();
                let in_hole = hole
                    .as_ref()
                    .is_some_and(|h| h.iter().zip(&p).all(|(iv, &x)| iv.contains(x)));
                if !in_hole {
                    return p;
                }
            },
            Support::Discrete(points) => points[rng.random_range(0..points.len())].clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partition {
    Train,
    Test,
}

/// Train/test task supports for one family.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub family: EnvFamily,
    pub name: String,
    pub train_support: Support,
    pub test_support: Support,
    /// Test tasks lie outside the training support.
    pub ood: bool,
}

impl SplitSpec {
    /// Target velocities: train `[0, 2.5)`, test `[2.5, 3]`.
    pub fn vel1d_medium() -> Self {
        Self {
            family: EnvFamily::Vel1d,
            name: "medium".into(),
            train_support: Support::interval(Interval::open_hi(0.0, 2.5)),
            test_support: Support::interval(Interval::closed(2.5, 3.0)),
            ood: true,
        }
    }

    /// Target velocities: train `[0, 1.5]`, test `[2.5, 3]`.
    pub fn vel1d_hard() -> Self {
        Self {
            family: EnvFamily::Vel1d,
            name: "hard".into(),
            train_support: Support::interval(Interval::closed(0.0, 1.5)),
            test_support: Support::interval(Interval::closed(2.5, 3.0)),
            ood: true,
        }
    }

    /// Directions: train `[0, 1.5π]`, test the last quadrant `(1.5π, 2π)`.
    pub fn dir2d() -> Self {
        use std::f64::consts::PI;
        Self {
            family: EnvFamily::Dir2d,
            name: "quadrant".into(),
            train_support: Support::interval(Interval::closed(0.0, 1.5 * PI)),
            test_support: Support::interval(Interval {
                lo: 1.5 * PI,
                hi: 2.0 * PI,
                lo_closed: false,
                hi_closed: false,
            }),
            ood: true,
        }
    }

    /// Training masks never negate the last control; every test mask does.
    pub fn negated_actions() -> Self {
        Self {
            family: EnvFamily::NegatedActions,
            name: "last_joint".into(),
            train_support: Support::Discrete(negation_masks(false, 10)),
            test_support: Support::Discrete(negation_masks(true, 10)),
            ood: true,
        }
    }

    /// Gains: train `[0.75, 1.25]²`, test the rest of `[0.5, 1.5]²`.
    pub fn rand_params() -> Self {
        let inner = vec![Interval::closed(0.75, 1.25); 2];
        Self {
            family: EnvFamily::RandParams,
            name: "gains".into(),
            train_support: Support::Box {
                axes: inner.clone(),
                hole: None,
            },
            test_support: Support::Box {
                axes: vec![Interval::closed(0.5, 1.5); 2],
                hole: Some(inner),
            },
            ood: true,
        }
    }

    /// Look up a split by family and name.
    pub fn named(family: EnvFamily, name: &str) -> Result<Self> {
        let split = match (family, name) {
            (EnvFamily::Vel1d, "medium") => Self::vel1d_medium(),
            (EnvFamily::Vel1d, "hard") => Self::vel1d_hard(),
            (EnvFamily::Dir2d, "quadrant") => Self::dir2d(),
            (EnvFamily::NegatedActions, "last_joint") => Self::negated_actions(),
            (EnvFamily::RandParams, "gains") => Self::rand_params(),
            _ => {
                return Err(Error::Config(format!(
                    "unknown split '{name}' for family {}",
                    family.name()
                )))
            }
        };
        Ok(split)
    }

    /// Default split name of a family.
    pub fn default_name(family: EnvFamily) -> &'static str {
        match family {
            EnvFamily::Vel1d => "hard",
            EnvFamily::Dir2d => "quadrant",
            EnvFamily::NegatedActions => "last_joint",
            EnvFamily::RandParams => "gains",
        }
    }

    pub fn support(&self, partition: Partition) -> &Support {
        match partition {
            Partition::Train => &self.train_support,
            Partition::Test => &self.test_support,
        }
    }

    /// A fixed task set for a partition: discrete supports are walked in
    /// order (cycling), continuous ones are sampled.
    pub fn enumerate_tasks(&self, partition: Partition, count: usize, rng: &mut Rng) -> Result<Vec<TaskSpec>> {
        match self.support(partition) {
            Support::Discrete(points) if !points.is_empty() => Ok((0..count)
                .map(|i| TaskSpec {
                    family: self.family,
                    params: points[i % points.len()].clone(),
                    ood: self.ood && partition == Partition::Test,
                })
                .collect()),
            _ => (0..count).map(|_| sample_task(self, partition, rng)).collect(),
        }
    }
}

/// The `count` negation masks of one partition. The first three controls
/// follow the binary pattern of the task index (bit set = negated); the
/// last control is negated exactly when `negate_last`.
pub fn negation_masks(negate_last: bool, count: usize) -> Vec<Vec<f64>> {
    let free = NEGATED_DIMS - 1;
    (0..count)
        .map(|i| {
            let pattern = i % (1 << free);
            let mut mask: Vec<f64> = (0..free)
                .map(|b| if pattern >> b & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            mask.push(if negate_last { -1.0 } else { 1.0 });
            mask
        })
        .collect()
}

/// Draw a task uniformly from a partition's support.
pub fn sample_task(split: &SplitSpec, partition: Partition, rng: &mut Rng) -> Result<TaskSpec> {
    let support = split.support(partition);
    if support.is_empty() {
        return Err(Error::Config(format!(
            "split '{}' of {} has an empty {:?} support",
            split.name,
            split.family.name(),
            partition
        )));
    }
    Ok(TaskSpec {
        family: split.family,
        params: support.sample(rng),
        ood: split.ood && partition == Partition::Test,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub t: usize,
    pub horizon: usize,
}

pub fn reset(task: &TaskSpec, rng: &mut Rng) -> EnvState {
    reset_with_horizon(task, HORIZON, rng)
}

/// Start an episode; each state coordinate is uniform in
/// `[-INIT_HALF_WIDTH, INIT_HALF_WIDTH]`.
pub fn reset_with_horizon(task: &TaskSpec, horizon: usize, rng: &mut Rng) -> EnvState {
    let observation = (0..task.family.state_dim())
        .map(|_| rng.random_range(-INIT_HALF_WIDTH..=INIT_HALF_WIDTH))
        .collect();
    EnvState {
        observation,
        t: 0,
        horizon,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
}

fn clip_speed(v: &mut [f64], max: f64) {
    let speed = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if speed > max {
        let k = max / speed;
        v.iter_mut().for_each(|x| *x *= k);
    }
}

/// Advance one step. Actions are clipped to `[-1, 1]`; episodes end only at
/// the horizon.
pub fn step(task: &TaskSpec, st: &EnvState, action: &[f64]) -> Result<StepOutcome> {
    let family = task.family;
    check_len("action", family.action_dim(), action.len())?;
    check_len("state", family.state_dim(), st.observation.len())?;
    if st.t >= st.horizon {
        return Err(Error::Usage(format!("episode already finished at t = {}", st.t)));
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite {
            what: "action",
            step: None,
        });
    }
    let a: Vec<f64> = action.iter().map(|x| x.clamp(-1.0, 1.0)).collect();
    let s = &st.observation;
    let (next, reward) = match family {
        EnvFamily::Vel1d => {
            let v = (s[1] + DT * a[0]).clamp(-VEL1D_MAX_SPEED, VEL1D_MAX_SPEED);
            let x = s[0] + DT * v;
            (vec![x, v], -(v - task.params[0]).abs())
        }
        EnvFamily::Dir2d => {
            let angle = task.params[0];
            let (next, vel) = planar_step(s, &a, &[1.0, 1.0]);
            (next, vel[0] * angle.cos() + vel[1] * angle.sin())
        }
        EnvFamily::RandParams => {
            let (next, vel) = planar_step(s, &a, &task.params);
            (next, vel[0] * RAND_PARAMS_HEADING.cos() + vel[1] * RAND_PARAMS_HEADING.sin())
        }
        EnvFamily::NegatedActions => {
            let v: Vec<f64> = s
                .iter()
                .zip(&a)
                .zip(&task.params)
                .map(|((v, a), m)| (v + DT * a * m).clamp(-NEGATED_MAX_SPEED, NEGATED_MAX_SPEED))
                .collect();
            let progress = v.iter().zip(NEGATED_READOUT).map(|(v, w)| v * w).sum();
            (v, progress)
        }
    };
    let t = st.t + 1;
    Ok(StepOutcome {
        done: t == st.horizon,
        state: EnvState {
            observation: next,
            t,
            horizon: st.horizon,
        },
        reward,
    })
}

/// Point in the plane: velocity integrates `DT · gain ⊙ a` and is capped at
/// `PLANAR_MAX_SPEED`. Returns the next state and the new velocity.
fn planar_step(s: &[f64], a: &[f64], gain: &[f64]) -> (Vec<f64>, [f64; 2]) {
    let mut vel = [s[2] + DT * gain[0] * a[0], s[3] + DT * gain[1] * a[1]];
    clip_speed(&mut vel, PLANAR_MAX_SPEED);
    (vec![s[0] + DT * vel[0], s[1] + DT * vel[1], vel[0], vel[1]], vel)
}

/// Largest single-step reward the family can emit.
pub fn reward_upper_bound(family: EnvFamily) -> f64 {
    match family {
        EnvFamily::Vel1d => 0.0,
        EnvFamily::Dir2d | EnvFamily::RandParams => PLANAR_MAX_SPEED,
        EnvFamily::NegatedActions => NEGATED_READOUT.iter().sum::<f64>() * NEGATED_MAX_SPEED,
    }
}

#[derive(Clone, Debug)]
pub struct Rollout {
    pub transitions: Dataset,
    /// Undiscounted sum of rewards.
    pub ret: f64,
}

/// Run one episode of `horizon` steps with `policy`.
pub fn rollout<P>(task: &TaskSpec, mut policy: P, horizon: usize, rng: &mut Rng) -> Result<Rollout>
where
    P: FnMut(&[f64], &mut Rng) -> Result<Vec<f64>>,
{
    if horizon == 0 {
        return Err(Error::Usage("rollout horizon must be >= 1".into()));
    }
    let mut st = reset_with_horizon(task, horizon, rng);
    let mut transitions = Vec::with_capacity(horizon);
    let mut ret = 0.0;
    loop {
        let action = policy(&st.observation, rng)?;
        let out = step(task, &st, &action)?;
        ret += out.reward;
        transitions.push(Transition {
            state: st.observation.clone(),
            action: action.iter().map(|x| x.clamp(-1.0, 1.0)).collect(),
            next_state: out.state.observation.clone(),
            reward: out.reward,
            step_index: st.t,
        });
        st = out.state;
        if out.done {
            break;
        }
    }
    Ok(Rollout {
        transitions: Dataset::new(transitions),
        ret,
    })
}

/// Bang-bang controller driving `vel1d` to its target velocity as fast as
/// the dynamics allow, then holding it.
pub fn vel1d_oracle_action(task: &TaskSpec, observation: &[f64]) -> Vec<f64> {
    let gap = task.params[0] - observation[1];
    vec![(gap / DT).clamp(-1.0, 1.0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use std::f64::consts::PI;

    fn rng(seed: u64) -> Rng {
        stream(seed, Stream::Env)
    }

    #[test]
    fn split_samples_land_in_their_support() {
        let mut r = rng(0);
        let hard = SplitSpec::vel1d_hard();
        for _ in 0..200 {
            let t = sample_task(&hard, Partition::Train, &mut r).unwrap();
            assert!((0.0..=1.5).contains(&t.params[0]) && !t.ood);
            let t = sample_task(&hard, Partition::Test, &mut r).unwrap();
            assert!((2.5..=3.0).contains(&t.params[0]) && t.ood);
        }
        let dir = SplitSpec::dir2d();
        for _ in 0..200 {
            let t = sample_task(&dir, Partition::Train, &mut r).unwrap();
            assert!((0.0..=1.5 * PI).contains(&t.params[0]));
            let t = sample_task(&dir, Partition::Test, &mut r).unwrap();
            assert!(t.params[0] > 1.5 * PI && t.params[0] < 2.0 * PI);
        }
    }

    #[test]
    fn negated_masks_respect_last_joint_rule() {
        let train = negation_masks(false, 10);
        let test = negation_masks(true, 10);
        assert_eq!(train.len(), 10);
        assert!(train.iter().all(|m| m[NEGATED_DIMS - 1] == 1.0));
        assert!(test.iter().all(|m| m[NEGATED_DIMS - 1] == -1.0));
        // every pattern of the free controls appears
        let distinct: std::collections::BTreeSet<Vec<i8>> =
            train.iter().map(|m| m.iter().map(|&x| x as i8).collect()).collect();
        assert_eq!(distinct.len(), 8);
    }

    #[test]
    fn empty_support_is_a_config_error() {
        let mut split = SplitSpec::vel1d_hard();
        split.test_support = Support::interval(Interval::open_hi(1.0, 1.0));
        assert!(matches!(
            sample_task(&split, Partition::Test, &mut rng(0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn reset_starts_at_zero_inside_init_box() {
        let task = TaskSpec::vel1d(1.0);
        let mut r = rng(1);
        for _ in 0..1000 {
            let st = reset(&task, &mut r);
            assert_eq!(st.t, 0);
            assert!(st.observation.iter().all(|x| x.abs() <= INIT_HALF_WIDTH));
        }
        assert_eq!(reset(&task, &mut rng(9)), reset(&task, &mut rng(9)));
    }

    #[test]
    fn vel1d_zero_reward_on_target() {
        let task = TaskSpec::vel1d(1.0);
        let st = EnvState {
            observation: vec![0.0, 1.0],
            t: 5,
            horizon: HORIZON,
        };
        let out = step(&task, &st, &[0.0]).unwrap();
        assert_eq!(out.reward, 0.0);
        assert!(!out.done);
    }

    #[test]
    fn stepping_finished_episode_fails() {
        let task = TaskSpec::vel1d(1.0);
        let st = EnvState {
            observation: vec![0.0, 0.0],
            t: HORIZON,
            horizon: HORIZON,
        };
        assert!(matches!(step(&task, &st, &[0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn identity_mask_matches_unmasked_dynamics() {
        let plain = TaskSpec::new(EnvFamily::NegatedActions, vec![1.0; 4], false).unwrap();
        let st = EnvState {
            observation: vec![0.1, -0.2, 0.3, 0.0],
            t: 0,
            horizon: HORIZON,
        };
        let a = [0.5, -1.0, 0.25, 0.75];
        let out = step(&plain, &st, &a).unwrap();
        let expected: Vec<f64> = st.observation.iter().zip(a).map(|(v, a)| v + DT * a).collect();
        assert_eq!(out.state.observation, expected);
        assert_eq!(out.reward, expected.iter().map(|v| v * 0.25).sum::<f64>());
    }

    #[test]
    fn dir2d_max_speed_along_target_hits_bound() {
        let angle = 0.7;
        let task = TaskSpec::new(EnvFamily::Dir2d, vec![angle], false).unwrap();
        let st = EnvState {
            observation: vec![0.0, 0.0, 3.0 * angle.cos(), 3.0 * angle.sin()],
            t: 0,
            horizon: HORIZON,
        };
        let out = step(&task, &st, &[angle.cos(), angle.sin()]).unwrap();
        assert!((out.reward - reward_upper_bound(EnvFamily::Dir2d)).abs() < 1e-12);
    }

    #[test]
    fn zero_policy_vel1d_return() {
        let task = TaskSpec::vel1d(1.0);
        let r = rollout(&task, |_, _| Ok(vec![0.0]), HORIZON, &mut rng(2)).unwrap();
        // initial velocity noise is at most INIT_HALF_WIDTH per step
        assert!((r.ret + 200.0).abs() <= 200.0 * INIT_HALF_WIDTH + 1e-9);
        assert_eq!(r.transitions.len(), HORIZON);
    }

    #[test]
    fn episode_ends_exactly_at_horizon() {
        let task = TaskSpec::vel1d(0.5);
        let mut st = reset_with_horizon(&task, 3, &mut rng(3));
        let mut dones = vec![];
        for _ in 0..3 {
            let out = step(&task, &st, &[1.0]).unwrap();
            dones.push(out.done);
            st = out.state;
        }
        assert_eq!(dones, vec![false, false, true]);
    }

    #[test]
    fn reward_only_families_share_dynamics() {
        let a = TaskSpec::new(EnvFamily::Dir2d, vec![0.1], false).unwrap();
        let b = TaskSpec::new(EnvFamily::Dir2d, vec![4.0], false).unwrap();
        let st = reset(&a, &mut rng(4));
        let sa = step(&a, &st, &[0.3, -0.7]).unwrap();
        let sb = step(&b, &st, &[0.3, -0.7]).unwrap();
        assert_eq!(sa.state, sb.state);
        assert_ne!(sa.reward, sb.reward);
    }
}
