//! Acceptance battery. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Pass criterion numbers to run a subset, e.g.
//! `cargo test -p mier-core --test acceptance -- 1 7`.
//! Meta-trained models are built once and shared between criteria.

use std::cell::OnceCell;
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mier_core::diffcore::gaussian::HALF_LOG_2PI;
use mier_core::diffcore::{gaussian_nll, GaussianOutput, Gradient};
use mier_core::dynmodel::{Dataset, Transition};
use mier_core::envs::{self, EnvFamily, Partition, SplitSpec, Support, TaskSpec};
use mier_core::harness::{self, run::PHASE_ADAPT_RELABEL, Mode, RunConfig};
use mier_core::orchestrate::{
    self, fork_eval_rng, meta_train, policy_return, AdaptConfig, MetaTrainer, PlainSacConfig,
};
use mier_core::policy::{ActMode, SacBatch, SacConfig, SacDims, SacState};
use mier_core::replay::{self, MultitaskReplayBuffer, RelabelConfig, RelabelMode};
use mier_core::rng::{normal, stream, substream, Rng, Stream};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::Rng as _;

const SEEDS: [u64; 3] = [0, 1, 2];

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(&config_path(name)).expect("shipped config parses")
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

/// Meta-trained models per seed, trained on first use.
struct Trained {
    cfg: RunConfig,
    runs: Vec<OnceCell<(MetaTrainer, Duration)>>,
}

impl Trained {
    fn new(cfg_name: &str) -> Self {
        Self {
            cfg: load(cfg_name),
            runs: SEEDS.iter().map(|_| OnceCell::new()).collect(),
        }
    }

    fn get(&self, i: usize) -> &(MetaTrainer, Duration) {
        self.runs[i].get_or_init(|| {
            let t0 = Instant::now();
            let trainer = meta_train(self.cfg.train.clone(), SEEDS[i], |_, _| Ok(None)).expect("meta-training runs");
            (trainer, t0.elapsed())
        })
    }
}

struct Shared {
    vel: Trained,
    neg: Trained,
}

fn c1_gradient_oracle(_: &Shared) -> Verdict {
    let cfg = load("vel1d_hard.cfg").check_grads;
    let t0 = Instant::now();
    let report = harness::run_battery(&cfg, 0, None).expect("battery runs");
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        report.rows.len() >= 100 && report.passed(1e-4) && secs < 30.0,
        format!(
            "{} instances, max relative error {:.2e} (< 1e-4), {:.1}s (< 30s)",
            report.rows.len(),
            report.max_rel_error,
            secs
        ),
    )
}

fn c2_adaptation_descent(shared: &Shared) -> Verdict {
    let (trainer, train_time) = shared.vel.get(0);
    let t0 = Instant::now();
    let meta = &trainer.meta;
    let mc = meta.model.config();
    let (alpha, k) = (mc.inner_lr, mc.inner_steps);
    let mut task_rng = substream(0, Stream::Tasks, 2);
    let mut env_rng = substream(0, Stream::Env, 2);
    let mut decreased = 0;
    for _ in 0..50 {
        let task = envs::sample_task(&SplitSpec::vel1d_hard(), Partition::Train, &mut task_rng).unwrap();
        let data = orchestrate::collect(&trainer.sac, &task, &meta.prior, 200, 200, ActMode::Sample, &mut env_rng)
            .unwrap();
        let before = meta.model.model_nll(&meta.params, &meta.prior, &data).unwrap();
        let phi = meta.identify(&data).unwrap();
        let after = meta.model.model_nll(&meta.params, &phi, &data).unwrap();
        if after < before {
            decreased += 1;
        }
    }
    let total = *train_time + t0.elapsed();
    verdict(
        decreased >= 45 && total.as_secs_f64() < 600.0,
        format!(
            "NLL decreased on {decreased}/50 tasks (>= 45) with alpha={alpha}, k={k}; {:.0}s incl. training (< 600s)",
            total.as_secs_f64()
        ),
    )
}

/// Scripted oracle on vel1d with target 1: full throttle until the target
/// is reached. From rest the velocities are 0.1, 0.2, ..., 1.0, so the
/// return is -(0.9 + 0.8 + ... + 0.1) = -4.5.
const VEL1D_ORACLE_RETURN: f64 = -4.5;

fn c3_sac_sanity(_: &Shared) -> Verdict {
    let task = TaskSpec::vel1d(1.0);
    let oracle_check = envs::rollout(
        &task,
        |s, _| Ok(envs::vel1d_oracle_action(&task, s)),
        envs::HORIZON,
        &mut stream(0, Stream::Eval),
    )
    .unwrap()
    .ret;
    let desk = load("vel1d_hard.cfg").train.sac;
    let sac_cfg = SacConfig {
        reward_scale: 50.0,
        ..desk
    };
    let cfg = PlainSacConfig::default();
    let t0 = Instant::now();
    let (_, curve) = orchestrate::train_plain_sac(&task, 0, &sac_cfg, &cfg, 0).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let threshold = VEL1D_ORACLE_RETURN * 1.15;
    let (best_step, best) = curve.iter().copied().fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    verdict(
        best >= threshold && secs < 900.0,
        format!(
            "best return {best:.3} at {best_step} steps vs oracle {VEL1D_ORACLE_RETURN} (simulated {oracle_check:.3}), \
             threshold {threshold:.3}; {} env steps in {secs:.0}s (< 900s)",
            cfg.env_steps
        ),
    )
}

fn c4_identification(shared: &Shared) -> Verdict {
    let mut adapted = Vec::new();
    let mut prior = Vec::new();
    let mut per_seed = Vec::new();
    let mut cfg = AdaptConfig::for_family(EnvFamily::Vel1d);
    cfg.policy_budget = 0;
    for (i, &seed) in SEEDS.iter().enumerate() {
        let (trainer, _) = shared.vel.get(i);
        let mut task_rng = substream(seed, Stream::Tasks, 3);
        for j in 0..10 {
            let task = envs::sample_task(&SplitSpec::vel1d_hard(), Partition::Train, &mut task_rng).unwrap();
            let mut rng = substream(seed, Stream::Adapt, 100 + j);
            let mut eval_rng = fork_eval_rng(&mut rng.clone());
            let out = orchestrate::adapt(
                &trainer.meta,
                &trainer.sac,
                &trainer.setup.sac,
                &trainer.buffer,
                &task,
                &cfg,
                &mut rng,
            )
            .unwrap();
            let base = policy_return(&trainer.sac, &task, &trainer.meta.prior, 1, cfg.horizon, &mut eval_rng).unwrap();
            adapted.push(out.return_before);
            prior.push(base);
        }
        let n = adapted.len();
        per_seed.push(format!("{:.2}/{:.2}", median(&adapted[n - 10..]), median(&prior[n - 10..])));
    }
    let (ma, mp) = (median(&adapted), median(&prior));
    // Rewards are non-positive, so "3x the return" is read as a third of
    // the cost.
    verdict(
        3.0 * ma.abs() <= mp.abs(),
        format!(
            "median return adapted {ma:.2} vs prior {mp:.2} over {} tasks (cost ratio {:.2}, need >= 3); per-seed [{}]",
            adapted.len(),
            mp / ma,
            per_seed.join(", ")
        ),
    )
}

/// Per-seed medians of (MIER, MIER-wR) returns on test tasks.
fn relabel_gain(trained: &Trained, tasks_per_seed: usize) -> (Vec<(f64, f64)>, Vec<f64>, Vec<f64>) {
    let mut per_seed = Vec::new();
    let (mut all_full, mut all_wr) = (Vec::new(), Vec::new());
    for (i, &seed) in SEEDS.iter().enumerate() {
        let (trainer, _) = trained.get(i);
        let mut cfg = trained.cfg.clone();
        cfg.seed = seed;
        cfg.test_tasks = tasks_per_seed;
        let tasks = harness::run::test_tasks(&cfg).unwrap();
        let (mut full, mut wr) = (Vec::new(), Vec::new());
        for (j, task) in tasks.iter().enumerate() {
            let mut rng = substream(seed, Stream::Adapt, j as u64);
            let out = orchestrate::adapt(
                &trainer.meta,
                &trainer.sac,
                &trainer.setup.sac,
                &trainer.buffer,
                task,
                &cfg.adapt,
                &mut rng,
            )
            .unwrap();
            full.push(out.return_after);
            wr.push(out.return_before);
        }
        per_seed.push((median(&full), median(&wr)));
        all_full.extend(full);
        all_wr.extend(wr);
    }
    (per_seed, all_full, all_wr)
}

fn c5_relabeling_helps(shared: &Shared) -> Verdict {
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, trained) in [("vel1d-hard", &shared.vel), ("negated_actions", &shared.neg)] {
        let (per_seed, full, wr) = relabel_gain(trained, 10);
        let (mf, mw) = (median(&full), median(&wr));
        let strict = per_seed.iter().filter(|(f, w)| f > w).count();
        let ok = mf >= mw && strict >= 2;
        passed &= ok;
        let seeds: Vec<String> = per_seed.iter().map(|(f, w)| format!("{f:.2}/{w:.2}")).collect();
        parts.push(format!(
            "{name} ({} relabeling): median MIER {mf:.2} vs MIER-wR {mw:.2}, per-seed [{}], strictly better in {strict}/3 [{}]",
            trained.cfg.adapt.relabel.mode.name(),
            seeds.join(", "),
            if ok { "ok" } else { "not met" }
        ));
    }
    verdict(passed, parts.join("; "))
}

fn same_bits(a: &SacState, b: &SacState) -> bool {
    let nets = |s: &SacState| {
        [&s.actor, &s.critic1, &s.critic2, &s.target1, &s.target2]
            .iter()
            .flat_map(|n| n.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    nets(a) == nets(b) && a.update_count == b.update_count
}

fn c6_gate_contract(shared: &Shared) -> Verdict {
    let (trainer, _) = shared.vel.get(0);
    let dir = tempfile::tempdir().unwrap();
    harness::write_checkpoint(&dir.path().join("ckpt_1.bin"), &trainer.meta, &trainer.sac).unwrap();
    harness::write_replay(&dir.path().join("replay.bin"), &trainer.buffer, &trainer.contexts).unwrap();
    let mut cfg = shared.vel.cfg.clone();
    cfg.mode = Mode::Adapt;
    cfg.out_dir = dir.path().to_path_buf();
    cfg.test_tasks = 3;
    cfg.adapt.gate_threshold = f64::NEG_INFINITY;
    harness::run(&cfg).unwrap();
    let rows = harness::read_metrics(&dir.path().join("metrics.csv")).unwrap();
    let zero_rows = rows.iter().all(|r| r.synthetic_transitions_used == 0);
    let relabel_rows = rows.iter().filter(|r| r.phase == PHASE_ADAPT_RELABEL).count();

    let mut wr_cfg = cfg.adapt.clone();
    wr_cfg.policy_budget = 0;
    wr_cfg.gate_threshold = shared.vel.cfg.adapt.gate_threshold;
    let mut identical = true;
    for (j, task) in harness::run::test_tasks(&cfg).unwrap().iter().enumerate() {
        let run = |c: &AdaptConfig| {
            let mut rng = substream(cfg.seed, Stream::Adapt, j as u64);
            orchestrate::adapt(&trainer.meta, &trainer.sac, &cfg.train.sac, &trainer.buffer, task, c, &mut rng).unwrap()
        };
        let gated = run(&cfg.adapt);
        let wr = run(&wr_cfg);
        identical &= same_bits(&gated.sac, &wr.sac)
            && same_bits(&gated.sac, &trainer.sac)
            && gated.synthetic_used == 0
            && !gated.report.gate_passed
            && gated.return_after.to_bits() == wr.return_after.to_bits();
    }
    verdict(
        zero_rows && relabel_rows == 3 && identical,
        format!(
            "{} metrics rows, all with zero synthetic transitions: {zero_rows}; adapted policy bit-identical to MIER-wR: {identical}",
            rows.len()
        ),
    )
}

fn transition_key(t: &Transition) -> Vec<u64> {
    t.state
        .iter()
        .chain(&t.action)
        .chain(&t.next_state)
        .map(|x| x.to_bits())
        .collect()
}

fn c7_relabel_exactness(shared: &Shared) -> Verdict {
    const N: usize = 10_000;
    let (trainer, _) = shared.neg.get(0);
    let meta = &trainer.meta;
    let buffer = &trainer.buffer;
    let stored: HashSet<Vec<u64>> = buffer.iter().map(|(_, t)| transition_key(t)).collect();
    let sa_stored: HashSet<Vec<u64>> = buffer
        .iter()
        .map(|(_, t)| t.state.iter().chain(&t.action).map(|x| x.to_bits()).collect())
        .collect();
    let ctx = trainer.contexts.values().next().unwrap().clone();
    let mut rng = stream(0, Stream::Sampling);

    let full_cfg = RelabelConfig {
        mode: RelabelMode::Full,
        stochastic: false,
        ..Default::default()
    };
    let full = replay::relabel(buffer, &meta.model, &meta.params, &ctx, N, &full_cfg, None, &mut rng).unwrap();
    let rows = full.transitions.transitions();
    let states: Vec<Vec<f64>> = rows.iter().map(|t| t.state.clone()).collect();
    let actions: Vec<Vec<f64>> = rows.iter().map(|t| t.action.clone()).collect();
    let direct = meta
        .model
        .predict_batch(&meta.params, &ctx, &states, &actions, false, &mut rng)
        .unwrap();
    let mut full_ok = rows.len() == N;
    for (t, p) in rows.iter().zip(&direct) {
        let next = p.next_state.as_ref().unwrap();
        full_ok &= t.reward.to_bits() == p.reward.to_bits()
            && t.next_state.iter().zip(next).all(|(a, b)| a.to_bits() == b.to_bits())
            && sa_stored.contains(&t.state.iter().chain(&t.action).map(|x| x.to_bits()).collect::<Vec<_>>());
    }
    // Spot-check single-row predictions against the batched ones.
    for (t, p) in rows.iter().zip(&direct).step_by(997) {
        let single = meta.model.predict(&meta.params, &ctx, &t.state, &t.action, false, &mut rng).unwrap();
        full_ok &= single.reward.to_bits() == p.reward.to_bits();
    }

    let ro_cfg = RelabelConfig {
        mode: RelabelMode::RewardOnly,
        stochastic: false,
        ..Default::default()
    };
    let ro = replay::relabel(buffer, &meta.model, &meta.params, &ctx, N, &ro_cfg, None, &mut rng).unwrap();
    let ro_rows = ro.transitions.transitions();
    let states: Vec<Vec<f64>> = ro_rows.iter().map(|t| t.state.clone()).collect();
    let actions: Vec<Vec<f64>> = ro_rows.iter().map(|t| t.action.clone()).collect();
    let direct = meta
        .model
        .predict_batch(&meta.params, &ctx, &states, &actions, false, &mut rng)
        .unwrap();
    let mut ro_ok = ro_rows.len() == N;
    for (t, p) in ro_rows.iter().zip(&direct) {
        ro_ok &= stored.contains(&transition_key(t)) && t.reward.to_bits() == p.reward.to_bits();
    }
    verdict(
        full_ok && ro_ok,
        format!("{N} deterministic full relabels equal model means: {full_ok}; {N} reward-only relabels keep (s, a, s') and equal model rewards: {ro_ok}"),
    )
}

fn c8_determinism(_: &Shared) -> Verdict {
    let base = load("smoke.cfg");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        for mode in [Mode::MetaTrain, Mode::Adapt, Mode::Eval, Mode::CheckGrads] {
            let mut cfg = base.clone();
            cfg.mode = mode;
            cfg.out_dir = dir.path().to_path_buf();
            harness::run(&cfg).unwrap();
        }
    }
    let mut names: Vec<String> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        if name == "config.resolved" {
            continue;
        }
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap_or_default();
        if a != b {
            differing.push(name.clone());
        }
    }
    let has = |n: &str| names.iter().any(|x| x == n);
    let complete = has("metrics.csv") && has("ckpt_3.bin") && has("replay.bin") && has("grad_check.csv");
    verdict(
        complete && differing.is_empty(),
        format!("compared {} output files across two runs of every mode; differing: {differing:?}", names.len() - 1),
    )
}

fn property(name: &str, cases: u32, results: &mut Vec<String>, f: impl FnOnce(&mut TestRunner) -> Result<(), String>) -> bool {
    let mut runner = TestRunner::new(PropConfig {
        cases,
        failure_persistence: None,
        ..PropConfig::default()
    });
    match f(&mut runner) {
        Ok(()) => {
            results.push(format!("{name} ok"));
            true
        }
        Err(e) => {
            results.push(format!("{name} FAILED: {e}"));
            false
        }
    }
}

fn c9_invariants(_: &Shared) -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    ok &= property("nll bound", 256, &mut notes, |r| {
        r.run(
            &proptest::collection::vec((-5.0f64..5.0, -3.0f64..2.0, -5.0f64..5.0), 1..6),
            |rows| {
                let out = GaussianOutput {
                    mean: rows.iter().map(|x| x.0).collect(),
                    log_std: rows.iter().map(|x| x.1).collect(),
                };
                let target: Vec<f64> = rows.iter().map(|x| x.2).collect();
                let bound: f64 = out.log_std.iter().map(|l| l + HALF_LOG_2PI).sum();
                prop_assert!(gaussian_nll(&out, &target).unwrap() >= bound - 1e-12);
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
    });
    ok &= property("target soft update", 64, &mut notes, |r| {
        r.run(&(0u64..1000, 0.001f64..1.0), |(seed, tau)| {
            let dims = SacDims {
                state_dim: 2,
                action_dim: 1,
                ctx_dim: 2,
                position_dims: 1,
            };
            let cfg = SacConfig {
                hidden: vec![8],
                batch_size: 8,
                target_update_rate: tau,
                ..Default::default()
            };
            let mut rng = stream(seed, Stream::PolicyInit);
            let mut sac = SacState::new(dims, &cfg, &mut rng).unwrap();
            let shifted: Vec<f64> = sac.target2.values().iter().map(|v| v - 0.21).collect();
            sac.target2.set_values(shifted).unwrap();
            let old = sac.target2.clone();
            let mut batch = SacBatch::new();
            for _ in 0..8 {
                batch.push(&dims, &random_transition(2, 1, &mut rng), &[normal(&mut rng), normal(&mut rng)]).unwrap();
            }
            sac.critic_update(&batch, &cfg, &mut rng).unwrap();
            for ((t, o), c) in sac.target2.values().iter().zip(old.values()).zip(sac.critic2.values()) {
                prop_assert_eq!(t.to_bits(), ((1.0 - tau) * o + tau * c).to_bits());
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    ok &= property("buffer FIFO", 128, &mut notes, |r| {
        r.run(&(1usize..30, proptest::collection::vec(0usize..15, 1..12)), |(capacity, sizes)| {
            let mut buf = MultitaskReplayBuffer::new(capacity);
            let mut all = Vec::new();
            let mut rng = stream(0, Stream::Sampling);
            for n in sizes {
                let batch: Dataset = (0..n)
                    .map(|_| {
                        let mut t = random_transition(1, 1, &mut rng);
                        t.step_index = all.len();
                        all.push(all.len());
                        t
                    })
                    .collect();
                buf.insert(0, &batch).unwrap();
            }
            let kept: Vec<usize> = buf.task(0).map(|s| s.iter().map(|t| t.step_index).collect()).unwrap_or_default();
            let start = all.len().saturating_sub(capacity);
            prop_assert_eq!(kept, all[start..].to_vec());
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    ok &= property("split disjointness", 64, &mut notes, |r| {
        r.run(&(0u64..10_000), |seed| {
            let mut rng = stream(seed, Stream::Tasks);
            for split in [
                SplitSpec::vel1d_medium(),
                SplitSpec::vel1d_hard(),
                SplitSpec::dir2d(),
                SplitSpec::negated_actions(),
                SplitSpec::rand_params(),
            ] {
                for _ in 0..20 {
                    let test = envs::sample_task(&split, Partition::Test, &mut rng).unwrap();
                    prop_assert!(!split.support(Partition::Train).contains(&test.params));
                    let train = envs::sample_task(&split, Partition::Train, &mut rng).unwrap();
                    prop_assert!(!split.support(Partition::Test).contains(&train.params));
                }
                if let (Support::Discrete(a), Support::Discrete(b)) =
                    (split.support(Partition::Train), split.support(Partition::Test))
                {
                    prop_assert!(a.iter().all(|m| !b.contains(m)));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    ok &= property("action range", 64, &mut notes, |r| {
        r.run(&(0u64..1000, 0.1f64..50.0), |(seed, scale)| {
            let dims = SacDims {
                state_dim: 4,
                action_dim: 2,
                ctx_dim: 3,
                position_dims: 2,
            };
            let cfg = SacConfig {
                hidden: vec![8, 8],
                ..Default::default()
            };
            let mut rng = stream(seed, Stream::PolicyInit);
            let mut sac = SacState::new(dims, &cfg, &mut rng).unwrap();
            let big: Vec<f64> = sac.actor.values().iter().map(|v| v * scale).collect();
            sac.actor.set_values(big).unwrap();
            for _ in 0..50 {
                let s: Vec<f64> = (0..4).map(|_| 5.0 * normal(&mut rng)).collect();
                let c: Vec<f64> = (0..3).map(|_| 5.0 * normal(&mut rng)).collect();
                for mode in [ActMode::Sample, ActMode::Mean] {
                    let a = sac.act(&s, &c, mode, &mut rng).unwrap();
                    prop_assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    ok &= property("gradient clip bound", 256, &mut notes, |r| {
        r.run(
            &(
                proptest::collection::vec(-1e3f64..1e3, 0..20),
                proptest::collection::vec(-1e3f64..1e3, 0..5),
                1e-6f64..100.0,
            ),
            |(p, c, max)| {
                let mut g = Gradient {
                    wrt_params: Some(p),
                    wrt_context: Some(c),
                };
                g.clip_norm(max);
                prop_assert!(g.norm() <= max * (1.0 + 1e-12));
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
    });
    verdict(ok, notes.join(", "))
}

fn random_transition(s: usize, a: usize, rng: &mut Rng) -> Transition {
    Transition {
        state: (0..s).map(|_| normal(rng)).collect(),
        action: (0..a).map(|_| rng.random_range(-1.0..1.0)).collect(),
        next_state: (0..s).map(|_| normal(rng)).collect(),
        reward: normal(rng),
        step_index: 0,
    }
}

type Criterion = (u32, &'static str, fn(&Shared) -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "meta-gradient oracle", c1_gradient_oracle),
        (2, "adaptation descent", c2_adaptation_descent),
        (3, "SAC sanity", c3_sac_sanity),
        (4, "in-distribution identification", c4_identification),
        (5, "OOD relabeling helps", c5_relabeling_helps),
        (6, "gate contract", c6_gate_contract),
        (7, "relabel exactness", c7_relabel_exactness),
        (8, "determinism", c8_determinism),
        (9, "invariant suites", c9_invariants),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let shared = Shared {
        vel: Trained::new("vel1d_hard.cfg"),
        neg: Trained::new("negated_actions.cfg"),
    };
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let v = check(&shared);
        let status = if v.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {id} [{status}] {name}: {} ({:.1}s)",
            v.detail,
            t0.elapsed().as_secs_f64()
        );
        if !v.passed {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
