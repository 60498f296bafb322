//! Binary checkpoints: `"MIER"`, a little-endian `u16` version, then named
//! tensors until end of file. Each tensor is a `u32` name length, the UTF-8
//! name, a `u32` dimension count, the dimensions as `u32`, and the payload
//! as little-endian `f64` in row-major order. All integers are little-endian.

use std::collections::BTreeMap;
use std::path::Path;

use crate::diffcore::{Adam, ContextVector, ParamVector};
use crate::dynmodel::{Dataset, InputNormalizer, Transition};
use crate::error::{Error, Result};
use crate::orchestrate::{sac_dims_for, MetaModel, TrainSetup};
use crate::policy::SacState;
use crate::replay::{MultitaskReplayBuffer, TaskId};

pub const MAGIC: &[u8; 4] = b"MIER";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn vector(name: impl Into<String>, data: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            dims: vec![data.len() as u32],
            data,
        }
    }

    pub fn scalar(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            dims: Vec::new(),
            data: vec![value],
        }
    }
}

pub fn encode(tensors: &[Tensor]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for t in tensors {
        let expected: usize = t.dims.iter().map(|&d| d as usize).product();
        if expected != t.data.len() {
            return Err(Error::Shape {
                what: "checkpoint tensor",
                expected,
                got: t.data.len(),
            });
        }
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for d in &t.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for x in &t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4).map_err(|_| Error::Format("missing magic".into()))? != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = u16::from_le_bytes(c.take(2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let mut tensors = Vec::new();
    while c.pos < bytes.len() {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let ndims = c.u32()? as usize;
        let dims = (0..ndims).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or_else(|| Error::Format(format!("tensor {name} is too large")))?;
        let raw = c.take(count.checked_mul(8).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        tensors.push(Tensor { name, dims, data });
    }
    Ok(tensors)
}

pub fn write_tensors(path: &Path, tensors: &[Tensor]) -> Result<()> {
    std::fs::write(path, encode(tensors)?).map_err(|e| Error::io(format!("write {}", path.display()), e))
}

pub fn read_tensors(path: &Path) -> Result<Vec<Tensor>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
    decode(&bytes)
}

/// Tensors looked up by name.
struct Named(BTreeMap<String, Tensor>);

impl Named {
    fn new(tensors: Vec<Tensor>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for t in tensors {
            if map.contains_key(&t.name) {
                return Err(Error::Format(format!("duplicate tensor {}", t.name)));
            }
            map.insert(t.name.clone(), t);
        }
        Ok(Self(map))
    }

    fn take(&mut self, name: &str) -> Result<Vec<f64>> {
        self.0
            .remove(name)
            .map(|t| t.data)
            .ok_or_else(|| Error::Format(format!("missing tensor {name}")))
    }

    fn count(&mut self, name: &str) -> Result<u64> {
        match self.take(name)?.as_slice() {
            [x] if *x >= 0.0 && x.fract() == 0.0 => Ok(*x as u64),
            _ => Err(Error::Format(format!("tensor {name} is not a count"))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.0.keys().next() {
            Some(k) => Err(Error::Format(format!("unexpected tensor {k}"))),
            None => Ok(()),
        }
    }
}

fn adam_tensors(prefix: &str, adam: &Adam, out: &mut Vec<Tensor>) {
    let (m, v, t) = adam.state();
    out.push(Tensor::scalar(format!("{prefix}.lr"), adam.lr()));
    out.push(Tensor::vector(format!("{prefix}.m"), m.to_vec()));
    out.push(Tensor::vector(format!("{prefix}.v"), v.to_vec()));
    out.push(Tensor::scalar(format!("{prefix}.t"), t as f64));
}

fn adam_from(named: &mut Named, prefix: &str) -> Result<Adam> {
    let lr = named.take(&format!("{prefix}.lr"))?;
    let m = named.take(&format!("{prefix}.m"))?;
    let v = named.take(&format!("{prefix}.v"))?;
    let t = named.count(&format!("{prefix}.t"))?;
    let lr = *lr
        .first()
        .ok_or_else(|| Error::Format(format!("{prefix}.lr is empty")))?;
    Adam::from_state(lr, m, v, t).ok_or_else(|| Error::Format(format!("{prefix} moments disagree in length")))
}

const NETS: [&str; 5] = ["actor", "critic1", "critic2", "target1", "target2"];
const OPTS: [&str; 3] = ["actor", "critic1", "critic2"];

/// The tensors describing a model and policy. Counts are stored as exact
/// small integers in `f64`.
pub fn state_tensors(meta: &MetaModel, sac: &SacState) -> Vec<Tensor> {
    let norm = meta.model.normalizer();
    let mut out = vec![
        Tensor::vector("model.theta", meta.params.values().to_vec()),
        Tensor::vector("model.phi", meta.prior.values().to_vec()),
        Tensor::vector("model.input_mean", norm.mean.clone()),
        Tensor::vector("model.input_std", norm.std.clone()),
    ];
    let nets = [&sac.actor, &sac.critic1, &sac.critic2, &sac.target1, &sac.target2];
    for (name, net) in NETS.iter().zip(nets) {
        out.push(Tensor::vector(format!("sac.{name}"), net.values().to_vec()));
    }
    out.push(Tensor::scalar("sac.update_count", sac.update_count as f64));
    for (name, adam) in OPTS.iter().zip(sac.optimizers()) {
        adam_tensors(&format!("sac.opt.{name}"), adam, &mut out);
    }
    out
}

pub fn write_checkpoint(path: &Path, meta: &MetaModel, sac: &SacState) -> Result<()> {
    write_tensors(path, &state_tensors(meta, sac))
}

/// Read a checkpoint written for the same architecture as `setup`.
pub fn read_checkpoint(path: &Path, setup: &TrainSetup) -> Result<(MetaModel, SacState)> {
    state_from_tensors(read_tensors(path)?, setup)
}

pub fn state_from_tensors(tensors: Vec<Tensor>, setup: &TrainSetup) -> Result<(MetaModel, SacState)> {
    let mut named = Named::new(tensors)?;
    let mut meta = MetaModel::new(setup.model.clone(), &mut crate::rng::stream(0, crate::rng::Stream::ModelInit))?;
    let theta = named.take("model.theta")?;
    meta.params = ParamVector::new(meta.model.shape().clone(), theta)
        .map_err(|e| Error::Format(format!("model.theta: {e}")))?;
    let phi = named.take("model.phi")?;
    if phi.len() != setup.model.ctx_dim {
        return Err(Error::Format(format!(
            "model.phi has {} entries, configuration expects {}",
            phi.len(),
            setup.model.ctx_dim
        )));
    }
    meta.prior = ContextVector::new(phi)?;
    let normalizer = InputNormalizer {
        mean: named.take("model.input_mean")?,
        std: named.take("model.input_std")?,
    };
    meta.model
        .set_normalizer(normalizer)
        .map_err(|e| Error::Format(format!("model normalizer: {e}")))?;

    let dims = sac_dims_for(setup.split.family, setup.model.ctx_dim);
    let fresh = SacState::new(dims, &setup.sac, &mut crate::rng::stream(0, crate::rng::Stream::PolicyInit))?;
    let shapes = [&fresh.actor, &fresh.critic1, &fresh.critic2, &fresh.target1, &fresh.target2];
    let mut nets = Vec::with_capacity(5);
    for (name, like) in NETS.iter().zip(shapes) {
        let key = format!("sac.{name}");
        let values = named.take(&key)?;
        nets.push(ParamVector::new(like.shape().clone(), values).map_err(|e| Error::Format(format!("{key}: {e}")))?);
    }
    let update_count = named.count("sac.update_count")?;
    let opts = [
        adam_from(&mut named, "sac.opt.actor")?,
        adam_from(&mut named, "sac.opt.critic1")?,
        adam_from(&mut named, "sac.opt.critic2")?,
    ];
    named.finish()?;
    let nets: [ParamVector; 5] = nets.try_into().expect("five networks");
    let sac = SacState::from_parts(dims, &setup.sac, nets, update_count, opts)?;
    Ok((meta, sac))
}

/// Per-task transitions, as rows of `state, action, next_state, reward,
/// step_index`, and per-task contexts.
pub fn replay_tensors(buffer: &MultitaskReplayBuffer, contexts: &BTreeMap<TaskId, ContextVector>) -> Vec<Tensor> {
    let mut out = vec![Tensor::scalar("replay.capacity", buffer.capacity() as f64)];
    for id in buffer.task_ids() {
        let store = buffer.task(id).expect("listed task");
        let width = store.front().map_or(0, |t| 2 * t.state.len() + t.action.len() + 2);
        let mut data = Vec::with_capacity(store.len() * width);
        for t in store {
            data.extend_from_slice(&t.state);
            data.extend_from_slice(&t.action);
            data.extend_from_slice(&t.next_state);
            data.push(t.reward);
            data.push(t.step_index as f64);
        }
        out.push(Tensor {
            name: format!("replay.task.{id}"),
            dims: vec![store.len() as u32, width as u32],
            data,
        });
    }
    for (id, ctx) in contexts {
        out.push(Tensor::vector(format!("replay.context.{id}"), ctx.values().to_vec()));
    }
    out
}

pub fn write_replay(path: &Path, buffer: &MultitaskReplayBuffer, contexts: &BTreeMap<TaskId, ContextVector>) -> Result<()> {
    write_tensors(path, &replay_tensors(buffer, contexts))
}

/// Rebuild a buffer for transitions with the given state and action sizes.
pub fn read_replay(
    path: &Path,
    state_dim: usize,
    action_dim: usize,
) -> Result<(MultitaskReplayBuffer, BTreeMap<TaskId, ContextVector>)> {
    let mut capacity = None;
    let mut contexts = BTreeMap::new();
    let mut tasks = Vec::new();
    for t in read_tensors(path)? {
        if t.name == "replay.capacity" {
            capacity = Some(t.data.first().copied().unwrap_or(0.0) as usize);
        } else if let Some(id) = t.name.strip_prefix("replay.task.") {
            tasks.push((parse_id(id)?, t));
        } else if let Some(id) = t.name.strip_prefix("replay.context.") {
            contexts.insert(parse_id(id)?, ContextVector::new(t.data)?);
        } else {
            return Err(Error::Format(format!("unexpected tensor {}", t.name)));
        }
    }
    let capacity = capacity
        .filter(|&c| c > 0)
        .ok_or_else(|| Error::Format("missing replay.capacity".into()))?;
    let mut buffer = MultitaskReplayBuffer::new(capacity);
    let width = 2 * state_dim + action_dim + 2;
    for (id, t) in tasks {
        if t.dims.len() != 2 || t.dims[1] as usize != width {
            return Err(Error::Format(format!("{} has the wrong row width", t.name)));
        }
        let data: Dataset = t
            .data
            .chunks_exact(width)
            .map(|row| {
                let (s, rest) = row.split_at(state_dim);
                let (a, rest) = rest.split_at(action_dim);
                let (s2, rest) = rest.split_at(state_dim);
                Transition {
                    state: s.to_vec(),
                    action: a.to_vec(),
                    next_state: s2.to_vec(),
                    reward: rest[0],
                    step_index: rest[1] as usize,
                }
            })
            .collect();
        buffer.insert(id, &data)?;
    }
    Ok((buffer, contexts))
}

fn parse_id(s: &str) -> Result<TaskId> {
    s.parse().map_err(|_| Error::Format(format!("bad task id '{s}'")))
}
