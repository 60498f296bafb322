//! Fully connected networks stored as one flat parameter vector, with a
//! batched forward pass that records a tape and a matching reverse pass.

use rand::Rng;

use super::real::Real;
use crate::error::{check_len, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    #[inline]
    fn apply<T: Real>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z.value() > 0.0 {
                    z
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative<T: Real>(self, z: T, y: T) -> T {
        match self {
            Activation::Relu => {
                if z.value() > 0.0 {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
        }
    }
}

/// Layer widths of a feed-forward network with a linear output head.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkShape {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl NetworkShape {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        output_dim: usize,
        activation: Activation,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden_dims.iter().any(|&h| h == 0) {
            return Err(Error::Usage(format!(
                "network widths must be positive (input {input_dim}, hidden {hidden_dims:?}, output {output_dim})"
            )));
        }
        Ok(Self {
            input_dim,
            hidden_dims,
            output_dim,
            activation,
        })
    }

    /// (fan_in, fan_out) of every affine layer, input to output.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|&(i, o)| i * o + o).sum()
    }
}

/// Flat network parameters. Per layer: the `fan_out x fan_in` weight matrix
/// in row-major order followed by the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    shape: NetworkShape,
}

impl ParamVector {
    pub fn new(shape: NetworkShape, values: Vec<f64>) -> Result<Self> {
        check_len("parameter vector", shape.param_count(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "parameter vector",
                step: None,
            });
        }
        Ok(Self { values, shape })
    }

    pub fn zeros(shape: NetworkShape) -> Self {
        let values = vec![0.0; shape.param_count()];
        Self { values, shape }
    }

    /// Uniform fan-in initialisation for weights, zero biases.
    pub fn init<R: Rng + ?Sized>(shape: NetworkShape, rng: &mut R) -> Self {
        let mut values = Vec::with_capacity(shape.param_count());
        for (fan_in, fan_out) in shape.layers() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            values.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self { values, shape }
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Replace the values, keeping the shape. Rejects wrong lengths and
    /// non-finite entries.
    pub fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        check_len("parameter vector", self.values.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "parameter vector",
                step: None,
            });
        }
        self.values = values;
        Ok(())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Latent task context fed to the model, actor and critics.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextVector(Vec<f64>);

impl ContextVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "context vector",
                step: None,
            });
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Gradient with respect to parameters and/or context.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Gradient {
    pub wrt_params: Option<Vec<f64>>,
    pub wrt_context: Option<Vec<f64>>,
}

impl Gradient {
    /// Euclidean norm over every present part.
    pub fn norm(&self) -> f64 {
        self.wrt_params
            .iter()
            .chain(self.wrt_context.iter())
            .flat_map(|v| v.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescale so the joint norm is at most `max_norm`. Returns the norm
    /// before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.norm();
        if norm > max_norm && norm > 0.0 {
            let k = max_norm / norm;
            for part in self.wrt_params.iter_mut().chain(self.wrt_context.iter_mut()) {
                part.iter_mut().for_each(|x| *x *= k);
            }
        }
        norm
    }
}

/// Activations recorded by [`forward_tape`] for the reverse pass.
#[derive(Clone, Debug)]
pub struct Tape<T> {
    rows: usize,
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<T>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<T>>,
    output: Vec<T>,
}

impl<T: Real> Tape<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Row-major `rows x output_dim` network output.
    pub fn output(&self) -> &[T] {
        &self.output
    }
}

/// Batched forward pass over `rows` inputs stored row-major.
pub fn forward_tape<T: Real>(
    shape: &NetworkShape,
    params: &[T],
    input: &[T],
    rows: usize,
) -> Result<Tape<T>> {
    check_len("network parameters", shape.param_count(), params.len())?;
    check_len("network input", rows * shape.input_dim, input.len())?;
    let layers = shape.layers();
    let last = layers.len() - 1;
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(last);
    let mut x = input.to_vec();
    let mut offset = 0;
    for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
        let w = &params[offset..offset + fan_in * fan_out];
        let b = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        offset += fan_in * fan_out + fan_out;
        let mut z = Vec::with_capacity(rows * fan_out);
        for _ in 0..rows {
            z.extend_from_slice(b);
        }
        // z += x · Wᵀ
        T::gemm(rows, fan_in, fan_out, &x, fan_in, 1, w, 1, fan_in, 1.0, &mut z, fan_out, 1);
        if l == last {
            inputs.push(x);
            return Ok(Tape {
                rows,
                inputs,
                pre,
                output: z,
            });
        }
        let act = shape.activation;
        let y: Vec<T> = z.iter().map(|&v| act.apply(v)).collect();
        inputs.push(std::mem::replace(&mut x, y));
        pre.push(z);
    }
    unreachable!("a network has at least one layer")
}

/// Reverse pass. Given `d_output` (`rows x output_dim`), returns the
/// gradient with respect to the flat parameters and to the input.
pub fn backward<T: Real>(
    shape: &NetworkShape,
    params: &[T],
    tape: &Tape<T>,
    d_output: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    check_len("output gradient", tape.rows * shape.output_dim, d_output.len())?;
    let rows = tape.rows;
    let layers = shape.layers();
    let mut d_params = vec![T::zero(); params.len()];
    let mut offsets = Vec::with_capacity(layers.len());
    let mut offset = 0;
    for &(i, o) in &layers {
        offsets.push(offset);
        offset += i * o + o;
    }
    let mut dz = d_output.to_vec();
    for l in (0..layers.len()).rev() {
        let (fan_in, fan_out) = layers[l];
        let off = offsets[l];
        let x = &tape.inputs[l];
        {
            let (dw, db) = d_params[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            // dW = dzᵀ · x
            T::gemm(fan_out, rows, fan_in, &dz, 1, fan_out, x, fan_in, 1, 0.0, dw, fan_in, 1);
            for r in 0..rows {
                for (j, g) in db.iter_mut().enumerate() {
                    *g += dz[r * fan_out + j];
                }
            }
        }
        let w = &params[off..off + fan_in * fan_out];
        let mut dx = vec![T::zero(); rows * fan_in];
        // dx = dz · W
        T::gemm(rows, fan_out, fan_in, &dz, fan_out, 1, w, fan_in, 1, 0.0, &mut dx, fan_in, 1);
        if l == 0 {
            return Ok((d_params, dx));
        }
        let act = shape.activation;
        let z = &tape.pre[l - 1];
        let y = &tape.inputs[l];
        for ((g, &zv), &yv) in dx.iter_mut().zip(z).zip(y) {
            *g *= act.derivative(zv, yv);
        }
        dz = dx;
    }
    unreachable!("a network has at least one layer")
}

/// Evaluate the network on a single input.
pub fn forward(params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    check_len("network input", params.shape.input_dim, input.len())?;
    let tape = forward_tape(&params.shape, &params.values, input, 1)?;
    Ok(tape.output)
}

/// Evaluate the network on `rows` inputs stored row-major.
pub fn forward_batch(params: &ParamVector, input: &[f64], rows: usize) -> Result<Vec<f64>> {
    let tape = forward_tape(&params.shape, &params.values, input, rows)?;
    Ok(tape.output)
}
