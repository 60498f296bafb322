//! Gradients of scalar losses over (parameters, context), and meta-gradients
//! through inner gradient steps on the context.

use super::network::{ContextVector, Gradient, ParamVector};
use super::real::{lift, Dual, Real};
use crate::error::{check_len, Error, Result};

/// Value and full gradient of a loss evaluated in scalar type `T`.
#[derive(Clone, Debug)]
pub struct LossGrad<T> {
    pub value: T,
    pub d_params: Vec<T>,
    pub d_context: Vec<T>,
}

/// A scalar loss of (parameters, context) that can report its exact
/// reverse-mode gradient in any [`Real`] scalar.
///
/// Evaluating with [`Dual`] scalars seeded along the context yields the
/// directional derivative of the gradient, i.e. a Hessian-vector product.
pub trait DiffLoss {
    fn eval<T: Real>(&self, params: &[T], context: &[T]) -> Result<LossGrad<T>>;
}

impl<L: DiffLoss + ?Sized> DiffLoss for &L {
    fn eval<T: Real>(&self, params: &[T], context: &[T]) -> Result<LossGrad<T>> {
        (**self).eval(params, context)
    }
}

fn ensure_finite(values: &[f64], what: &'static str, step: Option<usize>) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what, step })
    }
}

/// Loss value and reverse-mode gradient at (params, context).
pub fn grad<L: DiffLoss>(loss: &L, params: &[f64], context: &[f64]) -> Result<(f64, Gradient)> {
    let out = loss.eval::<f64>(params, context)?;
    if !out.value.is_finite() {
        return Err(Error::NonFinite {
            what: "loss",
            step: None,
        });
    }
    check_len("parameter gradient", params.len(), out.d_params.len())?;
    check_len("context gradient", context.len(), out.d_context.len())?;
    ensure_finite(&out.d_params, "parameter gradient", None)?;
    ensure_finite(&out.d_context, "context gradient", None)?;
    Ok((
        out.value,
        Gradient {
            wrt_params: Some(out.d_params),
            wrt_context: Some(out.d_context),
        },
    ))
}

/// [`grad`] over the crate's parameter and context types.
pub fn grad_at<L: DiffLoss>(
    loss: &L,
    params: &ParamVector,
    context: &ContextVector,
) -> Result<(f64, Gradient)> {
    grad(loss, params.values(), context.values())
}

/// Gradient with respect to the context only.
pub fn context_grad<L: DiffLoss>(loss: &L, params: &[f64], context: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (value, g) = grad(loss, params, context)?;
    Ok((value, g.wrt_context.unwrap_or_default()))
}

/// Hessian of the loss applied to the direction `(0, v)`, i.e. the pair
/// `(∂²L/∂θ∂φ · v, ∂²L/∂φ² · v)`.
pub fn context_hvp<L: DiffLoss>(
    loss: &L,
    params: &[f64],
    context: &[f64],
    v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("hvp direction", context.len(), v.len())?;
    let p: Vec<Dual> = lift(params);
    let c: Vec<Dual> = context.iter().zip(v).map(|(&x, &d)| Dual::new(x, d)).collect();
    let out = loss.eval::<Dual>(&p, &c)?;
    let hp: Vec<f64> = out.d_params.iter().map(|d| d.eps).collect();
    let hc: Vec<f64> = out.d_context.iter().map(|d| d.eps).collect();
    Ok((hp, hc))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MetaGradMode {
    /// Differentiate through the inner updates (second-order terms kept).
    #[default]
    Exact,
    /// Treat the inner updates as constants.
    FirstOrder,
}

impl MetaGradMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(MetaGradMode::Exact),
            "first_order" => Some(MetaGradMode::FirstOrder),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetaGradMode::Exact => "exact",
            MetaGradMode::FirstOrder => "first_order",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetaGradOutput {
    /// Outer loss at the adapted context.
    pub value: f64,
    pub gradient: Gradient,
    pub adapted_context: Vec<f64>,
}

/// Run `steps` gradient steps on the context: `φ ← φ − α ∇_φ L(θ, φ)`.
/// Returns every iterate, starting with `context` itself.
pub fn inner_trajectory<L: DiffLoss>(
    inner: &L,
    params: &[f64],
    context: &[f64],
    alpha: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(context.to_vec());
    for step in 0..steps {
        let phi = traj.last().expect("trajectory starts non-empty");
        let out = inner.eval::<f64>(params, phi)?;
        if !out.value.is_finite() {
            return Err(Error::NonFinite {
                what: "inner loss",
                step: Some(step),
            });
        }
        ensure_finite(&out.d_context, "inner context gradient", Some(step))?;
        let next: Vec<f64> = phi.iter().zip(&out.d_context).map(|(p, g)| p - alpha * g).collect();
        traj.push(next);
    }
    Ok(traj)
}

/// Gradient of `outer(θ, φ_k)` with respect to `(θ, φ)` where `φ_0 = φ` and
/// `φ_{j+1} = φ_j − α ∇_φ inner(θ, φ_j)`.
pub fn meta_grad<I: DiffLoss, O: DiffLoss>(
    inner: &I,
    outer: &O,
    params: &[f64],
    context: &[f64],
    alpha: f64,
    steps: usize,
    mode: MetaGradMode,
) -> Result<MetaGradOutput> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Usage(format!("inner learning rate must be finite and >= 0, got {alpha}")));
    }
    let traj = inner_trajectory(inner, params, context, alpha, steps)?;
    let adapted = traj.last().expect("trajectory starts non-empty").clone();
    let out = outer.eval::<f64>(params, &adapted)?;
    if !out.value.is_finite() {
        return Err(Error::NonFinite {
            what: "outer loss",
            step: Some(steps),
        });
    }
    ensure_finite(&out.d_params, "outer parameter gradient", Some(steps))?;
    ensure_finite(&out.d_context, "outer context gradient", Some(steps))?;
    let mut d_params = out.d_params;
    let mut d_context = out.d_context;
    if mode == MetaGradMode::Exact && alpha != 0.0 {
        // Adjoint of φ_{j+1} = φ_j − α ∇_φ L(θ, φ_j), walked backwards.
        for j in (0..steps).rev() {
            let (hp, hc) = context_hvp(inner, params, &traj[j], &d_context)?;
            ensure_finite(&hp, "inner mixed second derivative", Some(j))?;
            ensure_finite(&hc, "inner context hessian", Some(j))?;
            for (g, h) in d_params.iter_mut().zip(&hp) {
                *g -= alpha * h;
            }
            for (g, h) in d_context.iter_mut().zip(&hc) {
                *g -= alpha * h;
            }
        }
    }
    Ok(MetaGradOutput {
        value: out.value,
        gradient: Gradient {
            wrt_params: Some(d_params),
            wrt_context: Some(d_context),
        },
        adapted_context: adapted,
    })
}

/// Central finite-difference gradient of a scalar function of a flat
/// vector.
pub fn central_difference<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe)?;
        probe[i] = orig - h;
        let down = f(&probe)?;
        probe[i] = orig;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// `‖a − b‖ / (‖b‖ + 1e-8)`.
pub fn relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = reference.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / (norm + 1e-8)
}

/// Quadratic `½ (φ − c)ᵀ A (φ − c) + bᵀθ·(1ᵀφ) + ½ ‖θ‖²` with symmetric `A`.
/// Cross terms between θ and φ make mixed second derivatives non-zero.
#[derive(Clone, Debug)]
pub struct QuadraticLoss {
    pub a: Vec<f64>,
    pub center: Vec<f64>,
    pub b: Vec<f64>,
}

impl DiffLoss for QuadraticLoss {
    fn eval<T: Real>(&self, params: &[T], context: &[T]) -> Result<LossGrad<T>> {
        let d = self.center.len();
        check_len("quadratic context", d, context.len())?;
        check_len("quadratic params", self.b.len(), params.len())?;
        let diff: Vec<T> = context.iter().zip(&self.center).map(|(&p, &c)| p - T::from_f64(c)).collect();
        let mut a_diff = vec![T::zero(); d];
        for i in 0..d {
            for j in 0..d {
                a_diff[i] += T::from_f64(self.a[i * d + j]) * diff[j];
            }
        }
        let sum_phi = context.iter().fold(T::zero(), |acc, &p| acc + p);
        let b_theta = params.iter().zip(&self.b).fold(T::zero(), |acc, (&t, &b)| acc + t * T::from_f64(b));
        let sq_theta = params.iter().fold(T::zero(), |acc, &t| acc + t * t);
        let quad = diff.iter().zip(&a_diff).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
        let value = T::from_f64(0.5) * quad + b_theta * sum_phi + T::from_f64(0.5) * sq_theta;
        let d_context = a_diff.iter().map(|&g| g + b_theta).collect();
        let d_params = params.iter().zip(&self.b).map(|(&t, &b)| T::from_f64(b) * sum_phi + t).collect();
        Ok(LossGrad {
            value,
            d_params,
            d_context,
        })
    }
}
