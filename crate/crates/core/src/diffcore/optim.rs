//! Adam over flat parameter slices.

const FLUSH: f64 = 1e-150;

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// First and second moments and the step count.
    pub fn state(&self) -> (&[f64], &[f64], u64) {
        (&self.m, &self.v, self.t)
    }

    /// Rebuild from saved moments; `None` if their lengths differ.
    pub fn from_state(lr: f64, m: Vec<f64>, v: Vec<f64>, t: u64) -> Option<Self> {
        (m.len() == v.len()).then(|| Self {
            m,
            v,
            t,
            ..Self::new(0, lr)
        })
    }

    /// Apply one descent step to `params` given `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            // Moments of parameters that stop receiving gradient decay
            // geometrically into subnormals, which are very slow on common
            // hardware. Flush them; the step they would produce is nil.
            if self.m[i].abs() < FLUSH {
                self.m[i] = 0.0;
            }
            if self.v[i] < FLUSH {
                self.v[i] = 0.0;
            }
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
