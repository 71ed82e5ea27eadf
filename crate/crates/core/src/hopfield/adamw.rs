//! AdamW with decoupled weight decay.
//!
//! ```text
//! theta *= 1 - lr * weight_decay
//! m = b1 * m + (1 - b1) * g
//! v = b2 * v + (1 - b2) * g^2
//! theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
//! ```

use super::Params;

#[derive(Debug, Clone)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
    step: i32,
    m: Params,
    v: Params,
}

impl AdamW {
    pub fn new(params: &Params, learning_rate: f64, beta1: f64, beta2: f64, weight_decay: f64) -> Self {
        let shape = params.shape();
        Self {
            learning_rate,
            beta1,
            beta2,
            weight_decay,
            eps: 1e-8,
            step: 0,
            m: Params::zeros(shape),
            v: Params::zeros(shape),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        self.step += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, f64::from(self.step));
        let bc2 = 1.0 - libm::pow(self.beta2, f64::from(self.step));
        let decay = 1.0 - self.learning_rate * self.weight_decay;
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.eps);
        let tensors = params.tensors_mut().into_iter().zip(grads.tensors());
        let moments = self.m.tensors_mut().into_iter().zip(self.v.tensors_mut());
        for ((theta, g), (m, v)) in tensors.zip(moments) {
            for i in 0..theta.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                theta[i] *= decay;
                theta[i] -= lr * (m[i] / bc1) / (libm::sqrt(v[i] / bc2) + eps);
            }
        }
    }
}
