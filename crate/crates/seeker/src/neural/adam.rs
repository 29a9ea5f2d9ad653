//! Adam optimizer over a [`QNetParams`] parameter set.

use super::{QNetParams, Tensor2};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam state: first and second moment estimates per tensor, in the
/// parameter set's fixed tensor order, plus the step count used for bias
/// correction.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Tensor2>,
    v: Vec<Tensor2>,
    t: u64,
}

impl Adam {
    pub fn new(params: &QNetParams) -> Adam {
        let shapes: Vec<Tensor2> = params
            .named_tensors()
            .iter()
            .map(|(_, t)| t.zeros_like())
            .collect();
        Adam {
            m: shapes.clone(),
            v: shapes,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update with bias-corrected moments:
    /// `p -= lr * mhat / (sqrt(vhat) + eps)`.
    pub fn step(&mut self, params: &mut QNetParams, grads: &QNetParams, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        let grad_tensors = grads.named_tensors();
        for ((p, (_, g)), (m, v)) in params
            .tensors_mut()
            .into_iter()
            .zip(grad_tensors)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pv = p.values_mut();
            let gv = g.values();
            let mv = m.values_mut();
            let vv = v.values_mut();
            for i in 0..pv.len() {
                mv[i] = ADAM_BETA1 * mv[i] + (1.0 - ADAM_BETA1) * gv[i];
                vv[i] = ADAM_BETA2 * vv[i] + (1.0 - ADAM_BETA2) * gv[i] * gv[i];
                let mhat = mv[i] / bc1;
                let vhat = vv[i] / bc2;
                pv[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }
}
