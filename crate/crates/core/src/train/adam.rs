use num_traits::Float;

use super::model::Params;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moments, one pair per parameter tensor, with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub m: Params<T>,
    pub v: Params<T>,
    pub step: u64,
}

impl<T: Float> Adam<T> {
    pub fn new(params: &Params<T>) -> Self {
        Self {
            m: Params::zeros_like(params),
            v: Params::zeros_like(params),
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut Params<T>, grads: &Params<T>, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let b1 = T::from(ADAM_BETA1).expect("const");
        let b2 = T::from(ADAM_BETA2).expect("const");
        let one = T::one();
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        let lr = T::from(lr).expect("finite lr");
        let eps = T::from(ADAM_EPS).expect("const");

        let p = params.tensors_mut();
        let m = self.m.tensors_mut();
        let v = self.v.tensors_mut();
        let g = grads.tensors();
        for (((p, m), v), g) in p.into_iter().zip(m).zip(v).zip(g) {
            let iter = p
                .as_mut_slice()
                .iter_mut()
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
                .zip(g.as_slice());
            for (((p, m), v), &g) in iter {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
