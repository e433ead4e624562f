//! Adam with bias correction; update order is the parameter registry
//! order, which keeps training bit-reproducible.

use super::scalar::Scalar;
use super::tensor::Tensor;

pub struct Adam<S: Scalar> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
    t: u64,
}

impl<S: Scalar> Adam<S> {
    pub fn new(lr: f64, shapes: &[Vec<usize>]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Tensor<S>], grads: &[Tensor<S>]) {
        assert_eq!(params.len(), grads.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            for j in 0..p.data.len() {
                let g = grads[i].data[j].to_f64();
                let m = self.beta1 * self.m[i].data[j].to_f64() + (1.0 - self.beta1) * g;
                let v = self.beta2 * self.v[i].data[j].to_f64() + (1.0 - self.beta2) * g * g;
                self.m[i].data[j] = S::from_f64(m);
                self.v[i].data[j] = S::from_f64(v);
                let mhat = m / b1t;
                let vhat = v / b2t;
                let upd = self.lr * mhat / (vhat.sqrt() + self.eps);
                p.data[j] = S::from_f64(p.data[j].to_f64() - upd);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_a_quadratic() {
        // f(x) = (x - 3)^2, df = 2(x - 3)
        let mut params = vec![Tensor::from_vec(&[1], vec![0.0f64])];
        let mut opt = Adam::new(0.1, &[vec![1]]);
        for _ in 0..400 {
            let g = 2.0 * (params[0].data[0] - 3.0);
            opt.step(&mut params, &[Tensor::from_vec(&[1], vec![g])]);
        }
        assert!((params[0].data[0] - 3.0).abs() < 1e-3);
    }
}
