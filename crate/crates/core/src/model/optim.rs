use super::params::{Gradients, ModelParams};

/// Adam with optional L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ModelParams, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of every trainable tensor.
    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (k, tensor) in params.tensors_mut().iter_mut().enumerate() {
            if !tensor.trainable {
                continue;
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (j, x) in tensor.data.iter_mut().enumerate() {
                let g = grads.data[k][j] + self.weight_decay * *x;
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                *x -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::Tensor;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = ModelParams::new();
        p.register(Tensor::new("x", vec![2], vec![1.0, -1.0])).unwrap();
        let mut opt = Adam::new(&p, 0.1);
        let mut g = p.zeros_like();
        g.data[0] = vec![3.0, -0.5];
        opt.step(&mut p, &g);
        let x = &p.get("x").unwrap().data;
        assert!((x[0] - 0.9).abs() < 1e-8 && (x[1] + 0.9).abs() < 1e-8);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut p = ModelParams::new();
        p.register(Tensor::new("x", vec![1], vec![5.0])).unwrap();
        let mut opt = Adam::new(&p, 0.1);
        for _ in 0..500 {
            let mut g = p.zeros_like();
            g.data[0][0] = 2.0 * (p.data(0)[0] - 1.5);
            opt.step(&mut p, &g);
        }
        assert!((p.data(0)[0] - 1.5).abs() < 1e-3);
    }
}
