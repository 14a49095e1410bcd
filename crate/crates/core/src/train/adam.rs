use crate::engine::Weights;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adaptive-moment optimiser state over the trainable tensors of a
/// [`Weights`] set.
#[derive(Debug, Clone)]
pub struct Adam {
    t: i32,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(w: &Weights) -> Self {
        let zeros = |t: &crate::engine::ParamTensor| if t.trainable { vec![0.0; t.data.len()] } else { Vec::new() };
        Adam {
            t: 0,
            m: w.tensors().iter().map(zeros).collect(),
            v: w.tensors().iter().map(zeros).collect(),
        }
    }

    /// `grads` aligned with `w.tensors()`; entries for frozen tensors are
    /// ignored.
    pub fn step(&mut self, w: &mut Weights, grads: &[Vec<f32>], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t);
        let step = (lr * bc2.sqrt() / bc1) as f32;
        let (b1, b2) = (ADAM_BETA1 as f32, ADAM_BETA2 as f32);
        let eps = (ADAM_EPS * bc2.sqrt()) as f32;
        for (i, t) in w.tensors_mut().iter_mut().enumerate() {
            if !t.trainable {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (((p, g), m), v) in t.data.iter_mut().zip(&grads[i]).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= step * *m / (v.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ParamTensor;

    #[test]
    fn first_step_moves_by_lr() {
        let mut w = Weights::from_tensors(vec![ParamTensor { name: "a".into(), dims: vec![2], data: vec![1.0, -1.0], trainable: true }]);
        let mut o = Adam::new(&w);
        o.step(&mut w, &[vec![3.0, -0.5]], 0.1);
        assert!((w.tensors()[0].data[0] - 0.9).abs() < 1e-6);
        assert!((w.tensors()[0].data[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimises_quadratic() {
        let mut w = Weights::from_tensors(vec![ParamTensor { name: "a".into(), dims: vec![1], data: vec![5.0], trainable: true }]);
        let mut o = Adam::new(&w);
        for _ in 0..2000 {
            let x = w.tensors()[0].data[0];
            o.step(&mut w, &[vec![2.0 * (x - 2.0)]], 0.05);
        }
        assert!((w.tensors()[0].data[0] - 2.0).abs() < 1e-2);
    }
}
