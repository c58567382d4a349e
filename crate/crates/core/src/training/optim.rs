use super::model::ParamBuffer;
use super::TrainError;

/// `lr(t) = lr0 * (1 + cos(pi t / T)) / 2` for `0 <= t <= T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineSchedule {
    pub lr0: f64,
    pub total: usize,
}

impl CosineSchedule {
    pub fn new(lr0: f64, total: usize) -> Self {
        Self { lr0, total }
    }

    pub fn lr(&self, step: usize) -> Result<f64, TrainError> {
        if step > self.total {
            return Err(TrainError::Schedule {
                step,
                total: self.total,
            });
        }
        if self.total == 0 {
            return Ok(self.lr0);
        }
        let t = step as f64 / self.total as f64;
        Ok(self.lr0 * 0.5 * (1.0 + (std::f64::consts::PI * t).cos()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    /// One bias-corrected update; `step` counts from 0.
    pub fn step(&self, buf: &mut ParamBuffer, grad: &[f64], step: usize, lr: f64) {
        debug_assert_eq!(grad.len(), buf.len());
        let t = step as i32 + 1;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let ParamBuffer {
            values,
            moment1,
            moment2,
        } = buf;
        for (((v, &g), m1), m2) in values.iter_mut().zip(grad.iter()).zip(moment1.iter_mut()).zip(moment2.iter_mut()) {
            *m1 = b1 * *m1 + (1.0 - b1) * g;
            *m2 = b2 * *m2 + (1.0 - b2) * g * g;
            let mh = *m1 / c1;
            let vh = *m2 / c2;
            *v -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let s = CosineSchedule::new(1e-4, 100);
        assert_eq!(s.lr(0).unwrap(), 1e-4);
        assert!((s.lr(50).unwrap() - 5e-5).abs() < 1e-18);
        assert!(s.lr(100).unwrap().abs() < 1e-20);
        assert!(matches!(s.lr(101), Err(TrainError::Schedule { .. })));
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut b = ParamBuffer::new(vec![1.0, -2.0, 3.5]);
        Adam::default().step(&mut b, &[0.0; 3], 0, 0.1);
        assert_eq!(b.values, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [1e-3, 0.5, -40.0] {
            let mut b = ParamBuffer::new(vec![0.0]);
            let lr = 0.01;
            Adam::default().step(&mut b, &[g], 0, lr);
            // bias-corrected ratio is g / (|g| + eps)
            let expected = -lr * g / (g.abs() + 1e-8);
            assert!((b.values[0] - expected).abs() < 1e-15);
            assert!((b.values[0].abs() - lr).abs() < 1e-7);
        }
    }
}
