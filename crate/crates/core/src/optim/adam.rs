/// Adam state: exponential moment estimates with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One full-batch update in place.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        assert_eq!(theta.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut adam = AdamState::new(3, 1e-3);
        let mut theta = vec![1.0, -2.0, 0.5];
        let before = theta.clone();
        adam.step(&mut theta, &[0.0, 0.0, 0.0]);
        assert_eq!(theta, before);
    }

    #[test]
    fn first_step_magnitude_is_about_lr() {
        // After bias correction the first update is lr·g/(|g| + eps'), i.e.
        // essentially lr in magnitude regardless of the gradient size.
        for &g in &[1e-3, 1.0, 250.0] {
            let mut adam = AdamState::new(1, 1e-3);
            let mut theta = vec![0.0];
            adam.step(&mut theta, &[g]);
            let delta = theta[0].abs();
            assert!(
                (delta - 1e-3).abs() < 1e-5,
                "g={g}: first-step magnitude {delta}"
            );
            assert!(theta[0] < 0.0, "update opposes the gradient");
        }
    }

    #[test]
    fn deterministic_given_identical_state() {
        let grads = [0.3, -0.7, 0.01];
        let run = || {
            let mut adam = AdamState::new(3, 2e-3);
            let mut theta = vec![0.1, 0.2, 0.3];
            for _ in 0..50 {
                adam.step(&mut theta, &grads);
            }
            theta
        };
        let a = run();
        let b = run();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
