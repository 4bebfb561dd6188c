use crate::nn::params::ParamStore;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update of every entry, then zeroes the gradients.
pub fn adam_step<T: Scalar>(store: &mut ParamStore<T>, cfg: AdamConfig) {
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let (lr, eps) = (T::lit(cfg.lr), T::lit(cfg.eps));
    for p in store.iter_mut() {
        p.step += 1;
        let t = p.step as i32;
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        for i in 0..p.value.len() {
            let g = p.grad[i];
            p.m[i] = b1 * p.m[i] + (T::one() - b1) * g;
            p.v[i] = b2 * p.v[i] + (T::one() - b2) * g * g;
            let m_hat = p.m[i] / c1;
            let v_hat = p.v[i] / c2;
            p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            p.grad[i] = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Shape;

    fn scalar_store(w: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("w", Shape::Vector(1), vec![w]).unwrap();
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = scalar_store(1.25);
        adam_step(&mut s, AdamConfig::default());
        let p = s.iter().next().unwrap();
        assert_eq!(p.value[0], 1.25);
        assert_eq!(p.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [0.3, -4.0, 1e-3] {
            let mut s = scalar_store(0.0);
            s.iter_mut().next().unwrap().grad[0] = g;
            let cfg = AdamConfig::with_lr(0.01);
            adam_step(&mut s, cfg);
            let p = s.iter().next().unwrap();
            let expect = cfg.lr * g.abs() / (g.abs() + cfg.eps);
            assert!((p.value[0].abs() - expect).abs() < 1e-15);
            assert!((p.value[0].abs() - cfg.lr).abs() < 1e-6 * cfg.lr / g.abs().min(1.0));
            assert_eq!(p.value[0].signum(), -g.signum());
            assert_eq!(p.grad[0], 0.0);
        }
    }

    /// Independent scalar recurrence of the same update rule.
    fn oracle(steps: usize, lr: f64) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut w, mut m, mut v) = (0.0f64, 0.0, 0.0);
        for t in 1..=steps {
            let g = 2.0 * (w - 3.0);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            w -= lr * (m / (1.0 - b1.powi(t as i32))) / ((v / (1.0 - b2.powi(t as i32))).sqrt() + eps);
        }
        w
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut s = scalar_store(0.0);
        let cfg = AdamConfig::with_lr(0.05);
        for _ in 0..200 {
            let p = s.iter_mut().next().unwrap();
            p.grad[0] = 2.0 * (p.value[0] - 3.0);
            adam_step(&mut s, cfg);
        }
        let w = s.iter().next().unwrap().value[0];
        let expected = oracle(200, 0.05);
        assert!((expected - 3.0).abs() < 0.1);
        assert!((w - 3.0).abs() < 0.1);
        assert!((w - expected).abs() < 1e-12);
    }

    #[test]
    fn bitwise_deterministic() {
        let run = || {
            let mut s = scalar_store(0.7);
            for k in 0..50 {
                let p = s.iter_mut().next().unwrap();
                p.grad[0] = (k as f64 * 0.37).sin() + p.value[0];
                adam_step(&mut s, AdamConfig::default());
            }
            let bits = s.iter().next().unwrap().value[0].to_bits();
            bits
        };
        assert_eq!(run(), run());
    }
}
