use rand::Rng;

use crate::error::Result;
use crate::nn::tape::{NodeId, Tape};
use crate::scalar::Scalar;

const U_MIN: f64 = 1e-12;
const U_MAX: f64 = 1.0 - 1e-12;

/// Standard Gumbel noise `-ln(-ln u)` with `u` clamped away from 0 and 1.
pub fn gumbel_noise<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>().clamp(U_MIN, U_MAX);
            T::lit(-(-u.ln()).ln())
        })
        .collect()
}

/// Draws fresh noise from `rng` and records a relaxed categorical sample.
pub fn gumbel_softmax_sample<T: Scalar, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    logits: NodeId,
    tau: NodeId,
    rng: &mut R,
) -> Result<NodeId> {
    let noise = gumbel_noise(rng, tape.value(logits).len());
    tape.gumbel_softmax(logits, tau, &noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::nn::kernels::argmax;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_are_on_the_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = Tape::<f64>::new();
        let l = t.input(vec![0.3, -1.0, 2.0, 0.0, 0.5]);
        for tau in [0.1, 1.0, 5.0] {
            let tn = t.input(vec![tau]);
            let y = gumbel_softmax_sample(&mut t, l, tn, &mut rng).unwrap();
            let s: f64 = t.value(y).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(t.value(y).iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn low_temperature_approaches_one_hot() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise: Vec<f64> = gumbel_noise(&mut rng, 4);
        let logits = vec![0.2, 1.0, -0.5, 0.9];
        let perturbed: Vec<f64> = logits.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let winner = argmax(&perturbed);
        let mut t = Tape::new();
        let l = t.input(logits);
        let tau = t.input(vec![1e-4]);
        let y = t.gumbel_softmax(l, tau, &noise).unwrap();
        for (i, v) in t.value(y).iter().enumerate() {
            let target = if i == winner { 1.0 } else { 0.0 };
            assert!((v - target).abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_logits_give_uniform_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = [0usize; 10];
        let n = 100_000;
        let mut t = Tape::<f64>::new();
        let l = t.input(vec![0.0; 10]);
        let tau = t.input(vec![1.0]);
        for _ in 0..n {
            let y = gumbel_softmax_sample(&mut t, l, tau, &mut rng).unwrap();
            counts[argmax(t.value(y))] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.1).abs() < 0.02, "frequency {f}");
        }
    }

    #[test]
    fn rejects_zero_temperature() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut t = Tape::<f64>::new();
        let l = t.input(vec![0.0; 3]);
        let tau = t.input(vec![0.0]);
        assert!(matches!(gumbel_softmax_sample(&mut t, l, tau, &mut rng), Err(Error::Domain(_))));
    }
}
