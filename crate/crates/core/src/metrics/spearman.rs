use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

/// Spearman correlation. A zero-variance rank vector yields `rho = 0` with
/// `degenerate` set instead of NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman<T> {
    pub rho: T,
    pub degenerate: bool,
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerics("cannot rank NaN".into()));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).expect("no NaN"));
    let mut ranks = vec![T::zero(); x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // positions i..=j share rank mean(i+1..=j+1)
        let r = T::lit((i + j) as f64 / 2.0 + 1.0);
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    Ok(ranks)
}

fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Spearman<T> {
    let n = T::lit(x.len() as f64);
    let mx = x.iter().fold(T::zero(), |a, &b| a + b) / n;
    let my = y.iter().fold(T::zero(), |a, &b| a + b) / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx.is_zero() || syy.is_zero() {
        return Spearman { rho: T::zero(), degenerate: true };
    }
    let rho = (sxy / (sxx.sqrt() * syy.sqrt())).max(-T::one()).min(T::one());
    Spearman { rho, degenerate: false }
}

/// Pearson correlation of the average-rank vectors.
pub fn spearman_rho<T: Scalar>(x: &[T], y: &[T]) -> Result<Spearman<T>> {
    if x.len() != y.len() {
        return Err(shape_err(format!("spearman: {} vs {} samples", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Domain("spearman needs at least two samples".into()));
    }
    Ok(pearson(&average_ranks(x)?, &average_ranks(y)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert!((spearman_rho(&[1.0f64, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap().rho - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&[1.0f64, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().rho + 1.0).abs() < 1e-12);
        // ranks (1, 2.5, 2.5, 4) and (1, 3, 3, 3): centred cross sum 3, squares 4.5 and 3
        let r = spearman_rho(&[0.0, 1.0, 1.0, 2.0], &[0.0, 2.0, 2.0, 2.0]).unwrap();
        assert!((r.rho - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r.rho - 0.8165).abs() < 1e-4);
    }

    #[test]
    fn degenerate_and_errors() {
        let r = spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.rho, 0.0);
        assert!(matches!(spearman_rho(&[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));
        assert!(spearman_rho(&[1.0], &[1.0]).is_err());
        assert!(matches!(spearman_rho(&[f64::NAN, 1.0], &[1.0, 2.0]), Err(Error::Numerics(_))));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]).unwrap(), vec![3.5, 1.0, 3.5, 2.0]);
    }

    proptest! {
        #[test]
        fn self_correlation_and_monotone_invariance(x in prop::collection::vec(-50i32..50, 2..30), y in prop::collection::vec(-50i32..50, 2..30)) {
            let n = x.len().min(y.len());
            let x: Vec<f64> = x[..n].iter().map(|&v| v as f64).collect();
            let y: Vec<f64> = y[..n].iter().map(|&v| v as f64).collect();
            let xx = spearman_rho(&x, &x).unwrap();
            if !xx.degenerate {
                prop_assert!((xx.rho - 1.0).abs() < 1e-12);
            }
            let base = spearman_rho(&x, &y).unwrap();
            let xt: Vec<f64> = x.iter().map(|v| (v / 10.0).exp() + 3.0 * v).collect();
            let yt: Vec<f64> = y.iter().map(|v| v * v * v).collect();
            let moved = spearman_rho(&xt, &yt).unwrap();
            prop_assert!((base.rho - moved.rho).abs() < 1e-12);
            prop_assert_eq!(base.degenerate, moved.degenerate);
        }
    }
}
