//! Dense row-major kernels used by both the tape and the tape-free eval paths.

use crate::scalar::Scalar;

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    // four partial sums; fixed association order keeps results reproducible
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = T::zero();
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out = W x (+ out if accumulate)` for a `rows x cols` matrix.
pub(crate) fn matvec_into<T: Scalar>(w: &[T], cols: usize, x: &[T], out: &mut [T], accumulate: bool) {
    debug_assert_eq!(w.len(), out.len() * cols);
    debug_assert_eq!(x.len(), cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        let d = dot(row, x);
        if accumulate {
            *o += d;
        } else {
            *o = d;
        }
    }
}

/// `gx += W^T g`.
pub(crate) fn matvec_t_acc<T: Scalar>(w: &[T], cols: usize, g: &[T], gx: &mut [T]) {
    for (&gi, row) in g.iter().zip(w.chunks_exact(cols)) {
        if gi.is_zero() {
            continue;
        }
        for (o, &wij) in gx.iter_mut().zip(row) {
            *o += gi * wij;
        }
    }
}

/// `gw += g x^T`.
pub(crate) fn outer_acc<T: Scalar>(gw: &mut [T], cols: usize, g: &[T], x: &[T]) {
    for (&gi, row) in g.iter().zip(gw.chunks_exact_mut(cols)) {
        if gi.is_zero() {
            continue;
        }
        for (o, &xj) in row.iter_mut().zip(x) {
            *o += gi * xj;
        }
    }
}

pub(crate) fn add_assign<T: Scalar>(acc: &mut [T], x: &[T]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// Numerically stable log-softmax.
pub(crate) fn log_softmax<T: Scalar>(x: &[T]) -> Vec<T> {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = x.iter().map(|&v| (v - max).exp()).fold(T::zero(), |a, b| a + b).ln() + max;
    x.iter().map(|&v| v - lse).collect()
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax<T: PartialOrd + Copy>(x: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate().skip(1) {
        if *v > x[best] {
            best = i;
        }
    }
    best
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transposes() {
        // W = [[1,2,3],[4,5,6]]
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut out = [0.0; 2];
        matvec_into(&w, 3, &[1.0, 0.0, -1.0], &mut out, false);
        assert_eq!(out, [-2.0, -2.0]);
        let mut gx = [0.0; 3];
        matvec_t_acc(&w, 3, &[1.0, 1.0], &mut gx);
        assert_eq!(gx, [5.0, 7.0, 9.0]);
        let mut gw = [0.0; 6];
        outer_acc(&mut gw, 3, &[1.0, 2.0], &[1.0, 0.0, 3.0]);
        assert_eq!(gw, [1.0, 0.0, 3.0, 2.0, 0.0, 6.0]);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0]), 0);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(1000.0f64) - 1000.0).abs() < 1e-12);
        assert!(softplus(-1000.0f64) >= 0.0);
        assert!((softplus(0.0f64) - 2f64.ln()).abs() < 1e-15);
    }
}
