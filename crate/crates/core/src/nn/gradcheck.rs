//! Finite-difference validation of the adjoint rules.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::params::ParamStore;
use crate::nn::tape::{NodeId, Tape};

/// Anything that owns parameter stores.
pub trait HasParams<T> {
    fn stores_mut(&mut self) -> Vec<&mut ParamStore<T>>;
}

impl<T> HasParams<T> for ParamStore<T> {
    fn stores_mut(&mut self) -> Vec<&mut ParamStore<T>> {
        vec![self]
    }
}

impl<T, A: HasParams<T>, B: HasParams<T>> HasParams<T> for (A, B) {
    fn stores_mut(&mut self) -> Vec<&mut ParamStore<T>> {
        let mut v = self.0.stores_mut();
        v.extend(self.1.stores_mut());
        v
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub h: f64,
    /// Coordinates sampled per parameter entry; smaller entries are checked exhaustively.
    pub coords_per_param: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { h: 1e-5, coords_per_param: 12, seed: 0 }
    }
}

fn eval<M, F>(model: &M, loss_fn: &F) -> Result<f64>
where
    F: Fn(&M, &mut Tape<f64>) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let root = loss_fn(model, &mut tape)?;
    let v = tape.scalar(root);
    if !v.is_finite() {
        return Err(Error::Numerics(format!("loss evaluated to {v}")));
    }
    Ok(v)
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Max relative error between tape gradients and central differences over
/// sampled coordinates of every parameter the model owns.
///
/// `loss_fn` must be deterministic in the model's parameters (seed any noise
/// inside the closure). Gradient buffers are left zeroed.
pub fn grad_check<M, F>(model: &mut M, loss_fn: F, cfg: GradCheckConfig) -> Result<f64>
where
    M: HasParams<f64>,
    F: Fn(&M, &mut Tape<f64>) -> Result<NodeId>,
{
    for s in model.stores_mut() {
        s.zero_grad();
    }
    let mut tape = Tape::new();
    let root = loss_fn(model, &mut tape)?;
    if !tape.scalar(root).is_finite() {
        return Err(Error::Numerics("loss is not finite".into()));
    }
    tape.backward(root, &mut model.stores_mut())?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut plan = Vec::new();
    for (si, store) in model.stores_mut().into_iter().enumerate() {
        for (pi, p) in store.iter().enumerate() {
            let n = p.value.len();
            let coords: Vec<usize> = if n <= cfg.coords_per_param {
                (0..n).collect()
            } else {
                sample(&mut rng, n, cfg.coords_per_param).into_vec()
            };
            for c in coords {
                plan.push((si, pi, c, p.grad[c]));
            }
        }
        store.zero_grad();
    }

    let mut worst = 0.0f64;
    for (si, pi, c, analytic) in plan {
        let original = nth_value(model, si, pi, c);
        set_value(model, si, pi, c, original + cfg.h);
        let plus = eval(model, &loss_fn);
        set_value(model, si, pi, c, original - cfg.h);
        let minus = eval(model, &loss_fn);
        set_value(model, si, pi, c, original);
        let numeric = (plus? - minus?) / (2.0 * cfg.h);
        worst = worst.max(rel_err(analytic, numeric));
    }
    Ok(worst)
}

fn nth_value<M: HasParams<f64>>(model: &mut M, si: usize, pi: usize, c: usize) -> f64 {
    model.stores_mut()[si].iter().nth(pi).expect("param index").value[c]
}

fn set_value<M: HasParams<f64>>(model: &mut M, si: usize, pi: usize, c: usize, v: f64) {
    model.stores_mut()[si].iter_mut().nth(pi).expect("param index").value[c] = v;
}

/// Central-difference gradient of `f` with respect to an input vector.
pub fn numeric_input_grad(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut xs = x.to_vec();
    (0..x.len())
        .map(|i| {
            xs[i] = x[i] + h;
            let p = f(&xs);
            xs[i] = x[i] - h;
            let m = f(&xs);
            xs[i] = x[i];
            (p - m) / (2.0 * h)
        })
        .collect()
}
