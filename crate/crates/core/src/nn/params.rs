use std::sync::atomic::{AtomicU32, Ordering};

use rand::Rng;

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

static NEXT_STORE_ID: AtomicU32 = AtomicU32::new(1);

fn fresh_store_id() -> u32 {
    NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn len(self) -> usize {
        match self {
            Shape::Vector(n) => n,
            Shape::Matrix(r, c) => r * c,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    pub fn dims(self) -> Vec<usize> {
        match self {
            Shape::Vector(n) => vec![n],
            Shape::Matrix(r, c) => vec![r, c],
        }
    }

    /// (rows, cols), treating a vector as a column.
    pub fn rows_cols(self) -> (usize, usize) {
        match self {
            Shape::Vector(n) => (n, 1),
            Shape::Matrix(r, c) => (r, c),
        }
    }
}

/// A named tensor with its gradient buffer and Adam moments.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub shape: Shape,
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub(crate) m: Vec<T>,
    pub(crate) v: Vec<T>,
    pub(crate) step: u64,
}

impl<T: Scalar> Param<T> {
    fn new(name: String, shape: Shape, value: Vec<T>) -> Self {
        let n = shape.len();
        debug_assert_eq!(value.len(), n);
        Self {
            name,
            shape,
            value,
            grad: vec![T::zero(); n],
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Handle to one parameter inside one store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamKey {
    pub(crate) store: u32,
    pub(crate) index: u32,
}

/// Named parameters of one agent. Each store carries a process-unique id so a
/// tape spanning several agents can route gradients back to their owners.
#[derive(Debug)]
pub struct ParamStore<T> {
    id: u32,
    params: Vec<Param<T>>,
}

impl<T: Clone> Clone for ParamStore<T> {
    fn clone(&self) -> Self {
        Self { id: fresh_store_id(), params: self.params.clone() }
    }
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { id: fresh_store_id(), params: Vec::new() }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: Shape, value: Vec<T>) -> Result<ParamKey> {
        let name = name.into();
        if value.len() != shape.len() {
            return Err(shape_err(format!(
                "{name}: {} values for shape {:?}",
                value.len(),
                shape
            )));
        }
        if self.params.iter().any(|p| p.name == name) {
            return Err(shape_err(format!("duplicate parameter {name}")));
        }
        self.params.push(Param::new(name, shape, value));
        Ok(ParamKey { store: self.id, index: (self.params.len() - 1) as u32 })
    }

    /// Inserts a parameter drawn from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn insert_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: Shape,
        fan_in: usize,
        rng: &mut R,
    ) -> Result<ParamKey> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let value = (0..shape.len())
            .map(|_| T::lit(rng.random_range(-bound..bound)))
            .collect();
        self.insert(name, shape, value)
    }

    pub fn key(&self, name: &str) -> Option<ParamKey> {
        self.params
            .iter()
            .position(|p| p.name == name)
            .map(|i| ParamKey { store: self.id, index: i as u32 })
    }

    pub fn owns(&self, key: ParamKey) -> bool {
        key.store == self.id
    }

    pub fn get(&self, key: ParamKey) -> &Param<T> {
        assert!(self.owns(key), "parameter key belongs to another store");
        &self.params[key.index as usize]
    }

    pub fn get_mut(&mut self, key: ParamKey) -> &mut Param<T> {
        assert!(self.owns(key), "parameter key belongs to another store");
        &mut self.params[key.index as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Largest optimizer step count over all entries.
    pub fn max_step(&self) -> u64 {
        self.params.iter().map(|p| p.step).max().unwrap_or(0)
    }

    /// True when every gradient buffer is exactly zero.
    pub fn grads_are_zero(&self) -> bool {
        self.params.iter().all(|p| p.grad.iter().all(|g| g.is_zero()))
    }

    /// Parameters equal bitwise (names, shapes, values); ids and optimizer state ignored.
    pub fn same_values(&self, other: &Self) -> bool {
        self.params.len() == other.params.len()
            && self.params.iter().zip(&other.params).all(|(a, b)| {
                a.name == b.name
                    && a.shape == b.shape
                    && a.value.iter().zip(&b.value).all(|(x, y)| x.as_f64().to_bits() == y.as_f64().to_bits())
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn buffers_match_shape_and_start_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::<f64>::new();
        let w = store.insert_uniform("w", Shape::Matrix(3, 4), 4, &mut rng).unwrap();
        let p = store.get(w);
        assert_eq!(p.grad.len(), 12);
        assert_eq!(p.m.len(), 12);
        assert!(p.m.iter().chain(&p.v).all(|x| *x == 0.0));
        assert_eq!(p.step, 0);
        assert!(p.value.iter().all(|x| x.abs() <= 0.5));
    }

    #[test]
    fn rejects_bad_inserts() {
        let mut store = ParamStore::<f64>::new();
        assert!(store.insert("b", Shape::Vector(3), vec![0.0; 2]).is_err());
        store.insert("b", Shape::Vector(2), vec![0.0; 2]).unwrap();
        assert!(store.insert("b", Shape::Vector(2), vec![0.0; 2]).is_err());
    }

    #[test]
    fn clones_get_fresh_ids() {
        let mut store = ParamStore::<f64>::new();
        store.insert("b", Shape::Vector(2), vec![1.0, 2.0]).unwrap();
        let other = store.clone();
        assert_ne!(store.id(), other.id());
        assert!(store.same_values(&other));
    }
}
