//! Reverse-mode differentiation over a fixed set of vector primitives.
//!
//! A [`Tape`] records every primitive applied during one forward pass.
//! Parameters are not copied onto the tape: ops refer to them through
//! [`ParamKey`]s, and [`Tape::backward`] accumulates their adjoints directly
//! into the owning [`ParamStore`] gradient buffers.

use crate::error::{domain_err, shape_err, Error, Result};
use crate::nn::kernels::{self, add_assign, matvec_into, matvec_t_acc, outer_acc};
use crate::nn::params::{ParamKey, ParamStore};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

/// Adjoint rule of a user-supplied elementwise op: `(x, y, dy, dx)`, where
/// `dx` must be accumulated into.
pub type Adjoint<T> = fn(&[T], &[T], &[T], &mut [T]);

/// Keys of one recurrent cell `h' = tanh(W_ih x + W_hh h + b)`.
#[derive(Debug, Clone, Copy)]
pub struct RnnKeys {
    pub w_ih: ParamKey,
    pub w_hh: ParamKey,
    pub bias: ParamKey,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Param(ParamKey),
    Linear { x: NodeId, w: ParamKey, b: Option<ParamKey> },
    RnnCell { x: NodeId, h: NodeId, keys: RnnKeys },
    Add(NodeId, NodeId),
    Tanh(NodeId),
    Softplus(NodeId),
    Offset(NodeId),
    LogSoftmax(NodeId),
    /// `y = softmax(z)` with `z = (logits + g) / tau`; `z` kept for the tau adjoint.
    GumbelSoftmax { logits: NodeId, tau: NodeId, z: Vec<T> },
    Select { x: NodeId, index: usize },
    SumScaled { items: Vec<NodeId>, coef: T },
    Custom { x: NodeId, adjoint: Adjoint<T> },
}

#[derive(Debug)]
struct Node<T> {
    value: Vec<T>,
    op: Op<T>,
}

#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-node adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Vec<T>>,
    visited: usize,
}

impl<T: Scalar> Gradients<T> {
    pub fn wrt(&self, node: NodeId) -> &[T] {
        &self.grads[node.0]
    }

    /// Number of recorded ops whose adjoint rule ran.
    pub fn visited(&self) -> usize {
        self.visited
    }
}

fn matrix_dims<T: Scalar>(store: &ParamStore<T>, key: ParamKey) -> (usize, usize) {
    store.get(key).shape.rows_cols()
}

fn find_store<'a, 'b, T: Scalar>(
    stores: &'a mut [&'b mut ParamStore<T>],
    key: ParamKey,
) -> Result<&'a mut ParamStore<T>> {
    stores
        .iter_mut()
        .find(|s| s.owns(key))
        .map(|s| &mut **s)
        .ok_or_else(|| domain_err("backward: parameter store not supplied"))
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, node: NodeId) -> &[T] {
        &self.nodes[node.0].value
    }

    /// Value of a length-1 node.
    pub fn scalar(&self, node: NodeId) -> T {
        self.nodes[node.0].value[0]
    }

    fn push(&mut self, value: Vec<T>, op: Op<T>) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Vec<T>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// Brings a parameter onto the tape as a node (used for small entries such as the temperature).
    pub fn param(&mut self, store: &ParamStore<T>, key: ParamKey) -> NodeId {
        let value = store.get(key).value.clone();
        self.push(value, Op::Param(key))
    }

    /// `W x + b`.
    pub fn linear(
        &mut self,
        store: &ParamStore<T>,
        x: NodeId,
        w: ParamKey,
        b: Option<ParamKey>,
    ) -> Result<NodeId> {
        let (rows, cols) = matrix_dims(store, w);
        let xv = &self.nodes[x.0].value;
        if xv.len() != cols {
            return Err(shape_err(format!(
                "linear {}: input {} vs {} columns",
                store.get(w).name,
                xv.len(),
                cols
            )));
        }
        let mut out = match b {
            Some(b) => {
                let bias = &store.get(b).value;
                if bias.len() != rows {
                    return Err(shape_err(format!("linear bias {} vs {} rows", bias.len(), rows)));
                }
                bias.clone()
            }
            None => vec![T::zero(); rows],
        };
        matvec_into(&store.get(w).value, cols, xv, &mut out, true);
        Ok(self.push(out, Op::Linear { x, w, b }))
    }

    /// `tanh(W_ih x + W_hh h + b)`.
    pub fn rnn_cell(&mut self, store: &ParamStore<T>, x: NodeId, h: NodeId, keys: RnnKeys) -> Result<NodeId> {
        let (hid, in_dim) = matrix_dims(store, keys.w_ih);
        let (hh_rows, hh_cols) = matrix_dims(store, keys.w_hh);
        let xv = &self.nodes[x.0].value;
        let hv = &self.nodes[h.0].value;
        let bias = &store.get(keys.bias).value;
        if xv.len() != in_dim || hv.len() != hid || hh_rows != hid || hh_cols != hid || bias.len() != hid {
            return Err(shape_err(format!(
                "rnn cell: input {} hidden {} for weights {}x{} / {}x{}",
                xv.len(),
                hv.len(),
                hid,
                in_dim,
                hh_rows,
                hh_cols
            )));
        }
        let mut pre = bias.clone();
        matvec_into(&store.get(keys.w_ih).value, in_dim, xv, &mut pre, true);
        matvec_into(&store.get(keys.w_hh).value, hid, hv, &mut pre, true);
        pre.iter_mut().for_each(|v| *v = v.tanh());
        Ok(self.push(pre, Op::RnnCell { x, h, keys }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.len() != bv.len() {
            return Err(shape_err(format!("add: {} vs {}", av.len(), bv.len())));
        }
        let out = av.iter().zip(bv).map(|(&x, &y)| x + y).collect();
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let out = self.nodes[a.0].value.iter().map(|v| v.tanh()).collect();
        self.push(out, Op::Tanh(a))
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        let out = self.nodes[a.0].value.iter().map(|&v| kernels::softplus(v)).collect();
        self.push(out, Op::Softplus(a))
    }

    /// `a + c` elementwise for a constant `c`.
    pub fn offset(&mut self, a: NodeId, c: T) -> NodeId {
        let out = self.nodes[a.0].value.iter().map(|&v| v + c).collect();
        self.push(out, Op::Offset(a))
    }

    pub fn log_softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let av = &self.nodes[a.0].value;
        if av.is_empty() {
            return Err(shape_err("log_softmax of an empty vector"));
        }
        if av.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerics("log_softmax input is not finite".into()));
        }
        let out = kernels::log_softmax(av);
        Ok(self.push(out, Op::LogSoftmax(a)))
    }

    /// `softmax((logits + noise) / tau)` where `tau` is a length-1 node.
    ///
    /// The noise is a constant: gradients reach `logits` and `tau` only.
    /// Outputs are floored at the smallest positive normal so they stay in the
    /// open simplex even when the temperature is tiny.
    pub fn gumbel_softmax(&mut self, logits: NodeId, tau: NodeId, noise: &[T]) -> Result<NodeId> {
        let lv = &self.nodes[logits.0].value;
        let tv = &self.nodes[tau.0].value;
        if tv.len() != 1 {
            return Err(shape_err("temperature must be a scalar node"));
        }
        if lv.len() != noise.len() || lv.is_empty() {
            return Err(shape_err(format!("gumbel: {} logits, {} noise", lv.len(), noise.len())));
        }
        let t = tv[0];
        if !(t > T::zero()) {
            return Err(domain_err(format!("temperature must be positive, got {t}")));
        }
        let z: Vec<T> = lv.iter().zip(noise).map(|(&l, &g)| (l + g) / t).collect();
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerics("gumbel-softmax logits are not finite".into()));
        }
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let mut y: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
        let sum = y.iter().copied().fold(T::zero(), |a, b| a + b);
        let floor = T::min_positive_value();
        y.iter_mut().for_each(|v| *v = (*v / sum).max(floor));
        Ok(self.push(y, Op::GumbelSoftmax { logits, tau, z }))
    }

    pub fn select(&mut self, x: NodeId, index: usize) -> Result<NodeId> {
        let xv = &self.nodes[x.0].value;
        let v = *xv
            .get(index)
            .ok_or_else(|| domain_err(format!("select index {index} of {}", xv.len())))?;
        Ok(self.push(vec![v], Op::Select { x, index }))
    }

    /// `coef * sum(items)` over scalar nodes.
    pub fn sum_scaled(&mut self, items: Vec<NodeId>, coef: T) -> Result<NodeId> {
        let mut acc = T::zero();
        for &i in &items {
            let v = &self.nodes[i.0].value;
            if v.len() != 1 {
                return Err(shape_err("sum_scaled expects scalar nodes"));
            }
            acc += v[0];
        }
        Ok(self.push(vec![coef * acc], Op::SumScaled { items, coef }))
    }

    /// Elementwise op with a caller-supplied forward value and adjoint rule.
    pub fn custom(&mut self, x: NodeId, f: impl Fn(T) -> T, adjoint: Adjoint<T>) -> NodeId {
        let out = self.nodes[x.0].value.iter().map(|&v| f(v)).collect();
        self.push(out, Op::Custom { x, adjoint })
    }

    /// Replays adjoints from the scalar `root` in reverse recording order,
    /// accumulating parameter gradients into `stores`.
    pub fn backward(&self, root: NodeId, stores: &mut [&mut ParamStore<T>]) -> Result<Gradients<T>> {
        if self.nodes[root.0].value.len() != 1 {
            return Err(shape_err("backward root must be a scalar"));
        }
        if !self.nodes[root.0].value[0].is_finite() {
            return Err(Error::Numerics("loss is not finite".into()));
        }
        let mut grads: Vec<Vec<T>> = Vec::with_capacity(root.0 + 1);
        for n in &self.nodes[..=root.0] {
            grads.push(vec![T::zero(); n.value.len()]);
        }
        grads[root.0][0] = T::one();
        let mut visited = 0;

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            // split so the current adjoint can be read while earlier ones are written
            let (before, rest) = grads.split_at_mut(idx);
            let gy = &rest[0];
            visited += 1;
            if gy.iter().all(|g| g.is_zero()) {
                continue;
            }
            match &node.op {
                Op::Leaf => {}
                Op::Param(key) => {
                    let store = find_store(stores, *key)?;
                    add_assign(&mut store.get_mut(*key).grad, gy);
                }
                Op::Linear { x, w, b } => {
                    let xv = &self.nodes[x.0].value;
                    let store = find_store(stores, *w)?;
                    let cols = xv.len();
                    matvec_t_acc(&store.get(*w).value, cols, gy, &mut before[x.0]);
                    outer_acc(&mut store.get_mut(*w).grad, cols, gy, xv);
                    if let Some(b) = b {
                        let store = find_store(stores, *b)?;
                        add_assign(&mut store.get_mut(*b).grad, gy);
                    }
                }
                Op::RnnCell { x, h, keys } => {
                    let xv = &self.nodes[x.0].value;
                    let hv = &self.nodes[h.0].value;
                    let dpre: Vec<T> = gy
                        .iter()
                        .zip(&node.value)
                        .map(|(&g, &y)| g * (T::one() - y * y))
                        .collect();
                    {
                        let store = find_store(stores, keys.bias)?;
                        add_assign(&mut store.get_mut(keys.bias).grad, &dpre);
                    }
                    {
                        let store = find_store(stores, keys.w_ih)?;
                        matvec_t_acc(&store.get(keys.w_ih).value, xv.len(), &dpre, &mut before[x.0]);
                        outer_acc(&mut store.get_mut(keys.w_ih).grad, xv.len(), &dpre, xv);
                    }
                    {
                        let store = find_store(stores, keys.w_hh)?;
                        matvec_t_acc(&store.get(keys.w_hh).value, hv.len(), &dpre, &mut before[h.0]);
                        outer_acc(&mut store.get_mut(keys.w_hh).grad, hv.len(), &dpre, hv);
                    }
                }
                Op::Add(a, b) => {
                    add_assign(&mut before[a.0], gy);
                    add_assign(&mut before[b.0], gy);
                }
                Op::Tanh(a) => {
                    for ((d, &g), &y) in before[a.0].iter_mut().zip(gy).zip(&node.value) {
                        *d += g * (T::one() - y * y);
                    }
                }
                Op::Softplus(a) => {
                    let xv = &self.nodes[a.0].value;
                    for ((d, &g), &x) in before[a.0].iter_mut().zip(gy).zip(xv) {
                        *d += g * kernels::sigmoid(x);
                    }
                }
                Op::Offset(a) => add_assign(&mut before[a.0], gy),
                Op::LogSoftmax(a) => {
                    let total = gy.iter().copied().fold(T::zero(), |s, g| s + g);
                    for ((d, &g), &y) in before[a.0].iter_mut().zip(gy).zip(&node.value) {
                        *d += g - y.exp() * total;
                    }
                }
                Op::GumbelSoftmax { logits, tau, z } => {
                    let y = &node.value;
                    let t = self.nodes[tau.0].value[0];
                    let inner = gy.iter().zip(y).fold(T::zero(), |s, (&g, &p)| s + g * p);
                    let dz: Vec<T> = gy.iter().zip(y).map(|(&g, &p)| p * (g - inner)).collect();
                    for (d, &v) in before[logits.0].iter_mut().zip(&dz) {
                        *d += v / t;
                    }
                    let dt = dz.iter().zip(z).fold(T::zero(), |s, (&d, &zi)| s + d * zi);
                    before[tau.0][0] -= dt / t;
                }
                Op::Select { x, index } => before[x.0][*index] += gy[0],
                Op::SumScaled { items, coef } => {
                    for i in items {
                        before[i.0][0] += gy[0] * *coef;
                    }
                }
                Op::Custom { x, adjoint } => {
                    let xv = &self.nodes[x.0].value;
                    adjoint(xv, &node.value, gy, &mut before[x.0]);
                }
            }
        }
        Ok(Gradients { grads, visited })
    }
}
