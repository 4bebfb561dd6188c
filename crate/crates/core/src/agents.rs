//! Sender and receiver policies over a discrete channel.
//!
//! The sender maps an observation to `msg_len` symbols with a recurrent net
//! whose hidden state is initialised from a projection of the observation.
//! The first symbol is read off that state; the cell then advances on the
//! embedding of each emitted (relaxed or hard) symbol. The receiver reads
//! the symbols with its own recurrent net and predicts color and shape with
//! two independent softmax groups on top of a tanh hidden layer.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{domain_err, shape_err, Result};
use crate::nn::checkpoint::{self, Entry};
use crate::nn::kernels::{self, argmax, matvec_into};
use crate::nn::{gumbel_softmax_sample, HasParams, NodeId, ParamKey, ParamStore, RnnKeys, Shape, Tape};
use crate::scalar::Scalar;

/// Lower bound of the learned temperature: `tau = TAU_MIN + softplus(rho)`.
pub const TAU_MIN: f64 = 0.5;
pub const TAU_INIT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentDims {
    pub vocab: usize,
    pub msg_len: usize,
    pub hidden: usize,
    pub embed: usize,
}

impl Default for AgentDims {
    fn default() -> Self {
        Self { vocab: 10, msg_len: 2, hidden: 200, embed: 25 }
    }
}

/// A message in hard form: one vocabulary index per position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Message(pub Vec<usize>);

impl Message {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }
}

impl std::fmt::Display for Message {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

/// A message in relaxed form: one simplex-valued tape node per position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelaxedMessage(pub Vec<NodeId>);

pub fn one_hot<T: Scalar>(n: usize, i: usize) -> Vec<T> {
    let mut v = vec![T::zero(); n];
    v[i] = T::one();
    v
}

fn to_scalar<T: Scalar>(obs: &[f64]) -> Vec<T> {
    obs.iter().map(|&v| T::lit(v)).collect()
}

fn add_rnn<T: Scalar, R: Rng + ?Sized>(
    store: &mut ParamStore<T>,
    prefix: &str,
    input: usize,
    hidden: usize,
    rng: &mut R,
) -> Result<RnnKeys> {
    Ok(RnnKeys {
        w_ih: store.insert_uniform(format!("{prefix}.w_ih"), Shape::Matrix(hidden, input), hidden, rng)?,
        w_hh: store.insert_uniform(format!("{prefix}.w_hh"), Shape::Matrix(hidden, hidden), hidden, rng)?,
        bias: store.insert_uniform(format!("{prefix}.bias"), Shape::Vector(hidden), hidden, rng)?,
    })
}

// tape-free helpers for evaluation paths

fn affine<T: Scalar>(store: &ParamStore<T>, w: ParamKey, b: Option<ParamKey>, x: &[T]) -> Vec<T> {
    let p = store.get(w);
    let (rows, cols) = p.shape.rows_cols();
    let mut out = match b {
        Some(b) => store.get(b).value.clone(),
        None => vec![T::zero(); rows],
    };
    matvec_into(&p.value, cols, x, &mut out, true);
    out
}

fn cell<T: Scalar>(store: &ParamStore<T>, keys: RnnKeys, x: &[T], h: &[T]) -> Vec<T> {
    let mut pre = affine(store, keys.w_ih, Some(keys.bias), x);
    matvec_into(&store.get(keys.w_hh).value, h.len(), h, &mut pre, true);
    pre.iter_mut().for_each(|v| *v = v.tanh());
    pre
}

fn embedding_column<T: Scalar>(store: &ParamStore<T>, key: ParamKey, symbol: usize) -> Vec<T> {
    let p = store.get(key);
    let (rows, cols) = p.shape.rows_cols();
    (0..rows).map(|r| p.value[r * cols + symbol]).collect()
}

#[derive(Debug, Clone, Copy)]
struct SenderKeys {
    input_w: ParamKey,
    input_b: ParamKey,
    cell: RnnKeys,
    embed: ParamKey,
    out_w: ParamKey,
    out_b: ParamKey,
    rho: ParamKey,
}

/// The sender policy: observation → message.
#[derive(Debug, Clone)]
pub struct SenderAgent<T> {
    params: ParamStore<T>,
    keys: SenderKeys,
    obs_dim: usize,
    dims: AgentDims,
}

impl<T: Scalar> SenderAgent<T> {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, dims: AgentDims, rng: &mut R) -> Result<Self> {
        if dims.vocab == 0 || dims.msg_len == 0 || dims.hidden == 0 || dims.embed == 0 || obs_dim == 0 {
            return Err(domain_err(format!("degenerate sender dims {dims:?}, obs {obs_dim}")));
        }
        let mut s = ParamStore::new();
        let h = dims.hidden;
        let input_w = s.insert_uniform("input.weight", Shape::Matrix(h, obs_dim), obs_dim, rng)?;
        let input_b = s.insert_uniform("input.bias", Shape::Vector(h), obs_dim, rng)?;
        let cell = add_rnn(&mut s, "cell", dims.embed, h, rng)?;
        let embed = s.insert_uniform("embed.weight", Shape::Matrix(dims.embed, dims.vocab), dims.vocab, rng)?;
        let out_w = s.insert_uniform("output.weight", Shape::Matrix(dims.vocab, h), h, rng)?;
        let out_b = s.insert_uniform("output.bias", Shape::Vector(dims.vocab), h, rng)?;
        // softplus(rho) = TAU_INIT - TAU_MIN
        let rho0 = (TAU_INIT - TAU_MIN).exp_m1().ln();
        let rho = s.insert("temperature.rho", Shape::Vector(1), vec![T::lit(rho0)])?;
        Ok(Self {
            params: s,
            keys: SenderKeys { input_w, input_b, cell, embed, out_w, out_b, rho },
            obs_dim,
            dims,
        })
    }

    pub fn dims(&self) -> AgentDims {
        self.dims
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn temperature(&self) -> T {
        T::lit(TAU_MIN) + kernels::softplus(self.params.get(self.keys.rho).value[0])
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.obs_dim {
            return Err(shape_err(format!("sender expects {} inputs, got {}", self.obs_dim, obs.len())));
        }
        Ok(())
    }

    /// Relaxed sample of a full message, differentiable w.r.t. the sender's parameters.
    pub fn forward_train<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        obs: &[f64],
        rng: &mut R,
    ) -> Result<RelaxedMessage> {
        self.check_obs(obs)?;
        let k = self.keys;
        let x = tape.input(to_scalar(obs));
        let mut h = tape.linear(&self.params, x, k.input_w, Some(k.input_b))?;
        let rho = tape.param(&self.params, k.rho);
        let sp = tape.softplus(rho);
        let tau = tape.offset(sp, T::lit(TAU_MIN));
        let mut symbols = Vec::with_capacity(self.dims.msg_len);
        for t in 0..self.dims.msg_len {
            let logits = tape.linear(&self.params, h, k.out_w, Some(k.out_b))?;
            let y = gumbel_softmax_sample(tape, logits, tau, rng)?;
            symbols.push(y);
            if t + 1 < self.dims.msg_len {
                let e = tape.linear(&self.params, y, k.embed, None)?;
                h = tape.rnn_cell(&self.params, e, h, k.cell)?;
            }
        }
        Ok(RelaxedMessage(symbols))
    }

    /// Greedy deterministic message: argmax per step, feeding back the chosen symbol.
    pub fn forward_eval(&self, obs: &[f64]) -> Result<Message> {
        self.check_obs(obs)?;
        let k = self.keys;
        let x: Vec<T> = to_scalar(obs);
        let mut h = affine(&self.params, k.input_w, Some(k.input_b), &x);
        let mut out = Vec::with_capacity(self.dims.msg_len);
        for t in 0..self.dims.msg_len {
            let sym = argmax(&affine(&self.params, k.out_w, Some(k.out_b), &h));
            out.push(sym);
            if t + 1 < self.dims.msg_len {
                h = cell(&self.params, k.cell, &embedding_column(&self.params, k.embed, sym), &h);
            }
        }
        Ok(Message(out))
    }

    pub fn to_entries(&self, prefix: &str) -> Vec<Entry> {
        checkpoint::store_entries(prefix, &self.params)
    }

    pub fn from_entries(prefix: &str, entries: &[Entry], obs_dim: usize, dims: AgentDims) -> Result<Self> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut agent = Self::new(obs_dim, dims, &mut rng)?;
        checkpoint::load_into(prefix, &mut agent.params, entries)?;
        Ok(agent)
    }
}

impl<T: Scalar> HasParams<T> for SenderAgent<T> {
    fn stores_mut(&mut self) -> Vec<&mut ParamStore<T>> {
        vec![&mut self.params]
    }
}

#[derive(Debug, Clone, Copy)]
struct ReceiverKeys {
    embed: ParamKey,
    cell: RnnKeys,
    hidden_w: ParamKey,
    hidden_b: ParamKey,
    color_w: ParamKey,
    color_b: ParamKey,
    shape_w: ParamKey,
    shape_b: ParamKey,
}

/// Target of a marginal log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attribute {
    Color(usize),
    Shape(usize),
}

/// Log-probabilities of the two output groups.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLogProbs<T> {
    pub color: Vec<T>,
    pub shape: Vec<T>,
}

impl<T: Scalar> JointLogProbs<T> {
    /// `log r(target | m)`. The head factorises into independent groups, so
    /// marginalising out the other attribute leaves the target group's entry.
    pub fn marginal(&self, target: Attribute) -> Result<T> {
        let (group, i) = match target {
            Attribute::Color(i) => (&self.color, i),
            Attribute::Shape(i) => (&self.shape, i),
        };
        group
            .get(i)
            .copied()
            .ok_or_else(|| domain_err(format!("{target:?} out of range for {} classes", group.len())))
    }

    pub fn joint(&self, color: usize, shape: usize) -> Result<T> {
        Ok(self.marginal(Attribute::Color(color))? + self.marginal(Attribute::Shape(shape))?)
    }

    /// Negative log-likelihood of both labels.
    pub fn nll(&self, color: usize, shape: usize) -> Result<T> {
        Ok(-self.joint(color, shape)?)
    }

    pub fn predict(&self) -> (usize, usize) {
        (argmax(&self.color), argmax(&self.shape))
    }
}

/// Free-function form of [`JointLogProbs::marginal`].
pub fn marginal_log_prob<T: Scalar>(joint: &JointLogProbs<T>, target: Attribute) -> Result<T> {
    joint.marginal(target)
}

/// The receiver policy: message → (color, shape) distribution.
#[derive(Debug, Clone)]
pub struct ReceiverAgent<T> {
    params: ParamStore<T>,
    keys: ReceiverKeys,
    dims: AgentDims,
    n_colors: usize,
    n_shapes: usize,
}

impl<T: Scalar> ReceiverAgent<T> {
    pub fn new<R: Rng + ?Sized>(n_colors: usize, n_shapes: usize, dims: AgentDims, rng: &mut R) -> Result<Self> {
        if dims.vocab == 0 || dims.hidden == 0 || dims.embed == 0 || n_colors == 0 || n_shapes == 0 {
            return Err(domain_err(format!("degenerate receiver dims {dims:?}")));
        }
        let mut s = ParamStore::new();
        let h = dims.hidden;
        let embed = s.insert_uniform("embed.weight", Shape::Matrix(dims.embed, dims.vocab), dims.vocab, rng)?;
        let cell = add_rnn(&mut s, "cell", dims.embed, h, rng)?;
        let hidden_w = s.insert_uniform("head.hidden.weight", Shape::Matrix(h, h), h, rng)?;
        let hidden_b = s.insert_uniform("head.hidden.bias", Shape::Vector(h), h, rng)?;
        let color_w = s.insert_uniform("head.color.weight", Shape::Matrix(n_colors, h), h, rng)?;
        let color_b = s.insert_uniform("head.color.bias", Shape::Vector(n_colors), h, rng)?;
        let shape_w = s.insert_uniform("head.shape.weight", Shape::Matrix(n_shapes, h), h, rng)?;
        let shape_b = s.insert_uniform("head.shape.bias", Shape::Vector(n_shapes), h, rng)?;
        Ok(Self {
            params: s,
            keys: ReceiverKeys { embed, cell, hidden_w, hidden_b, color_w, color_b, shape_w, shape_b },
            dims,
            n_colors,
            n_shapes,
        })
    }

    pub fn dims(&self) -> AgentDims {
        self.dims
    }

    pub fn n_colors(&self) -> usize {
        self.n_colors
    }

    pub fn n_shapes(&self) -> usize {
        self.n_shapes
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// Reads simplex-valued symbol nodes; returns (color, shape) log-prob nodes.
    pub fn forward(&self, tape: &mut Tape<T>, symbols: &[NodeId]) -> Result<(NodeId, NodeId)> {
        if symbols.is_empty() {
            return Err(domain_err("receiver got an empty message"));
        }
        let k = self.keys;
        let mut h = tape.input(vec![T::zero(); self.dims.hidden]);
        for &y in symbols {
            if tape.value(y).len() != self.dims.vocab {
                return Err(shape_err(format!(
                    "symbol of width {} for vocabulary {}",
                    tape.value(y).len(),
                    self.dims.vocab
                )));
            }
            let e = tape.linear(&self.params, y, k.embed, None)?;
            h = tape.rnn_cell(&self.params, e, h, k.cell)?;
        }
        let z = tape.linear(&self.params, h, k.hidden_w, Some(k.hidden_b))?;
        let z = tape.tanh(z);
        let lc = tape.linear(&self.params, z, k.color_w, Some(k.color_b))?;
        let ls = tape.linear(&self.params, z, k.shape_w, Some(k.shape_b))?;
        Ok((tape.log_softmax(lc)?, tape.log_softmax(ls)?))
    }

    /// Records a hard message as one-hot symbol vectors and reads it.
    pub fn forward_hard(&self, tape: &mut Tape<T>, message: &Message) -> Result<(NodeId, NodeId)> {
        let symbols = self.hard_symbols(tape, message)?;
        self.forward(tape, &symbols)
    }

    pub fn hard_symbols(&self, tape: &mut Tape<T>, message: &Message) -> Result<Vec<NodeId>> {
        message
            .0
            .iter()
            .map(|&s| {
                if s >= self.dims.vocab {
                    Err(domain_err(format!("symbol {s} outside vocabulary {}", self.dims.vocab)))
                } else {
                    Ok(tape.input(one_hot(self.dims.vocab, s)))
                }
            })
            .collect()
    }

    fn head(&self, h: &[T]) -> JointLogProbs<T> {
        let k = self.keys;
        let mut z = affine(&self.params, k.hidden_w, Some(k.hidden_b), h);
        z.iter_mut().for_each(|v| *v = v.tanh());
        let lc = affine(&self.params, k.color_w, Some(k.color_b), &z);
        let ls = affine(&self.params, k.shape_w, Some(k.shape_b), &z);
        JointLogProbs { color: kernels::log_softmax(&lc), shape: kernels::log_softmax(&ls) }
    }

    fn step(&self, h: &[T], symbol: usize) -> Vec<T> {
        let e = embedding_column(&self.params, self.keys.embed, symbol);
        cell(&self.params, self.keys.cell, &e, h)
    }

    /// Tape-free evaluation of a hard message.
    pub fn log_probs(&self, message: &Message) -> Result<JointLogProbs<T>> {
        if message.is_empty() {
            return Err(domain_err("receiver got an empty message"));
        }
        let mut h = vec![T::zero(); self.dims.hidden];
        for &s in &message.0 {
            if s >= self.dims.vocab {
                return Err(domain_err(format!("symbol {s} outside vocabulary {}", self.dims.vocab)));
            }
            h = self.step(&h, s);
        }
        Ok(self.head(&h))
    }

    /// Log-probs of every message of length `len`, in lexicographic order,
    /// sharing hidden states between common prefixes.
    pub fn log_probs_all(&self, len: usize) -> Result<Vec<JointLogProbs<T>>> {
        if len == 0 {
            return Err(domain_err("message length must be positive"));
        }
        let mut states = vec![vec![T::zero(); self.dims.hidden]];
        for _ in 0..len {
            let mut next = Vec::with_capacity(states.len() * self.dims.vocab);
            for h in &states {
                for s in 0..self.dims.vocab {
                    next.push(self.step(h, s));
                }
            }
            states = next;
        }
        Ok(states.iter().map(|h| self.head(h)).collect())
    }

    pub fn to_entries(&self, prefix: &str) -> Vec<Entry> {
        checkpoint::store_entries(prefix, &self.params)
    }

    pub fn from_entries(
        prefix: &str,
        entries: &[Entry],
        n_colors: usize,
        n_shapes: usize,
        dims: AgentDims,
    ) -> Result<Self> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut agent = Self::new(n_colors, n_shapes, dims, &mut rng)?;
        checkpoint::load_into(prefix, &mut agent.params, entries)?;
        Ok(agent)
    }
}

impl<T: Scalar> HasParams<T> for ReceiverAgent<T> {
    fn stores_mut(&mut self) -> Vec<&mut ParamStore<T>> {
        vec![&mut self.params]
    }
}
