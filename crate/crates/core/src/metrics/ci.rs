//! Context independence.
//!
//! Concepts are the colors followed by the shapes. For a concept `k` and a
//! symbol `v`:
//!
//! * `p(v|k)` is the fraction of objects carrying `k` whose message contains
//!   `v` (objects weighted uniformly);
//! * `p(k|v)` normalises the token co-occurrence counts of `v` over concepts:
//!   each symbol token counts once for the object's color and once for its
//!   shape.
//!
//! `v^k = argmax_v p(k|v)` with the lowest symbol winning ties, and the score
//! is the mean of `p(v^k|k) · p(k|v^k)` over concepts.

use crate::nn::argmax;
use crate::protocol::TrainedProtocol;

#[derive(Debug, Clone)]
pub struct ConceptStats {
    pub n_concepts: usize,
    pub vocab: usize,
    /// `count[k][v]`: tokens of `v` emitted for objects with concept `k`.
    pub count: Vec<Vec<usize>>,
    /// `presence[k][v]`: objects with concept `k` whose message contains `v`.
    pub presence: Vec<Vec<usize>>,
    /// Objects carrying concept `k`.
    pub objects: Vec<usize>,
}

impl ConceptStats {
    pub fn from_protocol(protocol: &TrainedProtocol) -> Self {
        let nc = protocol.n_colors();
        let n_concepts = nc + protocol.n_shapes();
        let vocab = protocol
            .entries()
            .flat_map(|(_, m)| m.symbols().iter().copied())
            .max()
            .map_or(1, |v| v + 1);
        let mut count = vec![vec![0; vocab]; n_concepts];
        let mut presence = vec![vec![0; vocab]; n_concepts];
        let mut objects = vec![0; n_concepts];
        for ((c, s), m) in protocol.entries() {
            for k in [c, nc + s] {
                objects[k] += 1;
                let mut seen = vec![false; vocab];
                for &v in m.symbols() {
                    count[k][v] += 1;
                    seen[v] = true;
                }
                for (v, &was) in seen.iter().enumerate() {
                    presence[k][v] += usize::from(was);
                }
            }
        }
        Self { n_concepts, vocab, count, presence, objects }
    }

    pub fn p_symbol_given_concept(&self, v: usize, k: usize) -> f64 {
        if self.objects[k] == 0 {
            0.0
        } else {
            self.presence[k][v] as f64 / self.objects[k] as f64
        }
    }

    pub fn p_concept_given_symbol(&self, k: usize, v: usize) -> f64 {
        let total: usize = (0..self.n_concepts).map(|kk| self.count[kk][v]).sum();
        if total == 0 {
            0.0
        } else {
            self.count[k][v] as f64 / total as f64
        }
    }

    /// Symbol most indicative of concept `k`.
    pub fn best_symbol(&self, k: usize) -> usize {
        let scores: Vec<f64> = (0..self.vocab).map(|v| self.p_concept_given_symbol(k, v)).collect();
        argmax(&scores)
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        c += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + c
}

pub fn context_independence(protocol: &TrainedProtocol) -> f64 {
    let stats = ConceptStats::from_protocol(protocol);
    let total = compensated_sum((0..stats.n_concepts).map(|k| {
        let v = stats.best_symbol(k);
        stats.p_symbol_given_concept(v, k) * stats.p_concept_given_symbol(k, v)
    }));
    total / stats.n_concepts as f64
}
