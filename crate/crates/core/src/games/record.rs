use serde::{Deserialize, Serialize};

use crate::games::config::Regime;

/// Most loss points kept in a persisted record.
pub const MAX_TRACE_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc_both: f64,
}

/// Outcome of one (regime, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub regime: Regime,
    pub seed: u64,
    pub config_hash: String,
    /// Epochs of the final training phase.
    pub epochs: usize,
    /// Epochs spent pre-training the receiver (template transfer only).
    #[serde(default)]
    pub pretrain_epochs: usize,
    pub final_train_acc_both: f64,
    pub final_test_acc_both: f64,
    pub final_test_acc_avg: f64,
    pub ci: f64,
    pub topo: f64,
    #[serde(default)]
    pub topo_degenerate: bool,
    pub wall_ms: u64,
    /// Per-epoch mean loss, decimated to at most [`MAX_TRACE_POINTS`].
    pub loss_trace: Vec<f64>,
    /// Full per-epoch history of the final phase; not persisted.
    #[serde(skip)]
    pub history: Vec<EpochStat>,
}

impl RunRecord {
    pub fn new(regime: Regime, seed: u64, config_hash: String) -> Self {
        Self {
            regime,
            seed,
            config_hash,
            epochs: 0,
            pretrain_epochs: 0,
            final_train_acc_both: 0.0,
            final_test_acc_both: 0.0,
            final_test_acc_avg: 0.0,
            ci: 0.0,
            topo: 0.0,
            topo_degenerate: false,
            wall_ms: 0,
            loss_trace: Vec::new(),
            history: Vec::new(),
        }
    }

    /// Copy with `wall_ms` zeroed, for comparing reruns.
    pub fn without_timing(&self) -> Self {
        Self { wall_ms: 0, ..self.clone() }
    }
}

/// Keeps at most `max` points, evenly strided, always including the last.
pub fn decimate(xs: &[f64], max: usize) -> Vec<f64> {
    if xs.len() <= max || max == 0 {
        return if max == 0 { Vec::new() } else { xs.to_vec() };
    }
    let n = xs.len();
    (0..max).map(|i| xs[(i * (n - 1)) / (max - 1).max(1)]).collect()
}
