//! Training configuration and its flat `key = value` text form.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::AgentDims;
use crate::error::{Error, Result};
use crate::world::{AttributeSpace, Encoding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Random,
    Baseline,
    TemplateTransfer,
    Obverter,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Random, Regime::Baseline, Regime::TemplateTransfer, Regime::Obverter];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Random => "random",
            Regime::Baseline => "baseline",
            Regime::TemplateTransfer => "template-transfer",
            Regime::Obverter => "obverter",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown regime {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    /// Both pre-training senders and the shared receiver.
    pub pretrain_all: f64,
    pub sender_phase2: f64,
    pub receiver_phase2: f64,
    pub obverter_receiver: f64,
}

// Receivers learn 10x slower than senders. At 1e-5 the receiver does not fit
// the train split within `max_epochs` single-batch epochs.
impl Default for LearningRates {
    fn default() -> Self {
        Self { pretrain_all: 1e-3, sender_phase2: 1e-3, receiver_phase2: 1e-4, obverter_receiver: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub space: AttributeSpace,
    pub dims: AgentDims,
    pub batch_size: usize,
    pub lr: LearningRates,
    /// Both sub-game accuracies must reach this before transfer.
    pub pretrain_threshold: f64,
    /// Train both-accuracy at which the naming and obverter phases stop.
    pub target_accuracy: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            space: AttributeSpace::reference(),
            dims: AgentDims::default(),
            batch_size: 32,
            lr: LearningRates::default(),
            pretrain_threshold: 0.95,
            target_accuracy: 0.99,
            max_epochs: 2000,
            seed: 0,
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn encoding_text(e: &Encoding) -> String {
    match e {
        Encoding::OneHotDisentangled => "one-hot".into(),
        Encoding::EntangledProjection { dim, seed } => format!("entangled:{dim}:{seed}"),
        Encoding::PrecomputedEmbedding { path } => format!("embedding:{}", path.display()),
    }
}

fn parse_encoding(v: &str) -> Result<Encoding> {
    let bad = || Error::Config(format!("bad encoding {v:?}"));
    if v == "one-hot" {
        return Ok(Encoding::OneHotDisentangled);
    }
    if let Some(rest) = v.strip_prefix("entangled:") {
        let (dim, seed) = rest.split_once(':').ok_or_else(bad)?;
        return Ok(Encoding::EntangledProjection {
            dim: dim.parse().map_err(|_| bad())?,
            seed: seed.parse().map_err(|_| bad())?,
        });
    }
    if let Some(path) = v.strip_prefix("embedding:") {
        return Ok(Encoding::PrecomputedEmbedding { path: PathBuf::from(path) });
    }
    Err(bad())
}

fn num<V: FromStr>(key: &str, v: &str) -> Result<V> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        let lrs = [self.lr.pretrain_all, self.lr.sender_phase2, self.lr.receiver_phase2, self.lr.obverter_receiver];
        if lrs.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.pretrain_threshold >= 0.0 && self.pretrain_threshold <= 1.0) {
            return Err(Error::Config(format!("pretrain_threshold {} outside [0, 1]", self.pretrain_threshold)));
        }
        if !(self.target_accuracy > 0.0 && self.target_accuracy <= 1.0) {
            return Err(Error::Config(format!("target_accuracy {} outside (0, 1]", self.target_accuracy)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        let d = self.dims;
        if d.vocab < 2 || d.msg_len == 0 || d.hidden == 0 || d.embed == 0 {
            return Err(Error::Config(format!("bad agent dimensions {d:?}")));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "n_colors" => self.space.n_colors = num(key, v)?,
            "n_shapes" => self.space.n_shapes = num(key, v)?,
            "encoding" => self.space.encoding = parse_encoding(v)?,
            "vocab" => self.dims.vocab = num(key, v)?,
            "msg_len" => self.dims.msg_len = num(key, v)?,
            "hidden" => self.dims.hidden = num(key, v)?,
            "embed" => self.dims.embed = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "lr_pretrain_all" => self.lr.pretrain_all = num(key, v)?,
            "lr_sender_phase2" => self.lr.sender_phase2 = num(key, v)?,
            "lr_receiver_phase2" => self.lr.receiver_phase2 = num(key, v)?,
            "lr_obverter_receiver" => self.lr.obverter_receiver = num(key, v)?,
            "pretrain_threshold" => self.pretrain_threshold = num(key, v)?,
            "target_accuracy" => self.target_accuracy = num(key, v)?,
            "max_epochs" => self.max_epochs = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key in a fixed order, one per line.
    pub fn canonical_text(&self) -> String {
        let rows: [(&str, String); 16] = [
            ("n_colors", self.space.n_colors.to_string()),
            ("n_shapes", self.space.n_shapes.to_string()),
            ("encoding", encoding_text(&self.space.encoding)),
            ("vocab", self.dims.vocab.to_string()),
            ("msg_len", self.dims.msg_len.to_string()),
            ("hidden", self.dims.hidden.to_string()),
            ("embed", self.dims.embed.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr_pretrain_all", format!("{:e}", self.lr.pretrain_all)),
            ("lr_sender_phase2", format!("{:e}", self.lr.sender_phase2)),
            ("lr_receiver_phase2", format!("{:e}", self.lr.receiver_phase2)),
            ("lr_obverter_receiver", format!("{:e}", self.lr.obverter_receiver)),
            ("pretrain_threshold", self.pretrain_threshold.to_string()),
            ("target_accuracy", self.target_accuracy.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("seed", self.seed.to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// FNV-1a of the canonical text with the seed line left out, so every
    /// seed of one sweep shares a hash.
    pub fn hash(&self) -> String {
        let text: String = self.canonical_text().lines().filter(|l| !l.starts_with("seed ")).map(|l| format!("{l}\n")).collect();
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}
