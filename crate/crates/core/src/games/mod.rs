//! Training regimes: the baseline naming game, template transfer and
//! obverter, plus the untrained reference.

pub mod config;
pub mod naming;
pub mod obverter;
pub mod record;
pub mod transfer;

use std::path::Path;

use crate::agents::{AgentDims, ReceiverAgent, SenderAgent};
use crate::error::{Error, Result};
use crate::metrics::{Listener, Speaker};
use crate::nn::checkpoint::{self, find_scalar, Entry};
use crate::protocol::TrainedProtocol;
use crate::scalar::Scalar;
use crate::world::{AttributeSpace, Encoding};

pub use config::{fnv1a64, GameConfig, LearningRates, Regime};
pub use naming::{epoch_batches, extract_protocol, naming_game_loss};
pub use obverter::{assign_roles, enumerate_messages, evaluate_message, train_obverter, ObverterSpeaker};
pub use record::{decimate, EpochStat, RunRecord};
pub use transfer::{
    pad_pretrain_message, pretrain_accuracy, pretrain_disentangled, pretrain_losses, run_template_transfer,
    train_baseline, PadRole,
};

/// The agents a regime leaves behind.
#[derive(Debug, Clone)]
pub enum Agents<T> {
    Pair { sender: SenderAgent<T>, receiver: ReceiverAgent<T> },
    Obverter { first: ReceiverAgent<T>, second: ReceiverAgent<T> },
}

impl<T: Scalar> Agents<T> {
    /// The deterministic speaker used for evaluation and protocol extraction.
    pub fn speaker(&self) -> Result<Box<dyn Speaker + '_>> {
        Ok(match self {
            Agents::Pair { sender, .. } => Box::new(sender),
            Agents::Obverter { first, .. } => Box::new(ObverterSpeaker::new(first, first.dims().msg_len)?),
        })
    }

    pub fn listener(&self) -> &dyn Listener {
        match self {
            Agents::Pair { receiver, .. } => receiver,
            Agents::Obverter { second, .. } => second,
        }
    }

    /// Largest optimizer step count over every parameter store.
    pub fn max_step(&self) -> u64 {
        match self {
            Agents::Pair { sender, receiver } => sender.params().max_step().max(receiver.params().max_step()),
            Agents::Obverter { first, second } => first.params().max_step().max(second.params().max_step()),
        }
    }
}

impl<S: Speaker + ?Sized> Speaker for &S {
    fn speak(&self, object: &crate::world::ObjectInstance) -> Result<crate::agents::Message> {
        (**self).speak(object)
    }
}

#[derive(Debug, Clone)]
pub struct Trained<T> {
    pub agents: Agents<T>,
    pub record: RunRecord,
    pub protocol: TrainedProtocol,
}

/// Runs one regime with `cfg.seed`.
pub fn run_regime<T: Scalar>(regime: Regime, cfg: &GameConfig) -> Result<Trained<T>> {
    match regime {
        Regime::Random => transfer::run_random(cfg),
        Regime::Baseline | Regime::TemplateTransfer => {
            let (sender, receiver, record, protocol) =
                transfer::run_transfer(cfg, regime == Regime::TemplateTransfer, regime)?;
            Ok(Trained { agents: Agents::Pair { sender, receiver }, record, protocol })
        }
        Regime::Obverter => obverter::run_obverter(cfg),
    }
}

/// Agents restored from disk together with what is needed to rebuild their world.
#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub regime: Regime,
    pub seed: u64,
    pub n_colors: usize,
    pub n_shapes: usize,
    /// `None` when observations came from an embedding file, whose path is not stored.
    pub encoding: Option<Encoding>,
    pub dims: AgentDims,
    pub obs_dim: usize,
    pub agents: Agents<T>,
}

fn split_u64(name: &str, v: u64) -> [Entry; 2] {
    [Entry::scalar(format!("{name}_hi"), (v >> 32) as f64), Entry::scalar(format!("{name}_lo"), (v & 0xffff_ffff) as f64)]
}

fn join_u64(entries: &[Entry], name: &str) -> Result<u64> {
    let hi = find_scalar(entries, &format!("{name}_hi"))? as u64;
    let lo = find_scalar(entries, &format!("{name}_lo"))? as u64;
    Ok((hi << 32) | lo)
}

fn meta_usize(entries: &[Entry], name: &str) -> Result<usize> {
    let v = find_scalar(entries, &format!("meta/{name}"))?;
    if v < 0.0 || v.fract() != 0.0 {
        return Err(Error::Checkpoint(format!("meta/{name} = {v} is not a count")));
    }
    Ok(v as usize)
}

impl<T: Scalar> Checkpoint<T> {
    pub fn from_trained(trained: &Trained<T>, cfg: &GameConfig, obs_dim: usize) -> Self {
        Self {
            regime: trained.record.regime,
            seed: cfg.seed,
            n_colors: cfg.space.n_colors,
            n_shapes: cfg.space.n_shapes,
            encoding: match &cfg.space.encoding {
                Encoding::PrecomputedEmbedding { .. } => None,
                e => Some(e.clone()),
            },
            dims: cfg.dims,
            obs_dim,
            agents: trained.agents.clone(),
        }
    }

    pub fn to_entries(&self) -> Vec<Entry> {
        let regime_ix = Regime::ALL.iter().position(|r| *r == self.regime).unwrap_or(0);
        let (enc_kind, enc_dim, enc_seed) = match &self.encoding {
            Some(Encoding::OneHotDisentangled) => (0, 0, 0),
            Some(Encoding::EntangledProjection { dim, seed }) => (1, *dim, *seed),
            _ => (2, 0, 0),
        };
        let mut out: Vec<Entry> = [
            ("regime", regime_ix),
            ("n_colors", self.n_colors),
            ("n_shapes", self.n_shapes),
            ("encoding", enc_kind),
            ("encoding_dim", enc_dim),
            ("vocab", self.dims.vocab),
            ("msg_len", self.dims.msg_len),
            ("hidden", self.dims.hidden),
            ("embed", self.dims.embed),
            ("obs_dim", self.obs_dim),
        ]
        .iter()
        .map(|(k, v)| Entry::scalar(format!("meta/{k}"), *v as f64))
        .collect();
        out.extend(split_u64("meta/seed", self.seed));
        out.extend(split_u64("meta/encoding_seed", enc_seed));
        match &self.agents {
            Agents::Pair { sender, receiver } => {
                out.extend(sender.to_entries("sender/"));
                out.extend(receiver.to_entries("receiver/"));
            }
            Agents::Obverter { first, second } => {
                out.extend(first.to_entries("agent1/"));
                out.extend(second.to_entries("agent2/"));
            }
        }
        out
    }

    pub fn from_entries(entries: &[Entry]) -> Result<Self> {
        let regime = *Regime::ALL
            .get(meta_usize(entries, "regime")?)
            .ok_or_else(|| Error::Checkpoint("unknown regime index".into()))?;
        let (n_colors, n_shapes) = (meta_usize(entries, "n_colors")?, meta_usize(entries, "n_shapes")?);
        let encoding = match meta_usize(entries, "encoding")? {
            0 => Some(Encoding::OneHotDisentangled),
            1 => Some(Encoding::EntangledProjection {
                dim: meta_usize(entries, "encoding_dim")?,
                seed: join_u64(entries, "meta/encoding_seed")?,
            }),
            _ => None,
        };
        let dims = AgentDims {
            vocab: meta_usize(entries, "vocab")?,
            msg_len: meta_usize(entries, "msg_len")?,
            hidden: meta_usize(entries, "hidden")?,
            embed: meta_usize(entries, "embed")?,
        };
        let obs_dim = meta_usize(entries, "obs_dim")?;
        let agents = if regime == Regime::Obverter {
            Agents::Obverter {
                first: ReceiverAgent::from_entries("agent1/", entries, n_colors, n_shapes, dims)?,
                second: ReceiverAgent::from_entries("agent2/", entries, n_colors, n_shapes, dims)?,
            }
        } else {
            Agents::Pair {
                sender: SenderAgent::from_entries("sender/", entries, obs_dim, dims)?,
                receiver: ReceiverAgent::from_entries("receiver/", entries, n_colors, n_shapes, dims)?,
            }
        };
        Ok(Self { regime, seed: join_u64(entries, "meta/seed")?, n_colors, n_shapes, encoding, dims, obs_dim, agents })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.to_entries())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_entries(&checkpoint::load(path)?)
    }

    /// The attribute space, given an explicit one when the encoding was not stored.
    pub fn space(&self, fallback: Option<&AttributeSpace>) -> Result<AttributeSpace> {
        match (&self.encoding, fallback) {
            (Some(e), _) => AttributeSpace::new(self.n_colors, self.n_shapes, e.clone()),
            (None, Some(s)) => Ok(s.clone()),
            (None, None) => Err(Error::Config("checkpoint used an embedding file; pass the config that names it".into())),
        }
    }
}

#[cfg(test)]
pub(crate) fn tiny_config(max_epochs: usize) -> GameConfig {
    GameConfig {
        dims: AgentDims { hidden: 24, embed: 6, ..AgentDims::default() },
        max_epochs,
        ..GameConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip_per_regime() {
        for regime in Regime::ALL {
            let mut cfg = GameConfig { pretrain_threshold: 0.0, ..tiny_config(2) }.with_seed(u64::MAX - 5);
            cfg.space.encoding = Encoding::EntangledProjection { dim: 12, seed: 1 << 40 };
            let trained = run_regime::<f64>(regime, &cfg).unwrap();
            let obs_dim = cfg.space.obs_dim().unwrap();
            let ck = Checkpoint::from_trained(&trained, &cfg, obs_dim);
            let back = Checkpoint::<f64>::from_entries(&ck.to_entries()).unwrap();
            assert_eq!(back.regime, regime);
            assert_eq!(back.seed, cfg.seed);
            assert_eq!(back.space(None).unwrap(), cfg.space);
            assert_eq!(back.dims, cfg.dims);
            let p = extract_protocol(&*back.agents.speaker().unwrap(), &cfg.space).unwrap();
            assert_eq!(p.entries().map(|(_, m)| m.clone()).collect::<Vec<_>>(),
                trained.protocol.entries().map(|(_, m)| m.clone()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn embedding_checkpoints_need_an_explicit_space() {
        let cfg = tiny_config(1);
        let trained = run_regime::<f64>(Regime::Random, &cfg).unwrap();
        let mut ck = Checkpoint::from_trained(&trained, &cfg, 10);
        ck.encoding = None;
        let back = Checkpoint::<f64>::from_entries(&ck.to_entries()).unwrap();
        assert!(matches!(back.space(None), Err(Error::Config(_))));
        assert_eq!(back.space(Some(&cfg.space)).unwrap(), cfg.space);
    }

    #[test]
    fn random_regime_never_steps() {
        let t = run_regime::<f64>(Regime::Random, &tiny_config(5)).unwrap();
        assert_eq!(t.agents.max_step(), 0);
        assert_eq!(t.record.epochs, 0);
        assert!(t.record.loss_trace.is_empty());
    }
}
