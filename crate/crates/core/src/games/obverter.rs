//! Obverter: each agent speaks by searching for the message its own
//! receiver pathway decodes best.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{JointLogProbs, Message, ReceiverAgent};
use crate::error::{domain_err, Result};
use crate::games::config::{GameConfig, Regime};
use crate::games::naming::{check_finite, epoch_batches, finish_record, World};
use crate::games::record::{EpochStat, RunRecord};
use crate::games::{Agents, Trained};
use crate::metrics::{accuracy, Speaker};
use crate::nn::{adam_step, AdamConfig, Tape};
use crate::scalar::Scalar;
use crate::world::ObjectInstance;

pub const MAX_ENUMERATED: usize = 1_000_000;

/// Every message of length `len` in lexicographic order.
pub fn enumerate_messages(vocab: usize, len: usize) -> Result<Vec<Message>> {
    let count = u32::try_from(len)
        .ok()
        .and_then(|l| vocab.checked_pow(l))
        .filter(|&n| n <= MAX_ENUMERATED)
        .ok_or_else(|| domain_err(format!("{vocab}^{len} messages exceeds {MAX_ENUMERATED}")))?;
    Ok((0..count)
        .map(|mut i| {
            let mut syms = vec![0; len];
            for slot in syms.iter_mut().rev() {
                *slot = i % vocab;
                i /= vocab;
            }
            Message(syms)
        })
        .collect())
}

/// `-log r(color | m) - log r(shape | m)` under the agent's receiver pathway.
pub fn evaluate_message<T: Scalar>(agent: &ReceiverAgent<T>, message: &Message, labels: (usize, usize)) -> Result<f64> {
    Ok(agent.log_probs(message)?.nll(labels.0, labels.1)?.as_f64())
}

/// An agent in the speaking role: all candidate messages are decoded once,
/// then each object gets the first message with the lowest loss for its labels.
pub struct ObverterSpeaker {
    table: Vec<(Message, JointLogProbs<f64>)>,
}

impl ObverterSpeaker {
    pub fn new<T: Scalar>(agent: &ReceiverAgent<T>, msg_len: usize) -> Result<Self> {
        let messages = enumerate_messages(agent.dims().vocab, msg_len)?;
        let lps = agent.log_probs_all(msg_len)?;
        let table = messages
            .into_iter()
            .zip(lps)
            .map(|(m, lp)| {
                let cast = |v: Vec<T>| v.into_iter().map(Scalar::as_f64).collect();
                (m, JointLogProbs { color: cast(lp.color), shape: cast(lp.shape) })
            })
            .collect();
        Ok(Self { table })
    }

    pub fn choose(&self, labels: (usize, usize)) -> Result<&Message> {
        let mut best: Option<(f64, &Message)> = None;
        for (m, lp) in &self.table {
            let loss = lp.nll(labels.0, labels.1)?;
            if best.is_none_or(|(b, _)| loss < b) {
                best = Some((loss, m));
            }
        }
        best.map(|(_, m)| m).ok_or_else(|| domain_err("no candidate messages"))
    }
}

impl Speaker for ObverterSpeaker {
    fn speak(&self, object: &ObjectInstance) -> Result<Message> {
        self.choose((object.color, object.shape)).cloned()
    }
}

/// Index (0 or 1) of the agent that speaks for the next batch.
pub fn assign_roles<R: Rng + ?Sized>(rng: &mut R) -> usize {
    usize::from(rng.random_bool(0.5))
}

/// Two agents alternate roles at random per batch; only the listener learns.
/// Accuracy and the protocol are read with the first agent speaking to the
/// second.
pub fn train_obverter<T: Scalar>(cfg: &GameConfig) -> Result<(ReceiverAgent<T>, ReceiverAgent<T>, RunRecord)> {
    match run_obverter(cfg)? {
        Trained { agents: Agents::Obverter { first, second }, record, .. } => Ok((first, second, record)),
        Trained { agents: Agents::Pair { .. }, .. } => unreachable!("obverter run returns two agents"),
    }
}

pub(crate) fn run_obverter<T: Scalar>(cfg: &GameConfig) -> Result<Trained<T>> {
    cfg.validate()?;
    let started = Instant::now();
    let world = World::new(&cfg.space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (nc, ns, dims) = (cfg.space.n_colors, cfg.space.n_shapes, cfg.dims);
    let mut agents = [ReceiverAgent::new(nc, ns, dims, &mut rng)?, ReceiverAgent::new(nc, ns, dims, &mut rng)?];
    let opt = AdamConfig::with_lr(cfg.lr.obverter_receiver);
    let mut history = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let mut total = 0.0;
        let batches = epoch_batches(&world.split.train, cfg.batch_size, &mut rng);
        for batch in &batches {
            let speaker_ix = assign_roles(&mut rng);
            let speaker = ObverterSpeaker::new(&agents[speaker_ix], dims.msg_len)?;
            let listener = &mut agents[1 - speaker_ix];
            let mut tape = Tape::new();
            let mut terms = Vec::with_capacity(2 * batch.len());
            for o in batch {
                let (lc, ls) = listener.forward_hard(&mut tape, speaker.choose((o.color, o.shape))?)?;
                terms.push(tape.select(lc, o.color)?);
                terms.push(tape.select(ls, o.shape)?);
            }
            let loss = tape.sum_scaled(terms, T::lit(-1.0 / batch.len() as f64))?;
            check_finite(tape.scalar(loss))?;
            total += tape.scalar(loss).as_f64();
            tape.backward(loss, &mut [listener.params_mut()])?;
            adam_step(listener.params_mut(), opt);
        }
        let acc = accuracy(&ObverterSpeaker::new(&agents[0], dims.msg_len)?, &agents[1], &world.split.train)?.both;
        history.push(EpochStat { epoch, loss: total / batches.len() as f64, train_acc_both: acc });
        if acc >= cfg.target_accuracy {
            break;
        }
    }
    let [first, second] = agents;
    let speaker = ObverterSpeaker::new(&first, dims.msg_len)?;
    let mut record = RunRecord::new(Regime::Obverter, cfg.seed, cfg.hash());
    let protocol = finish_record(&mut record, history, &speaker, &second, cfg, &world.split, started)?;
    Ok(Trained { agents: Agents::Obverter { first, second }, record, protocol })
}
