//! The object naming game: loss, the joint training phase shared by the
//! baseline and the transfer phase, and run bookkeeping.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::agents::{ReceiverAgent, SenderAgent};
use crate::error::{domain_err, Error, Result};
use crate::games::config::GameConfig;
use crate::games::record::{decimate, EpochStat, RunRecord, MAX_TRACE_POINTS};
use crate::metrics::{accuracy, context_independence, topographic_similarity, zero_shot_eval, Listener, Speaker};
use crate::nn::{adam_step, AdamConfig, NodeId, Tape};
use crate::protocol::{Provenance, TrainedProtocol};
use crate::scalar::Scalar;
use crate::world::{build_dataset, diagonal_split, AttributeSpace, DatasetSplit, ObjectInstance};

/// The train split shuffled with `rng` and cut into batches; the last batch
/// may be short.
pub fn epoch_batches<'a, R: Rng + ?Sized>(
    train: &'a [ObjectInstance],
    batch_size: usize,
    rng: &mut R,
) -> Vec<Vec<&'a ObjectInstance>> {
    let mut order: Vec<&ObjectInstance> = train.iter().collect();
    order.shuffle(rng);
    order.chunks(batch_size.max(1)).map(<[_]>::to_vec).collect()
}

/// Mean over the batch of `-(log r(color | m) + log r(shape | m))` for one
/// relaxed message sampled per object.
pub fn naming_game_loss<T: Scalar, R: Rng + ?Sized>(
    sender: &SenderAgent<T>,
    receiver: &ReceiverAgent<T>,
    batch: &[&ObjectInstance],
    rng: &mut R,
    tape: &mut Tape<T>,
) -> Result<NodeId> {
    if batch.is_empty() {
        return Err(domain_err("empty batch"));
    }
    let mut terms = Vec::with_capacity(2 * batch.len());
    for o in batch {
        let msg = sender.forward_train(tape, &o.observation, rng)?;
        let (lc, ls) = receiver.forward(tape, &msg.0)?;
        terms.push(tape.select(lc, o.color)?);
        terms.push(tape.select(ls, o.shape)?);
    }
    let loss = tape.sum_scaled(terms, T::lit(-1.0 / batch.len() as f64))?;
    check_finite(tape.scalar(loss))?;
    Ok(loss)
}

pub(crate) fn check_finite<T: Scalar>(loss: T) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerics(format!("training loss became {loss}")))
    }
}

/// Shared setup of every regime: the dataset and its diagonal split.
pub(crate) struct World {
    pub split: DatasetSplit,
    pub obs_dim: usize,
}

impl World {
    pub fn new(space: &AttributeSpace) -> Result<Self> {
        let data = build_dataset(space)?;
        let obs_dim = data.first().map_or(0, |o| o.observation.len());
        Ok(Self { split: diagonal_split(&data, space), obs_dim })
    }
}

/// Trains sender and receiver jointly on the train split until the train
/// both-accuracy reaches the target or the epoch budget runs out.
pub(crate) fn naming_phase<T: Scalar, R: Rng + ?Sized>(
    sender: &mut SenderAgent<T>,
    receiver: &mut ReceiverAgent<T>,
    cfg: &GameConfig,
    split: &DatasetSplit,
    rng: &mut R,
) -> Result<Vec<EpochStat>> {
    let (s_opt, r_opt) = (AdamConfig::with_lr(cfg.lr.sender_phase2), AdamConfig::with_lr(cfg.lr.receiver_phase2));
    let mut history = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let mut total = 0.0;
        let batches = epoch_batches(&split.train, cfg.batch_size, rng);
        for batch in &batches {
            let mut tape = Tape::new();
            let loss = naming_game_loss(sender, receiver, batch, rng, &mut tape)?;
            total += tape.scalar(loss).as_f64();
            tape.backward(loss, &mut [sender.params_mut(), receiver.params_mut()])?;
            adam_step(sender.params_mut(), s_opt);
            adam_step(receiver.params_mut(), r_opt);
        }
        let acc = accuracy(&*sender, &*receiver, &split.train)?.both;
        history.push(EpochStat { epoch, loss: total / batches.len() as f64, train_acc_both: acc });
        if acc >= cfg.target_accuracy {
            break;
        }
    }
    Ok(history)
}

/// The deterministic table a speaker produces over every object.
pub fn extract_protocol<S: Speaker + ?Sized>(speaker: &S, space: &AttributeSpace) -> Result<TrainedProtocol> {
    let data = build_dataset(space)?;
    let table = data.iter().map(|o| speaker.speak(o)).collect::<Result<Vec<_>>>()?;
    TrainedProtocol::new(space.n_colors, space.n_shapes, table)
}

/// Fills the evaluation fields of `record` and returns the extracted protocol.
pub(crate) fn finish_record<S: Speaker + ?Sized, L: Listener + ?Sized>(
    record: &mut RunRecord,
    history: Vec<EpochStat>,
    speaker: &S,
    listener: &L,
    cfg: &GameConfig,
    split: &DatasetSplit,
    started: Instant,
) -> Result<TrainedProtocol> {
    let z = zero_shot_eval(speaker, listener, split)?;
    let mut protocol = extract_protocol(speaker, &cfg.space)?;
    protocol.provenance = Some(Provenance {
        regime: record.regime.to_string(),
        seed: record.seed,
        config_hash: record.config_hash.clone(),
    });
    let topo = topographic_similarity(&protocol)?;
    record.epochs = history.len();
    record.final_train_acc_both = z.train_both();
    record.final_test_acc_both = z.test_both();
    record.final_test_acc_avg = z.test_avg();
    record.ci = context_independence(&protocol);
    record.topo = topo.rho;
    record.topo_degenerate = topo.degenerate;
    let losses: Vec<f64> = history.iter().map(|h| h.loss).collect();
    record.loss_trace = decimate(&losses, MAX_TRACE_POINTS);
    record.history = history;
    record.wall_ms = started.elapsed().as_millis() as u64;
    Ok(protocol)
}
