//! Disentangled pre-training of a shared receiver, and the runs built on the
//! naming phase: baseline, template transfer and the untrained reference.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{one_hot, AgentDims, ReceiverAgent, RelaxedMessage, SenderAgent};
use crate::error::{domain_err, Error, Result};
use crate::games::config::{GameConfig, Regime};
use crate::games::naming::{check_finite, epoch_batches, finish_record, naming_phase, World};
use crate::games::record::{decimate, EpochStat, RunRecord, MAX_TRACE_POINTS};
use crate::games::{Agents, Trained};
use crate::nn::{adam_step, AdamConfig, NodeId, Tape};
use crate::protocol::TrainedProtocol;
use crate::scalar::Scalar;
use crate::world::ObjectInstance;

/// Which sub-game a pre-training sender plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadRole {
    /// Symbol first, padding second.
    ColorSender,
    /// Padding first, symbol second.
    ShapeSender,
}

/// Extends a one-symbol relaxed message to length 2 with a uniformly drawn
/// hard one-hot that carries no gradient.
pub fn pad_pretrain_message<T: Scalar, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    message: &RelaxedMessage,
    role: PadRole,
    vocab: usize,
    rng: &mut R,
) -> Result<RelaxedMessage> {
    let [sym] = message.0[..] else {
        return Err(domain_err(format!("padding expects one symbol, got {}", message.0.len())));
    };
    let pad = tape.input(one_hot(vocab, rng.random_range(0..vocab)));
    Ok(RelaxedMessage(match role {
        PadRole::ColorSender => vec![sym, pad],
        PadRole::ShapeSender => vec![pad, sym],
    }))
}

/// The two marginal losses on one batch, as separate tape nodes.
pub fn pretrain_losses<T: Scalar, R: Rng + ?Sized>(
    color_sender: &SenderAgent<T>,
    shape_sender: &SenderAgent<T>,
    receiver: &ReceiverAgent<T>,
    batch: &[&ObjectInstance],
    rng: &mut R,
    tape: &mut Tape<T>,
) -> Result<(NodeId, NodeId)> {
    if batch.is_empty() {
        return Err(domain_err("empty batch"));
    }
    let vocab = receiver.dims().vocab;
    let (mut l1, mut l2) = (Vec::new(), Vec::new());
    for o in batch {
        let m1 = color_sender.forward_train(tape, &o.observation, rng)?;
        let m1 = pad_pretrain_message(tape, &m1, PadRole::ColorSender, vocab, rng)?;
        let (lc, _) = receiver.forward(tape, &m1.0)?;
        l1.push(tape.select(lc, o.color)?);

        let m2 = shape_sender.forward_train(tape, &o.observation, rng)?;
        let m2 = pad_pretrain_message(tape, &m2, PadRole::ShapeSender, vocab, rng)?;
        let (_, ls) = receiver.forward(tape, &m2.0)?;
        l2.push(tape.select(ls, o.shape)?);
    }
    let k = T::lit(-1.0 / batch.len() as f64);
    Ok((tape.sum_scaled(l1, k)?, tape.sum_scaled(l2, k)?))
}

/// (color accuracy, shape accuracy) of the sub-games, with every possible
/// padding symbol tried for every object.
pub fn pretrain_accuracy<T: Scalar>(
    color_sender: &SenderAgent<T>,
    shape_sender: &SenderAgent<T>,
    receiver: &ReceiverAgent<T>,
    objects: &[ObjectInstance],
) -> Result<(f64, f64)> {
    let vocab = receiver.dims().vocab;
    // lexicographic: message [a, b] sits at a * vocab + b
    let table = receiver.log_probs_all(2)?;
    let (mut color, mut shape) = (0usize, 0usize);
    for o in objects {
        let c = color_sender.forward_eval(&o.observation)?.0[0];
        let s = shape_sender.forward_eval(&o.observation)?.0[0];
        for pad in 0..vocab {
            color += usize::from(table[c * vocab + pad].predict().0 == o.color);
            shape += usize::from(table[pad * vocab + s].predict().1 == o.shape);
        }
    }
    let n = (objects.len() * vocab).max(1) as f64;
    Ok((color as f64 / n, shape as f64 / n))
}

/// Pre-trains `receiver` in place. On timeout the error carries the trace.
pub(crate) fn pretrain_into<T: Scalar, R: Rng + ?Sized>(
    receiver: &mut ReceiverAgent<T>,
    cfg: &GameConfig,
    world: &World,
    rng: &mut R,
) -> Result<Vec<EpochStat>> {
    let dims = AgentDims { msg_len: 1, ..cfg.dims };
    let mut s1 = SenderAgent::<T>::new(world.obs_dim, dims, rng)?;
    let mut s2 = SenderAgent::<T>::new(world.obs_dim, dims, rng)?;
    let opt = AdamConfig::with_lr(cfg.lr.pretrain_all);
    let train = &world.split.train;
    let mut history = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let mut total = 0.0;
        let batches = epoch_batches(train, cfg.batch_size, rng);
        for batch in &batches {
            let mut tape = Tape::new();
            let (l1, l2) = pretrain_losses(&s1, &s2, receiver, batch, rng, &mut tape)?;
            let loss = tape.add(l1, l2)?;
            check_finite(tape.scalar(loss))?;
            total += tape.scalar(loss).as_f64();
            tape.backward(loss, &mut [s1.params_mut(), s2.params_mut(), receiver.params_mut()])?;
            adam_step(s1.params_mut(), opt);
            adam_step(s2.params_mut(), opt);
            adam_step(receiver.params_mut(), opt);
        }
        let (ac, as_) = pretrain_accuracy(&s1, &s2, receiver, train)?;
        history.push(EpochStat { epoch, loss: total / batches.len() as f64, train_acc_both: ac.min(as_) });
        if ac >= cfg.pretrain_threshold && as_ >= cfg.pretrain_threshold {
            return Ok(history);
        }
    }
    Err(Error::PretrainTimeout { epochs: cfg.max_epochs, record: Box::new(pretrain_record(cfg, history)) })
}

fn pretrain_record(cfg: &GameConfig, history: Vec<EpochStat>) -> RunRecord {
    let mut record = RunRecord::new(Regime::TemplateTransfer, cfg.seed, cfg.hash());
    record.epochs = history.len();
    record.final_train_acc_both = history.last().map_or(0.0, |h| h.train_acc_both);
    let losses: Vec<f64> = history.iter().map(|h| h.loss).collect();
    record.loss_trace = decimate(&losses, MAX_TRACE_POINTS);
    record.history = history;
    record
}

/// Pre-trains a fresh receiver on the color-only and shape-only games.
/// `final_train_acc_both` of the record holds the lower of the two sub-game
/// accuracies.
pub fn pretrain_disentangled<T: Scalar>(cfg: &GameConfig) -> Result<(ReceiverAgent<T>, RunRecord)> {
    cfg.validate()?;
    let started = Instant::now();
    let world = World::new(&cfg.space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut receiver = ReceiverAgent::new(cfg.space.n_colors, cfg.space.n_shapes, cfg.dims, &mut rng)?;
    let history = pretrain_into(&mut receiver, cfg, &world, &mut rng)?;
    let mut record = pretrain_record(cfg, history);
    record.wall_ms = started.elapsed().as_millis() as u64;
    Ok((receiver, record))
}

/// State at the start of the naming phase of a baseline or transfer run.
pub(crate) struct TransferStart<T> {
    pub sender: SenderAgent<T>,
    pub receiver: ReceiverAgent<T>,
    rng: ChaCha8Rng,
    world: World,
    record: RunRecord,
    started: Instant,
}

/// A receiver and then a sender are drawn from the run's stream; the receiver
/// is optionally pre-trained in between.
pub(crate) fn prepare_transfer<T: Scalar>(cfg: &GameConfig, pretrain: bool, regime: Regime) -> Result<TransferStart<T>> {
    cfg.validate()?;
    if pretrain && cfg.dims.msg_len != 2 {
        return Err(Error::Config(format!("template transfer needs msg_len 2, got {}", cfg.dims.msg_len)));
    }
    let started = Instant::now();
    let world = World::new(&cfg.space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut receiver = ReceiverAgent::new(cfg.space.n_colors, cfg.space.n_shapes, cfg.dims, &mut rng)?;
    let mut record = RunRecord::new(regime, cfg.seed, cfg.hash());
    if pretrain {
        record.pretrain_epochs = pretrain_into(&mut receiver, cfg, &world, &mut rng)?.len();
    }
    let sender = SenderAgent::new(world.obs_dim, cfg.dims, &mut rng)?;
    Ok(TransferStart { sender, receiver, rng, world, record, started })
}

/// Plays the naming game from `start` and evaluates the result.
pub(crate) fn complete_transfer<T: Scalar>(
    start: TransferStart<T>,
    cfg: &GameConfig,
) -> Result<(SenderAgent<T>, ReceiverAgent<T>, RunRecord, TrainedProtocol)> {
    let TransferStart { mut sender, mut receiver, mut rng, world, mut record, started } = start;
    let history = naming_phase(&mut sender, &mut receiver, cfg, &world.split, &mut rng)?;
    let protocol = finish_record(&mut record, history, &sender, &receiver, cfg, &world.split, started)?;
    Ok((sender, receiver, record, protocol))
}

pub(crate) fn run_transfer<T: Scalar>(
    cfg: &GameConfig,
    pretrain: bool,
    regime: Regime,
) -> Result<(SenderAgent<T>, ReceiverAgent<T>, RunRecord, TrainedProtocol)> {
    complete_transfer(prepare_transfer(cfg, pretrain, regime)?, cfg)
}

/// Sender and receiver trained jointly from scratch.
pub fn train_baseline<T: Scalar>(cfg: &GameConfig) -> Result<(SenderAgent<T>, ReceiverAgent<T>, RunRecord)> {
    let (s, r, rec, _) = run_transfer(cfg, false, Regime::Baseline)?;
    Ok((s, r, rec))
}

/// Pre-training followed by the naming game with a fresh sender and the
/// transferred receiver.
pub fn run_template_transfer<T: Scalar>(
    cfg: &GameConfig,
) -> Result<(SenderAgent<T>, ReceiverAgent<T>, RunRecord)> {
    let (s, r, rec, _) = run_transfer(cfg, true, Regime::TemplateTransfer)?;
    Ok((s, r, rec))
}

/// Untrained agents, drawn as in the baseline, evaluated only.
pub(crate) fn run_random<T: Scalar>(cfg: &GameConfig) -> Result<Trained<T>> {
    cfg.validate()?;
    let started = Instant::now();
    let world = World::new(&cfg.space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let receiver = ReceiverAgent::new(cfg.space.n_colors, cfg.space.n_shapes, cfg.dims, &mut rng)?;
    let sender = SenderAgent::new(world.obs_dim, cfg.dims, &mut rng)?;
    let mut record = RunRecord::new(Regime::Random, cfg.seed, cfg.hash());
    let protocol = finish_record(&mut record, Vec::new(), &sender, &receiver, cfg, &world.split, started)?;
    Ok(Trained { agents: Agents::Pair { sender, receiver }, record, protocol })
}
