use serde::{Deserialize, Serialize};

use crate::agents::{Message, ReceiverAgent, SenderAgent};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::world::{DatasetSplit, ObjectInstance};

/// Anything that deterministically names an object.
pub trait Speaker {
    fn speak(&self, object: &ObjectInstance) -> Result<Message>;
}

/// Anything that decodes a message into a (color, shape) guess.
pub trait Listener {
    fn listen(&self, message: &Message) -> Result<(usize, usize)>;
}

impl<T: Scalar> Speaker for SenderAgent<T> {
    fn speak(&self, object: &ObjectInstance) -> Result<Message> {
        self.forward_eval(&object.observation)
    }
}

impl<T: Scalar> Listener for ReceiverAgent<T> {
    fn listen(&self, message: &Message) -> Result<(usize, usize)> {
        Ok(self.log_probs(message)?.predict())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    /// Fraction with color and shape both right.
    pub both: f64,
    pub color: f64,
    pub shape: f64,
}

impl Accuracy {
    /// Mean of the per-attribute accuracies.
    pub fn avg(&self) -> f64 {
        0.5 * (self.color + self.shape)
    }
}

pub fn accuracy<S, L>(speaker: &S, listener: &L, objects: &[ObjectInstance]) -> Result<Accuracy>
where
    S: Speaker + ?Sized,
    L: Listener + ?Sized,
{
    if objects.is_empty() {
        return Ok(Accuracy::default());
    }
    let (mut both, mut color, mut shape) = (0usize, 0usize, 0usize);
    for o in objects {
        let (c, s) = listener.listen(&speaker.speak(o)?)?;
        color += usize::from(c == o.color);
        shape += usize::from(s == o.shape);
        both += usize::from(c == o.color && s == o.shape);
    }
    let n = objects.len() as f64;
    Ok(Accuracy { both: both as f64 / n, color: color as f64 / n, shape: shape as f64 / n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroShot {
    pub train: Accuracy,
    pub test: Accuracy,
}

impl ZeroShot {
    pub fn train_both(&self) -> f64 {
        self.train.both
    }

    pub fn test_both(&self) -> f64 {
        self.test.both
    }

    pub fn test_avg(&self) -> f64 {
        self.test.avg()
    }
}

/// Accuracies of the deterministic speaker/listener pair on seen and held-out pairs.
pub fn zero_shot_eval<S, L>(speaker: &S, listener: &L, split: &DatasetSplit) -> Result<ZeroShot>
where
    S: Speaker + ?Sized,
    L: Listener + ?Sized,
{
    Ok(ZeroShot {
        train: accuracy(speaker, listener, &split.train)?,
        test: accuracy(speaker, listener, &split.test)?,
    })
}
