use crate::error::Result;
use crate::metrics::levenshtein::levenshtein;
use crate::metrics::spearman::{spearman_rho, Spearman};
use crate::protocol::TrainedProtocol;

/// Attribute-space and message-space distances for every unordered object pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistances {
    pub targets: Vec<usize>,
    pub messages: Vec<usize>,
}

impl PairDistances {
    pub fn from_protocol(protocol: &TrainedProtocol) -> Self {
        let entries: Vec<_> = protocol.entries().collect();
        let n = entries.len();
        let mut targets = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        let mut messages = Vec::with_capacity(targets.capacity());
        for i in 0..n {
            for j in i + 1..n {
                let ((c1, s1), m1) = entries[i];
                let ((c2, s2), m2) = entries[j];
                targets.push(levenshtein(&[c1, s1], &[c2, s2]));
                messages.push(levenshtein(m1.symbols(), m2.symbols()));
            }
        }
        Self { targets, messages }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Spearman correlation between attribute and message edit distances.
pub fn topographic_similarity(protocol: &TrainedProtocol) -> Result<Spearman<f64>> {
    let d = PairDistances::from_protocol(protocol);
    let t: Vec<f64> = d.targets.iter().map(|&v| v as f64).collect();
    let m: Vec<f64> = d.messages.iter().map(|&v| v as f64).collect();
    spearman_rho(&t, &m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Message;

    #[test]
    fn compositional_protocol_is_perfect() {
        let p = TrainedProtocol::from_fn(5, 5, |c, s| Message(vec![c, 5 + s])).unwrap();
        let d = PairDistances::from_protocol(&p);
        assert_eq!(d.len(), 300);
        assert_eq!(d.targets, d.messages);
        let t = topographic_similarity(&p).unwrap();
        assert!((t.rho - 1.0).abs() < 1e-12);
        assert!(!t.degenerate);
    }

    #[test]
    fn constant_protocol_is_degenerate() {
        let p = TrainedProtocol::from_fn(5, 5, |_, _| Message(vec![0, 0])).unwrap();
        let t = topographic_similarity(&p).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.rho, 0.0);
    }

    #[test]
    fn target_distances_take_three_values() {
        let p = TrainedProtocol::from_fn(3, 3, |c, s| Message(vec![c, s])).unwrap();
        let d = PairDistances::from_protocol(&p);
        assert_eq!(d.len(), 36);
        assert!(d.targets.iter().all(|&v| (1..=2).contains(&v)));
    }
}
