//! Compositionality measures over protocol tables, plus the zero-shot
//! accuracy split and the statistics they are built from.

pub mod accuracy;
pub mod ci;
pub mod levenshtein;
pub mod spearman;
pub mod table;
pub mod topo;

pub use accuracy::{accuracy, zero_shot_eval, Accuracy, Listener, Speaker, ZeroShot};
pub use ci::{context_independence, ConceptStats};
pub use levenshtein::levenshtein;
pub use spearman::{average_ranks, spearman_rho, Spearman};
pub use table::{parse_protocol_table, render_protocol_table, TableFormat};
pub use topo::{topographic_similarity, PairDistances};
