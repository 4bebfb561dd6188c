//! The game world: colored shapes, their observation encodings, and the
//! held-out diagonal used for zero-shot evaluation.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an object is presented to the sender.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Encoding {
    /// Concatenated one-hot color and one-hot shape.
    OneHotDisentangled,
    /// A fixed seeded Gaussian projection of the one-hot pair.
    EntangledProjection { dim: usize, seed: u64 },
    /// Vectors read from a comma-separated file, one row per (color, shape).
    PrecomputedEmbedding { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeSpace {
    pub n_colors: usize,
    pub n_shapes: usize,
    pub encoding: Encoding,
}

impl AttributeSpace {
    pub fn new(n_colors: usize, n_shapes: usize, encoding: Encoding) -> Result<Self> {
        let space = Self { n_colors, n_shapes, encoding };
        space.validate()?;
        Ok(space)
    }

    /// Five colors, five shapes, one-hot observations.
    pub fn reference() -> Self {
        Self { n_colors: 5, n_shapes: 5, encoding: Encoding::OneHotDisentangled }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_colors < 2 || self.n_shapes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 colors and 2 shapes, got {}x{}",
                self.n_colors, self.n_shapes
            )));
        }
        if let Encoding::EntangledProjection { dim, .. } = self.encoding {
            if dim < 2 {
                return Err(Error::Config(format!("entangled projection dim must be >= 2, got {dim}")));
            }
        }
        Ok(())
    }

    pub fn n_objects(&self) -> usize {
        self.n_colors * self.n_shapes
    }

    /// Number of color plus shape concepts.
    pub fn n_concepts(&self) -> usize {
        self.n_colors + self.n_shapes
    }

    /// Observation width. For precomputed embeddings this needs the file, so it
    /// is only known after [`build_dataset`].
    pub fn obs_dim(&self) -> Option<usize> {
        match &self.encoding {
            Encoding::OneHotDisentangled => Some(self.n_colors + self.n_shapes),
            Encoding::EntangledProjection { dim, .. } => Some(*dim),
            Encoding::PrecomputedEmbedding { .. } => None,
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_colors).flat_map(move |c| (0..self.n_shapes).map(move |s| (c, s)))
    }

    /// Whether (color, shape) is one of the held-out diagonal cells.
    pub fn is_held_out(&self, color: usize, shape: usize) -> bool {
        color < self.n_colors.min(self.n_shapes) && shape == color % self.n_shapes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub color: usize,
    pub shape: usize,
    pub observation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<ObjectInstance>,
    pub test: Vec<ObjectInstance>,
}

impl DatasetSplit {
    pub fn all(&self) -> impl Iterator<Item = &ObjectInstance> {
        self.train.iter().chain(self.test.iter())
    }
}

/// One instance per (color, shape), row-major by color.
pub fn build_dataset(space: &AttributeSpace) -> Result<Vec<ObjectInstance>> {
    space.validate()?;
    match &space.encoding {
        Encoding::OneHotDisentangled => Ok(space
            .pairs()
            .map(|(color, shape)| {
                let mut observation = vec![0.0; space.n_colors + space.n_shapes];
                observation[color] = 1.0;
                observation[space.n_colors + shape] = 1.0;
                ObjectInstance { color, shape, observation }
            })
            .collect()),
        Encoding::EntangledProjection { dim, seed } => Ok(space
            .pairs()
            .map(|(color, shape)| ObjectInstance {
                color,
                shape,
                observation: encode_entangled(color, shape, *dim, *seed),
            })
            .collect()),
        Encoding::PrecomputedEmbedding { path } => read_embeddings(path, space),
    }
}

const COLOR_STREAM: u64 = 1 << 32;
const SHAPE_STREAM: u64 = 2 << 32;

fn projection_column(stream: u64, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `P · onehot(color, shape)` for a seeded standard-normal matrix `P`.
///
/// Every column of `P` is drawn from its own ChaCha stream keyed by the
/// attribute kind and index, so the projection does not depend on how many
/// colors or shapes the space has.
pub fn encode_entangled(color: usize, shape: usize, dim: usize, seed: u64) -> Vec<f64> {
    debug_assert!(dim >= 2);
    let c = projection_column(COLOR_STREAM | color as u64, dim, seed);
    let s = projection_column(SHAPE_STREAM | shape as u64, dim, seed);
    c.iter().zip(&s).map(|(a, b)| a + b).collect()
}

/// Splits off the diagonal `(i, i mod n_shapes)` as the zero-shot test set.
pub fn diagonal_split(dataset: &[ObjectInstance], space: &AttributeSpace) -> DatasetSplit {
    let (test, train) = dataset
        .iter()
        .cloned()
        .partition(|o| space.is_held_out(o.color, o.shape));
    DatasetSplit { train, test }
}

fn ingest_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Ingest { path: path.to_path_buf(), reason: reason.into() }
}

fn parse_fields<T: std::str::FromStr>(path: &Path, line_no: usize, line: &str) -> Result<Vec<T>> {
    line.split(',')
        .map(|f| {
            f.trim()
                .parse::<T>()
                .map_err(|_| ingest_err(path, format!("line {line_no}: cannot parse {f:?}")))
        })
        .collect()
}

fn read_embeddings(path: &Path, space: &AttributeSpace) -> Result<Vec<ObjectInstance>> {
    let text = fs::read_to_string(path).map_err(|e| ingest_err(path, e.to_string()))?;
    parse_embeddings(&text, path, space)
}

pub(crate) fn parse_embeddings(
    text: &str,
    path: &Path,
    space: &AttributeSpace,
) -> Result<Vec<ObjectInstance>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| ingest_err(path, "empty file"))?;
    let header: Vec<usize> = parse_fields(path, 1, header)?;
    let [n_colors, n_shapes, dim] = header[..] else {
        return Err(ingest_err(path, "header must be n_colors,n_shapes,dim"));
    };
    if n_colors != space.n_colors || n_shapes != space.n_shapes {
        return Err(ingest_err(
            path,
            format!(
                "file describes {n_colors}x{n_shapes}, space is {}x{}",
                space.n_colors, space.n_shapes
            ),
        ));
    }
    if dim == 0 {
        return Err(ingest_err(path, "dim must be positive"));
    }

    let mut slots: Vec<Option<Vec<f64>>> = vec![None; space.n_objects()];
    let mut rows = 0;
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(ingest_err(
                path,
                format!("line {}: expected {} fields, got {}", i + 1, dim + 2, fields.len()),
            ));
        }
        let idx: Vec<usize> = parse_fields(path, i + 1, &fields[..2].join(","))?;
        let (color, shape) = (idx[0], idx[1]);
        if color >= n_colors || shape >= n_shapes {
            return Err(ingest_err(path, format!("line {}: ({color},{shape}) out of range", i + 1)));
        }
        let values: Vec<f64> = parse_fields(path, i + 1, &fields[2..].join(","))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ingest_err(path, format!("line {}: non-finite value", i + 1)));
        }
        let slot = &mut slots[color * n_shapes + shape];
        if slot.is_some() {
            return Err(ingest_err(path, format!("line {}: duplicate ({color},{shape})", i + 1)));
        }
        *slot = Some(values);
        rows += 1;
    }
    if rows != space.n_objects() {
        return Err(ingest_err(
            path,
            format!("expected {} rows, found {rows}", space.n_objects()),
        ));
    }
    Ok(space
        .pairs()
        .zip(slots)
        .map(|((color, shape), obs)| ObjectInstance {
            color,
            shape,
            observation: obs.expect("all slots filled"),
        })
        .collect())
}

/// Writes observations in the embedding ingestion format.
pub fn write_embeddings(dataset: &[ObjectInstance], space: &AttributeSpace) -> String {
    let dim = dataset.first().map_or(0, |o| o.observation.len());
    let mut out = format!("{},{},{}\n", space.n_colors, space.n_shapes, dim);
    for o in dataset {
        out.push_str(&format!("{},{}", o.color, o.shape));
        for v in &o.observation {
            out.push_str(&format!(",{v:?}"));
        }
        out.push('\n');
    }
    out
}

/// Checks the three split invariants: coverage, disjointness, and that every
/// held-out attribute still appears in training.
pub fn check_split(split: &DatasetSplit, space: &AttributeSpace) -> Result<()> {
    let train: HashSet<(usize, usize)> = split.train.iter().map(|o| (o.color, o.shape)).collect();
    let test: HashSet<(usize, usize)> = split.test.iter().map(|o| (o.color, o.shape)).collect();
    if train.len() != split.train.len() || test.len() != split.test.len() {
        return Err(Error::Domain("duplicate pair in split".into()));
    }
    if !train.is_disjoint(&test) {
        return Err(Error::Domain("train and test overlap".into()));
    }
    if train.len() + test.len() != space.n_objects() {
        return Err(Error::Domain("split does not cover the space".into()));
    }
    for &(c, s) in &test {
        if !train.iter().any(|&(tc, _)| tc == c) || !train.iter().any(|&(_, ts)| ts == s) {
            return Err(Error::Domain(format!("held-out ({c},{s}) has an unseen attribute")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn onehot(nc: usize, ns: usize) -> AttributeSpace {
        AttributeSpace::new(nc, ns, Encoding::OneHotDisentangled).unwrap()
    }

    #[test]
    fn reference_dataset_has_25_two_hot_observations() {
        let data = build_dataset(&AttributeSpace::reference()).unwrap();
        assert_eq!(data.len(), 25);
        for o in &data {
            assert_eq!(o.observation.len(), 10);
            assert_eq!(o.observation.iter().filter(|&&v| v == 1.0).count(), 2);
            assert_eq!(o.observation.iter().filter(|&&v| v == 0.0).count(), 8);
        }
        assert_eq!((data[7].color, data[7].shape), (1, 2));
    }

    #[test]
    fn two_by_two() {
        let space = onehot(2, 2);
        assert_eq!(build_dataset(&space).unwrap().len(), 4);
        let split = diagonal_split(&build_dataset(&space).unwrap(), &space);
        let test: Vec<_> = split.test.iter().map(|o| (o.color, o.shape)).collect();
        assert_eq!(test, vec![(0, 0), (1, 1)]);
        assert_eq!(split.train.len(), 2);
    }

    #[test]
    fn reference_split_is_the_diagonal() {
        let space = AttributeSpace::reference();
        let split = diagonal_split(&build_dataset(&space).unwrap(), &space);
        let test: Vec<_> = split.test.iter().map(|o| (o.color, o.shape)).collect();
        assert_eq!(test, vec![(0, 0), (1, 1), (2, 2), (3, 3), (4, 4)]);
        assert_eq!(split.train.len(), 20);
        check_split(&split, &space).unwrap();
    }

    #[test]
    fn non_square_split_keeps_attributes_in_train() {
        let space = onehot(3, 2);
        let split = diagonal_split(&build_dataset(&space).unwrap(), &space);
        let test: Vec<_> = split.test.iter().map(|o| (o.color, o.shape)).collect();
        assert_eq!(test, vec![(0, 0), (1, 1)]);
        assert_eq!(split.train.len(), 4);
        // enumerate: every color and shape of the space occurs in train
        for c in 0..3 {
            assert!(split.train.iter().any(|o| o.color == c));
        }
        for s in 0..2 {
            assert!(split.train.iter().any(|o| o.shape == s));
        }
        check_split(&split, &space).unwrap();
    }

    #[test]
    fn entangled_is_deterministic_and_separates_pairs() {
        let a = encode_entangled(3, 1, 16, 7);
        assert_eq!(a.len(), 16);
        assert_eq!(a, encode_entangled(3, 1, 16, 7));

        let space = AttributeSpace::new(5, 5, Encoding::EntangledProjection { dim: 16, seed: 7 }).unwrap();
        let d1 = build_dataset(&space).unwrap();
        let d2 = build_dataset(&space).unwrap();
        for (x, y) in d1.iter().zip(&d2) {
            let xb: Vec<u64> = x.observation.iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.observation.iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
        for i in 0..d1.len() {
            for j in i + 1..d1.len() {
                let linf = d1[i]
                    .observation
                    .iter()
                    .zip(&d1[j].observation)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(linf > 1e-9, "pairs {i} and {j} collide");
            }
        }
    }

    #[test]
    fn rejects_degenerate_spaces() {
        assert!(AttributeSpace::new(1, 5, Encoding::OneHotDisentangled).is_err());
        assert!(AttributeSpace::new(5, 5, Encoding::EntangledProjection { dim: 1, seed: 0 }).is_err());
    }

    #[test]
    fn embedding_file_round_trip_and_errors() {
        let space = onehot(2, 3);
        let data = build_dataset(&space).unwrap();
        let text = write_embeddings(&data, &space);
        let p = Path::new("mem.csv");
        assert_eq!(parse_embeddings(&text, p, &space).unwrap(), data);

        // drop one row
        let short: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_embeddings(&short, p, &space), Err(Error::Ingest { .. })));

        let bad_header = text.replacen("2,3,5", "3,3,5", 1);
        assert!(matches!(parse_embeddings(&bad_header, p, &space), Err(Error::Ingest { .. })));

        let missing = AttributeSpace {
            encoding: Encoding::PrecomputedEmbedding { path: "/nonexistent/emb.csv".into() },
            ..space
        };
        assert!(matches!(build_dataset(&missing), Err(Error::Ingest { .. })));
    }
}
