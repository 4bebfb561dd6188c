//! Protocol tables: the deterministic map (color, shape) → message, and their
//! text file format.
//!
//! ```text
//! n_colors,n_shapes,T
//! color,shape,sym_0,...,sym_{T-1}
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::Message;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub regime: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainedProtocol {
    n_colors: usize,
    n_shapes: usize,
    msg_len: usize,
    /// Row-major by color.
    table: Vec<Message>,
    pub provenance: Option<Provenance>,
}

impl TrainedProtocol {
    pub fn new(n_colors: usize, n_shapes: usize, table: Vec<Message>) -> Result<Self> {
        if table.len() != n_colors * n_shapes {
            return Err(Error::Domain(format!(
                "protocol has {} messages for a {n_colors}x{n_shapes} space",
                table.len()
            )));
        }
        let msg_len = table.first().map_or(0, Message::len);
        if msg_len == 0 || table.iter().any(|m| m.len() != msg_len) {
            return Err(Error::Domain("protocol messages must share a positive length".into()));
        }
        Ok(Self { n_colors, n_shapes, msg_len, table, provenance: None })
    }

    /// Builds a table from `f(color, shape)`.
    pub fn from_fn(n_colors: usize, n_shapes: usize, mut f: impl FnMut(usize, usize) -> Message) -> Result<Self> {
        let table = (0..n_colors)
            .flat_map(|c| (0..n_shapes).map(move |s| (c, s)))
            .map(|(c, s)| f(c, s))
            .collect();
        Self::new(n_colors, n_shapes, table)
    }

    pub fn n_colors(&self) -> usize {
        self.n_colors
    }

    pub fn n_shapes(&self) -> usize {
        self.n_shapes
    }

    pub fn msg_len(&self) -> usize {
        self.msg_len
    }

    pub fn get(&self, color: usize, shape: usize) -> &Message {
        &self.table[color * self.n_shapes + shape]
    }

    /// ((color, shape), message) in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), &Message)> {
        self.table
            .iter()
            .enumerate()
            .map(move |(i, m)| ((i / self.n_shapes, i % self.n_shapes), m))
    }

    pub fn to_file_string(&self) -> String {
        let mut out = format!("{},{},{}\n", self.n_colors, self.n_shapes, self.msg_len);
        for ((c, s), m) in self.entries() {
            out.push_str(&format!("{c},{s}"));
            for sym in m.symbols() {
                out.push_str(&format!(",{sym}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Domain(format!("protocol file: {msg}"));
        let parse_line = |no: usize, line: &str| -> Result<Vec<usize>> {
            line.split(',')
                .map(|f| f.trim().parse::<usize>().map_err(|_| bad(format!("line {no}: bad field {f:?}"))))
                .collect()
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad("empty".into()))?;
        let h = parse_line(1, header)?;
        let [n_colors, n_shapes, msg_len] = h[..] else {
            return Err(bad("header must be n_colors,n_shapes,T".into()));
        };
        if msg_len == 0 {
            return Err(bad("message length must be positive".into()));
        }
        let mut slots: Vec<Option<Message>> = vec![None; n_colors * n_shapes];
        for (i, line) in lines {
            let f = parse_line(i + 1, line)?;
            if f.len() != msg_len + 2 {
                return Err(bad(format!("line {}: expected {} fields", i + 1, msg_len + 2)));
            }
            let (c, s) = (f[0], f[1]);
            if c >= n_colors || s >= n_shapes {
                return Err(bad(format!("line {}: ({c},{s}) out of range", i + 1)));
            }
            let slot = &mut slots[c * n_shapes + s];
            if slot.is_some() {
                return Err(bad(format!("line {}: duplicate ({c},{s})", i + 1)));
            }
            *slot = Some(Message(f[2..].to_vec()));
        }
        let table = slots
            .into_iter()
            .enumerate()
            .map(|(i, m)| m.ok_or_else(|| bad(format!("missing ({},{})", i / n_shapes, i % n_shapes))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_colors, n_shapes, table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string())?;
        Ok(())
    }
}
