//! Protocol grids with the held-out cells marked.

use std::collections::BTreeSet;

use crate::agents::Message;
use crate::error::{Error, Result};
use crate::protocol::TrainedProtocol;
use crate::world::AttributeSpace;

const COLORS: [&str; 5] = ["blue", "cyan", "gray", "green", "magenta"];
const SHAPES: [&str; 5] = ["box", "sphere", "cylinder", "torus", "ellipsoid"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Text,
}

fn labels(n_colors: usize, n_shapes: usize) -> (Vec<String>, Vec<String>) {
    if n_colors == 5 && n_shapes == 5 {
        (COLORS.map(String::from).to_vec(), SHAPES.map(String::from).to_vec())
    } else {
        ((0..n_colors).map(|i| format!("c{i}")).collect(), (0..n_shapes).map(|i| format!("s{i}")).collect())
    }
}

/// Renders the grid. Held-out cells are prefixed with `*` in CSV and wrapped
/// in brackets in the aligned text form.
pub fn render_protocol_table(protocol: &TrainedProtocol, space: &AttributeSpace, format: TableFormat) -> String {
    let (colors, shapes) = labels(protocol.n_colors(), protocol.n_shapes());
    let cell = |c: usize, s: usize| -> String {
        let m = protocol.get(c, s).to_string();
        match (format, space.is_held_out(c, s)) {
            (TableFormat::Csv, true) => format!("*{m}"),
            (TableFormat::Text, true) => format!("[{m}]"),
            (_, false) => m,
        }
    };
    let mut rows: Vec<Vec<String>> = vec![std::iter::once(String::new()).chain(shapes).collect()];
    for (c, name) in colors.into_iter().enumerate() {
        rows.push(std::iter::once(name).chain((0..protocol.n_shapes()).map(|s| cell(c, s))).collect());
    }
    match format {
        TableFormat::Csv => rows.iter().map(|r| r.join(",") + "\n").collect(),
        TableFormat::Text => {
            let width = rows.iter().flatten().map(String::len).max().unwrap_or(0);
            rows.iter()
                .map(|r| {
                    let line: Vec<String> = r.iter().map(|c| format!("{c:>width$}")).collect();
                    line.join("  ").trim_end().to_string() + "\n"
                })
                .collect()
        }
    }
}

/// Parses the CSV rendering back into a protocol and its marked cells.
pub fn parse_protocol_table(csv: &str) -> Result<(TrainedProtocol, BTreeSet<(usize, usize)>)> {
    let bad = |m: &str| Error::Domain(format!("protocol table: {m}"));
    let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty"))?;
    let n_shapes = header.split(',').count() - 1;
    let mut table = Vec::new();
    let mut held_out = BTreeSet::new();
    let mut n_colors = 0;
    for (c, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').skip(1).collect();
        if cells.len() != n_shapes {
            return Err(bad("ragged row"));
        }
        for (s, cell) in cells.into_iter().enumerate() {
            let cell = match cell.strip_prefix('*') {
                Some(rest) => {
                    held_out.insert((c, s));
                    rest
                }
                None => cell,
            };
            let syms = cell
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| bad("bad symbol")))
                .collect::<Result<Vec<_>>>()?;
            table.push(Message(syms));
        }
        n_colors += 1;
    }
    Ok((TrainedProtocol::new(n_colors, n_shapes, table)?, held_out))
}
