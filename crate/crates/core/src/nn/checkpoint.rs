//! Binary checkpoint format.
//!
//! ```text
//! b"SFCKPT1\0"
//! u32 entry count
//! per entry: u32 name length, UTF-8 name, u32 rank, rank x u32 dims,
//!            product(dims) x f64 values (row-major)
//! ```
//! All integers and doubles are little-endian. Optimizer state is not stored.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::params::{ParamStore, Shape};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"SFCKPT1\0";

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl Entry {
    pub fn scalar(name: impl Into<String>, v: f64) -> Self {
        Self { name: name.into(), dims: vec![], values: vec![v] }
    }

    pub fn shape(&self) -> Result<Shape> {
        match self.dims[..] {
            [n] => Ok(Shape::Vector(n)),
            [r, c] => Ok(Shape::Matrix(r, c)),
            _ => Err(Error::Checkpoint(format!("{}: rank {} is not a parameter", self.name, self.dims.len()))),
        }
    }
}

/// Entries for every parameter of `store`, names prefixed with `prefix`.
pub fn store_entries<T: Scalar>(prefix: &str, store: &ParamStore<T>) -> Vec<Entry> {
    store
        .iter()
        .map(|p| Entry {
            name: format!("{prefix}{}", p.name),
            dims: p.shape.dims(),
            values: p.value.iter().map(|v| v.as_f64()).collect(),
        })
        .collect()
}

/// Copies values for every parameter of `store` from `entries[prefix + name]`.
pub fn load_into<T: Scalar>(prefix: &str, store: &mut ParamStore<T>, entries: &[Entry]) -> Result<()> {
    for p in store.iter_mut() {
        let name = format!("{prefix}{}", p.name);
        let e = entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing entry {name}")))?;
        if e.dims != p.shape.dims() {
            return Err(Error::Checkpoint(format!("{name}: dims {:?} vs {:?}", e.dims, p.shape.dims())));
        }
        p.value = e.values.iter().map(|&v| T::lit(v)).collect();
    }
    Ok(())
}

pub fn find<'a>(entries: &'a [Entry], name: &str) -> Result<&'a Entry> {
    entries
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::Checkpoint(format!("missing entry {name}")))
}

pub fn find_scalar(entries: &[Entry], name: &str) -> Result<f64> {
    let e = find(entries, name)?;
    e.values
        .first()
        .copied()
        .ok_or_else(|| Error::Checkpoint(format!("{name} is empty")))
}

pub fn encode(entries: &[Entry]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        out.extend_from_slice(e.name.as_bytes());
        out.extend_from_slice(&(e.dims.len() as u32).to_le_bytes());
        for d in &e.dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in &e.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Entry>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let n = r.u32()?;
    let mut entries = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let len = r.u32()?;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("entry name is not UTF-8".into()))?;
        let rank = r.u32()?;
        let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let count: usize = dims.iter().product();
        if count > bytes.len() / 8 {
            return Err(Error::Checkpoint(format!("{name}: implausible size {count}")));
        }
        let values = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        entries.push(Entry { name, dims, values });
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(entries)
}

pub fn save(path: &Path, entries: &[Entry]) -> Result<()> {
    fs::write(path, encode(entries))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<Entry>> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_exact() {
        let bytes = encode(&[Entry { name: "a".into(), dims: vec![2], values: vec![1.0, -2.0] }]);
        let mut expect = b"SFCKPT1\0".to_vec();
        expect.extend([1, 0, 0, 0]);
        expect.extend([1, 0, 0, 0, b'a']);
        expect.extend([1, 0, 0, 0, 2, 0, 0, 0]);
        expect.extend(1.0f64.to_le_bytes());
        expect.extend((-2.0f64).to_le_bytes());
        assert_eq!(bytes, expect);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode(b"NOTACKPT").is_err());
        let mut bytes = encode(&[Entry::scalar("x", 1.0)]);
        bytes.pop();
        assert!(decode(&bytes).is_err());
    }

    #[test]
    fn store_round_trip() {
        let mut s = ParamStore::<f64>::new();
        s.insert("w", Shape::Matrix(2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        s.insert("b", Shape::Vector(2), vec![0.5, 0.25]).unwrap();
        let entries = decode(&encode(&store_entries("sender/", &s))).unwrap();
        assert_eq!(entries[0].name, "sender/w");
        let mut t = s.clone();
        t.iter_mut().for_each(|p| p.value.iter_mut().for_each(|v| *v = 0.0));
        load_into("sender/", &mut t, &entries).unwrap();
        assert!(s.same_values(&t));
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(
            items in prop::collection::vec(("[a-z/]{1,12}", prop::collection::vec(-1e6f64..1e6, 0..20)), 0..6)
        ) {
            let entries: Vec<Entry> = items
                .into_iter()
                .map(|(name, values)| Entry { name, dims: vec![values.len()], values })
                .collect();
            prop_assert_eq!(decode(&encode(&entries)).unwrap(), entries);
        }
    }
}
