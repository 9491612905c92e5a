//! Binary index files.
//!
//! Layout (all integers little-endian; `varint` is unsigned LEB128):
//!
//! ```text
//! magic   "LJDA1"
//! version u16
//! section*   tag u8, length u64, payload
//!   1 schema      query text (varint length + UTF-8), then one type byte
//!                 per variable (0 = int, 1 = string)
//!   2 dictionary  varint #ints, ints as zigzag varint deltas from the
//!                 previous value (first from 0); varint #strings, each as
//!                 varint length + UTF-8
//!   3 bags        varint #bags, then per bag: varint variable, varint
//!                 interface width, interface variables as varints, varint
//!                 parent + 1 (0 = root), varint #groups, per group: key codes
//!                 as varints, varint #values, values as varint deltas (first
//!                 from 0), running sums as big integers
//!   4 count       big integer
//! big integer = varint byte length + little-endian magnitude bytes
//! ```
//!
//! Sections appear exactly once each in tag order. Encoding is canonical,
//! so saving a loaded index reproduces the file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use super::{AccessIndex, BagTable};
use crate::query::{parse_query, QueryError};
use crate::storage::{ColumnType, StorageError, ValueDictionary};

pub const MAGIC: &[u8; 5] = b"LJDA1";
pub const FORMAT_VERSION: u16 = 1;

const TAG_SCHEMA: u8 = 1;
const TAG_DICTIONARY: u8 = 2;
const TAG_BAGS: u8 = 3;
const TAG_COUNT: u8 = 4;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not an index file")]
    BadMagic,
    #[error("index format version {found} is not supported (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u16 },
    #[error("index file is truncated")]
    Truncated,
    #[error("index file is corrupt: {0}")]
    Corrupt(String),
    #[error("stored query is invalid: {0}")]
    Query(#[from] QueryError),
    #[error("stored dictionary is invalid: {0}")]
    Dictionary(#[from] StorageError),
}

fn corrupt(msg: impl Into<String>) -> PersistError {
    PersistError::Corrupt(msg.into())
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn varint(&mut self, mut v: u64) {
        loop {
            let byte = (v & 0x7f) as u8;
            v >>= 7;
            if v == 0 {
                self.buf.push(byte);
                return;
            }
            self.buf.push(byte | 0x80);
        }
    }

    fn usize(&mut self, v: usize) {
        self.varint(v as u64);
    }

    fn bytes(&mut self, b: &[u8]) {
        self.usize(b.len());
        self.buf.extend_from_slice(b);
    }

    fn big(&mut self, v: &BigUint) {
        if v.is_zero() {
            self.usize(0);
        } else {
            self.bytes(&v.to_bytes_le());
        }
    }

    fn section(&mut self, tag: u8, payload: Writer) {
        self.buf.push(tag);
        self.buf.extend_from_slice(&(payload.buf.len() as u64).to_le_bytes());
        self.buf.extend_from_slice(&payload.buf);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        if self.buf.len() < n {
            return Err(PersistError::Truncated);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, PersistError> {
        Ok(self.take(1)?[0])
    }

    fn varint(&mut self) -> Result<u64, PersistError> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let byte = self.u8()?;
            let bits = u64::from(byte & 0x7f);
            if shift == 63 && bits > 1 {
                return Err(corrupt("varint overflow"));
            }
            v |= bits << shift;
            if byte & 0x80 == 0 {
                if byte == 0 && shift > 0 {
                    return Err(corrupt("non-canonical varint"));
                }
                return Ok(v);
            }
        }
        Err(corrupt("varint overflow"))
    }

    fn usize(&mut self) -> Result<usize, PersistError> {
        usize::try_from(self.varint()?).map_err(|_| corrupt("length overflow"))
    }

    /// A count of items that each occupy at least one byte.
    fn count(&mut self) -> Result<usize, PersistError> {
        let n = self.usize()?;
        if n > self.buf.len() {
            return Err(PersistError::Truncated);
        }
        Ok(n)
    }

    fn code(&mut self) -> Result<u32, PersistError> {
        u32::try_from(self.varint()?).map_err(|_| corrupt("code overflow"))
    }

    fn bytes(&mut self) -> Result<&'a [u8], PersistError> {
        let n = self.usize()?;
        self.take(n)
    }

    fn string(&mut self) -> Result<String, PersistError> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| corrupt("invalid UTF-8"))
    }

    fn big(&mut self) -> Result<BigUint, PersistError> {
        let b = self.bytes()?;
        if b.last() == Some(&0) {
            return Err(corrupt("non-canonical big integer"));
        }
        Ok(BigUint::from_bytes_le(b))
    }

    fn section(&mut self, tag: u8) -> Result<Reader<'a>, PersistError> {
        let found = self.u8()?;
        if found != tag {
            return Err(corrupt(format!("expected section {tag}, found {found}")));
        }
        let len = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        let len = usize::try_from(len).map_err(|_| PersistError::Truncated)?;
        Ok(Reader { buf: self.take(len)? })
    }

    fn finish(&self) -> Result<(), PersistError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(corrupt("trailing bytes"))
        }
    }
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

fn unzigzag(v: u64) -> i64 {
    ((v >> 1) as i64) ^ -((v & 1) as i64)
}

impl AccessIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Writer::default();
        out.buf.extend_from_slice(MAGIC);
        out.buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());

        let mut schema = Writer::default();
        schema.bytes(self.query.to_text(&self.order).as_bytes());
        for ty in &self.types {
            schema.buf.push(match ty {
                ColumnType::Int => 0,
                ColumnType::String => 1,
            });
        }
        out.section(TAG_SCHEMA, schema);

        let mut dict = Writer::default();
        dict.usize(self.dictionary.ints().len());
        let mut prev = 0i64;
        for &v in self.dictionary.ints() {
            dict.varint(zigzag(v.wrapping_sub(prev)));
            prev = v;
        }
        dict.usize(self.dictionary.strings().len());
        for s in self.dictionary.strings() {
            dict.bytes(s.as_bytes());
        }
        out.section(TAG_DICTIONARY, dict);

        let mut bags = Writer::default();
        bags.usize(self.bags.len());
        for bag in &self.bags {
            bags.usize(bag.var);
            bags.usize(bag.interface.len());
            for &v in &bag.interface {
                bags.usize(v);
            }
            bags.usize(bag.parent.map_or(0, |p| p + 1));
            bags.usize(bag.num_groups());
            for g in 0..bag.num_groups() {
                for &c in bag.key(g) {
                    bags.varint(c.into());
                }
                let (lo, hi) = (bag.offsets[g], bag.offsets[g + 1]);
                bags.usize(hi - lo);
                let mut prev = 0u32;
                for &v in &bag.values[lo..hi] {
                    bags.varint((v - prev).into());
                    prev = v;
                }
                for c in &bag.cumulative[lo..hi] {
                    bags.big(c);
                }
            }
        }
        out.section(TAG_BAGS, bags);

        let mut count = Writer::default();
        count.big(&self.total);
        out.section(TAG_COUNT, count);
        out.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<AccessIndex, PersistError> {
        let mut r = Reader { buf: bytes };
        if r.take(MAGIC.len()).map_err(|_| PersistError::BadMagic)? != MAGIC {
            return Err(PersistError::BadMagic);
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(PersistError::UnsupportedVersion { found: version });
        }

        let mut schema = r.section(TAG_SCHEMA)?;
        let (query, order) = parse_query(&schema.string()?)?;
        let types = (0..query.num_vars())
            .map(|_| match schema.u8()? {
                0 => Ok(ColumnType::Int),
                1 => Ok(ColumnType::String),
                t => Err(corrupt(format!("unknown column type {t}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        schema.finish()?;

        let mut dict = r.section(TAG_DICTIONARY)?;
        let n = dict.count()?;
        let mut ints = std::collections::BTreeSet::new();
        let mut prev = 0i64;
        for _ in 0..n {
            prev = prev.wrapping_add(unzigzag(dict.varint()?));
            ints.insert(prev);
        }
        let n = dict.count()?;
        let mut strings = std::collections::BTreeSet::new();
        for _ in 0..n {
            strings.insert(dict.string()?);
        }
        dict.finish()?;
        let dictionary = ValueDictionary::from_values(ints, strings)?;

        let mut section = r.section(TAG_BAGS)?;
        let num_bags = section.count()?;
        if num_bags != query.num_vars() {
            return Err(corrupt("bag count differs from variable count"));
        }
        let mut bags = Vec::with_capacity(num_bags);
        for i in 0..num_bags {
            let var = section.usize()?;
            if var != order.var(i) {
                return Err(corrupt("bag variable does not follow the order"));
            }
            let width = section.count()?;
            let interface = (0..width).map(|_| section.usize()).collect::<Result<Vec<_>, _>>()?;
            if interface.iter().any(|&v| v >= num_bags || order.position(v) >= i) {
                return Err(corrupt("interface variable out of range"));
            }
            let parent = match section.usize()? {
                0 => None,
                p if p - 1 < i => Some(p - 1),
                _ => return Err(corrupt("parent must precede its child")),
            };
            let mut bag = BagTable::empty(var, interface, parent);
            let groups = section.count()?;
            for _ in 0..groups {
                for _ in 0..width {
                    bag.keys.push(section.code()?);
                }
                let len = section.count()?;
                if len == 0 {
                    return Err(corrupt("empty group"));
                }
                let mut prev = 0u32;
                for k in 0..len {
                    let delta = section.code()?;
                    if k > 0 && delta == 0 {
                        return Err(corrupt("group values must increase"));
                    }
                    prev = prev.checked_add(delta).ok_or_else(|| corrupt("code overflow"))?;
                    bag.values.push(prev);
                }
                for _ in 0..len {
                    bag.cumulative.push(section.big()?);
                }
                bag.offsets.push(bag.values.len());
            }
            bags.push(bag);
        }
        section.finish()?;

        let mut count = r.section(TAG_COUNT)?;
        let total = count.big()?;
        count.finish()?;
        r.finish()?;

        let mut children = vec![Vec::new(); bags.len()];
        for (i, bag) in bags.iter().enumerate() {
            if let Some(p) = bag.parent {
                children[p].push(i);
            }
        }
        let roots: Vec<usize> = (0..bags.len()).filter(|&i| bags[i].parent.is_none()).collect();
        let mut product = BigUint::one();
        for &root in &roots {
            product *= if bags[root].num_groups() == 1 { bags[root].group_total(0).clone() } else { BigUint::zero() };
        }
        if product != total {
            return Err(corrupt("stored count disagrees with the bag tables"));
        }
        Ok(AccessIndex { query, order, types, dictionary, bags, children, roots, total })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PersistError> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|source| PersistError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<AccessIndex, PersistError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| PersistError::Io { path: path.to_path_buf(), source })?;
        AccessIndex::from_bytes(&bytes)
    }
}
