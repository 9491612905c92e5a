//! Relations, order-preserving dictionary encoding and the CSV/manifest
//! loader.
//!
//! Every raw value is replaced by a dense integer code. Codes are assigned
//! per column type in sorted order of the raw values, so comparing codes of
//! the same type compares the raw values (numerically for `int`, bytewise
//! for `string`).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::query::JoinQuery;

/// Dictionary code of a constant.
pub type Code = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int,
    String,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Int => "int",
            ColumnType::String => "string",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl Value {
    pub fn column_type(&self) -> ColumnType {
        match self {
            Value::Int(_) => ColumnType::Int,
            Value::Str(_) => ColumnType::String,
        }
    }

    /// Parses a raw field under the given column type.
    pub fn parse(ty: ColumnType, raw: &str) -> Option<Value> {
        match ty {
            ColumnType::Int => raw.trim().parse().ok().map(Value::Int),
            ColumnType::String => Some(Value::Str(raw.to_string())),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{file}:{line}: {message}")]
    Csv { file: PathBuf, line: u64, message: String },
    #[error("relation `{relation}` has arity {found}, expected {expected}")]
    Arity { relation: String, expected: usize, found: usize },
    #[error("relation `{relation}`: cannot parse `{value}` as {ty}")]
    TypeParse { relation: String, value: String, ty: ColumnType },
    #[error("relation `{0}` is not in the database")]
    UnknownRelation(String),
    #[error("variable `{variable}` joins columns of different types")]
    TypeConflict { variable: String },
    #[error("too many distinct values for 32-bit codes")]
    DictionaryOverflow,
}

/// Sorted pools of the distinct constants of each type; a code is the
/// position of the value in its pool.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValueDictionary {
    ints: Vec<i64>,
    strings: Vec<String>,
}

impl ValueDictionary {
    pub fn from_values(ints: BTreeSet<i64>, strings: BTreeSet<String>) -> Result<Self, StorageError> {
        if ints.len() > Code::MAX as usize || strings.len() > Code::MAX as usize {
            return Err(StorageError::DictionaryOverflow);
        }
        Ok(ValueDictionary { ints: ints.into_iter().collect(), strings: strings.into_iter().collect() })
    }

    pub fn ints(&self) -> &[i64] {
        &self.ints
    }

    pub fn strings(&self) -> &[String] {
        &self.strings
    }

    pub fn encode(&self, v: &Value) -> Option<Code> {
        let pos = match v {
            Value::Int(i) => self.ints.binary_search(i).ok()?,
            Value::Str(s) => self.strings.binary_search(s).ok()?,
        };
        Some(pos as Code)
    }

    pub fn decode(&self, ty: ColumnType, code: Code) -> Option<Value> {
        match ty {
            ColumnType::Int => self.ints.get(code as usize).map(|i| Value::Int(*i)),
            ColumnType::String => self.strings.get(code as usize).map(|s| Value::Str(s.clone())),
        }
    }
}

/// A bag of fixed-arity code tuples stored row-major in one buffer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Tuples {
    arity: usize,
    len: usize,
    data: Vec<Code>,
}

impl Tuples {
    pub fn new(arity: usize) -> Self {
        Tuples { arity, len: 0, data: Vec::new() }
    }

    pub fn from_rows<R: AsRef<[Code]>>(arity: usize, rows: impl IntoIterator<Item = R>) -> Self {
        let mut t = Tuples::new(arity);
        for r in rows {
            t.push(r.as_ref());
        }
        t
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, row: &[Code]) {
        assert_eq!(row.len(), self.arity, "row arity");
        self.data.extend_from_slice(row);
        self.len += 1;
    }

    pub fn row(&self, i: usize) -> &[Code] {
        &self.data[i * self.arity..(i + 1) * self.arity]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[Code]> + '_ {
        (0..self.len).map(move |i| self.row(i))
    }

    pub fn to_vecs(&self) -> Vec<Vec<Code>> {
        self.iter().map(|r| r.to_vec()).collect()
    }

    pub fn is_sorted_set(&self) -> bool {
        (1..self.len).all(|i| self.row(i - 1) < self.row(i))
    }

    /// Sorts rows lexicographically and removes duplicates.
    pub fn sort_dedup(&mut self) {
        if self.is_sorted_set() {
            return;
        }
        let mut idx: Vec<usize> = (0..self.len).collect();
        idx.sort_by(|&a, &b| self.row(a).cmp(self.row(b)));
        idx.dedup_by(|a, b| self.row(*a) == self.row(*b));
        let mut data = Vec::with_capacity(idx.len() * self.arity);
        for &i in &idx {
            data.extend_from_slice(self.row(i));
        }
        self.len = idx.len();
        self.data = data;
    }

    /// Membership test; requires sorted rows.
    pub fn contains(&self, row: &[Code]) -> bool {
        self.position(row).is_some()
    }

    pub fn position(&self, row: &[Code]) -> Option<usize> {
        let (mut lo, mut hi) = (0, self.len);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.row(mid).cmp(row) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Projection onto `cols` (in that order), sorted and deduplicated.
    pub fn project(&self, cols: &[usize]) -> Tuples {
        let mut out = Tuples::new(cols.len());
        let mut buf = Vec::with_capacity(cols.len());
        for r in self.iter() {
            buf.clear();
            buf.extend(cols.iter().map(|&c| r[c]));
            out.push(&buf);
        }
        out.sort_dedup();
        out
    }

    /// Rows of `self` that agree with some row of `other` on every
    /// `(self column, other column)` pair.
    pub fn semijoin(&self, other: &Tuples, pairs: &[(usize, usize)]) -> Tuples {
        let keys: HashSet<Vec<Code>> =
            other.iter().map(|r| pairs.iter().map(|&(_, c)| r[c]).collect()).collect();
        let mut out = Tuples::new(self.arity);
        let mut key = Vec::with_capacity(pairs.len());
        for r in self.iter() {
            key.clear();
            key.extend(pairs.iter().map(|&(c, _)| r[c]));
            if keys.contains(&key) {
                out.push(r);
            }
        }
        out
    }
}

/// A set of tuples with per-column types. Rows are kept sorted; sorted views
/// under other column permutations are built on first use and memoized.
#[derive(Debug)]
pub struct Relation {
    types: Vec<ColumnType>,
    tuples: Tuples,
    views: RwLock<HashMap<Vec<usize>, Arc<Tuples>>>,
}

impl Clone for Relation {
    fn clone(&self) -> Self {
        Relation::new(self.types.clone(), self.tuples.clone())
    }
}

impl PartialEq for Relation {
    fn eq(&self, other: &Self) -> bool {
        self.types == other.types && self.tuples == other.tuples
    }
}

impl Relation {
    pub fn new(types: Vec<ColumnType>, mut tuples: Tuples) -> Self {
        assert_eq!(types.len(), tuples.arity(), "one type per column");
        tuples.sort_dedup();
        Relation { types, tuples, views: RwLock::new(HashMap::new()) }
    }

    pub fn arity(&self) -> usize {
        self.types.len()
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn types(&self) -> &[ColumnType] {
        &self.types
    }

    pub fn tuples(&self) -> &Tuples {
        &self.tuples
    }

    pub fn contains(&self, row: &[Code]) -> bool {
        self.tuples.contains(row)
    }

    /// Rows permuted to column order `perm`, sorted.
    pub fn sorted_view(&self, perm: &[usize]) -> Arc<Tuples> {
        if let Some(view) = self.views.read().expect("view cache poisoned").get(perm) {
            return Arc::clone(view);
        }
        let mut views = self.views.write().expect("view cache poisoned");
        let view = views.entry(perm.to_vec()).or_insert_with(|| Arc::new(self.tuples.project(perm)));
        Arc::clone(view)
    }

    pub fn project(&self, attrs: &[usize]) -> Relation {
        let types = attrs.iter().map(|&a| self.types[a]).collect();
        Relation::new(types, self.tuples.project(attrs))
    }

    /// Tuples with a partner in `other` on the `(self column, other column)`
    /// pairs in `shared`.
    pub fn semijoin(&self, other: &Relation, shared: &[(usize, usize)]) -> Relation {
        Relation::new(self.types.clone(), self.tuples.semijoin(&other.tuples, shared))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Database {
    relations: BTreeMap<String, Relation>,
    dictionary: ValueDictionary,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct Manifest {
    pub relations: BTreeMap<String, ManifestEntry>,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct ManifestEntry {
    pub file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub types: Option<Vec<ColumnType>>,
}

impl Database {
    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, &Relation)> {
        self.relations.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn dictionary(&self) -> &ValueDictionary {
        &self.dictionary
    }

    /// Total number of tuples over all relations.
    pub fn size(&self) -> usize {
        self.relations.values().map(Relation::len).sum()
    }

    /// Loads a JSON manifest and the CSV files it names (paths relative to
    /// the manifest).
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Database, StorageError> {
        let manifest_path = manifest_path.as_ref();
        let text = std::fs::read_to_string(manifest_path)
            .map_err(|source| StorageError::Io { path: manifest_path.to_path_buf(), source })?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| StorageError::Manifest { path: manifest_path.to_path_buf(), message: e.to_string() })?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let mut builder = DatabaseBuilder::default();
        for (name, entry) in &manifest.relations {
            let file = base.join(&entry.file);
            read_csv(&mut builder, name, &file, entry.types.as_deref())?;
        }
        builder.build()
    }

    /// Checks that every atom's relation exists with the right arity and
    /// returns the column type of every query variable.
    pub fn check_query(&self, q: &JoinQuery) -> Result<Vec<ColumnType>, StorageError> {
        let mut types: Vec<Option<ColumnType>> = vec![None; q.num_vars()];
        for atom in q.atoms() {
            let rel = self
                .relation(&atom.relation)
                .ok_or_else(|| StorageError::UnknownRelation(atom.relation.clone()))?;
            if rel.arity() != atom.vars.len() {
                return Err(StorageError::Arity {
                    relation: atom.relation.clone(),
                    expected: atom.vars.len(),
                    found: rel.arity(),
                });
            }
            for (&v, &ty) in atom.vars.iter().zip(rel.types()) {
                match types[v] {
                    Some(t) if t != ty => {
                        return Err(StorageError::TypeConflict { variable: q.var_name(v).to_string() })
                    }
                    _ => types[v] = Some(ty),
                }
            }
        }
        Ok(types.into_iter().map(|t| t.expect("every variable occurs in an atom")).collect())
    }

    /// Encodes one raw value per variable.
    pub fn encode_tuple(&self, values: &[Value]) -> Option<Vec<Code>> {
        values.iter().map(|v| self.dictionary.encode(v)).collect()
    }

    pub fn decode_tuple(&self, types: &[ColumnType], codes: &[Code]) -> Vec<Value> {
        types
            .iter()
            .zip(codes)
            .map(|(&t, &c)| self.dictionary.decode(t, c).expect("code from this dictionary"))
            .collect()
    }
}

fn read_csv(
    builder: &mut DatabaseBuilder,
    name: &str,
    file: &Path,
    types: Option<&[ColumnType]>,
) -> Result<(), StorageError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(file)
        .map_err(|e| csv_error(file, &e))?;
    let mut types: Option<Vec<ColumnType>> = types.map(<[ColumnType]>::to_vec);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(file, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        let tys = types.get_or_insert_with(|| vec![ColumnType::String; record.len()]);
        if record.len() != tys.len() {
            return Err(StorageError::Csv {
                file: file.to_path_buf(),
                line,
                message: format!("expected {} fields, found {}", tys.len(), record.len()),
            });
        }
        let row = record
            .iter()
            .zip(tys.iter())
            .map(|(raw, &ty)| {
                Value::parse(ty, raw).ok_or_else(|| StorageError::TypeParse {
                    relation: name.to_string(),
                    value: raw.to_string(),
                    ty,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let types = types.ok_or_else(|| StorageError::Csv {
        file: file.to_path_buf(),
        line: 0,
        message: "empty file and no declared types; arity unknown".into(),
    })?;
    builder.relation(name, types, rows)
}

fn csv_error(file: &Path, e: &csv::Error) -> StorageError {
    if let csv::ErrorKind::Io(io) = e.kind() {
        return StorageError::Io { path: file.to_path_buf(), source: std::io::Error::new(io.kind(), io.to_string()) };
    }
    StorageError::Csv {
        file: file.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// Collects raw relations and encodes them all at once so that the
/// dictionary covers every constant.
#[derive(Debug, Default)]
pub struct DatabaseBuilder {
    raw: BTreeMap<String, (Vec<ColumnType>, Vec<Vec<Value>>)>,
}

impl DatabaseBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds (or extends) a relation. Every row must match `types`.
    pub fn relation(&mut self, name: &str, types: Vec<ColumnType>, rows: Vec<Vec<Value>>) -> Result<(), StorageError> {
        for row in &rows {
            if row.len() != types.len() {
                return Err(StorageError::Arity { relation: name.to_string(), expected: types.len(), found: row.len() });
            }
            for (v, &ty) in row.iter().zip(&types) {
                if v.column_type() != ty {
                    return Err(StorageError::TypeParse { relation: name.to_string(), value: v.to_string(), ty });
                }
            }
        }
        let entry = self.raw.entry(name.to_string()).or_insert_with(|| (types.clone(), Vec::new()));
        if entry.0 != types {
            return Err(StorageError::Arity { relation: name.to_string(), expected: entry.0.len(), found: types.len() });
        }
        entry.1.extend(rows);
        Ok(())
    }

    /// Convenience for all-integer relations.
    pub fn int_relation(&mut self, name: &str, arity: usize, rows: &[Vec<i64>]) -> &mut Self {
        let rows = rows.iter().map(|r| r.iter().map(|&v| Value::Int(v)).collect()).collect();
        self.relation(name, vec![ColumnType::Int; arity], rows).expect("well-formed integer relation");
        self
    }

    pub fn build(&self) -> Result<Database, StorageError> {
        let mut ints = BTreeSet::new();
        let mut strings = BTreeSet::new();
        for (_, rows) in self.raw.values() {
            for v in rows.iter().flatten() {
                match v {
                    Value::Int(i) => {
                        ints.insert(*i);
                    }
                    Value::Str(s) => {
                        strings.insert(s.clone());
                    }
                }
            }
        }
        let dictionary = ValueDictionary::from_values(ints, strings)?;
        let mut relations = BTreeMap::new();
        for (name, (types, rows)) in &self.raw {
            let mut tuples = Tuples::new(types.len());
            let mut buf = Vec::with_capacity(types.len());
            for row in rows {
                buf.clear();
                buf.extend(row.iter().map(|v| dictionary.encode(v).expect("value collected above")));
                tuples.push(&buf);
            }
            relations.insert(name.clone(), Relation::new(types.clone(), tuples));
        }
        Ok(Database { relations, dictionary })
    }
}
