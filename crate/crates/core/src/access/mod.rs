//! Lexicographic direct access to join answers.
//!
//! The index keeps one table per bag of the disruption-free decomposition.
//! Rows of bag `i` are grouped by their interface (the bag's variables other
//! than its own), and each group lists the candidate values of the bag's
//! variable in order with cumulative completion counts. A completion count
//! of a row is the product, over the child bags, of the child group total
//! selected by the row. Answers then form a mixed-radix system: fixing a
//! prefix of the order splits the remaining answers into blocks whose sizes
//! are products of group totals, so the `j`-th answer is found by one binary
//! search per variable.

mod persist;

use std::time::Instant;

use log::debug;
use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::decomposition::{Decomposition, Rational};
use crate::query::{JoinQuery, VarId, VariableOrder};
use crate::storage::{Code, ColumnType, Database, StorageError, Value, ValueDictionary};
use crate::wcoj::{bind_atom, join_tables, JoinError, SubAtom, Table};

pub use persist::{PersistError, FORMAT_VERSION, MAGIC};

#[derive(Debug, Error)]
pub enum AccessError {
    #[error("index {index} out of bounds (count {count})")]
    OutOfBounds { index: BigUint, count: BigUint },
    #[error("tuple is not an answer")]
    NotAnAnswer,
    #[error("expected {expected} values, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("range {from}..{to} out of bounds (count {count})")]
    InvalidRange { from: BigUint, to: BigUint, count: BigUint },
    #[error("cannot draw {requested} distinct answers from {count}")]
    SampleTooLarge { requested: usize, count: BigUint },
    #[error("quantile {0} is outside [0, 1]")]
    InvalidQuantile(Rational),
    #[error("the result is empty")]
    EmptyResult,
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Join(#[from] JoinError),
}

/// Rows of one bag, grouped by interface assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagTable {
    pub var: VarId,
    /// Interface variables in order position.
    pub interface: Vec<VarId>,
    pub parent: Option<usize>,
    /// Interface assignment of each group, row-major, strictly increasing.
    keys: Vec<Code>,
    /// Group `g` owns entries `offsets[g]..offsets[g + 1]`.
    offsets: Vec<usize>,
    /// Values of `var`, strictly increasing within a group.
    values: Vec<Code>,
    /// Inclusive running sums of completion counts within each group.
    cumulative: Vec<BigUint>,
}

impl BagTable {
    pub fn num_groups(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        self.values.len()
    }

    fn key(&self, g: usize) -> &[Code] {
        let w = self.interface.len();
        &self.keys[g * w..(g + 1) * w]
    }

    fn find_group(&self, key: &[Code]) -> Option<usize> {
        let (mut lo, mut hi) = (0, self.num_groups());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            match self.key(mid).cmp(key) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    fn group_total(&self, g: usize) -> &BigUint {
        &self.cumulative[self.offsets[g + 1] - 1]
    }

    /// Sum of the counts strictly before entry `k` of group `g`.
    fn before(&self, g: usize, k: usize) -> BigUint {
        if k == self.offsets[g] {
            BigUint::zero()
        } else {
            self.cumulative[k - 1].clone()
        }
    }

    fn empty(var: VarId, interface: Vec<VarId>, parent: Option<usize>) -> BagTable {
        BagTable { var, interface, parent, keys: Vec::new(), offsets: vec![0], values: Vec::new(), cumulative: Vec::new() }
    }
}

/// Instrumentation collected while building.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    /// Generic joins run to materialize bags.
    pub bag_joins: usize,
    /// Of those, joins over two or more atoms.
    pub multi_atom_joins: usize,
    pub materialized_rows: Vec<usize>,
    pub reduced_rows: Vec<usize>,
    pub elapsed_ms: u128,
}

/// Immutable direct-access structure over the answers of one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessIndex {
    query: JoinQuery,
    order: VariableOrder,
    types: Vec<ColumnType>,
    dictionary: ValueDictionary,
    bags: Vec<BagTable>,
    children: Vec<Vec<usize>>,
    roots: Vec<usize>,
    total: BigUint,
}

impl AccessIndex {
    pub fn build(q: &JoinQuery, l: &VariableOrder, db: &Database) -> Result<AccessIndex, AccessError> {
        Self::build_with_stats(q, l, db).map(|(ix, _)| ix)
    }

    pub fn build_with_stats(
        q: &JoinQuery,
        l: &VariableOrder,
        db: &Database,
    ) -> Result<(AccessIndex, BuildStats), AccessError> {
        let start = Instant::now();
        let types = db.check_query(q)?;
        let decomposition = Decomposition::compute(q, l);
        let mut stats = BuildStats::default();
        let rank = |v: VarId| l.position(v);

        let mut tables = Vec::with_capacity(decomposition.len());
        for i in 0..decomposition.len() {
            let table = materialize_bag(q, db, &decomposition, i, &rank, &mut stats)?;
            stats.materialized_rows.push(table.len());
            tables.push(table);
        }
        let children = decomposition.children();
        full_reduction(&mut tables, &children);
        stats.reduced_rows = tables.iter().map(Table::len).collect();

        let bags = count_completions(&decomposition, &tables, &children);
        let roots: Vec<usize> = (0..bags.len()).filter(|&i| bags[i].parent.is_none()).collect();
        let mut total = BigUint::one();
        for &r in &roots {
            total *= if bags[r].num_groups() == 1 { bags[r].group_total(0).clone() } else { BigUint::zero() };
        }
        let bags = if total.is_zero() {
            bags.into_iter().map(|b| BagTable::empty(b.var, b.interface, b.parent)).collect()
        } else {
            bags
        };
        stats.elapsed_ms = start.elapsed().as_millis();
        debug!("built index over {} bags, {} answers", bags.len(), total);
        let ix = AccessIndex {
            query: q.clone(),
            order: l.clone(),
            types,
            dictionary: db.dictionary().clone(),
            bags,
            children,
            roots,
            total,
        };
        Ok((ix, stats))
    }

    pub fn query(&self) -> &JoinQuery {
        &self.query
    }

    pub fn order(&self) -> &VariableOrder {
        &self.order
    }

    pub fn types(&self) -> &[ColumnType] {
        &self.types
    }

    pub fn dictionary(&self) -> &ValueDictionary {
        &self.dictionary
    }

    pub fn bags(&self) -> &[BagTable] {
        &self.bags
    }

    pub fn count(&self) -> &BigUint {
        &self.total
    }

    /// The answer at 0-based position `j` in the order, one code per
    /// variable in variable-id order.
    pub fn access(&self, j: &BigUint) -> Result<Vec<Code>, AccessError> {
        if *j >= self.total {
            return Err(AccessError::OutOfBounds { index: j.clone(), count: self.total.clone() });
        }
        let mut answer = vec![0 as Code; self.bags.len()];
        let mut frontier = Frontier::new(self);
        let mut residual = j.clone();
        for i in 0..self.bags.len() {
            let bag = &self.bags[i];
            let g = frontier.take(i);
            let multiplier = frontier.product_of_others(self);
            let quotient = &residual / &multiplier;
            let (lo, hi) = (bag.offsets[g], bag.offsets[g + 1]);
            // first entry whose running sum exceeds the quotient
            let k = lo + bag.cumulative[lo..hi].partition_point(|c| *c <= quotient);
            debug_assert!(k < hi);
            residual -= &multiplier * bag.before(g, k);
            answer[bag.var] = bag.values[k];
            frontier.open_children(self, i, &answer);
        }
        Ok(answer)
    }

    pub fn access_usize(&self, j: usize) -> Result<Vec<Code>, AccessError> {
        self.access(&BigUint::from(j))
    }

    /// Position of `answer` (codes in variable-id order).
    pub fn rank(&self, answer: &[Code]) -> Result<BigUint, AccessError> {
        if answer.len() != self.bags.len() {
            return Err(AccessError::Arity { expected: self.bags.len(), found: answer.len() });
        }
        if self.total.is_zero() {
            return Err(AccessError::NotAnAnswer);
        }
        let mut frontier = Frontier::new(self);
        let mut position = BigUint::zero();
        for i in 0..self.bags.len() {
            let bag = &self.bags[i];
            let g = frontier.take(i);
            let multiplier = frontier.product_of_others(self);
            let (lo, hi) = (bag.offsets[g], bag.offsets[g + 1]);
            let k = lo + bag.values[lo..hi].binary_search(&answer[bag.var]).map_err(|_| AccessError::NotAnAnswer)?;
            position += &multiplier * bag.before(g, k);
            if !frontier.try_open_children(self, i, answer) {
                return Err(AccessError::NotAnAnswer);
            }
        }
        Ok(position)
    }

    /// Whether `answer` is in the result.
    pub fn test(&self, answer: &[Code]) -> Result<bool, AccessError> {
        match self.rank(answer) {
            Ok(_) => Ok(true),
            Err(AccessError::NotAnAnswer) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// Answers at positions `from..to`.
    pub fn enumerate(&self, from: &BigUint, to: &BigUint) -> Result<Enumerate<'_>, AccessError> {
        if from > to || *to > self.total {
            return Err(AccessError::InvalidRange { from: from.clone(), to: to.clone(), count: self.total.clone() });
        }
        Ok(Enumerate { index: self, next: from.clone(), end: to.clone() })
    }

    /// `n` distinct answers, uniform over all `n`-subsets, in answer order.
    pub fn sample_without_replacement(&self, n: usize, seed: u64) -> Result<Vec<Vec<Code>>, AccessError> {
        if BigUint::from(n) > self.total {
            return Err(AccessError::SampleTooLarge { requested: n, count: self.total.clone() });
        }
        // Floyd's algorithm over the index range.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = std::collections::BTreeSet::new();
        let mut upper = &self.total - BigUint::from(n);
        for _ in 0..n {
            let candidate = rng.gen_biguint_below(&(&upper + 1u32));
            if !chosen.insert(candidate) {
                chosen.insert(upper.clone());
            }
            upper += 1u32;
        }
        chosen.iter().map(|j| self.access(j)).collect()
    }

    /// The answer at position `floor(q * (count - 1))`.
    pub fn quantile(&self, q: &Rational) -> Result<Vec<Code>, AccessError> {
        if *q < Rational::zero() || *q > Rational::one() {
            return Err(AccessError::InvalidQuantile(q.clone()));
        }
        if self.total.is_zero() {
            return Err(AccessError::EmptyResult);
        }
        let last = Rational::from_integer((&self.total - 1u32).into());
        let position = (q * last).floor().to_integer().to_biguint().expect("non-negative");
        self.access(&position)
    }

    /// Codes for one raw value per variable; `None` if a value never occurs
    /// in the database (so the tuple cannot be an answer).
    pub fn encode(&self, values: &[Value]) -> Result<Option<Vec<Code>>, AccessError> {
        if values.len() != self.types.len() {
            return Err(AccessError::Arity { expected: self.types.len(), found: values.len() });
        }
        Ok(values
            .iter()
            .zip(&self.types)
            .map(|(v, &ty)| if v.column_type() == ty { self.dictionary.encode(v) } else { None })
            .collect())
    }

    /// Parses raw text values (one per variable, in variable-id order).
    pub fn parse_values<S: AsRef<str>>(&self, raw: &[S]) -> Result<Option<Vec<Code>>, AccessError> {
        if raw.len() != self.types.len() {
            return Err(AccessError::Arity { expected: self.types.len(), found: raw.len() });
        }
        let values: Option<Vec<Value>> =
            raw.iter().zip(&self.types).map(|(s, &ty)| Value::parse(ty, s.as_ref().trim())).collect();
        match values {
            Some(values) => self.encode(&values),
            None => Ok(None),
        }
    }

    pub fn decode(&self, answer: &[Code]) -> Vec<Value> {
        answer
            .iter()
            .zip(&self.types)
            .map(|(&c, &ty)| self.dictionary.decode(ty, c).expect("code from this dictionary"))
            .collect()
    }
}

/// Open groups whose bag variable is not yet assigned.
struct Frontier {
    /// `(bag, group)` pairs.
    open: Vec<(usize, usize)>,
}

impl Frontier {
    fn new(ix: &AccessIndex) -> Frontier {
        Frontier { open: ix.roots.iter().map(|&r| (r, 0)).collect() }
    }

    fn take(&mut self, bag: usize) -> usize {
        let pos = self.open.iter().position(|&(b, _)| b == bag).expect("bag is open when its variable is reached");
        self.open.swap_remove(pos).1
    }

    fn product_of_others(&self, ix: &AccessIndex) -> BigUint {
        let mut m = BigUint::one();
        for &(b, g) in &self.open {
            m *= ix.bags[b].group_total(g);
        }
        m
    }

    fn try_open_children(&mut self, ix: &AccessIndex, bag: usize, answer: &[Code]) -> bool {
        let mut key = Vec::new();
        for &c in &ix.children[bag] {
            let child = &ix.bags[c];
            key.clear();
            key.extend(child.interface.iter().map(|&v| answer[v]));
            match child.find_group(&key) {
                Some(g) => self.open.push((c, g)),
                None => return false,
            }
        }
        true
    }

    fn open_children(&mut self, ix: &AccessIndex, bag: usize, answer: &[Code]) {
        let ok = self.try_open_children(ix, bag, answer);
        assert!(ok, "fully reduced bags always extend");
    }
}

pub struct Enumerate<'a> {
    index: &'a AccessIndex,
    next: BigUint,
    end: BigUint,
}

impl Iterator for Enumerate<'_> {
    type Item = Vec<Code>;

    fn next(&mut self) -> Option<Vec<Code>> {
        if self.next >= self.end {
            return None;
        }
        let answer = self.index.access(&self.next).expect("range checked on creation");
        self.next += 1u32;
        Some(answer)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (&self.end - &self.next).to_usize();
        (left.unwrap_or(usize::MAX), left)
    }
}

/// Joins the positively weighted cover atoms of bag `i`, projected to the
/// bag, then filters by every atom contained in the bag. Columns follow the
/// order, so the bag's own variable comes last.
fn materialize_bag(
    q: &JoinQuery,
    db: &Database,
    d: &Decomposition,
    i: usize,
    rank: &dyn Fn(VarId) -> usize,
    stats: &mut BuildStats,
) -> Result<Table, AccessError> {
    let bag = &d.bags[i];
    let mut vars: Vec<VarId> = bag.iter().copied().collect();
    vars.sort_by_key(|&v| rank(v));
    let cover = &d.covers[i];
    let mut inputs = Vec::new();
    for (weight, &a) in cover.cover.weights.iter().zip(&cover.atoms) {
        if weight.is_zero() {
            continue;
        }
        let atom = &q.atoms()[a];
        let sub = SubAtom {
            relation: atom.relation.clone(),
            vars: atom.vars.iter().map(|v| bag.contains(v).then_some(*v)).collect(),
        };
        inputs.push(bind_atom(db, &sub, rank)?);
    }
    stats.bag_joins += 1;
    if inputs.len() > 1 {
        stats.multi_atom_joins += 1;
    }
    let mut table = join_tables(&inputs, &vars);
    for atom in q.atoms().iter().filter(|a| a.scope().is_subset(bag)) {
        let sub = SubAtom { relation: atom.relation.clone(), vars: atom.vars.iter().map(|&v| Some(v)).collect() };
        table = table.semijoin(&bind_atom(db, &sub, rank)?);
    }
    Ok(table)
}

/// Removes rows that do not extend to a full answer: children filter their
/// parents bottom-up, then parents filter their children top-down.
fn full_reduction(tables: &mut [Table], children: &[Vec<usize>]) {
    for i in (0..tables.len()).rev() {
        for &c in &children[i] {
            tables[i] = tables[i].semijoin(&tables[c]);
        }
    }
    for i in 0..tables.len() {
        for &c in &children[i] {
            tables[c] = tables[c].semijoin(&tables[i]);
        }
    }
}

fn count_completions(d: &Decomposition, tables: &[Table], children: &[Vec<usize>]) -> Vec<BagTable> {
    let n = d.len();
    let mut bags: Vec<Option<BagTable>> = vec![None; n];
    for i in (0..n).rev() {
        let table = &tables[i];
        let interface = d.interface(i);
        let width = interface.len();
        let mut bag = BagTable::empty(d.order.var(i), interface, d.parent[i]);
        // child interface columns inside this bag's table
        let child_cols: Vec<(usize, Vec<usize>)> = children[i]
            .iter()
            .map(|&c| {
                let b = bags[c].as_ref().expect("children come later");
                let cols = b.interface.iter().map(|v| table.vars.iter().position(|x| x == v).unwrap()).collect();
                (c, cols)
            })
            .collect();
        let mut key = Vec::new();
        let mut running = BigUint::zero();
        for (r, row) in table.tuples.iter().enumerate() {
            let mut weight = BigUint::one();
            for (c, cols) in &child_cols {
                key.clear();
                key.extend(cols.iter().map(|&col| row[col]));
                let child = bags[*c].as_ref().unwrap();
                let g = child.find_group(&key).expect("fully reduced");
                weight *= child.group_total(g);
            }
            let new_group = r == 0 || table.tuples.row(r - 1)[..width] != row[..width];
            if new_group {
                if r > 0 {
                    bag.offsets.push(bag.values.len());
                }
                bag.keys.extend_from_slice(&row[..width]);
                running = BigUint::zero();
            }
            running += weight;
            bag.values.push(row[width]);
            bag.cumulative.push(running.clone());
        }
        if !table.is_empty() {
            bag.offsets.push(bag.values.len());
        }
        bags[i] = Some(bag);
    }
    bags.into_iter().map(|b| b.unwrap()).collect()
}
