//! Multiway joins over sorted relations.
//!
//! [`generic_join`] binds variables one at a time. For each variable it
//! intersects the candidate values offered by every atom containing it,
//! scanning the atom with the fewest remaining rows and binary-searching the
//! others. Atoms are stored as sorted tuple arrays with columns in join
//! order, so the rows consistent with a partial assignment form a contiguous
//! range and every probe is a binary search inside that range.
//!
//! [`naive_join`] evaluates the same query with pairwise hash joins and is
//! only meant as a reference.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::decomposition::{fractional_edge_cover, Rational};
use crate::hypergraph::{Hypergraph, VertexSet};
use crate::query::{JoinQuery, VarId};
use crate::storage::{Code, Database, Tuples};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JoinError {
    #[error("relation `{0}` is not in the database")]
    UnknownRelation(String),
    #[error("atom over `{relation}` has {found} columns but the relation has arity {expected}")]
    Arity { relation: String, expected: usize, found: usize },
    #[error("variable {0} is not covered by any atom")]
    UncoveredVariable(VarId),
    #[error("join order must be a permutation of the output variables")]
    BadOrder,
}

/// An atom of a subquery. `None` columns are projected away before joining.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubAtom {
    pub relation: String,
    pub vars: Vec<Option<VarId>>,
}

impl SubAtom {
    pub fn distinct_vars(&self) -> VertexSet {
        self.vars.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubQuery {
    pub output: Vec<VarId>,
    pub atoms: Vec<SubAtom>,
}

impl SubQuery {
    /// The whole query as a subquery over all of its variables.
    pub fn from_query(q: &JoinQuery) -> SubQuery {
        SubQuery {
            output: (0..q.num_vars()).collect(),
            atoms: q
                .atoms()
                .iter()
                .map(|a| SubAtom { relation: a.relation.clone(), vars: a.vars.iter().map(|&v| Some(v)).collect() })
                .collect(),
        }
    }

    pub fn hypergraph(&self) -> Hypergraph {
        Hypergraph::new(self.output.iter().copied(), self.atoms.iter().map(SubAtom::distinct_vars))
            .unwrap_or_else(|_| Hypergraph::from_edges(self.atoms.iter().map(SubAtom::distinct_vars)))
    }

    fn validate(&self) -> Result<(), JoinError> {
        for v in &self.output {
            if !self.atoms.iter().any(|a| a.vars.contains(&Some(*v))) {
                return Err(JoinError::UncoveredVariable(*v));
            }
        }
        if self.atoms.iter().any(|a| a.vars.iter().flatten().any(|v| !self.output.contains(v))) {
            return Err(JoinError::BadOrder);
        }
        Ok(())
    }
}

/// Tuples with named columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub vars: Vec<VarId>,
    pub tuples: Tuples,
}

impl Table {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    fn column(&self, v: VarId) -> usize {
        self.vars.iter().position(|&x| x == v).expect("variable is a column of this table")
    }

    /// Projection onto `vars` in the given column order, sorted.
    pub fn project(&self, vars: &[VarId]) -> Table {
        let cols: Vec<usize> = vars.iter().map(|&v| self.column(v)).collect();
        Table { vars: vars.to_vec(), tuples: self.tuples.project(&cols) }
    }

    /// Rows agreeing with some row of `other` on the shared variables.
    pub fn semijoin(&self, other: &Table) -> Table {
        let pairs: Vec<(usize, usize)> = self
            .vars
            .iter()
            .enumerate()
            .filter_map(|(i, v)| other.vars.iter().position(|x| x == v).map(|j| (i, j)))
            .collect();
        Table { vars: self.vars.clone(), tuples: self.tuples.semijoin(&other.tuples, &pairs) }
    }
}

/// Binds `atom` against `db`: rows violating a repeated variable are
/// dropped, `None` columns are projected away, and the remaining distinct
/// variables become columns sorted by their position in `rank`.
pub fn bind_atom(db: &Database, atom: &SubAtom, rank: &dyn Fn(VarId) -> usize) -> Result<Table, JoinError> {
    let rel = db.relation(&atom.relation).ok_or_else(|| JoinError::UnknownRelation(atom.relation.clone()))?;
    if rel.arity() != atom.vars.len() {
        return Err(JoinError::Arity { relation: atom.relation.clone(), expected: rel.arity(), found: atom.vars.len() });
    }
    let mut vars: Vec<VarId> = atom.distinct_vars().into_iter().collect();
    vars.sort_by_key(|&v| rank(v));
    // first column holding each variable, plus equality checks for repeats
    let first: Vec<usize> = vars.iter().map(|&v| atom.vars.iter().position(|x| *x == Some(v)).unwrap()).collect();
    let repeats: Vec<(usize, usize)> = atom
        .vars
        .iter()
        .enumerate()
        .filter_map(|(c, v)| {
            let v = (*v)?;
            let f = atom.vars.iter().position(|x| *x == Some(v)).unwrap();
            (f != c).then_some((f, c))
        })
        .collect();
    let tuples = if repeats.is_empty() {
        (*rel.sorted_view(&first)).clone()
    } else {
        let mut filtered = Tuples::new(rel.arity());
        for r in rel.tuples().iter().filter(|r| repeats.iter().all(|&(a, b)| r[a] == r[b])) {
            filtered.push(r);
        }
        filtered.project(&first)
    };
    Ok(Table { vars, tuples })
}

/// Worst-case optimal join of `sq` with variables bound in `order`. The
/// result has columns in `order` and rows in lexicographic order.
pub fn generic_join(sq: &SubQuery, db: &Database, order: &[VarId]) -> Result<Table, JoinError> {
    sq.validate()?;
    let mut sorted_order = order.to_vec();
    sorted_order.sort_unstable();
    let mut sorted_output = sq.output.clone();
    sorted_output.sort_unstable();
    sorted_output.dedup();
    if sorted_order != sorted_output || sorted_order.windows(2).any(|w| w[0] == w[1]) {
        return Err(JoinError::BadOrder);
    }
    let rank = |v: VarId| order.iter().position(|&x| x == v).expect("validated");
    let tables = sq.atoms.iter().map(|a| bind_atom(db, a, &rank)).collect::<Result<Vec<_>, _>>()?;
    Ok(join_tables(&tables, order))
}

/// Generic join over already-bound tables whose columns are sorted by
/// position in `order`.
pub fn join_tables(tables: &[Table], order: &[VarId]) -> Table {
    let mut out = Tuples::new(order.len());
    if tables.iter().any(Table::is_empty) {
        return Table { vars: order.to_vec(), tuples: out };
    }
    // levels[d]: (table, column) pairs binding order[d]
    let levels: Vec<Vec<(usize, usize)>> = order
        .iter()
        .map(|v| {
            tables
                .iter()
                .enumerate()
                .filter_map(|(t, table)| table.vars.iter().position(|x| x == v).map(|c| (t, c)))
                .collect()
        })
        .collect();
    assert!(levels.iter().all(|l| !l.is_empty()), "every join variable is covered");
    let mut ranges = vec![vec![(0usize, 0usize); tables.len()]; order.len() + 1];
    for (t, table) in tables.iter().enumerate() {
        ranges[0][t] = (0, table.len());
    }
    let mut assignment = vec![0 as Code; order.len()];
    descend(tables, &levels, 0, &mut ranges, &mut assignment, &mut out);
    Table { vars: order.to_vec(), tuples: out }
}

fn descend(
    tables: &[Table],
    levels: &[Vec<(usize, usize)>],
    depth: usize,
    ranges: &mut [Vec<(usize, usize)>],
    assignment: &mut [Code],
    out: &mut Tuples,
) {
    if depth == levels.len() {
        out.push(assignment);
        return;
    }
    let level = &levels[depth];
    let &(lead, lead_col) = level
        .iter()
        .min_by_key(|&&(t, _)| ranges[depth][t].1 - ranges[depth][t].0)
        .expect("non-empty level");
    let (lo, hi) = ranges[depth][lead];
    let lead_rows = &tables[lead].tuples;
    let mut i = lo;
    'values: while i < hi {
        let value = lead_rows.row(i)[lead_col];
        let end = upper_bound(lead_rows, lead_col, i, hi, value);
        let (current, next) = ranges.split_at_mut(depth + 1);
        next[0].copy_from_slice(&current[depth]);
        next[0][lead] = (i, end);
        for &(t, col) in level {
            if t == lead {
                continue;
            }
            let (a, b) = current[depth][t];
            let start = lower_bound(&tables[t].tuples, col, a, b, value);
            let stop = upper_bound(&tables[t].tuples, col, start, b, value);
            if start == stop {
                i = end;
                continue 'values;
            }
            next[0][t] = (start, stop);
        }
        assignment[depth] = value;
        descend(tables, levels, depth + 1, ranges, assignment, out);
        i = end;
    }
}

fn lower_bound(rows: &Tuples, col: usize, mut lo: usize, mut hi: usize, value: Code) -> usize {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if rows.row(mid)[col] < value {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

fn upper_bound(rows: &Tuples, col: usize, mut lo: usize, mut hi: usize, value: Code) -> usize {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if rows.row(mid)[col] <= value {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Pairwise hash join of the atoms in input order, then projected onto
/// `sq.output` and sorted.
pub fn naive_join(sq: &SubQuery, db: &Database) -> Result<Table, JoinError> {
    sq.validate()?;
    let rank = |v: VarId| v;
    let mut acc = Table { vars: Vec::new(), tuples: Tuples::from_rows(0, [[0u32; 0]]) };
    for atom in &sq.atoms {
        let table = bind_atom(db, atom, &rank)?;
        acc = hash_join(&acc, &table);
    }
    Ok(acc.project(&sq.output))
}

fn hash_join(left: &Table, right: &Table) -> Table {
    let shared: Vec<(usize, usize)> = left
        .vars
        .iter()
        .enumerate()
        .filter_map(|(i, v)| right.vars.iter().position(|x| x == v).map(|j| (i, j)))
        .collect();
    let extra: Vec<usize> = (0..right.vars.len()).filter(|j| !shared.iter().any(|&(_, s)| s == *j)).collect();
    let mut index: HashMap<Vec<Code>, Vec<usize>> = HashMap::new();
    for (r, row) in right.tuples.iter().enumerate() {
        index.entry(shared.iter().map(|&(_, j)| row[j]).collect()).or_default().push(r);
    }
    let mut vars = left.vars.clone();
    vars.extend(extra.iter().map(|&j| right.vars[j]));
    let mut tuples = Tuples::new(vars.len());
    let mut buf = Vec::with_capacity(vars.len());
    for row in left.tuples.iter() {
        let key: Vec<Code> = shared.iter().map(|&(i, _)| row[i]).collect();
        if let Some(matches) = index.get(&key) {
            for &r in matches {
                buf.clear();
                buf.extend_from_slice(row);
                buf.extend(extra.iter().map(|&j| right.tuples.row(r)[j]));
                tuples.push(&buf);
            }
        }
    }
    Table { vars, tuples }
}

/// Checks `output ≤ Π sizes[e]^weights[e]` exactly, by raising both sides
/// to the common denominator of the weights.
pub fn agm_bound_holds(output: usize, sizes: &[usize], weights: &[Rational]) -> bool {
    assert_eq!(sizes.len(), weights.len());
    let denominator = weights.iter().fold(BigUint::one(), |acc, w| {
        acc.lcm(&w.denom().to_biguint().expect("cover weights are non-negative"))
    });
    let d = denominator.to_u32().expect("small denominator");
    let lhs = BigUint::from(output).pow(d);
    let mut rhs = BigUint::one();
    for (&size, w) in sizes.iter().zip(weights) {
        let scaled = w * Rational::from_integer(denominator.clone().into());
        let exponent = scaled.to_integer().to_u32().expect("small exponent");
        rhs *= BigUint::from(size).pow(exponent);
    }
    if rhs.is_zero() {
        return output == 0;
    }
    lhs <= rhs
}

/// AGM check for a subquery: sizes of the bound atoms under an optimal
/// fractional edge cover of the subquery hypergraph. Atoms sharing a scope
/// contribute the smallest of them.
pub fn agm_check(sq: &SubQuery, db: &Database, output: usize) -> Result<bool, JoinError> {
    let rank = |v: VarId| v;
    let h = sq.hypergraph();
    let cover = fractional_edge_cover(&h).map_err(|_| JoinError::BadOrder)?;
    let mut sizes = Vec::with_capacity(cover.edges.len());
    for edge in &cover.edges {
        let mut best = usize::MAX;
        for atom in sq.atoms.iter().filter(|a| a.distinct_vars() == *edge) {
            best = best.min(bind_atom(db, atom, &rank)?.len());
        }
        sizes.push(best);
    }
    Ok(agm_bound_holds(output, &sizes, &cover.weights))
}
