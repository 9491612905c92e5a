//! Reference materialization of query answers, for tests and golden files.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::query::{JoinQuery, VarId, VariableOrder};
use crate::storage::{Code, Database};
use crate::wcoj::{naive_join, JoinError, SubQuery};

pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Join(#[from] JoinError),
    #[error("result has more than {cap} answers")]
    CapExceeded { cap: usize },
}

/// All answers, one code per variable in variable-id order, sorted under
/// the lexicographic order induced by `order`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterializedResult {
    pub order: VariableOrder,
    pub tuples: Vec<Vec<Code>>,
}

impl MaterializedResult {
    pub fn count(&self) -> usize {
        self.tuples.len()
    }

    /// The answer at `j`, if any.
    pub fn get(&self, j: usize) -> Option<&[Code]> {
        self.tuples.get(j).map(Vec::as_slice)
    }
}

/// Compares two answers (indexed by variable id) under `order`.
pub fn compare_under(order: &VariableOrder, a: &[Code], b: &[Code]) -> Ordering {
    order.as_slice().iter().map(|&v| a[v].cmp(&b[v])).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

fn sort_under(order: &VariableOrder, tuples: &mut [Vec<Code>]) {
    tuples.sort_by(|a, b| compare_under(order, a, b));
}

/// Pairwise hash join of all atoms, sorted under `l`.
pub fn materialize_sorted(q: &JoinQuery, l: &VariableOrder, db: &Database) -> Result<MaterializedResult, OracleError> {
    materialize_sorted_capped(q, l, db, DEFAULT_CAP)
}

pub fn materialize_sorted_capped(
    q: &JoinQuery,
    l: &VariableOrder,
    db: &Database,
    cap: usize,
) -> Result<MaterializedResult, OracleError> {
    let table = naive_join(&SubQuery::from_query(q), db)?;
    if table.len() > cap {
        return Err(OracleError::CapExceeded { cap });
    }
    let mut tuples = table.tuples.to_vecs();
    sort_under(l, &mut tuples);
    Ok(MaterializedResult { order: l.clone(), tuples })
}

/// Enumerates every assignment drawn from the per-variable active domains
/// and keeps those whose projections lie in every relation. Independent of
/// the join code; only usable on tiny instances.
pub fn materialize_by_domain_product(
    q: &JoinQuery,
    l: &VariableOrder,
    db: &Database,
    cap: usize,
) -> Result<MaterializedResult, OracleError> {
    let n = q.num_vars();
    let mut domains: Vec<BTreeSet<Code>> = vec![BTreeSet::new(); n];
    for atom in q.atoms() {
        let rel = db.relation(&atom.relation).ok_or_else(|| JoinError::UnknownRelation(atom.relation.clone()))?;
        if rel.arity() != atom.vars.len() {
            return Err(JoinError::Arity { relation: atom.relation.clone(), expected: rel.arity(), found: atom.vars.len() }
                .into());
        }
        for row in rel.tuples().iter() {
            for (&v, &c) in atom.vars.iter().zip(row) {
                domains[v].insert(c);
            }
        }
    }
    let domains: Vec<Vec<Code>> = domains.into_iter().map(|d| d.into_iter().collect()).collect();
    let mut tuples = Vec::new();
    if domains.iter().all(|d| !d.is_empty()) {
        let mut digits = vec![0usize; n];
        let mut assignment: Vec<Code> = domains.iter().map(|d| d[0]).collect();
        loop {
            let satisfied = q.atoms().iter().all(|atom| {
                let row: Vec<Code> = atom.vars.iter().map(|&v| assignment[v]).collect();
                db.relation(&atom.relation).is_some_and(|r| r.contains(&row))
            });
            if satisfied {
                if tuples.len() == cap {
                    return Err(OracleError::CapExceeded { cap });
                }
                tuples.push(assignment.clone());
            }
            // odometer step
            let mut v: VarId = 0;
            loop {
                if v == n {
                    sort_under(l, &mut tuples);
                    return Ok(MaterializedResult { order: l.clone(), tuples });
                }
                digits[v] += 1;
                if digits[v] < domains[v].len() {
                    assignment[v] = domains[v][digits[v]];
                    break;
                }
                digits[v] = 0;
                assignment[v] = domains[v][0];
                v += 1;
            }
        }
    }
    Ok(MaterializedResult { order: l.clone(), tuples })
}
