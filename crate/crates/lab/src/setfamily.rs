//! Set families, their encoding as star databases, and intersection
//! backends.

use std::collections::BTreeSet;

use lexjoin::access::AccessIndex;
use lexjoin::query::VariableOrder;
use lexjoin::storage::{Code, ColumnType, Database, DatabaseBuilder, Value};
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use std::cmp::Ordering;

use crate::templates::star_query;
use crate::{parameter, LabError};

/// `k` families of subsets of `0..universe`, plus index-tuple queries.
/// `families[i][j]` is the `j`-th set of family `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetFamilyInstance {
    pub universe: usize,
    pub families: Vec<Vec<BTreeSet<usize>>>,
    pub queries: Vec<Vec<usize>>,
}

impl SetFamilyInstance {
    pub fn new(universe: usize, families: Vec<Vec<BTreeSet<usize>>>, queries: Vec<Vec<usize>>) -> Result<Self, LabError> {
        let inst = SetFamilyInstance { universe, families, queries };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if self.families.is_empty() {
            return Err(parameter("at least one family is required"));
        }
        if self.families.iter().flatten().flatten().any(|&e| e >= self.universe) {
            return Err(parameter("set element outside the universe"));
        }
        for q in &self.queries {
            if q.len() != self.k() {
                return Err(LabError::Arity { expected: self.k(), found: q.len() });
            }
            if q.iter().zip(&self.families).any(|(&j, f)| j >= f.len()) {
                return Err(parameter("query index out of range"));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.families.len()
    }

    /// Number of sets.
    pub fn n(&self) -> usize {
        self.families.iter().map(Vec::len).sum()
    }

    /// Total size of all sets.
    pub fn input_size(&self) -> usize {
        self.families.iter().flatten().map(BTreeSet::len).sum()
    }

    /// Common elements of the selected sets.
    pub fn intersection(&self, query: &[usize]) -> BTreeSet<usize> {
        let mut sets = query.iter().zip(&self.families).map(|(&j, f)| &f[j]);
        let first = sets.next().cloned().unwrap_or_default();
        sets.fold(first, |acc, s| acc.intersection(s).copied().collect())
    }

    pub fn disjoint(&self, query: &[usize]) -> bool {
        self.intersection(query).is_empty()
    }

    /// The instance restricted to the elements `keep` accepts.
    pub fn filter_elements(&self, keep: impl Fn(usize) -> bool) -> SetFamilyInstance {
        SetFamilyInstance {
            universe: self.universe,
            families: self
                .families
                .iter()
                .map(|f| f.iter().map(|s| s.iter().copied().filter(|&e| keep(e)).collect()).collect())
                .collect(),
            queries: self.queries.clone(),
        }
    }
}

/// Relation `Ri` holds `(j, e)` for every element `e` of set `j` in family
/// `i`, so a query is non-disjoint exactly when its index tuple extends to
/// an answer of the star query.
pub fn encode_set_disjointness(inst: &SetFamilyInstance) -> Result<Database, LabError> {
    let mut b = DatabaseBuilder::new();
    for (i, family) in inst.families.iter().enumerate() {
        let rows: Vec<Vec<i64>> =
            family.iter().enumerate().flat_map(|(j, s)| s.iter().map(move |&e| vec![j as i64, e as i64])).collect();
        b.int_relation(&format!("R{}", i + 1), 2, &rows);
    }
    Ok(b.build()?)
}

/// Positions `start..end` of the answers whose first `prefix.len()`
/// variables under the index order equal `prefix`. Answers sharing an order
/// prefix are contiguous, so two binary searches over `access` suffice.
pub fn prefix_block(ix: &AccessIndex, prefix: &[Code]) -> Result<(BigUint, BigUint), LabError> {
    let order: &VariableOrder = ix.order();
    if prefix.len() > order.len() {
        return Err(LabError::Arity { expected: order.len(), found: prefix.len() });
    }
    let cmp = |answer: &[Code]| -> Ordering {
        prefix.iter().enumerate().map(|(p, &c)| answer[order.var(p)].cmp(&c)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    };
    let first_not = |pred: &dyn Fn(Ordering) -> bool| -> Result<BigUint, LabError> {
        // smallest position whose answer fails `pred`
        let (mut lo, mut hi) = (BigUint::zero(), ix.count().clone());
        while lo < hi {
            let mid: BigUint = (&lo + &hi) >> 1u32;
            if pred(cmp(&ix.access(&mid)?)) {
                lo = mid + 1u32;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    };
    let start = first_not(&|o| o == Ordering::Less)?;
    let end = first_not(&|o| o != Ordering::Greater)?;
    Ok((start, end))
}

fn encode_indices(ix: &AccessIndex, query: &[usize]) -> Option<Vec<Code>> {
    query.iter().map(|&j| ix.dictionary().encode(&Value::Int(j as i64))).collect()
}

/// Whether the index tuple `query` has a `z` completing it, decided with
/// `O(log count)` access calls on an index over the star query with `z`
/// last.
pub fn projected_star_test(ix: &AccessIndex, query: &[usize]) -> Result<bool, LabError> {
    let k = ix.order().len() - 1;
    if query.len() != k {
        return Err(LabError::Arity { expected: k, found: query.len() });
    }
    let Some(prefix) = encode_indices(ix, query) else { return Ok(false) };
    let (start, end) = prefix_block(ix, &prefix)?;
    Ok(start < end)
}

/// Up to `limit` common elements of the selected sets, from the star index.
pub fn star_witnesses(ix: &AccessIndex, query: &[usize], limit: usize) -> Result<Vec<usize>, LabError> {
    let k = ix.order().len() - 1;
    if query.len() != k {
        return Err(LabError::Arity { expected: k, found: query.len() });
    }
    let Some(prefix) = encode_indices(ix, query) else { return Ok(Vec::new()) };
    let (start, end) = prefix_block(ix, &prefix)?;
    let stop = (&start + BigUint::from(limit)).min(end);
    let z = ix.order().var(k);
    let mut out = Vec::new();
    for answer in ix.enumerate(&start, &stop)? {
        match ix.dictionary().decode(ColumnType::Int, answer[z]) {
            Some(Value::Int(e)) => out.push(e.to_usize().expect("elements are non-negative")),
            _ => unreachable!("star columns are integers"),
        }
    }
    Ok(out)
}

/// Answers set-intersection queries: for each query of the instance, up to
/// `limit` common elements.
pub trait IntersectionBackend {
    fn name(&self) -> &'static str;
    fn witnesses(&self, inst: &SetFamilyInstance, limit: usize) -> Result<Vec<Vec<usize>>, LabError>;
}

/// Direct set intersection.
#[derive(Debug, Default, Clone, Copy)]
pub struct BruteForceBackend;

impl IntersectionBackend for BruteForceBackend {
    fn name(&self) -> &'static str {
        "brute-force"
    }

    fn witnesses(&self, inst: &SetFamilyInstance, limit: usize) -> Result<Vec<Vec<usize>>, LabError> {
        Ok(inst.queries.iter().map(|q| inst.intersection(q).into_iter().take(limit).collect()).collect())
    }
}

/// Encodes the instance as a star database, builds a direct-access index
/// under the order with `z` last, and reads each query's block.
#[derive(Debug, Default, Clone, Copy)]
pub struct EngineBackend;

impl EngineBackend {
    pub fn index(inst: &SetFamilyInstance) -> Result<AccessIndex, LabError> {
        let (q, l) = star_query(inst.k())?;
        let db = encode_set_disjointness(inst)?;
        Ok(AccessIndex::build(&q, &l, &db)?)
    }
}

impl IntersectionBackend for EngineBackend {
    fn name(&self) -> &'static str {
        "direct-access"
    }

    fn witnesses(&self, inst: &SetFamilyInstance, limit: usize) -> Result<Vec<Vec<usize>>, LabError> {
        let ix = Self::index(inst)?;
        inst.queries.iter().map(|q| star_witnesses(&ix, q, limit)).collect()
    }
}

/// Recovers the single common element of `query`'s sets using only
/// disjointness answers: the `j`-th probe keeps the elements whose bit `j`
/// is set. The assembled element is verified; `None` if verification fails
/// (empty intersection, or several elements mixing their bits).
pub fn unique_via_bit_probing(
    backend: &dyn IntersectionBackend,
    inst: &SetFamilyInstance,
    query: &[usize],
) -> Result<Option<usize>, LabError> {
    if query.len() != inst.k() {
        return Err(LabError::Arity { expected: inst.k(), found: query.len() });
    }
    let bits = (usize::BITS - inst.universe.saturating_sub(1).leading_zeros()).max(1);
    let mut candidate = 0usize;
    for j in 0..bits {
        let mut probe = inst.filter_elements(|e| (e >> j) & 1 == 1);
        probe.queries = vec![query.to_vec()];
        if !backend.witnesses(&probe, 1)?[0].is_empty() {
            candidate |= 1 << j;
        }
    }
    let verified = candidate < inst.universe && query.iter().zip(&inst.families).all(|(&j, f)| f[j].contains(&candidate));
    Ok(verified.then_some(candidate))
}
