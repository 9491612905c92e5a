//! Order-induced decompositions.
//!
//! For a query and a variable order `v_1, …, v_ℓ`, the disruption-free
//! decomposition has one bag per variable: bag `e_i` holds `v_i` and every
//! earlier variable that is a neighbour of `v_i` once the bags of all later
//! variables have been added. Its bag hypergraph is acyclic and free of
//! disruptive trios, and its fractional width (the incompatibility number)
//! is the exponent of the preprocessing cost of the access index.

pub mod lp;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::hypergraph::{Hypergraph, HypergraphError, Vertex, VertexSet};
use crate::query::{disruptive_trios_in, JoinQuery, VariableOrder};
use lp::{Cmp, LinearProgram, LpOutcome, Sense};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecompositionError {
    #[error("vertex {0} is not covered by any edge")]
    Uncoverable(Vertex),
    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),
    #[error("running intersection violated at bag {bag}")]
    RunningIntersection { bag: usize },
}

/// Formats a rational as `n` or `n/d`.
pub fn fraction_string(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// An optimal fractional edge cover: `weights[k]` belongs to `edges[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalCover {
    pub edges: Vec<VertexSet>,
    pub weights: Vec<Rational>,
    pub total: Rational,
}

impl FractionalCover {
    /// True iff every vertex of `h` receives total weight at least one.
    pub fn covers(&self, h: &Hypergraph) -> bool {
        h.vertices().iter().all(|v| {
            let sum: Rational = self
                .edges
                .iter()
                .zip(&self.weights)
                .filter(|(e, _)| e.contains(v))
                .map(|(_, w)| w.clone())
                .sum();
            sum >= Rational::one()
        })
    }
}

fn check_coverable(h: &Hypergraph) -> Result<(), DecompositionError> {
    match h.vertices().iter().find(|v| !h.edges().iter().any(|e| e.contains(v))) {
        Some(v) => Err(DecompositionError::Uncoverable(*v)),
        None => Ok(()),
    }
}

/// Minimum-weight fractional edge cover with weights in `[0, 1]`, solved
/// exactly. The optimum is `ρ*(h)`.
pub fn fractional_edge_cover(h: &Hypergraph) -> Result<FractionalCover, DecompositionError> {
    check_coverable(h)?;
    let m = h.edges().len();
    let one = Rational::one();
    let mut lp = LinearProgram::new(Sense::Minimize, vec![one.clone(); m]);
    for v in h.vertices() {
        let row = h.edges().iter().map(|e| if e.contains(v) { one.clone() } else { Rational::zero() }).collect();
        lp.constrain(row, Cmp::Ge, one.clone());
    }
    for k in 0..m {
        let mut row = vec![Rational::zero(); m];
        row[k] = one.clone();
        lp.constrain(row, Cmp::Le, one.clone());
    }
    match lp.solve() {
        LpOutcome::Optimal { value, solution } => {
            Ok(FractionalCover { edges: h.edges().to_vec(), weights: solution, total: value })
        }
        other => unreachable!("cover LP of a coverable hypergraph is feasible and bounded: {other:?}"),
    }
}

/// Maximum fractional independent set: `max Σ φ(v)` subject to
/// `Σ_{v ∈ e} φ(v) ≤ 1` for every edge.
pub fn fractional_independent_set(
    h: &Hypergraph,
) -> Result<(Rational, BTreeMap<Vertex, Rational>), DecompositionError> {
    check_coverable(h)?;
    let n = h.vertices().len();
    let one = Rational::one();
    let mut lp = LinearProgram::new(Sense::Maximize, vec![one.clone(); n]);
    for e in h.edges() {
        let row = h.vertices().iter().map(|v| if e.contains(v) { one.clone() } else { Rational::zero() }).collect();
        lp.constrain(row, Cmp::Le, one.clone());
    }
    match lp.solve() {
        LpOutcome::Optimal { value, solution } => Ok((value, h.vertices().iter().copied().zip(solution).collect())),
        other => unreachable!("packing LP of a coverable hypergraph is feasible and bounded: {other:?}"),
    }
}

/// Disruption-free bags built iteratively: for `i = ℓ … 1`, bag `e_i` is
/// `v_i` plus its earlier neighbours in the hypergraph extended by all bags
/// added so far. `bags[i]` is the bag of `order[i]`.
pub fn disruption_free_iterative_in(h: &Hypergraph, order: &[Vertex]) -> Vec<VertexSet> {
    let position: BTreeMap<Vertex, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut neighbours: BTreeMap<Vertex, VertexSet> = order.iter().map(|&v| (v, VertexSet::new())).collect();
    let connect = |members: &VertexSet, neighbours: &mut BTreeMap<Vertex, VertexSet>| {
        for &a in members {
            let entry = neighbours.entry(a).or_default();
            entry.extend(members.iter().copied().filter(|&b| b != a));
        }
    };
    for e in h.edges() {
        connect(e, &mut neighbours);
    }
    let mut bags = vec![VertexSet::new(); order.len()];
    for i in (0..order.len()).rev() {
        let v = order[i];
        let mut bag: VertexSet = neighbours[&v].iter().copied().filter(|u| position[u] < i).collect();
        bag.insert(v);
        connect(&bag, &mut neighbours);
        bags[i] = bag;
    }
    bags
}

/// Disruption-free bags from the closed form `e_i = {v_i} ∪ (N(S_i) ∩
/// {v_1, …, v_{i-1}})` where `S_i` is the component of `v_i` among
/// `v_i, …, v_ℓ`.
pub fn disruption_free_closed_form_in(h: &Hypergraph, order: &[Vertex]) -> Result<Vec<VertexSet>, DecompositionError> {
    let position: BTreeMap<Vertex, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut bags = Vec::with_capacity(order.len());
    for (i, &v) in order.iter().enumerate() {
        let suffix: VertexSet = order[i..].iter().copied().collect();
        let component = h.component_from(v, &suffix)?;
        let mut bag: VertexSet = h.neighbors(&component)?.into_iter().filter(|u| position[u] < i).collect();
        bag.insert(v);
        bags.push(bag);
    }
    Ok(bags)
}

pub fn disruption_free_iterative(q: &JoinQuery, l: &VariableOrder) -> Vec<VertexSet> {
    disruption_free_iterative_in(&q.hypergraph(), l.as_slice())
}

pub fn disruption_free_closed_form(q: &JoinQuery, l: &VariableOrder) -> Vec<VertexSet> {
    disruption_free_closed_form_in(&q.hypergraph(), l.as_slice()).expect("query hypergraph contains every variable")
}

/// Parent of bag `i` is the bag of the latest variable of `e_i ∖ {v_i}`;
/// bags with `e_i = {v_i}` are roots.
pub fn join_forest(bags: &[VertexSet], order: &[Vertex]) -> Result<Vec<Option<usize>>, DecompositionError> {
    let position: BTreeMap<Vertex, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut parent = Vec::with_capacity(bags.len());
    for (i, bag) in bags.iter().enumerate() {
        let own = order[i];
        let p = bag.iter().filter(|&&u| u != own).map(|u| position[u]).max();
        if let Some(p) = p {
            let interface_ok = p < i && bag.iter().all(|u| *u == own || bags[p].contains(u));
            if !interface_ok {
                return Err(DecompositionError::RunningIntersection { bag: i });
            }
        }
        parent.push(p);
    }
    Ok(parent)
}

/// Cover of one bag by the original atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagCover {
    pub cover: FractionalCover,
    /// For each cover edge, the first atom whose scope intersected with the
    /// bag equals that edge.
    pub atoms: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub order: VariableOrder,
    /// `bags[i]` is the bag of `order.var(i)`.
    pub bags: Vec<VertexSet>,
    pub parent: Vec<Option<usize>>,
    pub covers: Vec<BagCover>,
    pub iota: Rational,
    /// Smallest index of a bag attaining `iota`.
    pub witness_bag: usize,
}

impl Decomposition {
    pub fn compute(q: &JoinQuery, l: &VariableOrder) -> Decomposition {
        let h = q.hypergraph();
        let bags = disruption_free_iterative_in(&h, l.as_slice());
        let parent = join_forest(&bags, l.as_slice()).expect("disruption-free bags satisfy running intersection");
        let covers: Vec<BagCover> = bags
            .iter()
            .map(|bag| {
                let induced = h.induced(bag).expect("bag variables belong to the query");
                let cover = fractional_edge_cover(&induced).expect("every variable occurs in an atom");
                let atoms = cover
                    .edges
                    .iter()
                    .map(|edge| {
                        q.atoms()
                            .iter()
                            .position(|a| a.scope().intersection(bag).copied().collect::<VertexSet>() == *edge)
                            .expect("induced edge comes from an atom")
                    })
                    .collect();
                BagCover { cover, atoms }
            })
            .collect();
        let (iota, witness_bag) = max_with_index(covers.iter().map(|c| &c.cover.total));
        Decomposition { order: l.clone(), bags, parent, covers, iota, witness_bag }
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.bags.len()];
        for (i, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        children
    }

    /// Variables of bag `i` other than its own, in order position.
    pub fn interface(&self, i: usize) -> Vec<Vertex> {
        let own = self.order.var(i);
        let mut vars: Vec<Vertex> = self.bags[i].iter().copied().filter(|&v| v != own).collect();
        vars.sort_by_key(|&v| self.order.position(v));
        vars
    }
}

fn max_with_index<'a>(values: impl Iterator<Item = &'a Rational>) -> (Rational, usize) {
    let mut best: Option<(Rational, usize)> = None;
    for (i, v) in values.enumerate() {
        if best.as_ref().is_none_or(|(b, _)| v > b) {
            best = Some((v.clone(), i));
        }
    }
    best.unwrap_or((Rational::zero(), 0))
}

/// Incompatibility number: the largest `ρ*` of an induced bag, with the
/// smallest index attaining it.
pub fn incompatibility_number(q: &JoinQuery, l: &VariableOrder) -> (Rational, usize) {
    let d = Decomposition::compute(q, l);
    (d.iota, d.witness_bag)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionCheck {
    pub covers_all_edges: bool,
    pub acyclic: bool,
    pub trio_free: bool,
    /// Largest `ρ*` of a bag with respect to the edges of `h`.
    pub width: Rational,
    /// Every disruption-free bag is contained in some supplied bag.
    pub contains_disruption_free: bool,
}

/// Evaluates a user-supplied hypertree decomposition of `h` against `order`.
pub fn check_decomposition(
    h: &Hypergraph,
    bags: &[VertexSet],
    order: &[Vertex],
) -> Result<DecompositionCheck, DecompositionError> {
    let bag_graph = Hypergraph::new(h.vertices().iter().copied(), bags.iter().cloned())?;
    let covers_all_edges = h.edges().iter().all(|e| bags.iter().any(|b| e.is_subset(b)));
    let acyclic = bag_graph.is_acyclic();
    let trio_free = disruptive_trios_in(&bag_graph, order).is_empty();
    let mut widths = Vec::with_capacity(bags.len());
    for b in bags {
        widths.push(fractional_edge_cover(&h.induced(b)?)?.total);
    }
    let (width, _) = max_with_index(widths.iter());
    let contains_disruption_free = disruption_free_iterative_in(h, order)
        .iter()
        .all(|e| bags.iter().any(|b| e.is_subset(b)));
    Ok(DecompositionCheck { covers_all_edges, acyclic, trio_free, width, contains_disruption_free })
}

/// Convenience constructor for integer rationals.
pub fn rational(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}
