//! Hypergraphs over interned vertex identifiers and the structural
//! primitives the rest of the crate is built on: GYO elimination,
//! induced subhypergraphs, neighbourhoods and connected components.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// Interned vertex identifier. For query hypergraphs this is the index of
/// the variable in the query head.
pub type Vertex = usize;

pub type VertexSet = BTreeSet<Vertex>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HypergraphError {
    #[error("unknown vertex {0}")]
    UnknownVertex(Vertex),
    #[error("vertex {0} is not in the allowed set")]
    NotAllowed(Vertex),
}

/// A normalized hypergraph: no empty edges, no duplicate edges, and every
/// vertex of every edge is listed in `vertices`.
///
/// Edge order is first-occurrence order of the input, which lets callers map
/// an edge back to the atom that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    vertices: Vec<Vertex>,
    edges: Vec<VertexSet>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcyclicityReport {
    pub acyclic: bool,
    pub elimination_order: Vec<Vertex>,
    /// Irreducible kernel left over when the hypergraph is cyclic.
    pub witness: Vec<VertexSet>,
}

impl Hypergraph {
    pub fn new<I, E>(vertices: I, edges: E) -> Result<Self, HypergraphError>
    where
        I: IntoIterator<Item = Vertex>,
        E: IntoIterator<Item = VertexSet>,
    {
        let mut seen = VertexSet::new();
        let vertices: Vec<Vertex> = vertices.into_iter().filter(|v| seen.insert(*v)).collect();
        let mut out: Vec<VertexSet> = Vec::new();
        for e in edges {
            if let Some(v) = e.iter().find(|v| !seen.contains(v)) {
                return Err(HypergraphError::UnknownVertex(*v));
            }
            if !e.is_empty() && !out.contains(&e) {
                out.push(e);
            }
        }
        Ok(Hypergraph { vertices, edges: out })
    }

    /// Builds a hypergraph whose vertex set is the sorted union of the edges.
    pub fn from_edges<E: IntoIterator<Item = VertexSet>>(edges: E) -> Self {
        let edges: Vec<VertexSet> = edges.into_iter().collect();
        let vertices: VertexSet = edges.iter().flatten().copied().collect();
        Hypergraph::new(vertices, edges).expect("vertices are the union of the edges")
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[VertexSet] {
        &self.edges
    }

    pub fn contains_vertex(&self, v: Vertex) -> bool {
        self.vertices.contains(&v)
    }

    fn check_subset<'a>(&self, s: impl IntoIterator<Item = &'a Vertex>) -> Result<(), HypergraphError> {
        for v in s {
            if !self.contains_vertex(*v) {
                return Err(HypergraphError::UnknownVertex(*v));
            }
        }
        Ok(())
    }

    /// True iff `u` and `v` are distinct and share an edge.
    pub fn adjacent(&self, u: Vertex, v: Vertex) -> bool {
        u != v && self.edges.iter().any(|e| e.contains(&u) && e.contains(&v))
    }

    /// GYO reduction. Vertices contained in at most one edge are removed
    /// first (smallest identifier first); otherwise the first edge contained
    /// in another edge is removed. The hypergraph is acyclic iff this empties
    /// the vertex set.
    pub fn gyo_reduce(&self) -> AcyclicityReport {
        let mut vertices: VertexSet = self.vertices.iter().copied().collect();
        let mut edges: Vec<VertexSet> = self.edges.clone();
        let mut elimination_order = Vec::new();
        loop {
            let private = vertices
                .iter()
                .copied()
                .find(|v| edges.iter().filter(|e| e.contains(v)).count() <= 1);
            if let Some(v) = private {
                vertices.remove(&v);
                for e in edges.iter_mut() {
                    e.remove(&v);
                }
                elimination_order.push(v);
                continue;
            }
            edges.sort();
            let contained = (0..edges.len()).find(|&i| {
                (0..edges.len()).any(|j| j != i && edges[i].is_subset(&edges[j]))
            });
            match contained {
                Some(i) => {
                    edges.remove(i);
                }
                None => break,
            }
        }
        let acyclic = vertices.is_empty();
        AcyclicityReport {
            acyclic,
            elimination_order,
            witness: if acyclic { Vec::new() } else { edges },
        }
    }

    pub fn is_acyclic(&self) -> bool {
        self.gyo_reduce().acyclic
    }

    /// The subhypergraph induced by `s`: edges `e ∩ s`, empty ones dropped.
    pub fn induced(&self, s: &VertexSet) -> Result<Hypergraph, HypergraphError> {
        self.check_subset(s)?;
        let vertices = self.vertices.iter().copied().filter(|v| s.contains(v));
        let edges = self.edges.iter().map(|e| e.intersection(s).copied().collect::<VertexSet>());
        Hypergraph::new(vertices, edges)
    }

    /// Vertices sharing an edge with some member of `s`, minus `s` itself.
    pub fn neighbors(&self, s: &VertexSet) -> Result<VertexSet, HypergraphError> {
        self.check_subset(s)?;
        let mut out = VertexSet::new();
        for e in &self.edges {
            if !e.is_disjoint(s) {
                out.extend(e.difference(s).copied());
            }
        }
        Ok(out)
    }

    /// Connected component of `v` in the subhypergraph induced by `allowed`.
    pub fn component_from(&self, v: Vertex, allowed: &VertexSet) -> Result<VertexSet, HypergraphError> {
        self.check_subset(allowed)?;
        if !allowed.contains(&v) {
            return Err(HypergraphError::NotAllowed(v));
        }
        let mut component = VertexSet::from([v]);
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.contains(&u)) {
                for w in e.intersection(allowed) {
                    if component.insert(*w) {
                        queue.push_back(*w);
                    }
                }
            }
        }
        Ok(component)
    }
}

impl fmt::Display for Hypergraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.edges.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            let members: Vec<String> = e.iter().map(|v| v.to_string()).collect();
            write!(f, "{{{}}}", members.join(","))?;
        }
        write!(f, ")")
    }
}
