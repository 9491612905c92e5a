//! Edge-weighted complete multipartite graphs and zero-weight cliques.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::{parameter, LabError};

/// A complete multipartite graph with one weight per cross-part edge.
/// Vertices are `(part, index)` pairs. With `modulus` set, weights are
/// residues in `0..p` and clique weights are taken mod `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedCliqueInstance {
    parts: Vec<usize>,
    /// `weights[&(a, b)]` for parts `a < b`, row-major by vertex of `a`.
    weights: BTreeMap<(usize, usize), Vec<i64>>,
    modulus: Option<u64>,
}

impl WeightedCliqueInstance {
    /// All weights start at zero.
    pub fn zeros(parts: Vec<usize>) -> Result<Self, LabError> {
        if parts.len() < 2 {
            return Err(parameter("need at least two parts"));
        }
        let mut weights = BTreeMap::new();
        for a in 0..parts.len() {
            for b in a + 1..parts.len() {
                weights.insert((a, b), vec![0; parts[a] * parts[b]]);
            }
        }
        Ok(WeightedCliqueInstance { parts, weights, modulus: None })
    }

    pub fn from_fn(parts: Vec<usize>, mut weight: impl FnMut(usize, usize, usize, usize) -> i64) -> Result<Self, LabError> {
        let mut g = Self::zeros(parts)?;
        for (&(a, b), ws) in g.weights.iter_mut() {
            for u in 0..g.parts[a] {
                for v in 0..g.parts[b] {
                    ws[u * g.parts[b] + v] = weight(a, u, b, v);
                }
            }
        }
        Ok(g)
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn modulus(&self) -> Option<u64> {
        self.modulus
    }

    fn slot(&self, a: usize, u: usize, b: usize, v: usize) -> ((usize, usize), usize) {
        if a < b {
            ((a, b), u * self.parts[b] + v)
        } else {
            ((b, a), v * self.parts[a] + u)
        }
    }

    /// Weight between vertex `u` of part `a` and vertex `v` of part `b`.
    pub fn weight(&self, a: usize, u: usize, b: usize, v: usize) -> i64 {
        let (key, i) = self.slot(a, u, b, v);
        self.weights[&key][i]
    }

    pub fn set_weight(&mut self, a: usize, u: usize, b: usize, v: usize, w: i64) {
        let (key, i) = self.slot(a, u, b, v);
        self.weights.get_mut(&key).expect("distinct parts")[i] = w;
    }

    pub fn max_abs_weight(&self) -> u64 {
        self.weights.values().flatten().map(|w| w.unsigned_abs()).max().unwrap_or(0)
    }

    /// Sum of the weights among the chosen vertices of parts `0..clique.len()`,
    /// reduced mod `p` in field mode.
    pub fn clique_weight(&self, clique: &[usize]) -> i128 {
        let mut sum: i128 = 0;
        for a in 0..clique.len() {
            for b in a + 1..clique.len() {
                sum += i128::from(self.weight(a, clique[a], b, clique[b]));
            }
        }
        match self.modulus {
            Some(p) => sum.rem_euclid(i128::from(p)),
            None => sum,
        }
    }

    pub fn is_zero_clique(&self, clique: &[usize]) -> bool {
        clique.len() == self.parts.len() && clique.iter().zip(&self.parts).all(|(&v, &n)| v < n) && self.clique_weight(clique) == 0
    }

    /// Field-mode copy: weights mapped to residues mod `p`.
    pub fn reduce_mod(&self, p: u64) -> WeightedCliqueInstance {
        let m = p as i64;
        let weights = self.weights.iter().map(|(&k, ws)| (k, ws.iter().map(|w| w.rem_euclid(m)).collect())).collect();
        WeightedCliqueInstance { parts: self.parts.clone(), weights, modulus: Some(p) }
    }

    pub(crate) fn with_weights(&self, weights: BTreeMap<(usize, usize), Vec<i64>>, modulus: Option<u64>) -> Self {
        WeightedCliqueInstance { parts: self.parts.clone(), weights, modulus }
    }

    /// Every vertex choice across all parts, in lexicographic order.
    pub fn cliques(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let total: usize = self.parts.iter().product();
        (0..total).map(move |mut code| {
            let mut clique = vec![0; self.parts.len()];
            for (slot, &n) in clique.iter_mut().zip(&self.parts).rev() {
                *slot = code % n;
                code /= n;
            }
            clique
        })
    }

    /// Parses `parts n1 n2 ...` followed by `u v w` lines, where vertices are
    /// numbered consecutively across parts. Unlisted cross-part pairs get a
    /// weight large enough that no zero clique can use them.
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });
        let (first, header) = lines.next().ok_or(LabError::Graph { line: 1, message: "missing header".into() })?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("parts") {
            return Err(LabError::Graph { line: first + 1, message: "expected `parts n1 n2 ...`".into() });
        }
        let parts = fields
            .map(|f| f.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| LabError::Graph { line: first + 1, message: e.to_string() })?;
        let mut g = Self::zeros(parts.clone()).map_err(|e| LabError::Graph { line: first + 1, message: e.to_string() })?;
        let mut part_of = Vec::new();
        for (a, &n) in parts.iter().enumerate() {
            part_of.extend((0..n).map(|u| (a, u)));
        }
        let mut seen: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for (line, text) in lines {
            let err = |message: String| LabError::Graph { line: line + 1, message };
            let f: Vec<&str> = text.split_whitespace().collect();
            if f.len() != 3 {
                return Err(err("expected `u v w`".into()));
            }
            let u: usize = f[0].parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
            let v: usize = f[1].parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
            let w: i64 = f[2].parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
            let (&(a, x), &(b, y)) = match (part_of.get(u), part_of.get(v)) {
                (Some(p), Some(q)) => (p, q),
                _ => return Err(err("vertex out of range".into())),
            };
            if a == b {
                return Err(err("edge inside one part".into()));
            }
            if seen.insert((u.min(v), u.max(v)), w).is_some() {
                return Err(err("duplicate edge".into()));
            }
            g.set_weight(a, x, b, y, w);
        }
        let k1 = parts.len() as i64;
        let max_abs = seen.values().map(|w| w.unsigned_abs()).max().unwrap_or(0) as i64;
        let big = k1 * k1 * (max_abs + 1);
        for u in 0..part_of.len() {
            for v in u + 1..part_of.len() {
                let ((a, x), (b, y)) = (part_of[u], part_of[v]);
                if a != b && !seen.contains_key(&(u, v)) {
                    g.set_weight(a, x, b, y, big);
                }
            }
        }
        Ok(g)
    }

    /// Inverse of [`parse`](Self::parse) for complete instances.
    pub fn to_text(&self) -> String {
        let mut out = String::from("parts");
        for n in &self.parts {
            write!(out, " {n}").unwrap();
        }
        out.push('\n');
        let starts: Vec<usize> = self.parts.iter().scan(0, |acc, &n| Some(std::mem::replace(acc, *acc + n))).collect();
        for &(a, b) in self.weights.keys() {
            for u in 0..self.parts[a] {
                for v in 0..self.parts[b] {
                    writeln!(out, "{} {} {}", starts[a] + u, starts[b] + v, self.weight(a, u, b, v)).unwrap();
                }
            }
        }
        out
    }
}

/// Exhaustive search for a zero-weight clique, first in lexicographic order.
pub fn brute_zero_clique(g: &WeightedCliqueInstance) -> Option<Vec<usize>> {
    g.cliques().find(|c| g.clique_weight(c) == 0)
}

pub fn count_zero_cliques(g: &WeightedCliqueInstance) -> usize {
    g.cliques().filter(|c| g.clique_weight(c) == 0).count()
}

/// An arbitrary undirected graph with integer edge weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedGraph {
    pub vertices: usize,
    pub edges: BTreeMap<(usize, usize), i64>,
}

impl WeightedGraph {
    pub fn new(vertices: usize) -> Self {
        WeightedGraph { vertices, edges: BTreeMap::new() }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, w: i64) {
        assert!(u != v && u < self.vertices && v < self.vertices);
        self.edges.insert((u.min(v), u.max(v)), w);
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<i64> {
        self.edges.get(&(u.min(v), u.max(v))).copied()
    }

    /// Zero-weight cliques on `size` distinct vertices, as increasing
    /// vertex lists.
    pub fn count_zero_cliques(&self, size: usize) -> usize {
        fn extend(g: &WeightedGraph, size: usize, chosen: &mut Vec<usize>, sum: i128, from: usize) -> usize {
            if chosen.len() == size {
                return usize::from(sum == 0);
            }
            let mut count = 0;
            for v in from..g.vertices {
                let mut added = 0i128;
                if chosen.iter().all(|&u| g.weight(u, v).inspect(|&w| added += i128::from(w)).is_some()) {
                    chosen.push(v);
                    count += extend(g, size, chosen, sum + added, v + 1);
                    chosen.pop();
                }
            }
            count
        }
        extend(self, size, &mut Vec::new(), 0, 0)
    }
}

/// Copies the vertex set once per part. Edges between copies of adjacent
/// distinct vertices keep their weight; all other cross pairs get
/// `parts² · (max|w| + 1)`, more than any clique's other edges can cancel.
/// Zero cliques of the result are exactly the orderings of zero cliques of
/// `g` on `parts` vertices.
pub fn to_complete_k_partite(g: &WeightedGraph, parts: usize) -> Result<WeightedCliqueInstance, LabError> {
    let max_abs = g.edges.values().map(|w| w.unsigned_abs()).max().unwrap_or(0) as i64;
    let k1 = parts as i64;
    let big = k1 * k1 * (max_abs + 1);
    WeightedCliqueInstance::from_fn(vec![g.vertices; parts], |_, u, _, v| {
        if u == v {
            big
        } else {
            g.weight(u, v).unwrap_or(big)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planted_triangle_is_found() {
        let mut g = WeightedCliqueInstance::from_fn(vec![3, 3, 3], |_, _, _, _| 1).unwrap();
        assert_eq!(brute_zero_clique(&g), None);
        g.set_weight(0, 1, 1, 2, 4);
        g.set_weight(1, 2, 2, 0, -7);
        g.set_weight(2, 0, 0, 1, 3);
        assert_eq!(brute_zero_clique(&g), Some(vec![1, 2, 0]));
        assert!(g.is_zero_clique(&[1, 2, 0]));
        assert!(!g.is_zero_clique(&[1, 2]));
    }

    #[test]
    fn two_single_vertex_parts() {
        let g = WeightedCliqueInstance::from_fn(vec![1, 1], |_, _, _, _| 0).unwrap();
        assert_eq!(brute_zero_clique(&g), Some(vec![0, 0]));
        assert!(WeightedCliqueInstance::zeros(vec![4]).is_err());
    }

    #[test]
    fn field_mode_reduces_weights() {
        let g = WeightedCliqueInstance::from_fn(vec![1, 1, 1], |a, _, b, _| if (a, b) == (0, 1) { -3 } else { 4 }).unwrap();
        assert_eq!(g.clique_weight(&[0, 0, 0]), 5);
        let f = g.reduce_mod(5);
        assert_eq!(f.weight(0, 0, 1, 0), 2);
        assert_eq!(f.clique_weight(&[0, 0, 0]), 0);
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = WeightedCliqueInstance::from_fn(vec![2, 3, 1], |_, _, _, _| rng.gen_range(-9..10)).unwrap();
        assert_eq!(WeightedCliqueInstance::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn parse_fills_missing_edges_and_reports_lines() {
        let g = WeightedCliqueInstance::parse("# demo\nparts 1 1 1\n0 1 2\n1 2 -2\n").unwrap();
        // missing pair (0, 2) gets 3^2 * (2 + 1)
        assert_eq!(g.weight(0, 0, 2, 0), 27);
        assert_eq!(brute_zero_clique(&g), None);
        match WeightedCliqueInstance::parse("parts 1 1\n0 1\n") {
            Err(LabError::Graph { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(WeightedCliqueInstance::parse("parts 2 1\n0 1 1\n").is_err());
        assert!(WeightedCliqueInstance::parse("nodes 2\n").is_err());
    }

    #[test]
    fn partite_transform_on_zero_triangle() {
        let mut g = WeightedGraph::new(3);
        g.add_edge(0, 1, 0);
        g.add_edge(1, 2, 0);
        g.add_edge(0, 2, 0);
        let h = to_complete_k_partite(&g, 3).unwrap();
        assert!(brute_zero_clique(&h).is_some());
        assert_eq!(count_zero_cliques(&h), 6);
        assert_eq!(brute_zero_clique(&to_complete_k_partite(&WeightedGraph::new(4), 3).unwrap()), None);
    }

    #[test]
    fn partite_transform_preserves_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let mut g = WeightedGraph::new(6);
            for u in 0..6 {
                for v in u + 1..6 {
                    if rng.gen_bool(0.7) {
                        g.add_edge(u, v, rng.gen_range(-3..=3));
                    }
                }
            }
            let h = to_complete_k_partite(&g, 3).unwrap();
            assert_eq!(count_zero_cliques(&h), 6 * g.count_zero_cliques(3));
        }
    }
}
