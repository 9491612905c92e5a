//! Prime fields, weight re-randomization and interval tuples.

use std::collections::{BTreeMap, BTreeSet};

use primal_check::miller_rabin;
use rand::Rng;

use crate::clique::WeightedCliqueInstance;
use crate::{parameter, LabError};

/// Rejection-samples a prime from `lo..=hi`.
pub fn sample_prime(lo: u64, hi: u64, rng: &mut impl Rng) -> Result<u64, LabError> {
    if lo > hi {
        return Err(parameter("empty prime interval"));
    }
    if !(lo..=hi).any(miller_rabin) {
        return Err(parameter(format!("no prime in [{lo}, {hi}]")));
    }
    loop {
        let candidate = rng.gen_range(lo..=hi);
        if miller_rabin(candidate) {
            return Ok(candidate);
        }
    }
}

/// `[10(k+1)² W, 100(k+1)² W]` for `k + 1` parts and weights bounded by
/// `W` in absolute value. Any prime in it exceeds every clique weight.
pub fn prime_interval(parts: usize, max_abs_weight: u64) -> (u64, u64) {
    let base = (parts as u64).pow(2) * max_abs_weight.max(1);
    (10 * base, 100 * base)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Shifts only edges into the last part.
    LastPart,
    /// Additionally shifts edges leaving the first part by a per-vertex
    /// value that cancels between the first two parts.
    FirstAndLastPart,
}

/// The random values behind a re-weighting: `x`, `shift[u][j]` for every
/// vertex `u` of the last part and `j` in `0..k-1`, and `first[v]` for
/// every vertex of the first part (zero in [`Variant::LastPart`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Randomization {
    pub p: u64,
    pub variant: Variant,
    pub x: u64,
    pub shift: Vec<Vec<u64>>,
    pub first: Vec<u64>,
}

impl Randomization {
    pub fn sample(g: &WeightedCliqueInstance, p: u64, variant: Variant, rng: &mut impl Rng) -> Randomization {
        let k = g.num_parts() - 1;
        let x = loop {
            let x = rng.gen_range(0..p);
            if x != 0 {
                break x;
            }
        };
        let shift = (0..g.parts()[k]).map(|_| (0..k - 1).map(|_| rng.gen_range(0..p)).collect()).collect();
        let first = match variant {
            Variant::LastPart => vec![0; g.parts()[0]],
            Variant::FirstAndLastPart => (0..g.parts()[0]).map(|_| rng.gen_range(0..p)).collect(),
        };
        Randomization { p, variant, x, shift, first }
    }

    /// The additive term for the edge between vertex `v` of part `a` and
    /// vertex `u` of part `b`, `a < b`.
    fn offset(&self, k: usize, a: usize, v: usize, b: usize, u: usize) -> i128 {
        let y = |u: usize, j: usize| i128::from(self.shift[u][j - 1]);
        let mut term = 0i128;
        if b == k {
            term += if a == 0 {
                y(u, 1)
            } else if a < k - 1 {
                y(u, a + 1) - y(u, a)
            } else {
                -y(u, k - 1)
            };
        }
        if self.variant == Variant::FirstAndLastPart && a == 0 {
            if b == k {
                term -= i128::from(self.first[v]);
            } else if b == 1 {
                term += i128::from(self.first[v]);
            }
        }
        term
    }

    /// `x · w + offset`, as residues mod `p`.
    pub fn apply(&self, g: &WeightedCliqueInstance) -> WeightedCliqueInstance {
        let k = g.num_parts() - 1;
        let p = i128::from(self.p);
        let mut weights = BTreeMap::new();
        for a in 0..=k {
            for b in a + 1..=k {
                let mut ws = Vec::with_capacity(g.parts()[a] * g.parts()[b]);
                for v in 0..g.parts()[a] {
                    for u in 0..g.parts()[b] {
                        let w = i128::from(self.x) * i128::from(g.weight(a, v, b, u)) + self.offset(k, a, v, b, u);
                        ws.push(w.rem_euclid(p) as i64);
                    }
                }
                weights.insert((a, b), ws);
            }
        }
        g.with_weights(weights, Some(self.p))
    }
}

/// Samples a re-weighting and applies it. Requires at least three parts.
pub fn randomize_weights(
    g: &WeightedCliqueInstance,
    p: u64,
    variant: Variant,
    rng: &mut impl Rng,
) -> Result<(WeightedCliqueInstance, Randomization), LabError> {
    if g.num_parts() < 3 {
        return Err(parameter("re-weighting needs at least three parts"));
    }
    let r = Randomization::sample(g, p, variant, rng);
    Ok((r.apply(g), r))
}

/// `0..p` cut into `m` consecutive intervals; interval `t` starts at
/// `floor(t·p/m)`, so lengths differ by at most one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalSplit {
    pub p: u64,
    pub m: u64,
}

impl IntervalSplit {
    pub fn new(p: u64, m: u64) -> Result<Self, LabError> {
        if m == 0 || m > p {
            return Err(parameter("need 1 <= intervals <= p"));
        }
        Ok(IntervalSplit { p, m })
    }

    pub fn start(&self, t: u64) -> u64 {
        (u128::from(t) * u128::from(self.p) / u128::from(self.m)) as u64
    }

    /// Inclusive bounds of interval `t`.
    pub fn bounds(&self, t: u64) -> (u64, u64) {
        (self.start(t), self.start(t + 1) - 1)
    }

    pub fn index_of(&self, value: u64) -> u64 {
        let (v, m, p) = (u128::from(value), u128::from(self.m), u128::from(self.p));
        (((v + 1) * m).div_ceil(p) - 1) as u64
    }

    /// Whether some multiple of `p` lies in the integer sum of the intervals.
    pub fn sum_contains_zero(&self, tuple: &[u64]) -> bool {
        let (lo, hi) = self.sum_bounds(tuple);
        let p = u128::from(self.p);
        lo.div_ceil(p) * p <= hi
    }

    fn sum_bounds(&self, tuple: &[u64]) -> (u128, u128) {
        tuple.iter().fold((0, 0), |(lo, hi), &t| {
            let (a, b) = self.bounds(t);
            (lo + u128::from(a), hi + u128::from(b))
        })
    }

    /// Intervals `t` that make `prefix ++ [t]` sum-contain zero, ascending.
    pub fn completions(&self, prefix: &[u64]) -> Vec<u64> {
        let (lo, hi) = self.sum_bounds(prefix);
        let p = u128::from(self.p);
        let mut out = BTreeSet::new();
        // the last interval must meet [c·p - hi, c·p - lo] for some c
        let max_c = hi.div_ceil(p) + 1;
        for c in 0..=max_c {
            let top = c * p;
            if top < lo {
                continue;
            }
            let a = top.saturating_sub(hi);
            let b = (top - lo).min(p - 1);
            if a > b {
                continue;
            }
            out.extend(self.index_of(a as u64)..=self.index_of(b as u64));
        }
        out.into_iter().collect()
    }
}

/// All tuples `(I_0, ..., I_k)` of interval indices whose sum contains zero
/// mod `p`, in lexicographic order.
pub fn interval_tuples(split: IntervalSplit, k: usize) -> impl Iterator<Item = Vec<u64>> {
    let m = split.m;
    let prefixes: u64 = m.pow(k as u32);
    (0..prefixes).flat_map(move |mut code| {
        let mut prefix = vec![0u64; k];
        for slot in prefix.iter_mut().rev() {
            *slot = code % m;
            code /= m;
        }
        split.completions(&prefix).into_iter().map(move |t| {
            let mut tuple = prefix.clone();
            tuple.push(t);
            tuple
        })
    })
}
