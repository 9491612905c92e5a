//! Zero-clique detection through set-intersection instances.
//!
//! After re-weighting, every cross clique `(v1..vk, u)` splits into `k`
//! edges into the last part plus the weight among `v1..vk`. Bucketing all
//! weights by interval, a zero clique must land in an interval tuple whose
//! sum contains zero. Each such tuple gives one set-intersection instance:
//! vertex `v` of part `i` owns the last-part vertices `u` with
//! `w'(v, u) ∈ I_i`, and queries are the tuples `(v1..vk)` whose internal
//! weight lies in `I_0`.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::clique::WeightedCliqueInstance;
use crate::field::{interval_tuples, prime_interval, randomize_weights, sample_prime, IntervalSplit, Variant};
use crate::setfamily::{IntersectionBackend, SetFamilyInstance};
use crate::{parameter, LabError};

/// Default interval exponent `1/(2k)`.
pub fn default_rho(k: usize) -> BigRational {
    BigRational::new(1.into(), (2 * k).into())
}

/// Largest integer `t` with `t^den <= target`.
fn integer_root(target: &BigUint, den: u32) -> BigUint {
    let (mut lo, mut hi) = (BigUint::zero(), BigUint::one());
    while hi.pow(den) <= *target {
        hi <<= 1u32;
    }
    while &lo + 1u32 < hi {
        let mid: BigUint = (&lo + &hi) >> 1u32;
        if mid.pow(den) <= *target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `floor(scale · n^exponent)` and whether it is exact, for rational
/// `exponent = a/b` (possibly negative).
fn scaled_power_floor(scale: &BigUint, n: u64, exponent: &BigRational) -> (BigUint, bool) {
    let a = exponent.numer().to_i64().expect("small exponent");
    let b = exponent.denom().to_u32().expect("small exponent");
    let n = BigUint::from(n);
    // t <= scale · n^(a/b)  <=>  t^b · n^(-a) <= scale^b · n^a, by sign of a
    let (lhs_factor, rhs) = if a >= 0 {
        (BigUint::one(), scale.pow(b) * n.pow(a as u32))
    } else {
        (n.pow((-a) as u32), scale.pow(b))
    };
    if lhs_factor.is_zero() {
        return (BigUint::zero(), true);
    }
    // largest t with t^b · lhs_factor <= rhs
    let t = integer_root(&(&rhs / &lhs_factor), b);
    let exact = t.pow(b) * &lhs_factor == rhs;
    (t, exact)
}

/// Number of intervals: `n^rho` rounded to the nearest integer, at least 1.
pub fn interval_count(n: usize, rho: &BigRational) -> u64 {
    let (twice, _) = scaled_power_floor(&BigUint::from(2u32), n as u64, rho);
    ((twice + 1u32) >> 1u32).to_u64().expect("small").max(1)
}

/// The witness cap `ceil(100 · 3^k · n^(1 - k·rho))`.
pub fn query_cap(k: usize, n: usize, rho: &BigRational) -> BigUint {
    let exponent = BigRational::one() - BigRational::from_integer(k.into()) * rho;
    let scale = BigUint::from(100u32) * BigUint::from(3u32).pow(k as u32);
    let (floor, exact) = scaled_power_floor(&scale, n as u64, &exponent);
    if exact {
        floor
    } else {
        floor + 1u32
    }
}

/// One set-intersection instance, with the vertex tuple behind each query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionInstance {
    /// Interval indices `(I_0, ..., I_k)`.
    pub tuple: Vec<u64>,
    pub instance: SetFamilyInstance,
}

/// Instances for every interval tuple whose sum contains zero. Set `j` of
/// family `i` belongs to vertex `j` of part `i`; elements are last-part
/// vertices.
pub fn build_intersection_instances<'a>(
    g: &'a WeightedCliqueInstance,
    split: IntervalSplit,
) -> impl Iterator<Item = ReductionInstance> + 'a {
    let k = g.num_parts() - 1;
    let last = g.parts()[k];
    let head: Vec<usize> = g.parts()[..k].to_vec();
    // internal weight of every head tuple, bucketed once
    let head_tuples: Vec<(Vec<usize>, u64)> = {
        let sub = WeightedCliqueInstance::from_fn(head.clone(), |a, u, b, v| g.weight(a, u, b, v))
            .map(|s| s.reduce_mod(g.modulus().expect("field mode")));
        match sub {
            Ok(sub) => sub.cliques().map(|c| {
                let w = sub.clique_weight(&c) as u64;
                (c, split.index_of(w))
            }).collect(),
            Err(_) => Vec::new(),
        }
    };
    interval_tuples(split, k).map(move |tuple| {
        let families = (0..k)
            .map(|i| {
                (0..head[i])
                    .map(|v| {
                        (0..last).filter(|&u| split.index_of(g.weight(i, v, k, u) as u64) == tuple[i + 1]).collect::<BTreeSet<_>>()
                    })
                    .collect()
            })
            .collect();
        let queries = head_tuples.iter().filter(|(_, t)| *t == tuple[0]).map(|(c, _)| c.clone()).collect();
        ReductionInstance { tuple, instance: SetFamilyInstance { universe: last, families, queries } }
    })
}

/// Outcome of one run of the reduction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionReport {
    pub clique: Option<Vec<usize>>,
    pub p: u64,
    pub intervals: u64,
    pub cap: usize,
    pub instances: usize,
    pub queries: usize,
}

/// Looks for a zero clique of the integer-weighted `g` (at least three
/// parts) through set-intersection queries answered by `backend`. A
/// returned clique is always checked against the original weights.
pub fn find_zero_clique_via_reduction(
    g: &WeightedCliqueInstance,
    rho: &BigRational,
    rng: &mut impl Rng,
    backend: &dyn IntersectionBackend,
) -> Result<ReductionReport, LabError> {
    if g.modulus().is_some() {
        return Err(parameter("expected integer weights"));
    }
    if *rho <= BigRational::zero() {
        return Err(parameter("rho must be positive"));
    }
    let k = g.num_parts() - 1;
    let n = g.num_vertices();
    let (lo, hi) = prime_interval(g.num_parts(), g.max_abs_weight());
    let p = sample_prime(lo, hi, rng)?;
    let (field, _) = randomize_weights(g, p, Variant::LastPart, rng)?;
    let split = IntervalSplit::new(p, interval_count(n, rho).min(p))?;
    let cap = query_cap(k, n, rho).to_usize().unwrap_or(usize::MAX);
    let mut report = ReductionReport { clique: None, p, intervals: split.m, cap, instances: 0, queries: 0 };
    for built in build_intersection_instances(&field, split) {
        report.instances += 1;
        report.queries += built.instance.queries.len();
        if built.instance.queries.is_empty() {
            continue;
        }
        let answers = backend.witnesses(&built.instance, cap)?;
        for (query, witnesses) in built.instance.queries.iter().zip(answers) {
            for u in witnesses {
                let mut clique = query.clone();
                clique.push(u);
                if g.is_zero_clique(&clique) {
                    report.clique = Some(clique);
                    return Ok(report);
                }
            }
        }
    }
    Ok(report)
}
