//! Acceptance suite: one PASS/FAIL line per criterion, each run against its
//! stated time budget. Exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use lexjoin::access::{AccessError, AccessIndex};
use lexjoin::decomposition::{
    disruption_free_closed_form, disruption_free_iterative, fractional_edge_cover, fractional_independent_set,
    join_forest, rational, Decomposition, Rational,
};
use lexjoin::hypergraph::{Hypergraph, VertexSet};
use lexjoin::oracle::{compare_under, materialize_sorted_capped, MaterializedResult};
use lexjoin::query::{disruptive_trios_in, parse_query, Atom, JoinQuery, VariableOrder};
use lexjoin::storage::{ColumnType, Database, DatabaseBuilder, Value};
use lexjoin::wcoj::{agm_check, generic_join, naive_join, SubAtom, SubQuery};
use lexjoin_lab::clique::{brute_zero_clique, WeightedCliqueInstance};
use lexjoin_lab::field::{prime_interval, sample_prime, Randomization, Variant};
use lexjoin_lab::generate::{random_clique_instance, random_set_families};
use lexjoin_lab::reduction::{default_rho, find_zero_clique_via_reduction};
use lexjoin_lab::setfamily::{
    projected_star_test, unique_via_bit_probing, BruteForceBackend, EngineBackend, IntersectionBackend,
    SetFamilyInstance,
};
use lexjoin_lab::templates::{lw_query, star_query};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn big(n: usize) -> BigUint {
    BigUint::from(n)
}

fn random_atoms(rng: &mut ChaCha8Rng, vars: usize, atoms: usize, max_arity: usize, repeats: bool) -> Vec<Vec<usize>> {
    (0..atoms)
        .map(|_| {
            let arity = rng.gen_range(1..=max_arity.min(vars));
            let mut pool: Vec<usize> = (0..vars).collect();
            pool.shuffle(rng);
            let mut scope: Vec<usize> = pool[..arity].to_vec();
            if repeats && rng.gen_bool(0.1) {
                scope.push(scope[0]);
            }
            scope
        })
        .collect()
}

/// Builds a self-join-free query from atom scopes, renumbering variables so
/// that only those appearing in some atom remain, plus a random order.
fn query_from_scopes(rng: &mut ChaCha8Rng, scopes: &[Vec<usize>]) -> (JoinQuery, VariableOrder) {
    let used: BTreeSet<usize> = scopes.iter().flatten().copied().collect();
    let id: BTreeMap<usize, usize> = used.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let variables: Vec<String> = (0..used.len()).map(|i| format!("x{i}")).collect();
    let atoms = scopes
        .iter()
        .enumerate()
        .map(|(i, s)| Atom { relation: format!("R{i}"), vars: s.iter().map(|v| id[v]).collect() })
        .collect();
    let q = JoinQuery::new("Q", variables, atoms).expect("valid random query");
    let mut perm: Vec<usize> = (0..q.num_vars()).collect();
    perm.shuffle(rng);
    let l = VariableOrder::new(perm, q.num_vars()).unwrap();
    (q, l)
}

fn random_query(rng: &mut ChaCha8Rng, max_vars: usize, max_atoms: usize, repeats: bool) -> (JoinQuery, VariableOrder) {
    let vars = rng.gen_range(1..=max_vars);
    let atoms = rng.gen_range(1..=max_atoms);
    let scopes = random_atoms(rng, vars, atoms, 3, repeats);
    query_from_scopes(rng, &scopes)
}

/// Corpus of criteria 2 to 4.
fn decomposition_corpus() -> Vec<(JoinQuery, VariableOrder)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    (0..1000).map(|_| random_query(&mut rng, 7, 8, false)).collect()
}

fn random_db(q: &JoinQuery, rng: &mut ChaCha8Rng, max_rows: usize, domain: i64) -> Database {
    let mut b = DatabaseBuilder::new();
    for atom in q.atoms() {
        let arity = atom.vars.len();
        let rows: Vec<Vec<i64>> =
            (0..rng.gen_range(0..=max_rows)).map(|_| (0..arity).map(|_| rng.gen_range(0..domain)).collect()).collect();
        b.int_relation(&atom.relation, arity, &rows);
    }
    b.build().unwrap()
}

fn bag_hypergraph(q: &JoinQuery, bags: &[VertexSet]) -> Hypergraph {
    Hypergraph::new(0..q.num_vars(), bags.iter().cloned()).unwrap()
}

fn as_set_of_sets(bags: &[VertexSet]) -> BTreeSet<VertexSet> {
    bags.iter().cloned().collect()
}

fn c1_golden_decomposition() -> Check {
    let (q, l) = parse_query("Q(x1,x2,x3,x4,x5) :- R1(x1,x5), R2(x2,x4), R3(x3,x4), R4(x3,x5).").unwrap();
    let d = Decomposition::compute(&q, &l);
    let named = |names: &[&str]| -> VertexSet { names.iter().map(|n| q.var_id(n).unwrap()).collect() };
    let expected: BTreeSet<VertexSet> = [
        named(&["x1", "x3", "x5"]),
        named(&["x2", "x3", "x4"]),
        named(&["x1", "x2", "x3"]),
        named(&["x1", "x2"]),
        named(&["x1"]),
    ]
    .into_iter()
    .collect();
    ensure!(as_set_of_sets(&d.bags) == expected, "bags {:?}", d.bags);
    ensure!(d.iota == rational(3, 1), "iota {}", d.iota);
    Ok("5 bags, iota = 3".into())
}

fn c2_definitional_equivalence(corpus: &[(JoinQuery, VariableOrder)]) -> Check {
    for (q, l) in corpus {
        let a = disruption_free_iterative(q, l);
        let b = disruption_free_closed_form(q, l);
        ensure!(a == b, "{q} under {:?}: {a:?} vs {b:?}", l.as_slice());
    }
    Ok(format!("{} pairs", corpus.len()))
}

fn c3_structural_soundness(corpus: &[(JoinQuery, VariableOrder)]) -> Check {
    for (q, l) in corpus {
        let bags = disruption_free_iterative(q, l);
        let h = bag_hypergraph(q, &bags);
        ensure!(h.gyo_reduce().acyclic, "bags of {q} are cyclic");
        ensure!(disruptive_trios_in(&h, l.as_slice()).is_empty(), "bags of {q} have a trio");
        let parent = join_forest(&bags, l.as_slice()).map_err(|e| format!("{q}: {e}"))?;
        // every variable's bags form one connected subtree
        for v in 0..q.num_vars() {
            let tops = (0..bags.len())
                .filter(|&i| bags[i].contains(&v) && parent[i].is_none_or(|p| !bags[p].contains(&v)))
                .count();
            ensure!(tops == 1, "{q}: variable {v} occurs in {tops} separate subtrees");
        }
        for atom in q.atoms() {
            ensure!(bags.iter().any(|b| atom.scope().is_subset(b)), "{q}: atom {} not covered", atom.relation);
        }
    }
    Ok(format!("{} decompositions", corpus.len()))
}

fn c4_incompatibility_laws(corpus: &[(JoinQuery, VariableOrder)]) -> Check {
    let (mut acyclic_free, mut with_trio) = (0, 0);
    for (q, l) in corpus {
        let d = Decomposition::compute(q, l);
        let acyclic = q.hypergraph().is_acyclic();
        let trios = !q.disruptive_trios(l).is_empty();
        if acyclic && !trios {
            acyclic_free += 1;
            ensure!(d.iota == Rational::one(), "{q}: acyclic trio-free but iota {}", d.iota);
        }
        if trios {
            with_trio += 1;
            ensure!(d.iota >= rational(2, 1), "{q}: trio but iota {}", d.iota);
        }
        if acyclic {
            for c in &d.covers {
                ensure!(c.cover.total.is_integer(), "{q}: fractional bag cover {}", c.cover.total);
            }
        }
    }
    ensure!(acyclic_free > 0 && with_trio > 0, "degenerate corpus");
    for k in 2..=4 {
        let (q, l) = star_query(k).unwrap();
        let iota = Decomposition::compute(&q, &l).iota;
        ensure!(iota == rational(k as i64, 1), "star k={k}: iota {iota}");
    }
    for k in 3..=5 {
        let q = lw_query(k).unwrap();
        let total = fractional_edge_cover(&q.hypergraph()).unwrap().total;
        ensure!(total == Rational::one() + rational(1, k as i64 - 1), "LW k={k}: cover {total}");
    }
    Ok(format!("{acyclic_free} acyclic trio-free, {with_trio} with trios, star k=2..4, LW k=3..5"))
}

fn c5_lp_duality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let n = rng.gen_range(1..=8);
        let edges: Vec<VertexSet> = (0..rng.gen_range(1..=8))
            .map(|_| {
                let mut e: VertexSet = (0..n).filter(|_| rng.gen_bool(0.35)).collect();
                if e.is_empty() {
                    e.insert(rng.gen_range(0..n));
                }
                e
            })
            .collect();
        let h = Hypergraph::from_edges(edges);
        let cover = fractional_edge_cover(&h).unwrap();
        let (packing, _) = fractional_independent_set(&h).unwrap();
        ensure!(cover.covers(&h), "{h}: cover infeasible");
        ensure!(cover.total == packing, "{h}: cover {} vs packing {packing}", cover.total);
    }
    Ok("500 hypergraphs".into())
}

fn c6_join_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut nonempty = 0;
    for _ in 0..500 {
        let (q, _) = random_query(&mut rng, 5, 5, true);
        let db = random_db(&q, &mut rng, 25, 4);
        let mut keep: Vec<usize> = (0..q.num_vars()).filter(|_| rng.gen_bool(0.7)).collect();
        if keep.is_empty() {
            keep.push(0);
        }
        let atoms: Vec<SubAtom> = q
            .atoms()
            .iter()
            .filter(|a| a.vars.iter().any(|v| keep.contains(v)))
            .map(|a| SubAtom {
                relation: a.relation.clone(),
                vars: a.vars.iter().map(|v| keep.contains(v).then_some(*v)).collect(),
            })
            .collect();
        let sq = SubQuery { output: keep.clone(), atoms };
        let mut order = keep.clone();
        order.shuffle(&mut rng);
        let fast = generic_join(&sq, &db, &order).map_err(|e| e.to_string())?.project(&sq.output);
        let slow = naive_join(&sq, &db).map_err(|e| e.to_string())?;
        ensure!(fast == slow, "{q} restricted to {keep:?}: joins disagree");
        ensure!(agm_check(&sq, &db, fast.len()).unwrap(), "{q}: AGM bound violated");
        nonempty += usize::from(!fast.is_empty());
    }
    Ok(format!("500 subqueries, {nonempty} non-empty"))
}

fn oracle_capped(q: &JoinQuery, l: &VariableOrder, db: &Database) -> Option<MaterializedResult> {
    materialize_sorted_capped(q, l, db, 10_000).ok()
}

fn check_against_oracle(q: &JoinQuery, l: &VariableOrder, db: &Database, expected: &MaterializedResult) -> Check {
    let ix = AccessIndex::build(q, l, db).map_err(|e| e.to_string())?;
    ensure!(*ix.count() == big(expected.count()), "{q}: count {} vs {}", ix.count(), expected.count());
    for (j, t) in expected.tuples.iter().enumerate() {
        let got = ix.access_usize(j).map_err(|e| e.to_string())?;
        ensure!(&got == t, "{q}: position {j}");
        ensure!(ix.rank(&got).map_err(|e| e.to_string())? == big(j), "{q}: rank of position {j}");
    }
    for w in expected.tuples.windows(2) {
        ensure!(compare_under(l, &w[0], &w[1]).is_lt(), "{q}: oracle not strictly increasing");
    }
    for j in [expected.count(), expected.count() + 1] {
        ensure!(matches!(ix.access_usize(j), Err(AccessError::OutOfBounds { .. })), "{q}: no OutOfBounds at {j}");
    }
    Ok(String::new())
}

fn c7_access_oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut cyclic, mut trios, mut done, mut answers) = (0, 0, 0, 0);
    while done < 200 {
        let (q, l) = if done % 4 == 0 {
            // a triangle plus random extra atoms keeps cyclic inputs in the mix
            let mut scopes = vec![vec![0, 1], vec![1, 2], vec![0, 2]];
            let extra = rng.gen_range(0..3);
            scopes.extend(random_atoms(&mut rng, 5, extra, 3, true));
            query_from_scopes(&mut rng, &scopes)
        } else {
            random_query(&mut rng, 5, 5, true)
        };
        let db = random_db(&q, &mut rng, 30, 4);
        let Some(expected) = oracle_capped(&q, &l, &db) else { continue };
        check_against_oracle(&q, &l, &db, &expected)?;
        cyclic += usize::from(!q.hypergraph().is_acyclic());
        trios += usize::from(!q.disruptive_trios(&l).is_empty());
        answers += expected.count();
        done += 1;
    }
    ensure!(cyclic > 0 && trios > 0, "corpus lacks cyclic ({cyclic}) or trio ({trios}) cases");
    Ok(format!("200 triples ({cyclic} cyclic, {trios} with trios), {answers} answers checked"))
}

fn c8_order_sensitive_tasks() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    while checked < 50 {
        let (q, l) = random_query(&mut rng, 4, 4, false);
        let db = random_db(&q, &mut rng, 20, 4);
        let Some(expected) = oracle_capped(&q, &l, &db) else { continue };
        let ix = AccessIndex::build(&q, &l, &db).unwrap();
        let n = expected.count();
        if n == 0 {
            ensure!(matches!(ix.quantile(&rational(1, 2)), Err(AccessError::EmptyResult)), "{q}: median of nothing");
            continue;
        }
        let median = ix.quantile(&rational(1, 2)).map_err(|e| e.to_string())?;
        ensure!(median == expected.tuples[(n - 1) / 2], "{q}: median");
        let all = ix.sample_without_replacement(n, checked as u64).map_err(|e| e.to_string())?;
        ensure!(all == expected.tuples, "{q}: full sample differs from the answer set");
        checked += 1;
    }

    // 10 values of x, 2 of z: 20 answers
    let (q, l) = parse_query("Q(x,y,z) :- R(x,y), S(y,z).").unwrap();
    let mut b = DatabaseBuilder::new();
    b.int_relation("R", 2, &(0..10).map(|i| vec![i, i % 2]).collect::<Vec<_>>());
    b.int_relation("S", 2, &[vec![0, 0], vec![0, 1], vec![1, 5], vec![1, 6]]);
    let ix = AccessIndex::build(&q, &l, &b.build().unwrap()).unwrap();
    ensure!(*ix.count() == big(20), "chi-square instance has {} answers", ix.count());
    let draws = 10_000usize;
    let mut hits = [0usize; 20];
    for seed in 0..draws as u64 {
        let s = ix.sample_without_replacement(1, seed).map_err(|e| e.to_string())?;
        hits[ix.rank(&s[0]).unwrap().to_usize().unwrap()] += 1;
    }
    let expected = draws as f64 / 20.0;
    let stat: f64 = hits.iter().map(|&h| (h as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(19.0).unwrap().cdf(stat);
    let plausible = p > 0.001;
    ensure!(plausible, "chi-square {stat:.2}, p = {p:.5}");
    Ok(format!("{checked} median/sample instances, chi-square {stat:.2} (p = {p:.3})"))
}

fn c9_fast_path() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (q, l) = parse_query("P(x1,x2,x3) :- R(x1,x2), S(x2,x3).").unwrap();
    ensure!(q.hypergraph().is_acyclic() && q.disruptive_trios(&l).is_empty(), "instance is not acyclic trio-free");
    let rows = |rng: &mut ChaCha8Rng| -> Vec<Vec<i64>> {
        let mut set = BTreeSet::new();
        while set.len() < 50_000 {
            set.insert(vec![rng.gen_range(0..1_000_000), rng.gen_range(0..50_000)]);
        }
        set.into_iter().collect()
    };
    let r = rows(&mut rng);
    let s: Vec<Vec<i64>> = rows(&mut rng).into_iter().map(|t| vec![t[1], t[0]]).collect();
    let mut b = DatabaseBuilder::new();
    b.int_relation("R", 2, &r).int_relation("S", 2, &s);
    let db = b.build().unwrap();
    ensure!(db.size() == 100_000, "database size {}", db.size());

    let start = Instant::now();
    let (ix, stats) = AccessIndex::build_with_stats(&q, &l, &db).map_err(|e| e.to_string())?;
    let build = start.elapsed();
    ensure!(stats.multi_atom_joins == 0, "{} multi-atom joins", stats.multi_atom_joins);
    ensure!(build < Duration::from_secs(20), "build took {build:?}");

    let count = ix.count().clone();
    ensure!(count > BigUint::from(0u32), "empty result");
    let positions: Vec<BigUint> = (0..10_000).map(|_| rng.gen_range(0..count.to_u64().unwrap()).into()).collect();
    let start = Instant::now();
    for j in &positions {
        ix.access(j).map_err(|e| e.to_string())?;
    }
    let per_access = start.elapsed() / 10_000;
    ensure!(per_access < Duration::from_millis(4), "access averaged {per_access:?}");
    let soft = if build < Duration::from_secs(5) && per_access < Duration::from_millis(1) { "" } else { " (within x4 margin)" };
    Ok(format!("build {build:.2?}, {per_access:.2?} per access, {count} answers, 0 multi-atom joins{soft}"))
}

fn c10_set_disjointness() -> Check {
    let mut queries = 0;
    for seed in 0..100u64 {
        let k = 2 + (seed % 2) as usize;
        let inst = random_set_families(k, 8, 20, 0.2, 20, seed).map_err(|e| e.to_string())?;
        let ix = EngineBackend::index(&inst).map_err(|e| e.to_string())?;
        for query in &inst.queries {
            let sets: Vec<&BTreeSet<usize>> = query.iter().zip(&inst.families).map(|(&j, f)| &f[j]).collect();
            let meet = (0..inst.universe).any(|e| sets.iter().all(|s| s.contains(&e)));
            let got = projected_star_test(&ix, query).map_err(|e| e.to_string())?;
            ensure!(got == meet, "seed {seed}, query {query:?}: index says {got}, sets say {meet}");
            queries += 1;
        }
    }
    Ok(format!("100 instances, {queries} queries"))
}

/// Sum of the edge weights of `clique`, read pair by pair.
fn pair_sum(g: &WeightedCliqueInstance, clique: &[usize]) -> i128 {
    let mut total = 0i128;
    for a in 0..clique.len() {
        for b in a + 1..clique.len() {
            total += i128::from(g.weight(a, clique[a], b, clique[b]));
        }
    }
    total
}

fn c11_weight_randomization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cliques = 0;
    for k in [2usize, 3] {
        for trial in 0..4 {
            let (g, _) = random_clique_instance(&mut rng, k + 1, 5, 20, trial % 2 == 0).unwrap();
            let (lo, hi) = prime_interval(k + 1, g.max_abs_weight());
            let p = sample_prime(lo, hi, &mut rng).unwrap();
            let pi = i128::from(p);
            for variant in [Variant::LastPart, Variant::FirstAndLastPart] {
                let r = Randomization::sample(&g, p, variant, &mut rng);
                let h = r.apply(&g);
                let (mut zero_w, mut zero_h) = (BTreeSet::new(), BTreeSet::new());
                for c in g.cliques() {
                    let w = pair_sum(&g, &c);
                    let wh = pair_sum(&h, &c);
                    ensure!((wh - i128::from(r.x) * w).rem_euclid(pi) == 0, "k={k} {variant:?} clique {c:?}");
                    if w == 0 {
                        zero_w.insert(c.clone());
                    }
                    if wh.rem_euclid(pi) == 0 {
                        zero_h.insert(c);
                    }
                    cliques += 1;
                }
                ensure!(zero_w == zero_h, "k={k} {variant:?}: zero cliques {zero_w:?} vs {zero_h:?}");
            }
        }
    }
    Ok(format!("{cliques} cliques across both variants"))
}

fn c12_reduction_end_to_end() -> Check {
    let backends: [&dyn IntersectionBackend; 2] = [&BruteForceBackend, &EngineBackend];
    let rho = default_rho(2);
    let mut summary = Vec::new();
    for backend in backends {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut found = 0;
        for _ in 0..100 {
            let (g, planted) = random_clique_instance(&mut rng, 3, 12, 1000, true).unwrap();
            ensure!(g.is_zero_clique(&planted.unwrap()), "planting failed");
            let report = find_zero_clique_via_reduction(&g, &rho, &mut rng, backend).map_err(|e| e.to_string())?;
            if let Some(c) = report.clique {
                ensure!(pair_sum(&g, &c) == 0, "{}: false positive {c:?}", backend.name());
                found += 1;
            }
        }
        ensure!(found >= 95, "{}: found {found}/100", backend.name());
        let mut clean = 0;
        while clean < 100 {
            let (g, _) = random_clique_instance(&mut rng, 3, 12, 1_000_000, false).unwrap();
            if brute_zero_clique(&g).is_some() {
                continue;
            }
            let report = find_zero_clique_via_reduction(&g, &rho, &mut rng, backend).map_err(|e| e.to_string())?;
            ensure!(report.clique.is_none(), "{}: false positive on a clique-free instance", backend.name());
            clean += 1;
        }
        summary.push(format!("{} {found}/100", backend.name()));
    }
    Ok(format!("{}, no false positives on 100 clique-free instances each", summary.join(", ")))
}

fn c13_bit_probing() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let backends: [&dyn IntersectionBackend; 2] = [&BruteForceBackend, &EngineBackend];
    let random_set = |rng: &mut ChaCha8Rng, universe: usize| -> BTreeSet<usize> {
        (0..universe).filter(|_| rng.gen_bool(0.3)).collect()
    };
    for trial in 0..200 {
        let universe = rng.gen_range(1..=256);
        let k = 2 + trial % 2;
        let target = rng.gen_range(0..universe);
        let first: BTreeSet<usize> = random_set(&mut rng, universe);
        let mut sets = vec![first.clone()];
        // the second set avoids the first, so the target is the only common element
        sets.push(random_set(&mut rng, universe).difference(&first).copied().collect());
        while sets.len() < k {
            sets.push(random_set(&mut rng, universe));
        }
        let families: Vec<Vec<BTreeSet<usize>>> = sets
            .into_iter()
            .map(|mut s| {
                s.insert(target);
                vec![random_set(&mut rng, universe), s]
            })
            .collect();
        let query = vec![1; k];
        let inst = SetFamilyInstance::new(universe, families, vec![query.clone()]).unwrap();
        for backend in backends {
            let got = unique_via_bit_probing(backend, &inst, &query).map_err(|e| e.to_string())?;
            ensure!(got == Some(target), "{}: trial {trial} gave {got:?}, expected {target}", backend.name());
        }
    }
    let mut declined = 0;
    for _ in 0..200 {
        let universe = rng.gen_range(1..=256);
        let k = rng.gen_range(2..=3);
        let families: Vec<Vec<BTreeSet<usize>>> = (0..k).map(|_| vec![random_set(&mut rng, universe)]).collect();
        let query = vec![0; k];
        let inst = SetFamilyInstance::new(universe, families, vec![query.clone()]).unwrap();
        let common = inst.intersection(&query);
        if common.len() == 1 {
            continue;
        }
        for backend in backends {
            match unique_via_bit_probing(backend, &inst, &query).map_err(|e| e.to_string())? {
                Some(e) => ensure!(common.contains(&e), "{}: unverified element {e}", backend.name()),
                None => declined += 1,
            }
        }
    }
    Ok(format!("200 singleton instances recovered by both backends, {declined} non-singleton probes declined"))
}

fn c14_persistence() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut instances: Vec<(JoinQuery, VariableOrder, Database)> = Vec::new();
    for _ in 0..30 {
        let (q, l) = random_query(&mut rng, 5, 4, false);
        let db = random_db(&q, &mut rng, 20, 5);
        instances.push((q, l, db));
    }
    let (q, l) = parse_query("Q(name,team) :- P(name,team), T(team).").unwrap();
    let mut b = DatabaseBuilder::new();
    let s = |x: &str| Value::Str(x.into());
    b.relation("P", vec![ColumnType::String, ColumnType::Int], vec![vec![s("ada"), Value::Int(2)], vec![s("bo"), Value::Int(1)]])
        .unwrap();
    b.relation("T", vec![ColumnType::Int], vec![vec![Value::Int(1)], vec![Value::Int(2)]]).unwrap();
    instances.push((q, l, b.build().unwrap()));

    let mut answers = 0;
    for (i, (q, l, db)) in instances.iter().enumerate() {
        let ix = AccessIndex::build(q, l, db).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("{i}.idx"));
        ix.save(&path).map_err(|e| e.to_string())?;
        let loaded = AccessIndex::load(&path).map_err(|e| e.to_string())?;
        ensure!(loaded.count() == ix.count(), "{q}: count changed");
        let n = ix.count().to_usize().unwrap();
        for j in 0..n {
            ensure!(loaded.access_usize(j).unwrap() == ix.access_usize(j).unwrap(), "{q}: position {j}");
            ensure!(loaded.decode(&loaded.access_usize(j).unwrap()) == ix.decode(&ix.access_usize(j).unwrap()), "{q}: decode {j}");
        }
        answers += n;
        let again = dir.path().join(format!("{i}.again.idx"));
        AccessIndex::build(q, l, db).unwrap().save(&again).map_err(|e| e.to_string())?;
        ensure!(std::fs::read(&path).unwrap() == std::fs::read(&again).unwrap(), "{q}: rebuild not byte-identical");
    }
    Ok(format!("{} indexes, {answers} answers round-tripped", instances.len()))
}

fn run(id: usize, name: &str, budget: Duration, check: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check));
    let elapsed = start.elapsed();
    let (pass, detail) = match outcome {
        Ok(Ok(detail)) if elapsed <= budget => (true, detail),
        Ok(Ok(detail)) => (false, format!("{detail}; over the {budget:?} budget")),
        Ok(Err(why)) => (false, why),
        Err(panic) => {
            let why = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {why}"))
        }
    };
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("{verdict} [{id:>2}] {name} ({elapsed:.2?}): {detail}");
    pass
}

fn main() {
    let secs = Duration::from_secs;
    let corpus = decomposition_corpus();
    let results = [
        run(1, "golden decomposition", secs(1), c1_golden_decomposition),
        run(2, "definitional equivalence", secs(30), || c2_definitional_equivalence(&corpus)),
        run(3, "structural soundness", secs(30), || c3_structural_soundness(&corpus)),
        run(4, "incompatibility laws", secs(30), || c4_incompatibility_laws(&corpus)),
        run(5, "LP duality", secs(30), c5_lp_duality),
        run(6, "join correctness", secs(60), c6_join_correctness),
        run(7, "direct-access oracle equivalence", secs(300), c7_access_oracle_equivalence),
        run(8, "order-sensitive tasks", secs(60), c8_order_sensitive_tasks),
        run(9, "single-atom fast path", secs(60), c9_fast_path),
        run(10, "set-disjointness encoding", secs(60), c10_set_disjointness),
        run(11, "weight-randomization identity", secs(30), c11_weight_randomization),
        run(12, "reduction end-to-end", secs(300), c12_reduction_end_to_end),
        run(13, "bit-probing recovery", secs(30), c13_bit_probing),
        run(14, "persistence", secs(30), c14_persistence),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
