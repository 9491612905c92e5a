//! Benchmark instance generators. Each writes a manifest with CSV relations
//! (or a graph file), a query file where relevant, and a `meta.json`
//! sidecar describing how the instance was produced. Output is fully
//! determined by the parameters and the seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use lexjoin::storage::{ColumnType, Manifest, ManifestEntry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

use crate::clique::WeightedCliqueInstance;
use crate::field::{prime_interval, sample_prime};
use crate::reduction::default_rho;
use crate::setfamily::{encode_set_disjointness, SetFamilyInstance};
use crate::templates::{lw_query, star_query};
use crate::{parameter, LabError};

pub const MANIFEST: &str = "db.json";
pub const SIDECAR: &str = "meta.json";

fn output_error(path: &Path, e: impl std::fmt::Display) -> LabError {
    LabError::Output { path: path.to_path_buf(), message: e.to_string() }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<PathBuf, LabError> {
    fs::write(path, contents).map_err(|e| output_error(path, e))?;
    Ok(path.to_path_buf())
}

/// Writes integer relations as `<name>.csv` plus the manifest.
fn write_int_database(dir: &Path, relations: &BTreeMap<String, Vec<Vec<i64>>>, arity: &BTreeMap<String, usize>) -> Result<Vec<PathBuf>, LabError> {
    let mut files = Vec::new();
    let mut manifest = Manifest { relations: BTreeMap::new() };
    for (name, rows) in relations {
        let file = format!("{name}.csv");
        let path = dir.join(&file);
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path).map_err(|e| output_error(&path, e))?;
        for row in rows {
            w.write_record(row.iter().map(i64::to_string)).map_err(|e| output_error(&path, e))?;
        }
        w.flush().map_err(|e| output_error(&path, e))?;
        files.push(path);
        manifest
            .relations
            .insert(name.clone(), ManifestEntry { file: file.into(), types: Some(vec![ColumnType::Int; arity[name]]) });
    }
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| output_error(&path, e))?;
    files.push(write_file(&path, text + "\n")?);
    Ok(files)
}

fn write_sidecar(dir: &Path, meta: Json) -> Result<PathBuf, LabError> {
    let path = dir.join(SIDECAR);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| output_error(&path, e))?;
    write_file(&path, text + "\n")
}

fn prepare(dir: &Path) -> Result<(), LabError> {
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))
}

fn random_rows(rng: &mut ChaCha8Rng, rows: usize, arity: usize, domain: i64) -> Vec<Vec<i64>> {
    let mut set = BTreeSet::new();
    for _ in 0..rows {
        set.insert((0..arity).map(|_| rng.gen_range(0..domain)).collect::<Vec<_>>());
    }
    set.into_iter().collect()
}

/// Star query with `z` last over random binary relations.
pub fn star(dir: &Path, k: usize, rows: usize, domain: i64, seed: u64) -> Result<Vec<PathBuf>, LabError> {
    if domain < 1 {
        return Err(parameter("domain must be positive"));
    }
    prepare(dir)?;
    let (q, l) = star_query(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let relations: BTreeMap<String, Vec<Vec<i64>>> =
        q.atoms().iter().map(|a| (a.relation.clone(), random_rows(&mut rng, rows, 2, domain))).collect();
    let arity = relations.keys().map(|n| (n.clone(), 2)).collect();
    let mut files = write_int_database(dir, &relations, &arity)?;
    files.push(write_file(&dir.join("query.jq"), q.to_text(&l))?);
    files.push(write_sidecar(dir, json!({"family": "star", "seed": seed, "k": k, "rows": rows, "domain": domain}))?);
    Ok(files)
}

/// Loomis-Whitney query over random `(k-1)`-ary relations.
pub fn lw(dir: &Path, k: usize, rows: usize, domain: i64, seed: u64) -> Result<Vec<PathBuf>, LabError> {
    if domain < 1 {
        return Err(parameter("domain must be positive"));
    }
    prepare(dir)?;
    let q = lw_query(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let relations: BTreeMap<String, Vec<Vec<i64>>> =
        q.atoms().iter().map(|a| (a.relation.clone(), random_rows(&mut rng, rows, k - 1, domain))).collect();
    let arity = relations.keys().map(|n| (n.clone(), k - 1)).collect();
    let mut files = write_int_database(dir, &relations, &arity)?;
    files.push(write_file(&dir.join("query.jq"), q.to_text(&q.head_order()))?);
    files.push(write_sidecar(dir, json!({"family": "lw", "seed": seed, "k": k, "rows": rows, "domain": domain}))?);
    Ok(files)
}

/// Random set families of the given density, encoded for the star query,
/// with the query tuples in `queries.csv`.
pub fn random_set_families(k: usize, sets: usize, universe: usize, density: f64, queries: usize, seed: u64) -> Result<SetFamilyInstance, LabError> {
    if !(0.0..=1.0).contains(&density) || sets == 0 || universe == 0 {
        return Err(parameter("need sets >= 1, universe >= 1 and density in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let families: Vec<Vec<BTreeSet<usize>>> =
        (0..k).map(|_| (0..sets).map(|_| (0..universe).filter(|_| rng.gen_bool(density)).collect()).collect()).collect();
    let queries = (0..queries).map(|_| (0..k).map(|_| rng.gen_range(0..sets)).collect()).collect();
    SetFamilyInstance::new(universe, families, queries)
}

pub fn set_disjointness(
    dir: &Path,
    k: usize,
    sets: usize,
    universe: usize,
    density: f64,
    queries: usize,
    seed: u64,
) -> Result<Vec<PathBuf>, LabError> {
    prepare(dir)?;
    let inst = random_set_families(k, sets, universe, density, queries, seed)?;
    let (q, l) = star_query(k)?;
    let db = encode_set_disjointness(&inst)?;
    let mut relations = BTreeMap::new();
    for (i, family) in inst.families.iter().enumerate() {
        let rows: Vec<Vec<i64>> =
            family.iter().enumerate().flat_map(|(j, s)| s.iter().map(move |&e| vec![j as i64, e as i64])).collect();
        relations.insert(format!("R{}", i + 1), rows);
    }
    let arity = relations.keys().map(|n| (n.clone(), 2)).collect();
    let mut files = write_int_database(dir, &relations, &arity)?;
    files.push(write_file(&dir.join("query.jq"), q.to_text(&l))?);
    let mut text = String::new();
    for query in &inst.queries {
        text.push_str(&query.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
        text.push('\n');
    }
    files.push(write_file(&dir.join("queries.csv"), text)?);
    files.push(write_sidecar(
        dir,
        json!({
            "family": "setdisj", "seed": seed, "k": k, "sets": sets, "universe": universe,
            "density": density, "n": inst.n(), "input_size": db.size(),
        }),
    )?);
    Ok(files)
}

/// Written files, the instance, and the planted clique if any.
pub type ZeroCliqueFiles = (Vec<PathBuf>, WeightedCliqueInstance, Option<Vec<usize>>);

/// A complete `(k+1)`-partite graph with weights in `[-bound, bound]`,
/// optionally with one planted zero clique. The sidecar records a prime
/// from the reduction's interval drawn with the same seed.
pub fn zero_clique(
    dir: &Path,
    k: usize,
    part_size: usize,
    bound: i64,
    plant: bool,
    seed: u64,
) -> Result<ZeroCliqueFiles, LabError> {
    if k < 2 || part_size == 0 || bound < 1 {
        return Err(parameter("need k >= 2, part size >= 1 and bound >= 1"));
    }
    prepare(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (g, planted) = random_clique_instance(&mut rng, k + 1, part_size, bound, plant)?;
    let (lo, hi) = prime_interval(k + 1, g.max_abs_weight());
    let p = sample_prime(lo, hi, &mut rng)?;
    let rho = default_rho(k);
    let mut files = vec![write_file(&dir.join("graph.txt"), g.to_text())?];
    files.push(write_sidecar(
        dir,
        json!({
            "family": "zeroclique", "seed": seed, "k": k, "part_size": part_size, "bound": bound,
            "p": p, "rho": format!("{}/{}", rho.numer(), rho.denom()), "planted": planted,
        }),
    )?);
    Ok((files, g, planted))
}

/// Random integer weights in `[-bound, bound]`; with `plant`, one random
/// clique gets its last edge set to cancel the others.
pub fn random_clique_instance(
    rng: &mut impl Rng,
    parts: usize,
    part_size: usize,
    bound: i64,
    plant: bool,
) -> Result<(WeightedCliqueInstance, Option<Vec<usize>>), LabError> {
    let mut g = WeightedCliqueInstance::from_fn(vec![part_size; parts], |_, _, _, _| rng.gen_range(-bound..=bound))?;
    if !plant {
        return Ok((g, None));
    }
    let clique: Vec<usize> = (0..parts).map(|_| rng.gen_range(0..part_size)).collect();
    let (a, b) = (parts - 2, parts - 1);
    g.set_weight(a, clique[a], b, clique[b], 0);
    let rest = g.clique_weight(&clique) as i64;
    g.set_weight(a, clique[a], b, clique[b], -rest);
    Ok((g, Some(clique)))
}
