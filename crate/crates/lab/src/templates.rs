//! Query families used by the lower bounds.

use lexjoin::query::{Atom, JoinQuery, VariableOrder};

use crate::{parameter, LabError};

/// `Q(x1..xk, z) :- R1(x1, z), ..., Rk(xk, z)` with the order that puts `z`
/// last.
pub fn star_query(k: usize) -> Result<(JoinQuery, VariableOrder), LabError> {
    if k < 1 {
        return Err(parameter("star queries need k >= 1"));
    }
    let mut variables: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    variables.push("z".into());
    let atoms = (0..k).map(|i| Atom { relation: format!("R{}", i + 1), vars: vec![i, k] }).collect();
    let q = JoinQuery::new("Star", variables, atoms)?;
    let l = q.head_order();
    Ok((q, l))
}

/// The Loomis-Whitney query over `k` variables: atom `Ri` contains every
/// variable except `xi`.
pub fn lw_query(k: usize) -> Result<JoinQuery, LabError> {
    if k < 2 {
        return Err(parameter("Loomis-Whitney queries need k >= 2"));
    }
    let variables: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    let atoms = (0..k).map(|i| Atom { relation: format!("R{}", i + 1), vars: (0..k).filter(|&v| v != i).collect() }).collect();
    Ok(JoinQuery::new("LW", variables, atoms)?)
}
