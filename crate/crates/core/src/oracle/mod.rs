//! Propositional reference engines: grounding, brute-force enumeration,
//! variable elimination and the junction tree algorithm.

mod brute;
mod factor;
mod graph;
mod jt;
mod ve;

pub use brute::{brute_log_partition, brute_marginals};
pub use factor::Factor;
pub use graph::{ground_model, universe_size, GroundFactor, GroundFactorGraph};
pub use jt::{jt_marginals, JunctionTree};
pub use ve::{min_fill_order, ve_log_partition, ve_marginal};

use crate::error::{Error, Result};
use crate::model::{Distribution, Query};

/// Randvar ids of the query terms; rejects unknown and repeated terms.
pub(crate) fn query_vars(g: &GroundFactorGraph, q: &Query) -> Result<Vec<usize>> {
    let vars = q.terms.iter().map(|t| g.randvar(t)).collect::<Result<Vec<_>>>()?;
    let mut sorted = vars.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != vars.len() {
        return Err(Error::Validation("query repeats a term".into()));
    }
    Ok(vars)
}

/// Normalises a factor over (a superset of) the query vars into a distribution.
pub(crate) fn to_distribution(g: &GroundFactorGraph, q: &Query, vars: &[usize], f: &Factor) -> Result<Distribution> {
    let mut sorted = vars.to_vec();
    sorted.sort_unstable();
    let mut m = f.marginal(&sorted);
    // query vars the factor does not mention are uniform
    for &v in vars {
        if m.vars.binary_search(&v).is_err() {
            let u = Factor { vars: vec![v], card: vec![g.card[v]], table: vec![0.0; g.card[v]] };
            m = m.product(&u, usize::MAX)?;
        }
    }
    let table = m.table_in_order(vars);
    let probs = crate::logspace::normalize(&table).ok_or(Error::ZeroEvidence)?;
    Ok(Distribution { terms: q.terms.clone(), shape: vars.iter().map(|&v| g.card[v]).collect(), probs })
}
