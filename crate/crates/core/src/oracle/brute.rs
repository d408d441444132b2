use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::logspace::{self, ZERO};
use crate::model::{Distribution, Query};

use super::{query_vars, GroundFactorGraph};

/// Randvars that some factor mentions, plus the extra ones, sorted.
fn active_vars(g: &GroundFactorGraph, extra: &[usize]) -> Vec<usize> {
    let mut vars: Vec<usize> = g.factors.iter().flat_map(|f| f.factor.vars.iter().copied()).collect();
    vars.extend_from_slice(extra);
    vars.sort_unstable();
    vars.dedup();
    vars
}

/// Walks every joint assignment of `vars`, calling `visit(values, ln weight)`.
fn enumerate(g: &GroundFactorGraph, vars: &[usize], limits: &Limits, mut visit: impl FnMut(&[usize], f64)) -> Result<()> {
    let bits: f64 = vars.iter().map(|&v| (g.card[v] as f64).log2()).sum();
    if bits > limits.brute_bits as f64 {
        return Err(Error::Guard(format!("brute force over 2^{bits:.1} states")));
    }
    let pos = |v: usize| vars.binary_search(&v).expect("active var");
    let layouts: Vec<(Vec<usize>, Vec<usize>)> = g
        .factors
        .iter()
        .map(|f| {
            let mut strides = vec![1; f.factor.vars.len()];
            for i in (0..strides.len().saturating_sub(1)).rev() {
                strides[i] = strides[i + 1] * f.factor.card[i + 1];
            }
            (f.factor.vars.iter().map(|&v| pos(v)).collect(), strides)
        })
        .collect();
    let card: Vec<usize> = vars.iter().map(|&v| g.card[v]).collect();
    let mut vals = vec![0usize; vars.len()];
    loop {
        let mut w = 0.0;
        for (f, (p, s)) in g.factors.iter().zip(&layouts) {
            let idx: usize = p.iter().zip(s).map(|(&p, &s)| vals[p] * s).sum();
            w += f.factor.table[idx];
            if w == ZERO {
                break;
            }
        }
        visit(&vals, w);
        let mut k = vars.len();
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            vals[k] += 1;
            if vals[k] < card[k] {
                break;
            }
            vals[k] = 0;
        }
    }
}

/// `ln Z` of the grounded model, including free randvars.
pub fn brute_log_partition(g: &GroundFactorGraph, limits: &Limits) -> Result<f64> {
    let vars = active_vars(g, &[]);
    let mut acc = Vec::new();
    enumerate(g, &vars, limits, |_, w| acc.push(w))?;
    let free: f64 = (0..g.randvars.len())
        .filter(|v| vars.binary_search(v).is_err())
        .map(|v| (g.card[v] as f64).ln())
        .sum();
    Ok(logspace::sum(acc) + free)
}

/// Answers all queries from one enumeration of the joint.
pub fn brute_marginals(g: &GroundFactorGraph, queries: &[Query], limits: &Limits) -> Result<Vec<Distribution>> {
    let qvars: Vec<Vec<usize>> = queries.iter().map(|q| query_vars(g, q)).collect::<Result<_>>()?;
    let extra: Vec<usize> = qvars.iter().flatten().copied().collect();
    let vars = active_vars(g, &extra);
    let layouts: Vec<(Vec<usize>, Vec<usize>)> = qvars
        .iter()
        .map(|qv| {
            let shape: Vec<usize> = qv.iter().map(|&v| g.card[v]).collect();
            (qv.iter().map(|v| vars.binary_search(v).unwrap()).collect(), shape)
        })
        .collect();
    let mut sums: Vec<Vec<Vec<f64>>> = layouts
        .iter()
        .map(|(_, shape)| vec![Vec::new(); shape.iter().product()])
        .collect();
    enumerate(g, &vars, limits, |vals, w| {
        if w == ZERO {
            return;
        }
        for ((p, shape), s) in layouts.iter().zip(sums.iter_mut()) {
            let mut idx = 0;
            for (&p, &c) in p.iter().zip(shape) {
                idx = idx * c + vals[p];
            }
            s[idx].push(w);
        }
    })?;
    queries
        .iter()
        .zip(layouts)
        .zip(sums)
        .map(|((q, (_, shape)), s)| {
            let table: Vec<f64> = s.into_iter().map(logspace::sum).collect();
            let probs = logspace::normalize(&table).ok_or(Error::ZeroEvidence)?;
            Ok(Distribution { terms: q.terms.clone(), shape, probs })
        })
        .collect()
}
