use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::logspace::{self, ZERO};
use crate::model::Term;

use super::WfomcProblem;

/// `ln` of the weighted model count by enumerating every interpretation of
/// the Herbrand base. Refuses more than `max_bits` ground atoms.
pub fn brute_wmc(p: &WfomcProblem, max_bits: u32) -> Result<f64> {
    let mut index: HashMap<(usize, Vec<u32>), usize> = HashMap::new();
    let mut weights = Vec::new();
    for pred in 0..p.predicates.len() {
        for t in p.support(pred) {
            index.insert((pred, t), weights.len());
            weights.push((p.predicates[pred].w_true, p.predicates[pred].w_false));
        }
    }
    let n = weights.len();
    if n > max_bits as usize {
        return Err(Error::Guard(format!("{n} ground atoms exceed {max_bits} bits")));
    }
    let mut ground: Vec<Vec<(usize, bool)>> = Vec::new();
    for c in &p.clauses {
        for t in c.constraint.expand() {
            let mut lits = Vec::new();
            for l in &c.literals {
                let args: Vec<u32> = l.terms.iter().map(|x| match x {
                    Term::Var(i) => t[*i],
                    Term::Const(k) => *k,
                }).collect();
                let bit = *index
                    .get(&(l.pred, args))
                    .ok_or_else(|| Error::Internal(format!("literal of {} outside its support", p.predicates[l.pred].name)))?;
                lits.push((bit, l.positive));
            }
            ground.push(lits);
        }
    }
    let mut terms = Vec::with_capacity(1 << n);
    for mask in 0u64..(1u64 << n) {
        let val = |b: usize| mask >> b & 1 == 1;
        if ground.iter().all(|cl| cl.iter().any(|&(b, pos)| val(b) == pos)) {
            terms.push((0..n).map(|b| if val(b) { weights[b].0 } else { weights[b].1 }).sum::<f64>());
        }
    }
    let z = logspace::sum(terms);
    Ok(if z == ZERO { ZERO } else { z + p.ln_const })
}
