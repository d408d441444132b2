use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::logspace::{self, ZERO};
use crate::model::{Distribution, Evidence, GroundAtom, Model, Query};

use super::{compile, WfomcProblem};

/// Weighted model count of one compiled problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Count {
    pub ln: f64,
    pub nodes: usize,
    pub ops: u64,
}

/// Compiles, smooths, validates and evaluates `p`.
pub fn count(p: &WfomcProblem, limits: &Limits) -> Result<Count> {
    let c = compile(p, limits)?.smooth(p)?;
    let v = c.validate();
    if !v.ok() {
        return Err(Error::Internal(v.witness.unwrap_or_else(|| "invalid circuit".into())));
    }
    let (ln, ops) = c.eval_counted(p);
    Ok(Count { ln, nodes: c.node_count(), ops })
}

/// Numerator per range value of `term` given denominator `den`, checked
/// against it, plus the node and operation totals of the numerator circuits.
pub(crate) fn ratio(p: &WfomcProblem, term: &GroundAtom, den: f64, limits: &Limits) -> Result<(Vec<f64>, usize, u64)> {
    if den == ZERO {
        return Err(Error::ZeroEvidence);
    }
    let mut nums = Vec::new();
    let (mut nodes, mut ops) = (0, 0);
    for v in 0..2 {
        let mut q = p.clone();
        q.add_unit(term, v);
        let c = count(&q, limits)?;
        nums.push(c.ln);
        nodes += c.nodes;
        ops += c.ops;
    }
    if !logspace::close(logspace::sum(nums.iter().copied()), den, 1e-9) {
        return Err(Error::Internal(format!(
            "numerators sum to {} but the denominator is {}",
            logspace::sum(nums.iter().copied()),
            den
        )));
    }
    Ok((nums.iter().map(|n| (n - den).exp()).collect(), nodes, ops))
}

/// `ln Z` of `m` conditioned on `e`, by knowledge compilation.
pub fn fokc_log_partition(m: &Model, e: &Evidence, limits: &Limits) -> Result<f64> {
    super::check_reduction(&m.vocab, &m.parfactors, limits)?;
    let mut p = WfomcProblem::reduce(&m.vocab, &m.parfactors)?;
    p.add_evidence(e)?;
    Ok(count(&p, limits)?.ln)
}

/// Marginal of a single query term given `e`.
pub fn fokc_answer(m: &Model, q: &Query, e: &Evidence, limits: &Limits) -> Result<Distribution> {
    Ok(fokc_answer_counted(m, q, e, limits)?.0)
}

/// [`fokc_answer`] together with the total circuit nodes and evaluation
/// operations spent on it.
pub fn fokc_answer_counted(m: &Model, q: &Query, e: &Evidence, limits: &Limits) -> Result<(Distribution, usize, u64)> {
    if q.terms.len() != 1 {
        return Err(Error::MultiTermQuery);
    }
    let (mut nodes, mut ops) = (0, 0);
    let d = crate::engines::answer_observed(m, q, e, |e| {
        super::check_reduction(&m.vocab, &m.parfactors, limits)?;
    let mut p = WfomcProblem::reduce(&m.vocab, &m.parfactors)?;
        p.add_evidence(e)?;
        let den = count(&p, limits)?;
        let (probs, n, o) = ratio(&p, &q.terms[0], den.ln, limits)?;
        nodes = den.nodes + n;
        ops = den.ops + o;
        Ok(Distribution { terms: q.terms.clone(), shape: vec![2], probs })
    })?;
    Ok((d, nodes, ops))
}
