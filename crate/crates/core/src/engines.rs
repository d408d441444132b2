//! Uniform entry point over all engines.

use std::fmt;

use crate::error::{Error, Result};
use crate::fojtree::ljt_answer;
use crate::limits::Limits;
use crate::ljtkc::{precompute, LjtkcOptions};
use crate::lve::{lve_answer, JustDiff, Trace};
use crate::model::{Distribution, Evidence, GroundAtom, Model, Query};
use crate::oracle::{brute_marginals, ground_model, jt_marginals, ve_marginal};
use crate::wfomc::fokc_answer_counted;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Engine {
    Oracle,
    Jt,
    Ve,
    Lve,
    Ljt,
    Fokc,
    Ljtkc,
}

impl Engine {
    pub const ALL: [Engine; 7] =
        [Engine::Oracle, Engine::Jt, Engine::Ve, Engine::Lve, Engine::Ljt, Engine::Fokc, Engine::Ljtkc];

    pub fn parse(s: &str) -> Option<Engine> {
        Engine::ALL.into_iter().find(|e| e.name() == s)
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::Oracle => "oracle",
            Engine::Jt => "jt",
            Engine::Ve => "ve",
            Engine::Lve => "lve",
            Engine::Ljt => "ljt",
            Engine::Fokc => "fokc",
            Engine::Ljtkc => "ljtkc",
        }
    }

    /// Engines that only answer single-term queries.
    pub fn single_term(self) -> bool {
        matches!(self, Engine::Fokc | Engine::Ljtkc)
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub policy: JustDiff,
    pub limits: Limits,
}

/// An answer plus the work counters collected while computing it.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub dist: Distribution,
    /// Lifted operator applications.
    pub trace: Trace,
    /// Nodes over all circuits compiled for the query.
    pub circuit_nodes: usize,
    /// Arithmetic operations spent evaluating circuits.
    pub circuit_ops: u64,
}

impl Outcome {
    fn plain(dist: Distribution) -> Self {
        Outcome { dist, trace: Trace::default(), circuit_nodes: 0, circuit_ops: 0 }
    }
}

/// Answers `q` given `e` with `engine`, from scratch.
pub fn run(engine: Engine, m: &Model, q: &Query, e: &Evidence, opts: &RunOptions) -> Result<Outcome> {
    let limits = &opts.limits;
    match engine {
        Engine::Oracle | Engine::Jt | Engine::Ve => {
            check_query(m, q)?;
            let g = ground_model(m, e, limits)?;
            let d = match engine {
                Engine::Oracle => brute_marginals(&g, std::slice::from_ref(q), limits)?.remove(0),
                Engine::Jt => jt_marginals(&g, std::slice::from_ref(q), limits)?.remove(0),
                _ => ve_marginal(&g, q, limits)?,
            };
            Ok(Outcome::plain(d))
        }
        Engine::Lve | Engine::Ljt => {
            let mut trace = Trace::default();
            let dist = if engine == Engine::Lve {
                lve_answer(m, q, e, opts.policy, limits, &mut trace)?
            } else {
                ljt_answer(m, q, e, opts.policy, limits, &mut trace)?
            };
            Ok(Outcome { dist, trace, circuit_nodes: 0, circuit_ops: 0 })
        }
        Engine::Fokc => {
            let (dist, circuit_nodes, circuit_ops) = fokc_answer_counted(m, q, e, limits)?;
            Ok(Outcome { dist, trace: Trace::default(), circuit_nodes, circuit_ops })
        }
        Engine::Ljtkc => {
            if q.terms.len() != 1 {
                return Err(Error::MultiTermQuery);
            }
            let p = precompute(m, e, &LjtkcOptions { policy: opts.policy, limits: *limits, eager: false })?;
            let dist = p.answer(q)?;
            Ok(Outcome {
                dist,
                trace: p.jtree.trace.clone(),
                circuit_nodes: p.circuit_nodes() + p.numerator_nodes(),
                circuit_ops: p.ops(),
            })
        }
    }
}

/// One engine's result on one query.
#[derive(Clone, Debug)]
pub struct CheckCell {
    pub query: usize,
    pub engine: Engine,
    pub result: Result<Distribution>,
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub queries: Vec<Query>,
    pub cells: Vec<CheckCell>,
    /// Largest absolute probability difference between two engines on one query.
    pub max_deviation: f64,
    /// Human-readable disagreements: deviations above the tolerance and
    /// engines that disagree on whether the evidence is possible.
    pub flagged: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }
}

pub const CHECK_TOLERANCE: f64 = 1e-9;

/// Runs every engine on every query and compares the answers pairwise.
/// Single-term engines skip multi-term queries; guard trips are reported
/// in the cells but not flagged.
pub fn cross_engine_check(m: &Model, queries: &[Query], e: &Evidence, opts: &RunOptions) -> CheckReport {
    let mut cells = Vec::new();
    let mut flagged = Vec::new();
    let mut max_deviation: f64 = 0.0;
    for (qi, q) in queries.iter().enumerate() {
        let name = q.display(&m.vocab);
        let mut here: Vec<(Engine, &Distribution)> = Vec::new();
        let first = cells.len();
        for engine in Engine::ALL {
            if engine.single_term() && q.terms.len() != 1 {
                continue;
            }
            let result = run(engine, m, q, e, opts).map(|o| o.dist);
            cells.push(CheckCell { query: qi, engine, result });
        }
        let mut zero = Vec::new();
        let mut answered = Vec::new();
        for c in &cells[first..] {
            match &c.result {
                Ok(d) => {
                    here.push((c.engine, d));
                    answered.push(c.engine.name());
                }
                Err(Error::ZeroEvidence) => zero.push(c.engine.name()),
                Err(Error::Guard(_)) => {}
                Err(err) => flagged.push(format!("{name}: {} failed: {err}", c.engine)),
            }
        }
        if !zero.is_empty() && !answered.is_empty() {
            flagged.push(format!(
                "{name}: zero-probability evidence for {} but answered by {}",
                zero.join(","),
                answered.join(",")
            ));
        }
        for (i, (ea, da)) in here.iter().enumerate() {
            for (eb, db) in &here[i + 1..] {
                let d = da.max_abs_diff(db);
                max_deviation = max_deviation.max(d);
                if d.is_nan() || d > CHECK_TOLERANCE {
                    flagged.push(format!("{name}: {ea} and {eb} differ by {d:e}"));
                }
            }
        }
    }
    CheckReport { queries: queries.to_vec(), cells, max_deviation, flagged }
}

/// Rejects query terms outside the vocabulary and repeated terms.
pub fn check_query(m: &Model, query: &Query) -> Result<()> {
    for (i, t) in query.terms.iter().enumerate() {
        let rel = m.vocab.relations.get(t.rel).ok_or_else(|| Error::UnknownRandvar(format!("relation {}", t.rel)))?;
        let in_range = t.args.len() == rel.params.len()
            && t.args.iter().zip(&rel.params).all(|(&c, &d)| c < m.vocab.domain_size(d));
        if !in_range {
            return Err(Error::UnknownRandvar(m.vocab.relations[t.rel].name.clone()));
        }
        if query.terms[..i].contains(t) {
            return Err(Error::Validation(format!("query repeats {}", m.vocab.ground_name(t))));
        }
    }
    Ok(())
}

/// Runs `run` with the query terms removed from the evidence, then applies
/// their observed values as an indicator.
pub(crate) fn answer_observed(
    m: &Model,
    query: &Query,
    evidence: &Evidence,
    run: impl FnOnce(&Evidence) -> Result<Distribution>,
) -> Result<Distribution> {
    check_query(m, query)?;
    let observed = evidence.ground_map()?;
    let fixed: Vec<Option<usize>> = query.terms.iter().map(|t| observed.get(t).copied()).collect();
    if fixed.iter().all(Option::is_none) {
        return run(evidence);
    }
    let mut d = run(&evidence.without(&query.terms))?;
    for (r, p) in d.probs.iter_mut().enumerate() {
        let vals = crate::model::row_values(&d.shape, r);
        if fixed.iter().zip(&vals).any(|(f, v)| f.is_some_and(|f| f != *v)) {
            *p = 0.0;
        }
    }
    let total: f64 = d.probs.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    d.probs.iter_mut().for_each(|p| *p /= total);
    Ok(d)
}

/// Answers the unobserved query terms with `run` on evidence already
/// entered, then extends the result by the observed values.
pub(crate) fn answer_unobserved(
    m: &Model,
    query: &Query,
    evidence: &Evidence,
    run: impl FnOnce(&Query) -> Result<Distribution>,
) -> Result<Distribution> {
    check_query(m, query)?;
    let observed = evidence.ground_map()?;
    let fixed: Vec<Option<usize>> = query.terms.iter().map(|t| observed.get(t).copied()).collect();
    if fixed.iter().all(Option::is_none) {
        return run(query);
    }
    let open: Vec<GroundAtom> =
        query.terms.iter().zip(&fixed).filter(|(_, f)| f.is_none()).map(|(t, _)| t.clone()).collect();
    let sub = run(&Query { terms: open })?;
    let shape: Vec<usize> = query.terms.iter().map(|t| m.vocab.range_size(t.rel)).collect();
    let len: usize = shape.iter().product();
    let mut probs = vec![0.0; len];
    for (r, p) in probs.iter_mut().enumerate() {
        let vals = crate::model::row_values(&shape, r);
        if fixed.iter().zip(&vals).any(|(f, v)| f.is_some_and(|f| f != *v)) {
            continue;
        }
        let rest: Vec<usize> = vals.iter().zip(&fixed).filter(|(_, f)| f.is_none()).map(|(v, _)| *v).collect();
        *p = sub.probs[crate::model::row_index(&sub.shape, &rest)];
    }
    Ok(Distribution { terms: query.terms.clone(), shape, probs })
}
