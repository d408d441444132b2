//! Lifted junction tree message passing followed by per-parcluster
//! knowledge compilation.
//!
//! Messages are computed with LVE. Each parcluster's local model plus its
//! incoming messages forms a submodel that holds all information relevant
//! to its PRVs; queries are answered as ratios of weighted model counts of
//! that submodel with and without the query literal.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::fojtree::{construct, FoJtree};
use crate::limits::Limits;
use crate::logspace::ZERO;
use crate::lve::{JustDiff, Trace};
use crate::model::{Distribution, Evidence, Model, Parfactor, Query};
use crate::wfomc::{check_reduction, count, ratio, Count, WfomcProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LjtkcOptions {
    pub policy: JustDiff,
    pub limits: Limits,
    /// Compile every parcluster during precomputation rather than on first use.
    pub eager: bool,
}

impl Default for LjtkcOptions {
    fn default() -> Self {
        LjtkcOptions { policy: JustDiff::default(), limits: Limits::default(), eager: true }
    }
}

#[derive(Debug)]
pub struct Prepared {
    pub submodel: Vec<Parfactor>,
    pub problem: WfomcProblem,
    denominator: OnceLock<Count>,
}

#[derive(Debug)]
pub struct PreparedModel {
    pub model: Model,
    pub evidence: Evidence,
    pub jtree: FoJtree,
    pub clusters: Vec<Prepared>,
    pub limits: Limits,
    compilations: AtomicUsize,
    numerator_nodes: AtomicUsize,
    ops: AtomicU64,
}

/// Builds the tree, enters `e`, passes LVE messages and reduces every
/// parcluster submodel; compiles them too when `opts.eager`.
pub fn precompute(m: &Model, e: &Evidence, opts: &LjtkcOptions) -> Result<PreparedModel> {
    let mut j = construct(m);
    j.enter_evidence(e)?;
    j.pass_messages(opts.policy, &opts.limits)?;
    let mut clusters = Vec::new();
    for i in 0..j.nodes.len() {
        let submodel = j.submodel(&BTreeSet::from([i]));
        check_reduction(&m.vocab, &submodel, &opts.limits)?;
        let problem = WfomcProblem::reduce(&m.vocab, &submodel)?;
        clusters.push(Prepared { submodel, problem, denominator: OnceLock::new() });
    }
    let p = PreparedModel {
        model: m.clone(),
        evidence: e.clone(),
        jtree: j,
        clusters,
        limits: opts.limits,
        compilations: AtomicUsize::new(0),
        numerator_nodes: AtomicUsize::new(0),
        ops: AtomicU64::new(0),
    };
    if opts.eager {
        for i in 0..p.clusters.len() {
            if p.denominator(i)?.ln == ZERO {
                return Err(Error::ZeroEvidence);
            }
        }
    }
    Ok(p)
}

impl PreparedModel {
    /// `c_i` of parcluster `i`, compiled on first use.
    pub fn denominator(&self, i: usize) -> Result<Count> {
        let cell = &self.clusters[i].denominator;
        if let Some(c) = cell.get() {
            return Ok(*c);
        }
        self.compilations.fetch_add(1, Ordering::Relaxed);
        let c = count(&self.clusters[i].problem, &self.limits)?;
        self.ops.fetch_add(c.ops, Ordering::Relaxed);
        Ok(*cell.get_or_init(|| c))
    }

    /// Number of circuits compiled so far, numerators included.
    pub fn compilations(&self) -> usize {
        self.compilations.load(Ordering::Relaxed)
    }

    /// Node count summed over the compiled parcluster circuits.
    pub fn circuit_nodes(&self) -> usize {
        self.clusters.iter().filter_map(|c| c.denominator.get()).map(|c| c.nodes).sum()
    }

    /// Node count summed over the query circuits compiled so far.
    pub fn numerator_nodes(&self) -> usize {
        self.numerator_nodes.load(Ordering::Relaxed)
    }

    /// Arithmetic operations spent evaluating circuits so far.
    pub fn ops(&self) -> u64 {
        self.ops.load(Ordering::Relaxed)
    }

    /// Lowest-id parcluster covering the single query term.
    pub fn home(&self, q: &Query) -> Result<usize> {
        let t = q.terms.first().ok_or(Error::MultiTermQuery)?;
        self.jtree
            .covering(t.rel)
            .first()
            .copied()
            .ok_or_else(|| Error::Internal(format!("{} is in no parcluster", self.model.vocab.ground_name(t))))
    }

    /// Answers `q` at its lowest-id covering parcluster.
    pub fn answer(&self, q: &Query) -> Result<Distribution> {
        self.answer_with(q, None)
    }

    /// Answers `q` inside parcluster `node`.
    pub fn answer_at(&self, node: usize, q: &Query) -> Result<Distribution> {
        self.answer_with(q, Some(node))
    }

    fn answer_with(&self, q: &Query, node: Option<usize>) -> Result<Distribution> {
        if q.terms.len() != 1 {
            return Err(Error::MultiTermQuery);
        }
        crate::engines::answer_unobserved(&self.model, q, &self.evidence, |open| {
            if open.terms.is_empty() {
                let den = self.denominator(self.jtree.center())?;
                if den.ln == ZERO {
                    return Err(Error::ZeroEvidence);
                }
                return Ok(Distribution { terms: Vec::new(), shape: Vec::new(), probs: vec![1.0] });
            }
            let i = match node {
                Some(i) => {
                    let t = &open.terms[0];
                    if !self.jtree.nodes[i].prvs.contains(&t.rel) {
                        return Err(Error::Uncovered(format!("{} in C{}", self.model.vocab.ground_name(t), i + 1)));
                    }
                    i
                }
                None => self.home(open)?,
            };
            let den = self.denominator(i)?;
            self.compilations.fetch_add(2, Ordering::Relaxed);
            let (probs, nodes, ops) = ratio(&self.clusters[i].problem, &open.terms[0], den.ln, &self.limits)?;
            self.numerator_nodes.fetch_add(nodes, Ordering::Relaxed);
            self.ops.fetch_add(ops, Ordering::Relaxed);
            Ok(Distribution { terms: open.terms.clone(), shape: vec![2], probs })
        })
    }
}

/// Precomputes with on-demand compilation and answers `query`.
pub fn ljtkc_answer(
    m: &Model,
    query: &Query,
    evidence: &Evidence,
    policy: JustDiff,
    limits: &Limits,
    trace: &mut Trace,
) -> Result<Distribution> {
    let opts = LjtkcOptions { policy, limits: *limits, eager: false };
    let p = precompute(m, evidence, &opts)?;
    trace.extend(&p.jtree.trace);
    p.answer(query)
}
