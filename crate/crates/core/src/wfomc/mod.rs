//! Weighted first-order model counting.
//!
//! A model is reduced row by row: every table row `a` of a parfactor `g` that
//! is not `1` gets a parameter predicate `P(X) ⇔ literals(a)` with weights
//! `φ(a)` / `1`; rows with `φ(a) = 0` become hard clauses. The resulting
//! theory is compiled into a first-order d-DNNF circuit and evaluated in
//! log space.

mod brute;
mod circuit;
mod compile;
mod fokc;

pub use brute::brute_wmc;
pub use circuit::{Circuit, Node, NodeId, Poly, SizeExpr, Validation};
pub use compile::compile;
pub use fokc::{count, fokc_answer, fokc_answer_counted, fokc_log_partition, Count};
pub(crate) use fokc::ratio;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::logspace::{self, ZERO};
use crate::model::{row_values, Arg, Atom, Constraint, DomId, Evidence, GroundAtom, Parfactor, Term, Vocab};

#[derive(Clone, Debug, PartialEq)]
pub struct Predicate {
    pub name: String,
    pub params: Vec<DomId>,
    /// `ln w_T`.
    pub w_true: f64,
    /// `ln w_F`.
    pub w_false: f64,
    /// Tuples the predicate is defined on; `None` for the full product of
    /// its parameter domains.
    pub support: Option<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Literal {
    pub pred: usize,
    pub terms: Vec<Term>,
    pub positive: bool,
}

/// `∀ vars | constraint: l1 ∨ … ∨ lk`; the logvars are those of the constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct Clause {
    pub constraint: Constraint,
    pub literals: Vec<Literal>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WfomcProblem {
    pub vocab: Arc<Vocab>,
    /// Model relations first, with the same ids, then parameter predicates.
    pub predicates: Vec<Predicate>,
    pub clauses: Vec<Clause>,
    /// `ln` of a constant factor (scalar parfactors).
    pub ln_const: f64,
}

fn literal_for(atom: &Atom, value: usize) -> Literal {
    Literal { pred: atom.rel, terms: atom.terms.clone(), positive: value == 0 }
}

/// Rejects parfactor sets whose reduction would exceed the circuit guard:
/// every table row becomes a predicate and a clause over all arguments.
pub fn check_reduction(vocab: &Vocab, parfactors: &[Parfactor], limits: &Limits) -> Result<()> {
    let mut size: usize = 0;
    for g in parfactors {
        let rows = g.table_len(vocab);
        size = size.saturating_add(rows.saturating_mul(g.args.len() + 1));
        if size > limits.circuit_nodes {
            return Err(Error::Guard(format!("reducing {} needs more than {} clause literals", g.name, limits.circuit_nodes)));
        }
    }
    Ok(())
}

impl WfomcProblem {
    /// Reduces a set of parfactors over `vocab`. Every relation must have a
    /// boolean range and no argument may be a counting randvar.
    pub fn reduce(vocab: &Arc<Vocab>, parfactors: &[Parfactor]) -> Result<WfomcProblem> {
        for r in &vocab.relations {
            if !r.is_boolean() {
                return Err(Error::Unsupported(format!("relation {} has a non-boolean range", r.name)));
            }
        }
        let mut p = WfomcProblem {
            vocab: vocab.clone(),
            predicates: vocab
                .relations
                .iter()
                .map(|r| Predicate { name: r.name.clone(), params: r.params.clone(), w_true: 0.0, w_false: 0.0, support: None })
                .collect(),
            clauses: Vec::new(),
            ln_const: 0.0,
        };
        let mut names = std::collections::BTreeSet::new();
        for g in parfactors {
            let mut base = g.name.clone();
            let mut k = 1;
            while !names.insert(base.clone()) {
                k += 1;
                base = format!("{}~{k}", g.name);
            }
            let mut atoms = Vec::new();
            for a in &g.args {
                match a {
                    Arg::Atom(at) => atoms.push(at.clone()),
                    Arg::Count(_) => {
                        return Err(Error::Unsupported(format!("parfactor {} has a counting randvar", g.name)))
                    }
                }
            }
            if atoms.is_empty() {
                p.ln_const += logspace::pow(g.table[0], g.constraint.count() as f64);
                continue;
            }
            let sizes = vec![2; atoms.len()];
            let vars: Vec<Term> = (0..g.constraint.arity()).map(Term::Var).collect();
            for (r, &phi) in g.table.iter().enumerate() {
                if phi == 0.0 {
                    continue;
                }
                let lits: Vec<Literal> =
                    row_values(&sizes, r).iter().zip(&atoms).map(|(&v, a)| literal_for(a, v)).collect();
                let negated = |l: &Literal| Literal { positive: !l.positive, ..l.clone() };
                if phi == ZERO {
                    p.clauses.push(Clause { constraint: g.constraint.clone(), literals: lits.iter().map(negated).collect() });
                    continue;
                }
                let pred = p.predicates.len();
                p.predicates.push(Predicate {
                    name: format!("{base}#{r}"),
                    params: g.vars().iter().map(|v| v.domain).collect(),
                    w_true: phi,
                    w_false: 0.0,
                    support: Some(g.constraint.clone()),
                });
                let head = Literal { pred, terms: vars.clone(), positive: true };
                let mut back = vec![head.clone()];
                back.extend(lits.iter().map(negated));
                p.clauses.push(Clause { constraint: g.constraint.clone(), literals: back });
                for l in lits {
                    p.clauses.push(Clause { constraint: g.constraint.clone(), literals: vec![negated(&head), l] });
                }
            }
        }
        Ok(p)
    }

    /// Adds one unit clause per evidence item.
    pub fn add_evidence(&mut self, e: &Evidence) -> Result<()> {
        for item in &e.items {
            if item.atom.rel >= self.vocab.relations.len() {
                return Err(Error::UnknownRelation(format!("relation #{}", item.atom.rel)));
            }
            self.clauses.push(Clause { constraint: item.constraint.clone(), literals: vec![literal_for(&item.atom, item.value)] });
        }
        Ok(())
    }

    /// Adds the unit clause `g = value`.
    pub fn add_unit(&mut self, g: &GroundAtom, value: usize) {
        let atom = Atom { rel: g.rel, terms: g.args.iter().map(|&c| Term::Const(c)).collect() };
        self.clauses.push(Clause { constraint: Constraint::empty_vars(), literals: vec![literal_for(&atom, value)] });
    }

    /// Ground tuples of predicate `pred`.
    pub fn support(&self, pred: usize) -> Vec<Vec<u32>> {
        match &self.predicates[pred].support {
            Some(c) => c.expand(),
            None => {
                let vars = self.predicates[pred]
                    .params
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| crate::model::Logvar::new(format!("X{i}"), d, self.vocab.domain_size(d)))
                    .collect();
                Constraint::top(vars).expand()
            }
        }
    }

    /// Number of ground atoms of predicate `pred`.
    pub fn support_len(&self, pred: usize) -> u64 {
        match &self.predicates[pred].support {
            Some(c) => c.count(),
            None => self.predicates[pred].params.iter().map(|&d| self.vocab.domain_size(d) as u64).product(),
        }
    }

    pub fn describe(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.predicates.iter().enumerate() {
            out.push_str(&format!("pred {} {} w_T={} w_F={}\n", i, p.name, p.w_true.exp(), p.w_false.exp()));
        }
        for c in &self.clauses {
            let lits: Vec<String> = c
                .literals
                .iter()
                .map(|l| {
                    let args: Vec<String> = l
                        .terms
                        .iter()
                        .map(|t| match t {
                            Term::Var(i) => c.constraint.vars[*i].name.clone(),
                            Term::Const(k) => {
                                let d = self.predicates[l.pred].params[l.terms.iter().position(|x| x == t).unwrap()];
                                self.vocab.constant_name(d, *k).to_string()
                            }
                        })
                        .collect();
                    format!("{}{}({})", if l.positive { "" } else { "!" }, self.predicates[l.pred].name, args.join(","))
                })
                .collect();
            out.push_str(&format!("{} | {}\n", c.constraint.describe(&self.vocab), lits.join(" | ")));
        }
        out
    }
}
