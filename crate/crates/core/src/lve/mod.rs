//! Lifted variable elimination: the operator suite and the elimination loop.

mod engine;
mod normal;
mod ops;

pub use engine::{absorb_all, eliminate, lve_answer, lve_log_partition, Keep};
pub(crate) use engine::distribution;
pub use ops::{
    absorb, args_disjoint, count_convert, count_convert_pair, count_normalise, expand, fix_arg, ground_logvar, may_overlap,
    merge_duplicates, multiply, split, sum_out,
};

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use crate::model::{row_index, Arg, GroundAtom, Parfactor, Vocab};

/// How a just-different pair `Q(X), Q(Y), X != Y` is eliminated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum JustDiff {
    /// Ground one of the logvars, as the evaluated implementations do.
    #[default]
    Ground,
    /// Convert the pair into a counting randvar.
    Count,
}

impl JustDiff {
    pub fn parse(s: &str) -> Option<JustDiff> {
        match s {
            "ground" => Some(JustDiff::Ground),
            "count" => Some(JustDiff::Count),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceLine {
    pub op: &'static str,
    pub parfactor: String,
    pub target: String,
    pub cost: u64,
}

/// Operator applications of one run plus an arithmetic counter (table
/// entries computed).
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub lines: Vec<TraceLine>,
    pub arith: u64,
}

impl Trace {
    pub fn push(&mut self, op: &'static str, parfactor: &str, target: impl Into<String>, cost: u64) {
        self.arith += cost;
        self.lines.push(TraceLine { op, parfactor: parfactor.to_string(), target: target.into(), cost });
    }

    pub fn count(&self, op: &str) -> usize {
        self.lines.iter().filter(|l| l.op == op).count()
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn extend(&mut self, other: &Trace) {
        self.lines.extend(other.lines.iter().cloned());
        self.arith += other.arith;
    }

    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for l in &self.lines {
            *out.entry(l.op).or_default() += 1;
        }
        out
    }

    /// `op,parfactor,target,cost` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            let _ = writeln!(out, "{},{},{},{}", l.op, l.parfactor, l.target.replace(',', ";"), l.cost);
        }
        out
    }
}

/// `ln` of the product of all ground factors of `ps` under a full
/// assignment of ground randvars (missing randvars read as value 0).
pub fn ground_ln_weight(vocab: &Vocab, ps: &[Parfactor], assignment: &HashMap<GroundAtom, usize>) -> f64 {
    let mut total = 0.0;
    for g in ps {
        let sizes = g.arg_sizes(vocab);
        for t in g.constraint.expand() {
            let row: Vec<usize> = g
                .args
                .iter()
                .map(|a| match a {
                    Arg::Atom(atom) => assignment.get(&atom.ground(&t)).copied().unwrap_or(0),
                    Arg::Count(c) => {
                        let mut h = vec![0u32; vocab.range_size(c.atom.rel)];
                        for ga in c.ground_atoms() {
                            h[assignment.get(&ga).copied().unwrap_or(0)] += 1;
                        }
                        crate::histogram::histogram_index(&h)
                    }
                })
                .collect();
            total += g.table[row_index(&sizes, &row)];
            if total == f64::NEG_INFINITY {
                return total;
            }
        }
    }
    total
}
