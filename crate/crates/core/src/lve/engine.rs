use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::logspace;
use crate::model::{
    row_index, row_values, Arg, Atom, ConstraintKind, Distribution, Evidence, GroundAtom, Model,
    Parfactor, Query, RelId, Term, Vocab,
};

use super::normal::{arg_key, Blocks, ClassKey, Normaliser, Pos};
use super::{ops, JustDiff, Trace};

/// Randvars that elimination must leave in place.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Keep {
    /// Exactly these ground randvars (a query).
    Atoms(Vec<GroundAtom>),
    /// Every randvar of these relations (a separator).
    Relations(BTreeSet<RelId>),
}

impl Keep {
    fn keeps(&self, key: &ClassKey) -> bool {
        match self {
            Keep::Relations(rels) => rels.contains(&key.rel),
            Keep::Atoms(atoms) => {
                key.is_ground()
                    && atoms.iter().any(|a| {
                        a.rel == key.rel
                            && a.args.iter().zip(&key.pos).all(|(c, p)| matches!(p, Pos::Const(d) if d == c))
                    })
            }
        }
    }

    fn constants(&self, vocab: &Vocab) -> Vec<(usize, u32)> {
        match self {
            Keep::Relations(_) => Vec::new(),
            Keep::Atoms(atoms) => atoms
                .iter()
                .flat_map(|a| vocab.relations[a.rel].params.iter().copied().zip(a.args.iter().copied()))
                .collect(),
        }
    }
}

struct Run<'a> {
    vocab: &'a Vocab,
    keep: &'a Keep,
    policy: JustDiff,
    limits: &'a Limits,
    trace: &'a mut Trace,
    fresh: usize,
}

type Classes = BTreeMap<ClassKey, Vec<usize>>;

fn classes(blocks: &Blocks, ps: &[Parfactor]) -> Classes {
    let mut out: Classes = BTreeMap::new();
    for (i, g) in ps.iter().enumerate() {
        for a in &g.args {
            let list = out.entry(arg_key(blocks, g, a)).or_default();
            if list.last() != Some(&i) {
                list.push(i);
            }
        }
    }
    out
}

fn k_args(blocks: &Blocks, g: &Parfactor, key: &ClassKey) -> Vec<usize> {
    (0..g.args.len()).filter(|&i| &arg_key(blocks, g, &g.args[i]) == key).collect()
}

/// Renames the logvars of `g` to `_0, _1, ...` in order of first appearance
/// in `atom`.
fn canonical(g: &Parfactor, atom: &Atom) -> Parfactor {
    let mut order: Vec<usize> = Vec::new();
    for t in &atom.terms {
        if let Term::Var(v) = t {
            if !order.contains(v) {
                order.push(*v);
            }
        }
    }
    let names: Vec<String> = (0..order.len()).map(|i| format!("_{i}")).collect();
    let constraint = g.constraint.permuted(&order).renamed(&names);
    let args = g
        .args
        .iter()
        .map(|a| match a {
            Arg::Atom(x) => Arg::Atom(x.map_vars(|v| Term::Var(order.iter().position(|&o| o == v).expect("covered")))),
            other => other.clone(),
        })
        .collect();
    Parfactor { name: g.name.clone(), constraint, args, table: g.table.clone() }
}

enum Shape {
    Single(usize),
    Pair(usize, usize),
    Closed,
}

impl Run<'_> {
    fn fresh_name(&mut self) -> String {
        self.fresh += 1;
        format!("p{}", self.fresh)
    }

    fn check_table(&self, len: usize) -> Result<()> {
        if len > self.limits.table_entries {
            return Err(Error::Guard(format!("table of {len} entries exceeds the limit")));
        }
        Ok(())
    }

    fn multiply_all(&mut self, mut gs: Vec<Parfactor>) -> Result<Parfactor> {
        let mut acc = gs.remove(0);
        for g in gs {
            self.check_table(acc.table.len().saturating_mul(g.table.len()))?;
            let name = format!("{}*{}", acc.name, g.name);
            acc = ops::multiply(self.vocab, &acc, &g)?;
            self.trace.push("multiply", &name, String::new(), acc.table.len() as u64);
        }
        Ok(acc)
    }

    fn cost(&self, gs: &[&Parfactor]) -> u128 {
        gs.iter().fold(1u128, |a, g| a.saturating_mul(g.table.len() as u128))
    }

    /// Eliminates a class whose parfactors all hold it in one atom that
    /// carries all their logvars.
    fn case_a(&mut self, ps: &[Parfactor], blocks: &Blocks, cls: &Classes) -> Result<Option<Vec<Parfactor>>> {
        let mut best: Option<(u128, &ClassKey)> = None;
        for (key, members) in cls {
            if self.keep.keeps(key) {
                continue;
            }
            let ok = members.iter().all(|&i| {
                let g = &ps[i];
                let ks = k_args(blocks, g, key);
                ks.len() == 1
                    && matches!(&g.args[ks[0]], Arg::Atom(a) if a.vars().len() == g.constraint.arity())
            });
            if !ok {
                continue;
            }
            let gs: Vec<&Parfactor> = members.iter().map(|&i| &ps[i]).collect();
            let c = self.cost(&gs);
            if best.is_none_or(|(b, _)| c < b) {
                best = Some((c, key));
            }
        }
        let Some((_, key)) = best else { return Ok(None) };
        let key = key.clone();
        let members = &cls[&key];
        let canon: Vec<Parfactor> = members
            .iter()
            .map(|&i| {
                let g = &ps[i];
                let Arg::Atom(a) = &g.args[k_args(blocks, g, &key)[0]] else { unreachable!() };
                canonical(g, a)
            })
            .collect();
        let acc = self.multiply_all(canon)?;
        let at = k_args(blocks, &acc, &key);
        if at.len() != 1 {
            return Err(Error::Internal(format!("class {} not merged", key.display(self.vocab))));
        }
        let mut out = ops::sum_out(self.vocab, &acc, at[0])?;
        self.trace.push("sum_out", &acc.name, key.display(self.vocab), acc.table.len() as u64);
        out.name = self.fresh_name();
        Ok(Some(replace(ps, members, vec![out])))
    }

    /// Eliminates a single-slot class through a counting randvar.
    fn case_c(&mut self, ps: &[Parfactor], blocks: &Blocks, cls: &Classes) -> Result<Option<Vec<Parfactor>>> {
        let mut best: Option<(u128, &ClassKey, Vec<Shape>)> = None;
        for (key, members) in cls {
            if self.keep.keeps(key) || key.slots() != 1 {
                continue;
            }
            let mut shapes = Vec::new();
            for &i in members {
                match self.shape(&ps[i], blocks, key) {
                    Some(s) => shapes.push(s),
                    None => break,
                }
            }
            if shapes.len() != members.len() {
                continue;
            }
            let gs: Vec<&Parfactor> = members.iter().map(|&i| &ps[i]).collect();
            let c = self.cost(&gs);
            if best.as_ref().is_none_or(|(b, _, _)| c < *b) {
                best = Some((c, key, shapes));
            }
        }
        let Some((_, key, shapes)) = best else { return Ok(None) };
        let key = key.clone();
        let members = &cls[&key];
        let mut converted = Vec::new();
        for (&i, s) in members.iter().zip(&shapes) {
            let g = &ps[i];
            let c = match s {
                Shape::Single(x) => {
                    let c = ops::count_convert(self.vocab, g, *x)?;
                    self.trace.push("count_convert", &g.name, g.constraint.vars[*x].name.clone(), c.table.len() as u64);
                    c
                }
                Shape::Pair(x, y) => {
                    let c = ops::count_convert_pair(self.vocab, g, *x, *y)?;
                    let target = format!("{}!={}", g.constraint.vars[*x].name, g.constraint.vars[*y].name);
                    self.trace.push("count_convert", &g.name, target, c.table.len() as u64);
                    c
                }
                Shape::Closed => g.clone(),
            };
            self.check_table(c.table.len())?;
            converted.push(c);
        }
        let acc = self.multiply_all(converted)?;
        let at = k_args(blocks, &acc, &key);
        if at.len() != 1 {
            return Err(Error::Internal(format!("class {} not merged", key.display(self.vocab))));
        }
        let mut out = ops::sum_out(self.vocab, &acc, at[0])?;
        self.trace.push("sum_out", &acc.name, key.display(self.vocab), acc.table.len() as u64);
        out.name = self.fresh_name();
        Ok(Some(replace(ps, members, vec![out])))
    }

    fn shape(&self, g: &Parfactor, blocks: &Blocks, key: &ClassKey) -> Option<Shape> {
        let ks = k_args(blocks, g, key);
        let var_free_rest =
            (0..g.args.len()).filter(|i| !ks.contains(i)).all(|i| g.args[i].vars().is_empty());
        if !var_free_rest {
            return None;
        }
        let atom_var = |i: usize| match &g.args[i] {
            Arg::Atom(a) => {
                let vs = a.vars();
                (vs.len() == 1).then(|| vs[0])
            }
            Arg::Count(_) => None,
        };
        let arity = g.constraint.arity();
        match ks.as_slice() {
            [i] if matches!(g.args[*i], Arg::Count(_)) && arity == 0 => Some(Shape::Closed),
            [i] if arity == 1 => atom_var(*i).map(Shape::Single),
            [i, j] if arity == 2 && self.policy == JustDiff::Count => {
                let (x, y) = (atom_var(*i)?, atom_var(*j)?);
                let paired = g.constraint.distinct_pairs().is_some_and(|d| d.contains(&(x.min(y), x.max(y))));
                (x != y && paired).then_some(Shape::Pair(x, y))
            }
            _ => None,
        }
    }

    /// Converts a logvar that only one non-kept atom mentions, in a parfactor
    /// with further logvars.
    fn case_b(&mut self, ps: &[Parfactor], blocks: &Blocks) -> Result<Option<Vec<Parfactor>>> {
        for (gi, g) in ps.iter().enumerate() {
            let ConstraintKind::Product { distinct, .. } = &g.constraint.kind else { continue };
            if g.constraint.arity() < 2 {
                continue;
            }
            for y in 0..g.constraint.arity() {
                if distinct.iter().any(|&(a, b)| a == y || b == y) {
                    continue;
                }
                let holders: Vec<usize> = (0..g.args.len()).filter(|&i| g.args[i].vars().contains(&y)).collect();
                let [i] = holders.as_slice() else { continue };
                let Arg::Atom(a) = &g.args[*i] else { continue };
                if a.vars() != vec![y] || self.keep.keeps(&arg_key(blocks, g, &g.args[*i])) {
                    continue;
                }
                let c = ops::count_convert(self.vocab, g, y)?;
                self.check_table(c.table.len())?;
                self.trace.push("count_convert", &g.name, g.constraint.vars[y].name.clone(), c.table.len() as u64);
                return Ok(Some(replace(ps, &[gi], vec![c])));
            }
        }
        Ok(None)
    }

    /// Grounds a logvar of the first parfactor in the first eliminable class.
    fn fallback(&mut self, ps: &[Parfactor], blocks: &Blocks, cls: &Classes) -> Result<Vec<Parfactor>> {
        for (key, members) in cls {
            if self.keep.keeps(key) {
                continue;
            }
            for &i in members {
                let g = &ps[i];
                if g.constraint.arity() == 0 {
                    continue;
                }
                let ks = k_args(blocks, g, key);
                let var = ks.iter().flat_map(|&k| g.args[k].vars()).next().unwrap_or(0);
                self.trace.push("ground_logvar", &g.name, g.constraint.vars[var].name.clone(), g.constraint.count());
                return Ok(replace(ps, &[i], ops::ground_logvar(g, var)));
            }
        }
        Err(Error::Internal("no lifted or grounding step applies".into()))
    }

    fn run(&mut self, mut ps: Vec<Parfactor>) -> Result<Vec<Parfactor>> {
        let extra = self.keep.constants(self.vocab);
        loop {
            let mut norm = Normaliser { vocab: self.vocab, trace: self.trace, extra: extra.clone(), table_limit: self.limits.table_entries };
            ps = norm.run(ps, self.limits.lve_parfactors)?;
            let blocks = Blocks::compute(self.vocab, &ps, &extra);
            let cls = classes(&blocks, &ps);
            if cls.keys().all(|k| self.keep.keeps(k)) {
                return Ok(ps);
            }
            if let Some(next) = self.case_a(&ps, &blocks, &cls)? {
                ps = next;
            } else if let Some(next) = self.case_c(&ps, &blocks, &cls)? {
                ps = next;
            } else if let Some(next) = self.case_b(&ps, &blocks)? {
                ps = next;
            } else {
                ps = self.fallback(&ps, &blocks, &cls)?;
            }
        }
    }
}

fn replace(ps: &[Parfactor], remove: &[usize], add: Vec<Parfactor>) -> Vec<Parfactor> {
    let mut out: Vec<Parfactor> =
        ps.iter().enumerate().filter(|(i, _)| !remove.contains(i)).map(|(_, g)| g.clone()).collect();
    out.extend(add);
    out
}

/// Eliminates every randvar not covered by `keep`. The result holds the
/// remaining parfactors, scalars included.
pub fn eliminate(
    vocab: &Vocab,
    parfactors: Vec<Parfactor>,
    keep: &Keep,
    policy: JustDiff,
    limits: &Limits,
    trace: &mut Trace,
) -> Result<Vec<Parfactor>> {
    let mut run = Run { vocab, keep, policy, limits, trace, fresh: 0 };
    run.run(parfactors)
}

/// Conditions every parfactor on the evidence.
pub fn absorb_all(vocab: &Vocab, mut ps: Vec<Parfactor>, e: &Evidence, trace: &mut Trace) -> Result<Vec<Parfactor>> {
    for item in &e.items {
        let mut next = Vec::with_capacity(ps.len());
        for g in &ps {
            let touches = g.args.iter().any(|a| a.rel() == item.atom.rel);
            if !touches {
                next.push(g.clone());
                continue;
            }
            let parts = ops::absorb(vocab, g, item)?;
            trace.push("absorb", &g.name, vocab.relations[item.atom.rel].name.clone(), parts.len() as u64);
            next.extend(parts);
        }
        ps = next;
    }
    Ok(ps)
}

/// Joint distribution of `terms` from var-free parfactors over them.
pub(crate) fn distribution(vocab: &Vocab, ps: &[Parfactor], terms: &[GroundAtom]) -> Result<Distribution> {
    let shape: Vec<usize> = terms.iter().map(|t| vocab.range_size(t.rel)).collect();
    let len: usize = shape.iter().product();
    let mut ln = vec![0.0; len];
    for g in ps {
        let positions: Vec<usize> = g
            .args
            .iter()
            .map(|a| match a {
                Arg::Atom(x) if x.is_ground() => {
                    let ga = x.ground(&[]);
                    terms.iter().position(|t| *t == ga).ok_or_else(|| {
                        Error::Internal(format!("{} left after elimination", vocab.ground_name(&ga)))
                    })
                }
                _ => Err(Error::Internal(format!("{} is not ground after elimination", g.name))),
            })
            .collect::<Result<_>>()?;
        let mult = g.constraint.count() as f64;
        let sizes = g.arg_sizes(vocab);
        for (r, slot) in ln.iter_mut().enumerate() {
            let vals = row_values(&shape, r);
            let row: Vec<usize> = positions.iter().map(|&p| vals[p]).collect();
            *slot += logspace::pow(g.table[row_index(&sizes, &row)], mult);
        }
    }
    let probs = logspace::normalize(&ln).ok_or(Error::ZeroEvidence)?;
    Ok(Distribution { terms: terms.to_vec(), shape, probs })
}

/// Answers `query` given `evidence` by lifted variable elimination.
pub fn lve_answer(
    m: &Model,
    query: &Query,
    evidence: &Evidence,
    policy: JustDiff,
    limits: &Limits,
    trace: &mut Trace,
) -> Result<Distribution> {
    crate::engines::answer_observed(m, query, evidence, |e| {
        let ps = absorb_all(&m.vocab, m.parfactors.clone(), e, trace)?;
        let keep = Keep::Atoms(query.terms.clone());
        let rest = eliminate(&m.vocab, ps, &keep, policy, limits, trace)?;
        distribution(&m.vocab, &rest, &query.terms)
    })
}

/// Natural log of the partition function restricted to randvars mentioned by
/// some parfactor.
pub fn lve_log_partition(m: &Model, evidence: &Evidence, policy: JustDiff, limits: &Limits, trace: &mut Trace) -> Result<f64> {
    let ps = absorb_all(&m.vocab, m.parfactors.clone(), evidence, trace)?;
    let rest = eliminate(&m.vocab, ps, &Keep::Relations(BTreeSet::new()), policy, limits, trace)?;
    let mut total = 0.0;
    for g in &rest {
        if !g.args.is_empty() {
            return Err(Error::Internal(format!("{} keeps arguments after elimination", g.name)));
        }
        total += logspace::pow(g.table[0], g.constraint.count() as f64);
    }
    Ok(total)
}
