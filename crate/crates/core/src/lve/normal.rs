//! Shattering into a normal form where every atom argument denotes a whole
//! equivalence class of ground randvars.
//!
//! Each domain is partitioned into blocks, the coarsest partition refining
//! every allowed set and isolating every constant that appears in an atom.
//! In normal form every logvar ranges over exactly one non-singleton block,
//! logvars of one block inside one atom are pairwise unequal, no two
//! arguments of a parfactor can denote the same randvar, every logvar is
//! used by some atom, and every counting randvar counts exactly one block.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::logspace;
use crate::model::{Arg, Atom, Constraint, ConstraintKind, Crv, DomId, Parfactor, RelId, Term, ValueSet, Vocab};

use super::ops;
use super::Trace;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    Const(u32),
    Slot { block: usize, slot: usize },
}

/// Identifies an equivalence class of ground randvars.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassKey {
    pub rel: RelId,
    pub pos: Vec<Pos>,
}

impl ClassKey {
    pub fn is_ground(&self) -> bool {
        self.pos.iter().all(|p| matches!(p, Pos::Const(_)))
    }

    pub fn slots(&self) -> usize {
        self.pos
            .iter()
            .filter_map(|p| match p {
                Pos::Slot { slot, .. } => Some(slot + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn display(&self, vocab: &Vocab) -> String {
        let rel = &vocab.relations[self.rel];
        let parts: Vec<String> = self
            .pos
            .iter()
            .zip(&rel.params)
            .map(|(p, &d)| match p {
                Pos::Const(c) => vocab.constant_name(d, *c).to_string(),
                Pos::Slot { block, slot } => format!("X{slot}@{block}"),
            })
            .collect();
        format!("{}({})", rel.name, parts.join(" "))
    }
}

/// Partition of every domain into blocks.
pub struct Blocks {
    /// `of[dom][constant]` is the global block id.
    of: Vec<Vec<usize>>,
    sizes: Vec<usize>,
}

impl Blocks {
    pub fn compute(vocab: &Vocab, ps: &[Parfactor], extra: &[(DomId, u32)]) -> Blocks {
        let mut sets: Vec<HashSet<ValueSet>> = vec![HashSet::new(); vocab.domains.len()];
        let single = |c: u32| ValueSet::new(vec![c]);
        let atom_consts = |sets: &mut Vec<HashSet<ValueSet>>, atom: &Atom| {
            for (t, &d) in atom.terms.iter().zip(&vocab.relations[atom.rel].params) {
                if let Term::Const(c) = t {
                    sets[d].insert(single(*c));
                }
            }
        };
        for g in ps {
            if let ConstraintKind::Product { allowed, .. } = &g.constraint.kind {
                for (a, v) in allowed.iter().zip(&g.constraint.vars) {
                    if let Some(s) = a {
                        sets[v.domain].insert(s.clone());
                    }
                }
            }
            for a in &g.args {
                match a {
                    Arg::Atom(atom) => atom_consts(&mut sets, atom),
                    Arg::Count(crv) => {
                        atom_consts(&mut sets, &crv.atom);
                        sets[crv.over.vars[0].domain].insert(crv.over.allowed_set(0));
                    }
                }
            }
        }
        for &(d, c) in extra {
            sets[d].insert(single(c));
        }
        let mut of = Vec::with_capacity(vocab.domains.len());
        let mut sizes = Vec::new();
        for (d, dom_sets) in sets.iter().enumerate() {
            let n = vocab.domain_size(d) as usize;
            let mut sig: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut ordered: Vec<&ValueSet> = dom_sets.iter().collect();
            ordered.sort();
            for (k, s) in ordered.iter().enumerate() {
                for c in s.iter() {
                    sig[c as usize].push(k);
                }
            }
            let mut ids: HashMap<&Vec<usize>, usize> = HashMap::new();
            let mut row = Vec::with_capacity(n);
            for s in &sig {
                let next = sizes.len();
                let id = *ids.entry(s).or_insert(next);
                if id == next {
                    sizes.push(0);
                }
                sizes[id] += 1;
                row.push(id);
            }
            of.push(row);
        }
        Blocks { of, sizes }
    }

    pub fn block(&self, dom: DomId, c: u32) -> usize {
        self.of[dom][c as usize]
    }

    pub fn is_singleton(&self, block: usize) -> bool {
        self.sizes[block] == 1
    }

    /// Distinct blocks meeting `set`, in order of first constant.
    fn blocks_of(&self, dom: DomId, set: &ValueSet) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for c in set.iter() {
            let b = self.block(dom, c);
            if !out.contains(&b) {
                out.push(b);
            }
        }
        out
    }

    fn members(&self, dom: DomId, set: &ValueSet, block: usize) -> ValueSet {
        ValueSet::new(set.iter().filter(|&c| self.block(dom, c) == block).collect())
    }
}

fn var_block(blocks: &Blocks, c: &Constraint, v: usize) -> usize {
    let first = c.allowed_set(v).iter().next().expect("non-empty logvar");
    blocks.block(c.vars[v].domain, first)
}

pub fn atom_key(blocks: &Blocks, c: &Constraint, atom: &Atom) -> ClassKey {
    let mut seen: Vec<usize> = Vec::new();
    let pos = atom
        .terms
        .iter()
        .map(|t| match t {
            Term::Const(k) => Pos::Const(*k),
            Term::Var(v) => {
                let slot = match seen.iter().position(|s| s == v) {
                    Some(s) => s,
                    None => {
                        seen.push(*v);
                        seen.len() - 1
                    }
                };
                Pos::Slot { block: var_block(blocks, c, *v), slot }
            }
        })
        .collect();
    ClassKey { rel: atom.rel, pos }
}

pub fn crv_key(blocks: &Blocks, crv: &Crv) -> ClassKey {
    atom_key(blocks, &crv.over, &crv.atom)
}

pub fn arg_key(blocks: &Blocks, g: &Parfactor, a: &Arg) -> ClassKey {
    match a {
        Arg::Atom(atom) => atom_key(blocks, &g.constraint, atom),
        Arg::Count(crv) => crv_key(blocks, crv),
    }
}

fn distinct(c: &Constraint, x: usize, y: usize) -> bool {
    c.distinct_pairs().is_some_and(|d| d.contains(&(x.min(y), x.max(y))))
}

/// Identifies logvar `y` with `x` (requires equal domains).
pub fn merge_vars(g: &Parfactor, x: usize, y: usize) -> Parfactor {
    let c = &g.constraint;
    let ConstraintKind::Product { allowed, distinct: pairs } = &c.kind else {
        unreachable!("merge on product constraints only");
    };
    let shift = |v: usize| if v > y { v - 1 } else { v };
    let target = if x > y { x - 1 } else { x };
    let mut new_allowed: Vec<Option<ValueSet>> = Vec::new();
    for (i, a) in allowed.iter().enumerate() {
        if i != y {
            new_allowed.push(a.clone());
        }
    }
    new_allowed[target] = Some(c.allowed_set(x).intersect(&c.allowed_set(y)));
    let mut new_pairs = Vec::new();
    let mut empty = false;
    for &(a, b) in pairs {
        let (a2, b2) = (if a == y { x } else { a }, if b == y { x } else { b });
        if a2 == b2 {
            empty = true;
            continue;
        }
        new_pairs.push((shift(a2), shift(b2)));
    }
    if empty {
        new_allowed[target] = Some(ValueSet::new(vec![]));
    }
    let vars = c.vars.iter().enumerate().filter(|(i, _)| *i != y).map(|(_, v)| v.clone()).collect();
    let constraint = Constraint::product(vars, new_allowed, new_pairs);
    let args = g
        .args
        .iter()
        .map(|a| match a {
            Arg::Atom(atom) => Arg::Atom(atom.map_vars(|v| Term::Var(shift(if v == y { x } else { v })))),
            other => other.clone(),
        })
        .collect();
    Parfactor { name: g.name.clone(), constraint, args, table: g.table.clone() }
}

/// Splits on `x = y` versus `x != y`.
fn split_equal(g: &Parfactor, x: usize, y: usize) -> Vec<Parfactor> {
    let ConstraintKind::Product { allowed, distinct: pairs } = &g.constraint.kind else {
        unreachable!();
    };
    let mut unequal: Vec<(usize, usize)> = pairs.iter().copied().collect();
    unequal.push((x, y));
    let ne = Constraint::product(g.constraint.vars.clone(), allowed.clone(), unequal);
    vec![merge_vars(g, x, y), Parfactor { constraint: ne, ..g.clone() }]
}

pub struct Normaliser<'a> {
    pub vocab: &'a Vocab,
    pub trace: &'a mut Trace,
    pub extra: Vec<(DomId, u32)>,
    pub table_limit: usize,
}

impl Normaliser<'_> {
    /// Brings every parfactor into normal form.
    pub fn run(&mut self, mut ps: Vec<Parfactor>, limit: usize) -> Result<Vec<Parfactor>> {
        loop {
            let blocks = Blocks::compute(self.vocab, &ps, &self.extra);
            let mut changed = false;
            let mut done = Vec::with_capacity(ps.len());
            let mut work: Vec<Parfactor> = ps.into_iter().rev().collect();
            while let Some(g) = work.pop() {
                match self.step(&blocks, &g)? {
                    None => done.push(g),
                    Some(parts) => {
                        if let Some(big) = parts.iter().find(|p| p.table.len() > self.table_limit) {
                            return Err(Error::Guard(format!("table of {} entries exceeds the limit", big.table.len())));
                        }
                        changed = true;
                        work.extend(parts.into_iter().rev());
                    }
                }
                if work.len() + done.len() > limit {
                    return Err(Error::Guard(format!("more than {limit} parfactors in the working set")));
                }
            }
            ps = done;
            if !changed {
                return Ok(ps);
            }
        }
    }

    fn step(&mut self, blocks: &Blocks, g: &Parfactor) -> Result<Option<Vec<Parfactor>>> {
        let c = &g.constraint;
        if c.count() == 0 {
            return Ok(Some(Vec::new()));
        }
        if !c.is_product() {
            self.trace.push("ground_logvar", &g.name, c.vars[0].name.clone(), c.count());
            return Ok(Some(ops::ground_logvar(g, 0)));
        }
        // one block per logvar, singleton blocks substituted
        for v in 0..c.arity() {
            let set = c.allowed_set(v);
            let dom = c.vars[v].domain;
            let bs = blocks.blocks_of(dom, &set);
            if bs.iter().all(|&b| blocks.is_singleton(b)) {
                if bs.len() > 1 {
                    self.trace.push("ground_logvar", &g.name, c.vars[v].name.clone(), set.len() as u64);
                }
                return Ok(Some(ops::ground_logvar(g, v)));
            }
            if bs.len() > 1 {
                self.trace.push("split", &g.name, c.vars[v].name.clone(), bs.len() as u64);
                let parts = bs
                    .iter()
                    .map(|&b| Parfactor { constraint: c.restrict(v, &blocks.members(dom, &set, b)), ..g.clone() })
                    .collect();
                return Ok(Some(parts));
            }
        }
        // logvars sharing an atom and a block are unequal
        for a in &g.args {
            let Arg::Atom(atom) = a else { continue };
            let vs = atom.vars();
            for (i, &x) in vs.iter().enumerate() {
                for &y in &vs[i + 1..] {
                    if c.vars[x].domain == c.vars[y].domain
                        && var_block(blocks, c, x) == var_block(blocks, c, y)
                        && !distinct(c, x, y)
                    {
                        self.trace.push("split", &g.name, format!("{}={}", c.vars[x].name, c.vars[y].name), 2);
                        return Ok(Some(split_equal(g, x, y)));
                    }
                }
            }
        }
        // no two arguments may denote one randvar
        for i in 0..g.args.len() {
            for j in (i + 1)..g.args.len() {
                if g.args[i].rel() != g.args[j].rel() {
                    continue;
                }
                match (&g.args[i], &g.args[j]) {
                    (Arg::Atom(a), Arg::Atom(b)) => {
                        let mut apart = false;
                        let mut candidate = None;
                        for (s, t) in a.terms.iter().zip(&b.terms) {
                            match (s, t) {
                                (Term::Const(p), Term::Const(q)) => apart |= p != q,
                                (Term::Var(_), Term::Const(_)) | (Term::Const(_), Term::Var(_)) => apart = true,
                                (Term::Var(x), Term::Var(y)) if x != y => {
                                    if var_block(blocks, c, *x) != var_block(blocks, c, *y) || distinct(c, *x, *y) {
                                        apart = true;
                                    } else if candidate.is_none() {
                                        candidate = Some((*x.min(y), *x.max(y)));
                                    }
                                }
                                _ => {}
                            }
                        }
                        if apart {
                            continue;
                        }
                        match candidate {
                            Some((x, y)) => {
                                let target = format!("{}={}", c.vars[x].name, c.vars[y].name);
                                self.trace.push("split", &g.name, target, 2);
                                return Ok(Some(split_equal(g, x, y)));
                            }
                            None => {
                                self.trace.push("merge", &g.name, String::new(), g.table.len() as u64);
                                return Ok(Some(vec![ops::merge_duplicates(self.vocab, g.clone())]));
                            }
                        }
                    }
                    (Arg::Count(a), Arg::Count(b)) => {
                        if crv_key(blocks, a) == crv_key(blocks, b) {
                            self.trace.push("merge", &g.name, String::new(), g.table.len() as u64);
                            return Ok(Some(vec![ops::merge_duplicates(self.vocab, g.clone())]));
                        }
                    }
                    _ => {
                        if ops::may_overlap(g, i, j) {
                            let k = if matches!(g.args[i], Arg::Count(_)) { i } else { j };
                            let Arg::Count(crv) = &g.args[k] else { unreachable!() };
                            let first = crv.over.allowed_set(0).iter().next().expect("non-empty count");
                            self.trace.push("expand", &g.name, String::new(), g.table.len() as u64);
                            return Ok(Some(vec![ops::expand(self.vocab, g, k, first)?]));
                        }
                    }
                }
            }
        }
        // unused logvars become an exponent
        let used = g.used_vars();
        if used.len() < c.arity() {
            match c.count_per_instance(&used) {
                Ok(k) => {
                    let constraint = c.project(&used);
                    let args = g
                        .args
                        .iter()
                        .map(|a| match a {
                            Arg::Atom(atom) => Arg::Atom(
                                atom.map_vars(|v| Term::Var(used.iter().position(|&u| u == v).expect("used"))),
                            ),
                            other => other.clone(),
                        })
                        .collect();
                    let table = g.table.iter().map(|&x| logspace::pow(x, k as f64)).collect();
                    return Ok(Some(vec![Parfactor { name: g.name.clone(), constraint, args, table }]));
                }
                Err(Error::NonUniformCount) => {
                    for (i, &x) in used.iter().enumerate() {
                        for &y in &used[i + 1..] {
                            if c.vars[x].domain == c.vars[y].domain
                                && var_block(blocks, c, x) == var_block(blocks, c, y)
                                && !distinct(c, x, y)
                            {
                                self.trace.push("count_normalise", &g.name, c.vars[x].name.clone(), 2);
                                return Ok(Some(split_equal(g, x, y)));
                            }
                        }
                    }
                    self.trace.push("count_normalise", &g.name, String::new(), c.count());
                    return Ok(Some(ops::count_normalise(g, &used)?));
                }
                Err(e) => return Err(e),
            }
        }
        // counting randvars count one block
        for (k, a) in g.args.iter().enumerate() {
            let Arg::Count(crv) = a else { continue };
            let set = crv.over.allowed_set(0);
            let dom = crv.over.vars[0].domain;
            let bs = blocks.blocks_of(dom, &set);
            if bs.len() > 1 || bs.iter().any(|&b| blocks.is_singleton(b)) {
                let pick = set
                    .iter()
                    .find(|&x| blocks.is_singleton(blocks.block(dom, x)))
                    .unwrap_or_else(|| set.iter().next().expect("non-empty count"));
                self.trace.push("expand", &g.name, String::new(), g.table.len() as u64);
                return Ok(Some(vec![ops::expand(self.vocab, g, k, pick)?]));
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    fn model() -> crate::model::Model {
        parse_model(
            "domain D = {a, b, c, d};\nprv P(D), F(D, D);\n\
             parfactor g0 (X:D, Y:D) on F(X,Y), P(X)\n  table { (true,true)=1; (true,false)=2; (false,true)=3; (false,false)=4; };\n\
             parfactor g1 (X:D | X in {a, b}) on P(X)\n  table { (true)=1; (false)=2; };\n",
        )
        .unwrap()
    }

    #[test]
    fn blocks_refine_allowed_sets_and_constants() {
        let m = model();
        let b = Blocks::compute(&m.vocab, &m.parfactors, &[(0, 3)]);
        assert_eq!(b.block(0, 0), b.block(0, 1));
        assert_ne!(b.block(0, 1), b.block(0, 2));
        assert!(b.is_singleton(b.block(0, 3)));
        assert!(!b.is_singleton(b.block(0, 0)));
    }

    #[test]
    fn normal_form_splits_and_separates_equal_logvars() {
        let m = model();
        let mut trace = Trace::default();
        let mut norm = Normaliser { vocab: &m.vocab, trace: &mut trace, extra: vec![], table_limit: 1 << 20 };
        let ps = norm.run(m.parfactors.clone(), 1000).unwrap();
        let total: u64 = ps.iter().map(|g| g.constraint.count()).sum();
        // 16 instances of g0 and 2 of g1, the equal pairs folded into F(X,X)
        assert_eq!(total, 18);
        let blocks = Blocks::compute(&m.vocab, &ps, &[]);
        for g in &ps {
            for a in &g.args {
                let Arg::Atom(atom) = a else { continue };
                let vs = atom.vars();
                if vs.len() == 2 {
                    assert!(distinct(&g.constraint, vs[0], vs[1]) || var_block(&blocks, &g.constraint, vs[0]) != var_block(&blocks, &g.constraint, vs[1]));
                }
            }
        }
        assert!(trace.count("split") > 0);
    }

    #[test]
    fn merge_vars_identifies_logvars() {
        let m = model();
        let g = merge_vars(&m.parfactors[0], 0, 1);
        assert_eq!(g.constraint.arity(), 1);
        assert_eq!(g.args[0], Arg::Atom(Atom { rel: 1, terms: vec![Term::Var(0), Term::Var(0)] }));
    }
}
