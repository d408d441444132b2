//! Compilation of a clausal theory into a first-order d-DNNF circuit.
//!
//! Clauses are kept in a normal form over domain parts: every logvar ranges
//! over one part, and logvars over the same part are pairwise distinct.
//! Parts created inside a counting node have sizes that depend on the count
//! and are compiled once as a template; a rule that needs a concrete size
//! makes the enclosing counting node fall back to one child per count.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::model::{ConstraintKind, DomId, Term};

use super::circuit::{Circuit, Node, NodeId, Poly, ScopeItem, SizeExpr};
use super::{Literal, WfomcProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum T {
    C(u32),
    V(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Lit {
    pred: usize,
    terms: Vec<T>,
    pos: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct SClause {
    parts: Vec<usize>,
    lits: Vec<Lit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum CPos {
    C(u32),
    /// Part and slot; equal slots denote the same element.
    S(usize, usize),
}

/// A set of ground atoms: one predicate, constants or part slots per position.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Class {
    pred: usize,
    pos: Vec<CPos>,
}

impl Class {
    fn canonical(pred: usize, pos: Vec<CPos>) -> Class {
        let mut seen: Vec<(usize, usize)> = Vec::new();
        let pos = pos
            .into_iter()
            .map(|x| match x {
                CPos::S(p, s) => {
                    let i = seen.iter().position(|&k| k == (p, s)).unwrap_or_else(|| {
                        seen.push((p, s));
                        seen.len() - 1
                    });
                    CPos::S(p, i)
                }
                c => c,
            })
            .collect();
        Class { pred, pos }
    }

    fn is_ground(&self) -> bool {
        self.pos.iter().all(|x| matches!(x, CPos::C(_)))
    }

    fn slots(&self) -> BTreeSet<(usize, usize)> {
        self.pos.iter().filter_map(|x| if let CPos::S(p, s) = x { Some((*p, *s)) } else { None }).collect()
    }
}

#[derive(Clone, Debug)]
struct Part {
    dom: DomId,
    size: SizeExpr,
    members: Option<Vec<u32>>,
    name: String,
}

#[derive(Clone, Debug, Default)]
struct Theory {
    clauses: Vec<SClause>,
    scope: BTreeSet<Class>,
}

enum Fail {
    /// A rule needed the concrete size of a count-dependent part.
    Symbolic,
    Err(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Err(e)
    }
}

type R<T> = std::result::Result<T, Fail>;

const SYNTHETIC: u32 = 1 << 24;

struct Compiler<'a> {
    p: &'a WfomcProblem,
    parts: Vec<Part>,
    c: Circuit,
    depth: usize,
    next_const: u32,
    limit: usize,
}

fn class_of(cl: &SClause, l: &Lit) -> Class {
    let pos = l
        .terms
        .iter()
        .map(|t| match *t {
            T::C(c) => CPos::C(c),
            T::V(i) => CPos::S(cl.parts[i], i),
        })
        .collect();
    Class::canonical(l.pred, pos)
}

fn used_vars(cl: &SClause) -> BTreeSet<usize> {
    cl.lits.iter().flat_map(|l| l.terms.iter()).filter_map(|t| if let T::V(i) = t { Some(*i) } else { None }).collect()
}

/// Renumbers variables after substituting some of them.
fn rebuild(cl: &SClause, map: impl Fn(usize) -> Option<T>, part_of: impl Fn(usize) -> usize) -> SClause {
    let mut parts = Vec::new();
    let mut index = BTreeMap::new();
    for i in 0..cl.parts.len() {
        if map(i).is_none() {
            index.insert(i, parts.len());
            parts.push(part_of(i));
        }
    }
    let lits = cl
        .lits
        .iter()
        .map(|l| Lit {
            pred: l.pred,
            pos: l.pos,
            terms: l
                .terms
                .iter()
                .map(|t| match *t {
                    T::V(i) => map(i).unwrap_or_else(|| T::V(index[&i])),
                    c => c,
                })
                .collect(),
        })
        .collect();
    SClause { parts, lits }
}

/// Every injective map of `k` positions into `members`.
fn injections(members: &[u32], k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    fn rec(members: &[u32], k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for &m in members {
            if !cur.contains(&m) {
                cur.push(m);
                rec(members, k, cur, out);
                cur.pop();
            }
        }
    }
    rec(members, k, &mut Vec::new(), &mut out);
    out
}

impl<'a> Compiler<'a> {
    fn node(&mut self, n: Node, scope: &BTreeSet<Class>) -> R<NodeId> {
        if self.c.nodes.len() >= self.limit {
            return Err(Fail::Err(Error::Guard(format!("circuit exceeds {} nodes", self.limit))));
        }
        let items = scope.iter().map(|k| self.item(k)).collect();
        Ok(self.c.add(n, items))
    }

    fn count(&self, k: &Class) -> Poly {
        let mut per: BTreeMap<usize, usize> = BTreeMap::new();
        for (p, _) in k.slots() {
            *per.entry(p).or_default() += 1;
        }
        let mut factors = Vec::new();
        for (p, m) in per {
            for i in 0..m {
                factors.push(self.parts[p].size.offset(-(i as i64)));
            }
        }
        Poly(factors)
    }

    fn const_name(&self, dom: DomId, c: u32) -> String {
        if c < self.p.vocab.domain_size(dom) {
            self.p.vocab.constant_name(dom, c).to_string()
        } else {
            format!("e{}", c - SYNTHETIC)
        }
    }

    fn describe(&self, k: &Class) -> String {
        let pred = &self.p.predicates[k.pred];
        let args: Vec<String> = k
            .pos
            .iter()
            .enumerate()
            .map(|(i, x)| match *x {
                CPos::C(c) => self.const_name(pred.params[i], c),
                CPos::S(p, s) => format!("{}/{}", self.parts[p].name, s),
            })
            .collect();
        format!("{}({})", pred.name, args.join(","))
    }

    fn item(&self, k: &Class) -> ScopeItem {
        ScopeItem { pred: k.pred, atoms: self.describe(k), count: self.count(k) }
    }

    fn leaf(&mut self, k: &Class, positive: bool) -> R<NodeId> {
        let n = Node::Leaf { pred: k.pred, positive, atoms: self.describe(k), count: self.count(k) };
        self.node(n, &BTreeSet::from([k.clone()]))
    }

    /// Conjunction with nested conjunctions spliced in; keeps the order.
    fn and(&mut self, children: Vec<NodeId>, scope: &BTreeSet<Class>) -> R<NodeId> {
        if children.len() == 1 {
            return Ok(children[0]);
        }
        let mut flat = Vec::new();
        for c in children {
            match &self.c.nodes[c] {
                Node::And(cs) => flat.extend(cs.iter().copied()),
                Node::True => {}
                _ => flat.push(c),
            }
        }
        self.node(Node::And(flat), scope)
    }

    fn new_part(&mut self, dom: DomId, size: SizeExpr, members: Option<Vec<u32>>, name: String) -> usize {
        self.parts.push(Part { dom, size, members, name });
        self.parts.len() - 1
    }

    fn synthetic(&mut self) -> u32 {
        self.next_const += 1;
        SYNTHETIC + self.next_const - 1
    }

    /// Number of completions of the unused variables of `cl` given its used
    /// ones; `None` when every variable is used.
    fn unused_count(&self, cl: &SClause) -> Option<Poly> {
        let used = used_vars(cl);
        if used.len() == cl.parts.len() {
            return None;
        }
        let mut per: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for (i, &p) in cl.parts.iter().enumerate() {
            let e = per.entry(p).or_default();
            if used.contains(&i) {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
        let mut factors = Vec::new();
        for (p, (u, x)) in per {
            for i in 0..x {
                factors.push(self.parts[p].size.offset(-((u + i) as i64)));
            }
        }
        Some(Poly(factors))
    }

    fn drop_unused(cl: &SClause) -> SClause {
        let used = used_vars(cl);
        let keep: Vec<usize> = (0..cl.parts.len()).filter(|i| used.contains(i)).collect();
        let mut index = vec![usize::MAX; cl.parts.len()];
        for (n, &i) in keep.iter().enumerate() {
            index[i] = n;
        }
        let mut out = rebuild(cl, |_| None, |i| cl.parts[i]);
        out.parts = keep.iter().map(|&i| cl.parts[i]).collect();
        for l in &mut out.lits {
            for t in &mut l.terms {
                if let T::V(i) = *t {
                    *t = T::V(index[i]);
                }
            }
        }
        out
    }

    /// Drops tautologies and duplicate literals, and decides clauses with
    /// unused variables when the completion count is concrete.
    fn normalize(&self, th: &mut Theory) {
        let mut out = Vec::new();
        for cl in std::mem::take(&mut th.clauses) {
            let mut lits = cl.lits.clone();
            lits.sort();
            lits.dedup();
            if lits.windows(2).any(|w| w[0].pred == w[1].pred && w[0].terms == w[1].terms) {
                continue;
            }
            let cl = SClause { parts: cl.parts, lits };
            match self.unused_count(&cl).map(|p| p.as_const()) {
                None => out.push(cl),
                Some(Some(c)) if c > 0.0 => out.push(Self::drop_unused(&cl)),
                Some(Some(_)) => {}
                Some(None) => out.push(cl),
            }
        }
        out.sort();
        out.dedup();
        th.clauses = out;
    }

    /// Fixes every atom of `k` to `value`.
    fn condition(&self, th: &Theory, k: &Class, value: bool) -> Theory {
        let mut clauses = Vec::new();
        for cl in &th.clauses {
            let mut lits = Vec::new();
            let mut sat = false;
            for l in &cl.lits {
                if l.pred == k.pred && class_of(cl, l) == *k {
                    if l.pos == value {
                        sat = true;
                        break;
                    }
                } else {
                    lits.push(l.clone());
                }
            }
            if !sat {
                clauses.push(SClause { parts: cl.parts.clone(), lits });
            }
        }
        let mut scope = th.scope.clone();
        scope.remove(k);
        Theory { clauses, scope }
    }

    fn compile(&mut self, mut th: Theory) -> R<NodeId> {
        let scope = th.scope.clone();
        let mut leaves = Vec::new();
        let last = loop {
            self.normalize(&mut th);
            if let Some(i) = th.clauses.iter().position(|c| self.unused_count(c).is_some()) {
                let count = self.unused_count(&th.clauses[i]).expect("unused variables");
                let mut zero = th.clone();
                zero.clauses.remove(i);
                let mut pos = th.clone();
                pos.clauses[i] = Self::drop_unused(&th.clauses[i]);
                let z = self.compile(zero)?;
                let p = self.compile(pos)?;
                break self.node(Node::Cond { count, zero: z, positive: p }, &th.scope)?;
            }
            if th.clauses.iter().any(|c| c.lits.is_empty()) {
                break self.node(Node::False, &th.scope)?;
            }
            let Some(cl) = th.clauses.iter().find(|c| c.lits.len() == 1) else {
                break self.components(th)?;
            };
            let k = class_of(cl, &cl.lits[0]);
            let value = cl.lits[0].pos;
            if !th.scope.contains(&k) {
                return Err(Fail::Err(Error::Internal(format!("{} outside the scope", self.describe(&k)))));
            }
            th = self.condition(&th, &k, value);
            leaves.push(self.leaf(&k, value)?);
        };
        leaves.push(last);
        self.and(leaves, &scope)
    }

    fn components(&mut self, th: Theory) -> R<NodeId> {
        let n = th.clauses.len();
        let mut root: Vec<usize> = (0..n).collect();
        fn find(root: &mut [usize], x: usize) -> usize {
            let mut x = x;
            while root[x] != x {
                root[x] = root[root[x]];
                x = root[x];
            }
            x
        }
        let mut owner: BTreeMap<Class, usize> = BTreeMap::new();
        for (i, cl) in th.clauses.iter().enumerate() {
            for l in &cl.lits {
                let k = class_of(cl, l);
                if !th.scope.contains(&k) {
                    return Err(Fail::Err(Error::Internal(format!("{} outside the scope", self.describe(&k)))));
                }
                match owner.get(&k) {
                    Some(&j) => {
                        let (a, b) = (find(&mut root, i), find(&mut root, j));
                        root[a] = b;
                    }
                    None => {
                        owner.insert(k, i);
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Theory> = BTreeMap::new();
        for (i, cl) in th.clauses.iter().enumerate() {
            let r = find(&mut root, i);
            groups.entry(r).or_default().clauses.push(cl.clone());
        }
        let mut free = Vec::new();
        for k in &th.scope {
            match owner.get(k) {
                Some(&i) => {
                    let r = find(&mut root, i);
                    groups.get_mut(&r).expect("group").scope.insert(k.clone());
                }
                None => free.push(k.clone()),
            }
        }
        if groups.len() == 1 && free.is_empty() {
            let g = groups.into_values().next().expect("one group");
            return self.component(g);
        }
        let mut children = Vec::new();
        for k in free {
            let n = Node::Free { pred: k.pred, atoms: self.describe(&k), count: self.count(&k) };
            children.push(self.node(n, &BTreeSet::from([k]))?);
        }
        for g in groups.into_values() {
            children.push(self.component(g)?);
        }
        if children.is_empty() {
            return self.node(Node::True, &th.scope);
        }
        self.and(children, &th.scope)
    }

    fn component(&mut self, th: Theory) -> R<NodeId> {
        if let Some(n) = self.decompose(&th)? {
            return Ok(n);
        }
        if let Some(n) = self.shannon(&th)? {
            return Ok(n);
        }
        if let Some(n) = self.count_atoms(&th)? {
            return Ok(n);
        }
        self.ground(th)
    }

    /// Root variable per clause and argument position per predicate such
    /// that groundings for distinct elements of `part` share no atom.
    fn roots(&self, th: &Theory, part: usize) -> Option<(Vec<usize>, BTreeMap<usize, usize>)> {
        let mut cands = Vec::new();
        for cl in &th.clauses {
            let c: Vec<usize> = (0..cl.parts.len())
                .filter(|&i| cl.parts[i] == part && cl.lits.iter().all(|l| l.terms.contains(&T::V(i))))
                .collect();
            if c.is_empty() {
                return None;
            }
            cands.push(c);
        }
        fn search(
            th: &Theory,
            cands: &[Vec<usize>],
            k: usize,
            roots: &mut Vec<usize>,
            pos: &mut BTreeMap<usize, usize>,
            budget: &mut usize,
        ) -> bool {
            if k == cands.len() {
                return true;
            }
            for &v in &cands[k] {
                if *budget == 0 {
                    return false;
                }
                *budget -= 1;
                let saved = pos.clone();
                let ok = th.clauses[k].lits.iter().all(|l| match pos.get(&l.pred) {
                    Some(&i) => l.terms[i] == T::V(v),
                    None => {
                        let i = l.terms.iter().position(|t| *t == T::V(v)).expect("candidate in every literal");
                        pos.insert(l.pred, i);
                        true
                    }
                });
                if ok {
                    roots.push(v);
                    if search(th, cands, k + 1, roots, pos, budget) {
                        return true;
                    }
                    roots.pop();
                }
                *pos = saved;
            }
            false
        }
        let mut roots = Vec::new();
        let mut pos = BTreeMap::new();
        let mut budget = 10_000;
        search(th, &cands, 0, &mut roots, &mut pos, &mut budget).then_some((roots, pos))
    }

    fn decompose(&mut self, th: &Theory) -> R<Option<NodeId>> {
        let parts: BTreeSet<usize> = th.clauses.iter().flat_map(|c| c.parts.iter().copied()).collect();
        for p in parts {
            let Some((roots, pos)) = self.roots(th, p) else { continue };
            let part = self.parts[p].clone();
            let (x, rest) = match &part.members {
                Some(m) if !m.is_empty() => (m[0], Some(m[1..].to_vec())),
                _ => (self.synthetic(), None),
            };
            let q = self.new_part(part.dom, part.size.offset(-1), rest, format!("{}'", part.name));
            let clauses = th
                .clauses
                .iter()
                .zip(&roots)
                .map(|(cl, &r)| rebuild(cl, |i| (i == r).then_some(T::C(x)), |i| if cl.parts[i] == p { q } else { cl.parts[i] }))
                .collect();
            let scope = th
                .scope
                .iter()
                .map(|k| {
                    let CPos::S(_, s) = k.pos[pos[&k.pred]] else { unreachable!("root position holds a slot") };
                    let v = k
                        .pos
                        .iter()
                        .map(|&c| match c {
                            CPos::S(a, t) if a == p && t == s => CPos::C(x),
                            CPos::S(a, t) if a == p => CPos::S(q, t),
                            c => c,
                        })
                        .collect();
                    Class::canonical(k.pred, v)
                })
                .collect();
            let child = self.compile(Theory { clauses, scope })?;
            let n = Node::SetConj { part: part.name.clone(), mult: part.size.clone(), child };
            return Ok(Some(self.node(n, &th.scope)?));
        }
        Ok(None)
    }

    /// Replaces part `p` by `t` and `f` in every clause and class.
    fn split_part(&self, th: &Theory, p: usize, t: usize, f: usize) -> Theory {
        let mut clauses = Vec::new();
        for cl in &th.clauses {
            let idx: Vec<usize> = (0..cl.parts.len()).filter(|&i| cl.parts[i] == p).collect();
            for mask in 0..(1u32 << idx.len()) {
                let mut c = cl.clone();
                for (b, &i) in idx.iter().enumerate() {
                    c.parts[i] = if mask >> b & 1 == 1 { t } else { f };
                }
                clauses.push(c);
            }
        }
        let mut scope = BTreeSet::new();
        for k in &th.scope {
            let slots: Vec<usize> = k.slots().into_iter().filter(|&(a, _)| a == p).map(|(_, s)| s).collect();
            for mask in 0..(1u32 << slots.len()) {
                let v = k
                    .pos
                    .iter()
                    .map(|&c| match c {
                        CPos::S(a, s) if a == p => {
                            let b = slots.iter().position(|&x| x == s).expect("slot");
                            CPos::S(if mask >> b & 1 == 1 { t } else { f }, s)
                        }
                        c => c,
                    })
                    .collect();
                scope.insert(Class::canonical(k.pred, v));
            }
        }
        Theory { clauses, scope }
    }

    fn counted_child(&mut self, th: &Theory, k: &Class, p: usize, tsize: SizeExpr, fsize: SizeExpr) -> R<NodeId> {
        let part = self.parts[p].clone();
        let t = self.new_part(part.dom, tsize, None, format!("{}+", part.name));
        let f = self.new_part(part.dom, fsize, None, format!("{}-", part.name));
        let split = self.split_part(th, p, t, f);
        let on = |q: usize| {
            let v = k.pos.iter().map(|&c| if let CPos::S(_, s) = c { CPos::S(q, s) } else { c }).collect();
            Class::canonical(k.pred, v)
        };
        let (kt, kf) = (on(t), on(f));
        let rest = self.condition(&self.condition(&split, &kt, true), &kf, false);
        let lt = self.leaf(&kt, true)?;
        let lf = self.leaf(&kf, false)?;
        let r = self.compile(rest)?;
        self.and(vec![lt, lf, r], &split.scope)
    }

    /// Atom counting over a class with a single part slot.
    fn count_atoms(&mut self, th: &Theory) -> R<Option<NodeId>> {
        let mut mentions: BTreeMap<Class, usize> = BTreeMap::new();
        for cl in &th.clauses {
            let ks: BTreeSet<Class> = cl.lits.iter().map(|l| class_of(cl, l)).collect();
            for k in ks {
                if k.slots().len() == 1 {
                    *mentions.entry(k).or_default() += 1;
                }
            }
        }
        let Some(k) = mentions.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(k, _)| k.clone()) else {
            return Ok(None);
        };
        let (p, _) = *k.slots().iter().next().expect("one slot");
        let bound = self.parts[p].size.clone();
        let atoms = self.describe(&k);
        let mark = self.c.nodes.len();
        let var = SizeExpr::var(self.depth);
        self.depth += 1;
        let r = self.counted_child(th, &k, p, var.clone(), bound.plus(&var, -1));
        self.depth -= 1;
        match r {
            Ok(child) => {
                let n = Node::CountDisj { atoms, var: self.depth, bound, child };
                Ok(Some(self.node(n, &th.scope)?))
            }
            Err(Fail::Symbolic) => {
                let Some(n) = bound.as_const() else { return Err(Fail::Symbolic) };
                self.c.nodes.truncate(mark);
                self.c.scopes.truncate(mark);
                let mut children = Vec::new();
                for kk in 0..=n {
                    children.push(self.counted_child(th, &k, p, SizeExpr::konst(kk), SizeExpr::konst(n - kk))?);
                }
                let n = Node::CountDisjExplicit { atoms, bound: n as u64, children };
                Ok(Some(self.node(n, &th.scope)?))
            }
            Err(e) => Err(e),
        }
    }

    /// Splits on the ground atom mentioned by most clauses.
    fn shannon(&mut self, th: &Theory) -> R<Option<NodeId>> {
        let mut mentions: BTreeMap<Class, usize> = BTreeMap::new();
        for cl in &th.clauses {
            let ks: BTreeSet<Class> = cl.lits.iter().map(|l| class_of(cl, l)).filter(Class::is_ground).collect();
            for k in ks {
                *mentions.entry(k).or_default() += 1;
            }
        }
        let Some(k) = mentions.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(k, _)| k.clone()) else {
            return Ok(None);
        };
        let mut branches = Vec::new();
        for value in [true, false] {
            let rest = self.condition(th, &k, value);
            let leaf = self.leaf(&k, value)?;
            let r = self.compile(rest)?;
            branches.push(self.and(vec![leaf, r], &th.scope)?);
        }
        Ok(Some(self.node(Node::Or(branches), &th.scope)?))
    }

    /// Replaces one part of concrete size by its elements.
    fn ground(&mut self, th: Theory) -> R<NodeId> {
        let parts: BTreeSet<usize> = th.clauses.iter().flat_map(|c| c.parts.iter().copied()).collect();
        let Some(p) = parts.into_iter().find(|&p| self.parts[p].size.as_const().is_some()) else {
            return Err(Fail::Symbolic);
        };
        let n = self.parts[p].size.as_const().expect("concrete") as usize;
        let members = match self.parts[p].members.clone() {
            Some(m) => m,
            None => (0..n).map(|_| self.synthetic()).collect(),
        };
        let mut clauses = Vec::new();
        for cl in &th.clauses {
            let idx: Vec<usize> = (0..cl.parts.len()).filter(|&i| cl.parts[i] == p).collect();
            for inj in injections(&members, idx.len()) {
                clauses.push(rebuild(cl, |i| idx.iter().position(|&j| j == i).map(|b| T::C(inj[b])), |i| cl.parts[i]));
            }
        }
        let mut scope = BTreeSet::new();
        for k in &th.scope {
            let slots: Vec<usize> = k.slots().into_iter().filter(|&(a, _)| a == p).map(|(_, s)| s).collect();
            for inj in injections(&members, slots.len()) {
                let v = k
                    .pos
                    .iter()
                    .map(|&c| match c {
                        CPos::S(a, s) if a == p => CPos::C(inj[slots.iter().position(|&x| x == s).expect("slot")]),
                        c => c,
                    })
                    .collect();
                scope.insert(Class::canonical(k.pred, v));
            }
        }
        self.compile(Theory { clauses, scope })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Block {
    Const(u32),
    Part(usize),
}

/// Parts and normal-form clauses of `p`: every constant mentioned by a
/// clause is isolated, and the rest of each domain is split by the allowed
/// sets of the clause constraints.
fn initial(p: &WfomcProblem) -> (Vec<Part>, Theory) {
    let vocab = &p.vocab;
    let nd = vocab.domains.len();
    let mut consts: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); nd];
    let mut sets: Vec<Vec<Vec<u32>>> = vec![Vec::new(); nd];
    for c in &p.clauses {
        for l in &c.literals {
            for (j, t) in l.terms.iter().enumerate() {
                if let Term::Const(k) = t {
                    consts[p.predicates[l.pred].params[j]].insert(*k);
                }
            }
        }
        match &c.constraint.kind {
            ConstraintKind::Product { allowed, .. } => {
                for (i, a) in allowed.iter().enumerate() {
                    if let Some(s) = a {
                        sets[c.constraint.vars[i].domain].push(s.as_slice().to_vec());
                    }
                }
            }
            ConstraintKind::Tuples(ts) => {
                for t in ts {
                    for (i, &k) in t.iter().enumerate() {
                        consts[c.constraint.vars[i].domain].insert(k);
                    }
                }
            }
        }
    }
    let mut parts = Vec::new();
    let mut block: Vec<Vec<Block>> = Vec::new();
    for d in 0..nd {
        let n = vocab.domain_size(d);
        let mut groups: BTreeMap<(bool, u32, Vec<bool>), Vec<u32>> = BTreeMap::new();
        for e in 0..n {
            let key = if consts[d].contains(&e) {
                (false, e, Vec::new())
            } else {
                (true, 0, sets[d].iter().map(|s| s.binary_search(&e).is_ok()).collect())
            };
            groups.entry(key).or_default().push(e);
        }
        let mut map = vec![Block::Const(0); n as usize];
        for members in groups.into_values() {
            if members.len() == 1 {
                map[members[0] as usize] = Block::Const(members[0]);
                continue;
            }
            let id = parts.len();
            for &e in &members {
                map[e as usize] = Block::Part(id);
            }
            let name = format!("{}{}", vocab.domains[d].name, id);
            parts.push(Part { dom: d, size: SizeExpr::konst(members.len() as i64), members: Some(members), name });
        }
        block.push(map);
    }
    let mut clauses = Vec::new();
    for c in &p.clauses {
        match &c.constraint.kind {
            ConstraintKind::Tuples(ts) => {
                for t in ts {
                    let lits = c
                        .literals
                        .iter()
                        .map(|l| Lit {
                            pred: l.pred,
                            pos: l.positive,
                            terms: l.terms.iter().map(|x| match x {
                                Term::Var(i) => T::C(t[*i]),
                                Term::Const(k) => T::C(*k),
                            }).collect(),
                        })
                        .collect();
                    clauses.push(SClause { parts: Vec::new(), lits });
                }
            }
            ConstraintKind::Product { distinct, .. } => {
                let options: Vec<Vec<Block>> = (0..c.constraint.arity())
                    .map(|i| {
                        let d = c.constraint.vars[i].domain;
                        let mut o: Vec<Block> = Vec::new();
                        for e in c.constraint.allowed_set(i).iter() {
                            let b = block[d][e as usize];
                            if !o.contains(&b) {
                                o.push(b);
                            }
                        }
                        o
                    })
                    .collect();
                let mut assign = Vec::new();
                choose(&options, &mut assign, &mut |a| expand_equalities(a, distinct, &c.literals, &mut clauses));
            }
        }
    }
    let mut scope = BTreeSet::new();
    for cl in &clauses {
        for l in &cl.lits {
            scope.insert(class_of(cl, l));
        }
    }
    (parts, Theory { clauses, scope })
}

fn choose(options: &[Vec<Block>], cur: &mut Vec<Block>, f: &mut dyn FnMut(&[Block])) {
    if cur.len() == options.len() {
        f(cur);
        return;
    }
    for &b in &options[cur.len()] {
        cur.push(b);
        choose(options, cur, f);
        cur.pop();
    }
}

/// Splits same-part variables into equal and distinct cases.
fn expand_equalities(assign: &[Block], distinct: &BTreeSet<(usize, usize)>, lits: &[Literal], out: &mut Vec<SClause>) {
    for &(i, j) in distinct {
        if let (Block::Const(a), Block::Const(b)) = (assign[i], assign[j]) {
            if a == b {
                return;
            }
        }
    }
    let n = assign.len();
    let neq: BTreeSet<(usize, usize)> =
        distinct.iter().copied().filter(|&(i, j)| matches!(assign[i], Block::Part(_)) && assign[i] == assign[j]).collect();
    fn rec(assign: &[Block], rep: Vec<usize>, neq: BTreeSet<(usize, usize)>, lits: &[Literal], out: &mut Vec<SClause>) {
        let n = assign.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if rep[i] != i || rep[j] != j || !matches!(assign[i], Block::Part(_)) || assign[i] != assign[j] || neq.contains(&(i, j)) {
                    continue;
                }
                let mut merged = rep.clone();
                for r in merged.iter_mut() {
                    if *r == j {
                        *r = i;
                    }
                }
                let moved: BTreeSet<(usize, usize)> = neq
                    .iter()
                    .map(|&(a, b)| {
                        let (a, b) = (if a == j { i } else { a }, if b == j { i } else { b });
                        (a.min(b), a.max(b))
                    })
                    .collect();
                rec(assign, merged, moved, lits, out);
                let mut apart = neq.clone();
                apart.insert((i, j));
                rec(assign, rep, apart, lits, out);
                return;
            }
        }
        let reps: Vec<usize> = (0..n).filter(|&k| rep[k] == k && matches!(assign[k], Block::Part(_))).collect();
        let parts = reps.iter().map(|&k| if let Block::Part(p) = assign[k] { p } else { unreachable!() }).collect();
        let lits = lits
            .iter()
            .map(|l| Lit {
                pred: l.pred,
                pos: l.positive,
                terms: l
                    .terms
                    .iter()
                    .map(|t| match *t {
                        Term::Const(c) => T::C(c),
                        Term::Var(v) => match assign[rep[v]] {
                            Block::Const(c) => T::C(c),
                            Block::Part(_) => T::V(reps.iter().position(|&k| k == rep[v]).expect("representative")),
                        },
                    })
                    .collect(),
            })
            .collect();
        out.push(SClause { parts, lits });
    }
    rec(assign, (0..n).collect(), neq, lits, out);
}

/// Compiles the clauses of `p` into a circuit covering the atoms they
/// mention; [`Circuit::smooth`] adds the rest of the Herbrand base.
pub fn compile(p: &WfomcProblem, limits: &Limits) -> Result<Circuit> {
    let (parts, th) = initial(p);
    let mut c = Compiler { p, parts, c: Circuit::default(), depth: 0, next_const: 0, limit: limits.circuit_nodes };
    let scope = th.scope.clone();
    let root = match c.compile(th) {
        Ok(r) => r,
        Err(Fail::Symbolic) => return Err(Error::Internal("symbolic size at the top level".into())),
        Err(Fail::Err(e)) => return Err(e),
    };
    let root = if p.ln_const != 0.0 {
        let k = c.node(Node::Const(p.ln_const), &BTreeSet::new()).map_err(|_| Error::Guard("circuit node budget".into()))?;
        c.node(Node::And(vec![root, k]), &scope).map_err(|_| Error::Guard("circuit node budget".into()))?
    } else {
        root
    };
    let mut circuit = c.c;
    circuit.root = root;
    Ok(circuit)
}
