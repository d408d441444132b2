//! Constraints restrict the joint values of a sequence of logvars.
//!
//! Two representations coexist. `Product` is the symbolic form: a per-logvar
//! allowed set (or the whole domain) plus pairwise inequalities; it covers ⊤,
//! `X != Y` and every constraint the shattering step produces. `Tuples` is an
//! explicit tuple set for anything else. Explicit sets are recognised as
//! `Product` whenever they are exactly a product with inequalities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::histogram::falling;

use super::{DomId, Vocab};

/// Sorted set of domain constant indices.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueSet(Arc<[u32]>);

impl ValueSet {
    pub fn new(mut values: Vec<u32>) -> Self {
        values.sort_unstable();
        values.dedup();
        ValueSet(values.into())
    }

    pub fn full(size: u32) -> Self {
        ValueSet((0..size).collect::<Vec<_>>().into())
    }

    pub fn contains(&self, v: u32) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn intersect(&self, other: &ValueSet) -> ValueSet {
        ValueSet(self.iter().filter(|v| other.contains(*v)).collect::<Vec<_>>().into())
    }

    pub fn minus(&self, other: &ValueSet) -> ValueSet {
        ValueSet(self.iter().filter(|v| !other.contains(*v)).collect::<Vec<_>>().into())
    }

    pub fn is_disjoint(&self, other: &ValueSet) -> bool {
        let (small, big) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.iter().all(|v| !big.contains(v))
    }

    pub fn is_subset(&self, other: &ValueSet) -> bool {
        self.iter().all(|v| other.contains(v))
    }
}

impl fmt::Debug for ValueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len() > 12 {
            write!(f, "{{{}..{} ({} values)}}", self.0[0], self.0[self.len() - 1], self.len())
        } else {
            f.debug_set().entries(self.iter()).finish()
        }
    }
}

/// A logical variable. `size` caches the size of its domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Logvar {
    pub name: String,
    pub domain: DomId,
    pub size: u32,
}

impl Logvar {
    pub fn new(name: impl Into<String>, domain: DomId, size: u32) -> Self {
        Logvar { name: name.into(), domain, size }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    /// `allowed[i] == None` means the full domain. `distinct` holds index
    /// pairs `(i, j)` with `i < j`.
    Product {
        allowed: Vec<Option<ValueSet>>,
        distinct: BTreeSet<(usize, usize)>,
    },
    Tuples(BTreeSet<Vec<u32>>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub vars: Vec<Logvar>,
    pub kind: ConstraintKind,
}

impl Constraint {
    /// ⊤ over `vars`.
    pub fn top(vars: Vec<Logvar>) -> Self {
        let n = vars.len();
        Constraint {
            vars,
            kind: ConstraintKind::Product { allowed: vec![None; n], distinct: BTreeSet::new() },
        }
    }

    pub fn empty_vars() -> Self {
        Self::top(Vec::new())
    }

    pub fn product(
        vars: Vec<Logvar>,
        allowed: Vec<Option<ValueSet>>,
        distinct: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        assert_eq!(vars.len(), allowed.len());
        let allowed: Vec<Option<ValueSet>> = allowed
            .into_iter()
            .zip(&vars)
            .map(|(a, v)| match a {
                Some(s) if s.len() == v.size as usize => None,
                other => other,
            })
            .collect();
        let mut c = Constraint {
            vars,
            kind: ConstraintKind::Product { allowed, distinct: BTreeSet::new() },
        };
        let mut pairs = BTreeSet::new();
        for (i, j) in distinct {
            let (i, j) = if i < j { (i, j) } else { (j, i) };
            assert!(i != j, "a logvar cannot differ from itself");
            if c.vars[i].domain != c.vars[j].domain {
                continue;
            }
            if c.allowed_set(i).is_disjoint(&c.allowed_set(j)) {
                continue;
            }
            pairs.insert((i, j));
        }
        if let ConstraintKind::Product { distinct, .. } = &mut c.kind {
            *distinct = pairs;
        }
        c
    }

    /// Explicit tuple set; recognised as a product with inequalities when possible.
    pub fn tuples(vars: Vec<Logvar>, tuples: BTreeSet<Vec<u32>>) -> Self {
        Constraint { vars, kind: ConstraintKind::Tuples(tuples) }.recognize()
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn is_top(&self) -> bool {
        matches!(&self.kind, ConstraintKind::Product { allowed, distinct }
            if distinct.is_empty() && allowed.iter().all(Option::is_none))
    }

    pub fn is_product(&self) -> bool {
        matches!(self.kind, ConstraintKind::Product { .. })
    }

    pub fn distinct_pairs(&self) -> Option<&BTreeSet<(usize, usize)>> {
        match &self.kind {
            ConstraintKind::Product { distinct, .. } => Some(distinct),
            ConstraintKind::Tuples(_) => None,
        }
    }

    /// Allowed set of variable `i` in the product form, or its projection.
    pub fn allowed_set(&self, i: usize) -> ValueSet {
        match &self.kind {
            ConstraintKind::Product { allowed, .. } => {
                allowed[i].clone().unwrap_or_else(|| ValueSet::full(self.vars[i].size))
            }
            ConstraintKind::Tuples(ts) => ValueSet::new(ts.iter().map(|t| t[i]).collect()),
        }
    }

    fn allowed_len(&self, i: usize) -> u64 {
        match &self.kind {
            ConstraintKind::Product { allowed, .. } => match &allowed[i] {
                Some(s) => s.len() as u64,
                None => self.vars[i].size as u64,
            },
            ConstraintKind::Tuples(_) => self.allowed_set(i).len() as u64,
        }
    }

    pub fn contains(&self, tuple: &[u32]) -> bool {
        match &self.kind {
            ConstraintKind::Product { allowed, distinct } => {
                tuple.len() == self.vars.len()
                    && tuple.iter().enumerate().all(|(i, &v)| match &allowed[i] {
                        Some(s) => s.contains(v),
                        None => v < self.vars[i].size,
                    })
                    && distinct.iter().all(|&(i, j)| tuple[i] != tuple[j])
            }
            ConstraintKind::Tuples(ts) => ts.contains(tuple),
        }
    }

    /// Number of tuples.
    pub fn count(&self) -> u64 {
        match &self.kind {
            ConstraintKind::Tuples(ts) => ts.len() as u64,
            ConstraintKind::Product { distinct, .. } => {
                if distinct.is_empty() {
                    return (0..self.arity()).map(|i| self.allowed_len(i)).product();
                }
                if let Some(groups) = self.clique_groups() {
                    return groups
                        .iter()
                        .map(|(set_len, members)| falling(*set_len, members.len() as u64))
                        .product();
                }
                self.inclusion_exclusion_count()
            }
        }
    }

    /// Splits the variables into components of the inequality graph. When
    /// every component is a complete graph over variables sharing one allowed
    /// set, returns `(|set|, members)` for each component.
    fn clique_groups(&self) -> Option<Vec<(u64, Vec<usize>)>> {
        let ConstraintKind::Product { allowed, distinct } = &self.kind else {
            return None;
        };
        let n = self.arity();
        let mut comp: Vec<usize> = (0..n).collect();
        for &(i, j) in distinct {
            let (a, b) = (comp[i], comp[j]);
            if a != b {
                for c in comp.iter_mut() {
                    if *c == b {
                        *c = a;
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            groups.entry(comp[i]).or_default().push(i);
        }
        let mut out = Vec::new();
        for members in groups.into_values() {
            let first = members[0];
            for (k, &a) in members.iter().enumerate() {
                if allowed[a] != allowed[first] || self.vars[a].domain != self.vars[first].domain {
                    return None;
                }
                for &b in &members[k + 1..] {
                    if !distinct.contains(&(a.min(b), a.max(b))) {
                        return None;
                    }
                }
            }
            out.push((self.allowed_len(first), members));
        }
        Some(out)
    }

    fn inclusion_exclusion_count(&self) -> u64 {
        let ConstraintKind::Product { distinct, .. } = &self.kind else { unreachable!() };
        let edges: Vec<(usize, usize)> = distinct.iter().copied().collect();
        if edges.len() > 16 {
            return self.expand().len() as u64;
        }
        let n = self.arity();
        let sets: Vec<ValueSet> = (0..n).map(|i| self.allowed_set(i)).collect();
        let mut total: i128 = 0;
        for mask in 0u32..(1 << edges.len()) {
            let mut parent: Vec<usize> = (0..n).collect();
            fn find(p: &mut Vec<usize>, x: usize) -> usize {
                if p[x] != x {
                    let r = find(p, p[x]);
                    p[x] = r;
                }
                p[x]
            }
            for (e, &(i, j)) in edges.iter().enumerate() {
                if mask & (1 << e) != 0 {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
            let mut comps: BTreeMap<usize, ValueSet> = BTreeMap::new();
            for i in 0..n {
                let r = find(&mut parent, i);
                let s = match comps.remove(&r) {
                    Some(s) => s.intersect(&sets[i]),
                    None => sets[i].clone(),
                };
                comps.insert(r, s);
            }
            let term: i128 = comps.values().map(|s| s.len() as i128).product();
            if mask.count_ones() % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
        total as u64
    }

    /// All tuples in a deterministic order.
    pub fn expand(&self) -> Vec<Vec<u32>> {
        match &self.kind {
            ConstraintKind::Tuples(ts) => ts.iter().cloned().collect(),
            ConstraintKind::Product { distinct, .. } => {
                let sets: Vec<ValueSet> = (0..self.arity()).map(|i| self.allowed_set(i)).collect();
                let mut out = Vec::new();
                let mut cur = Vec::with_capacity(sets.len());
                fn rec(
                    sets: &[ValueSet],
                    distinct: &BTreeSet<(usize, usize)>,
                    cur: &mut Vec<u32>,
                    out: &mut Vec<Vec<u32>>,
                ) {
                    let i = cur.len();
                    if i == sets.len() {
                        out.push(cur.clone());
                        return;
                    }
                    for v in sets[i].iter() {
                        if distinct.iter().any(|&(a, b)| b == i && cur[a] == v) {
                            continue;
                        }
                        cur.push(v);
                        rec(sets, distinct, cur, out);
                        cur.pop();
                    }
                }
                rec(&sets, distinct, &mut cur, &mut out);
                out
            }
        }
    }

    pub fn to_tuples(&self) -> Constraint {
        Constraint {
            vars: self.vars.clone(),
            kind: ConstraintKind::Tuples(self.expand().into_iter().collect()),
        }
    }

    /// Same variables (by name, in order) and the same tuple set.
    pub fn equivalent(&self, other: &Constraint) -> bool {
        if self.vars != other.vars {
            return false;
        }
        if self == other {
            return true;
        }
        if self.count() != other.count() {
            return false;
        }
        self.expand().iter().all(|t| other.contains(t))
    }

    /// Tries to rewrite an explicit tuple set as a product with inequalities.
    pub fn recognize(self) -> Constraint {
        let ConstraintKind::Tuples(ts) = &self.kind else {
            return self;
        };
        let n = self.arity();
        let allowed: Vec<Option<ValueSet>> = (0..n).map(|i| Some(self.allowed_set(i))).collect();
        let mut distinct = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.vars[i].domain == self.vars[j].domain && ts.iter().all(|t| t[i] != t[j]) {
                    distinct.push((i, j));
                }
            }
        }
        let candidate = Constraint::product(self.vars.clone(), allowed, distinct);
        if candidate.count() == ts.len() as u64 && ts.iter().all(|t| candidate.contains(t)) {
            candidate
        } else {
            self
        }
    }

    /// Number of tuples extending each assignment of `targets`. Errors when
    /// the number differs between assignments.
    pub fn count_per_instance(&self, targets: &[usize]) -> Result<u64> {
        if let ConstraintKind::Product { distinct, .. } = &self.kind {
            let rest: Vec<usize> = (0..self.arity()).filter(|i| !targets.contains(i)).collect();
            if distinct.is_empty() {
                return Ok(rest.iter().map(|&i| self.allowed_len(i)).product());
            }
            if let Some(groups) = self.clique_groups() {
                // the remaining members of a group choose from the values the
                // targets in that group left over
                return Ok(groups
                    .iter()
                    .map(|(set_len, members)| {
                        let t = members.iter().filter(|m| targets.contains(m)).count() as u64;
                        falling(set_len.saturating_sub(t), members.len() as u64 - t)
                    })
                    .product());
            }
        }
        let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
        for t in self.expand() {
            let key: Vec<u32> = targets.iter().map(|&i| t[i]).collect();
            *counts.entry(key).or_default() += 1;
        }
        let mut values = counts.values().copied();
        let first = values.next().unwrap_or(0);
        if values.all(|c| c == first) {
            Ok(first)
        } else {
            Err(Error::NonUniformCount)
        }
    }

    /// Projection onto `keep` (indices into `vars`, result ordered as given).
    pub fn project(&self, keep: &[usize]) -> Constraint {
        let vars: Vec<Logvar> = keep.iter().map(|&i| self.vars[i].clone()).collect();
        if let ConstraintKind::Product { allowed, distinct } = &self.kind {
            let extendable = (0..self.arity()).filter(|i| !keep.contains(i)).all(|i| {
                let degree = distinct.iter().filter(|&&(a, b)| a == i || b == i).count() as u64;
                self.allowed_len(i) > degree
            });
            if extendable {
                let pos = |i: usize| keep.iter().position(|&k| k == i);
                let pairs: Vec<(usize, usize)> = distinct
                    .iter()
                    .filter_map(|&(a, b)| Some((pos(a)?, pos(b)?)))
                    .collect();
                return Constraint::product(
                    vars,
                    keep.iter().map(|&i| allowed[i].clone()).collect(),
                    pairs,
                );
            }
        }
        let tuples: BTreeSet<Vec<u32>> = self
            .expand()
            .into_iter()
            .map(|t| keep.iter().map(|&i| t[i]).collect())
            .collect();
        Constraint::tuples(vars, tuples)
    }

    /// Projection onto the named logvars.
    pub fn project_names(&self, names: &[&str]) -> Result<Constraint> {
        let idx = names
            .iter()
            .map(|n| self.var_index(n).ok_or_else(|| Error::UndeclaredLogvar(n.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.project(&idx))
    }

    /// Conjunction over the union of logvars, matched by name.
    pub fn conjoin(&self, other: &Constraint) -> Result<Constraint> {
        let mut vars = self.vars.clone();
        let mut map = Vec::with_capacity(other.arity());
        for v in &other.vars {
            match self.var_index(&v.name) {
                Some(i) => {
                    if self.vars[i].domain != v.domain {
                        return Err(Error::Misaligned(format!("logvar {} has two domains", v.name)));
                    }
                    map.push(i);
                }
                None => {
                    map.push(vars.len());
                    vars.push(v.clone());
                }
            }
        }
        if let (
            ConstraintKind::Product { allowed: a1, distinct: d1 },
            ConstraintKind::Product { allowed: a2, distinct: d2 },
        ) = (&self.kind, &other.kind)
        {
            let mut allowed: Vec<Option<ValueSet>> = a1.clone();
            allowed.resize(vars.len(), None);
            for (j, a) in a2.iter().enumerate() {
                let i = map[j];
                allowed[i] = match (allowed[i].take(), a) {
                    (None, x) => x.clone(),
                    (x, None) => x,
                    (Some(x), Some(y)) => Some(x.intersect(y)),
                };
            }
            let distinct = d1.iter().copied().chain(d2.iter().map(|&(a, b)| (map[a], map[b])));
            return Ok(Constraint::product(vars, allowed, distinct.collect::<Vec<_>>()));
        }
        let left = self.expand();
        let right = other.expand();
        let mut out = BTreeSet::new();
        let new_vars = vars.len() - self.arity();
        for l in &left {
            for r in &right {
                if map.iter().enumerate().all(|(j, &i)| i >= self.arity() || l[i] == r[j]) {
                    let mut t = l.clone();
                    t.resize(self.arity() + new_vars, 0);
                    for (j, &i) in map.iter().enumerate() {
                        t[i] = r[j];
                    }
                    out.insert(t);
                }
            }
        }
        Ok(Constraint::tuples(vars, out))
    }

    /// Restricts variable `var` to `set`.
    pub fn restrict(&self, var: usize, set: &ValueSet) -> Constraint {
        match &self.kind {
            ConstraintKind::Product { allowed, distinct } => {
                let mut allowed = allowed.clone();
                allowed[var] = Some(match &allowed[var] {
                    Some(a) => a.intersect(set),
                    None => set.clone(),
                });
                Constraint::product(self.vars.clone(), allowed, distinct.iter().copied().collect::<Vec<_>>())
            }
            ConstraintKind::Tuples(ts) => Constraint::tuples(
                self.vars.clone(),
                ts.iter().filter(|t| set.contains(t[var])).cloned().collect(),
            ),
        }
    }

    /// Fixes `var` to constant `c` and removes it.
    pub fn substitute(&self, var: usize, c: u32) -> Constraint {
        let vars: Vec<Logvar> =
            self.vars.iter().enumerate().filter(|(i, _)| *i != var).map(|(_, v)| v.clone()).collect();
        let shift = |i: usize| if i > var { i - 1 } else { i };
        match &self.kind {
            ConstraintKind::Product { allowed, distinct } => {
                let ok = match &allowed[var] {
                    Some(a) => a.contains(c),
                    None => c < self.vars[var].size,
                };
                let mut new_allowed: Vec<Option<ValueSet>> = allowed
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != var)
                    .map(|(_, a)| a.clone())
                    .collect();
                let mut pairs = Vec::new();
                for &(a, b) in distinct {
                    if a == var || b == var {
                        let other = if a == var { b } else { a };
                        let o = shift(other);
                        let base = new_allowed[o].clone().unwrap_or_else(|| ValueSet::full(vars[o].size));
                        new_allowed[o] = Some(base.minus(&ValueSet::new(vec![c])));
                    } else {
                        pairs.push((shift(a), shift(b)));
                    }
                }
                if !ok {
                    // empty: restrict everything to nothing
                    if vars.is_empty() {
                        return Constraint { vars, kind: ConstraintKind::Tuples(BTreeSet::new()) };
                    }
                    new_allowed[0] = Some(ValueSet::new(vec![]));
                }
                Constraint::product(vars, new_allowed, pairs)
            }
            ConstraintKind::Tuples(ts) => Constraint::tuples(
                vars,
                ts.iter()
                    .filter(|t| t[var] == c)
                    .map(|t| t.iter().enumerate().filter(|(i, _)| *i != var).map(|(_, v)| *v).collect())
                    .collect(),
            ),
        }
    }

    /// Renames logvars; `names` must be pairwise distinct.
    pub fn renamed(&self, names: &[String]) -> Constraint {
        let mut c = self.clone();
        for (v, n) in c.vars.iter_mut().zip(names) {
            v.name = n.clone();
        }
        c
    }

    /// Reorders variables: new position `k` holds old variable `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Constraint {
        let vars: Vec<Logvar> = order.iter().map(|&i| self.vars[i].clone()).collect();
        match &self.kind {
            ConstraintKind::Product { allowed, distinct } => {
                let pos = |i: usize| order.iter().position(|&o| o == i).expect("permutation");
                Constraint::product(
                    vars,
                    order.iter().map(|&i| allowed[i].clone()).collect(),
                    distinct.iter().map(|&(a, b)| (pos(a), pos(b))).collect::<Vec<_>>(),
                )
            }
            ConstraintKind::Tuples(ts) => Constraint {
                vars,
                kind: ConstraintKind::Tuples(
                    ts.iter().map(|t| order.iter().map(|&i| t[i]).collect()).collect(),
                ),
            },
        }
    }

    /// Human-readable conditions, e.g. `X != Y, Z in {a, b}`; empty for ⊤.
    pub fn describe(&self, vocab: &Vocab) -> String {
        let name = |i: usize, c: u32| vocab.constant_name(self.vars[i].domain, c).to_string();
        match &self.kind {
            ConstraintKind::Product { allowed, distinct } => {
                let mut parts = Vec::new();
                for &(a, b) in distinct {
                    parts.push(format!("{} != {}", self.vars[a].name, self.vars[b].name));
                }
                for (i, a) in allowed.iter().enumerate() {
                    if let Some(s) = a {
                        let names: Vec<String> = s.iter().map(|c| name(i, c)).collect();
                        parts.push(format!("{} in {{{}}}", self.vars[i].name, names.join(", ")));
                    }
                }
                parts.join(", ")
            }
            ConstraintKind::Tuples(ts) => {
                let rows: Vec<String> = ts
                    .iter()
                    .map(|t| {
                        let vals: Vec<String> = t.iter().enumerate().map(|(i, &c)| name(i, c)).collect();
                        format!("({})", vals.join(", "))
                    })
                    .collect();
                format!("in {{{}}}", rows.join(", "))
            }
        }
    }
}
